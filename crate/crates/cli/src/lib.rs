//! Experiment subcommands behind the `gaal` binary.
//!
//! Each command takes a validated [`ExperimentConfig`] and an output
//! directory, and writes its artifacts there. Nothing is written until the
//! inputs have been loaded and checked.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gaal_core::checkpoint;
use gaal_core::data::{load_csv, load_schema, save_csv, MultimodalDataset};
use gaal_core::eval::{conflict_trace, evaluate, ConflictTrace, EvalReport, REPORT_CSV_HEADER};
use gaal_core::experiment::{generate_for_seed, median, prepare, run_prepared, Prepared, RunResult};
use gaal_core::train::{DIAG_HEADER, METRICS_HEADER};
use gaal_core::{BaselineMode, Error, Result, TrainConfig, TrainedModel};
use rayon::prelude::*;

pub use config::ExperimentConfig;

pub const DATASET_FILE: &str = "dataset.csv";
pub const SCHEMA_FILE: &str = "schema.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const DIAG_FILE: &str = "diag.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const RESULTS_FILE: &str = "results.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const CONFLICT_HIST_FILE: &str = "conflict_hist.csv";
pub const CONFLICT_STEPS_FILE: &str = "conflict_steps.csv";
pub const CONFLICT_SUMMARY_FILE: &str = "conflict_summary.txt";

/// Process exit code for an error: 2 config, 3 data, 4 numeric, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Parse { .. } | Error::UnknownCategory { .. } | Error::Checkpoint(_) | Error::Io(_) => 3,
        Error::NonFiniteLoss { .. } | Error::NonFinite(_) => 4,
        _ => 1,
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

/// The configured dataset file, or the synthetic dataset for `seed`.
pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<MultimodalDataset> {
    match (&cfg.data_csv, &cfg.data_schema) {
        (Some(csv), Some(schema)) => {
            let (schema, classes) = load_schema(schema)?;
            load_csv(csv, &schema, classes)
        }
        _ => generate_for_seed(&cfg.run.data, seed),
    }
}

pub fn prepared(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let ds = load_dataset(cfg, seed)?;
    prepare(&ds, cfg.run.split, &cfg.run.hidden, cfg.run.latent, seed)
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.run.train.clone()
    }
}

/// Writes the synthetic dataset and its schema. Returns a one-line summary.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let ds = generate_for_seed(&cfg.run.data, cfg.seed)?;
    fs::create_dir_all(out)?;
    save_csv(&ds, &out.join(DATASET_FILE), &out.join(SCHEMA_FILE))?;
    Ok(format!(
        "N={} Y={} D'={} d_img={}",
        ds.len(),
        ds.classes,
        ds.schema.featurized_dim(),
        ds.image_dim()
    ))
}

/// Trains once with `cfg.seed`; writes the selected checkpoint, step
/// diagnostics, per-epoch metrics and the test report.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<RunResult> {
    let p = prepared(cfg, cfg.seed)?;
    let res = run_prepared(&p, &train_config(cfg, cfg.seed))?;
    write_atomic(&out.join(CHECKPOINT_FILE), &checkpoint::to_bytes(&res.output.model))?;
    write_atomic(
        &out.join(DIAG_FILE),
        csv(DIAG_HEADER, res.output.diag.iter().map(|d| d.csv_row())).as_bytes(),
    )?;
    write_atomic(
        &out.join(METRICS_FILE),
        csv(METRICS_HEADER, res.output.epochs.iter().map(|e| e.csv_row())).as_bytes(),
    )?;
    write_atomic(&out.join(REPORT_FILE), res.report.to_key_value().as_bytes())?;
    Ok(res)
}

/// Evaluates a saved checkpoint on the test split of the configured data and
/// appends a row to the results file.
pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path, ckpt: &Path) -> Result<EvalReport> {
    let model = checkpoint::load(ckpt)?;
    let p = prepared(cfg, cfg.seed)?;
    check_model_dims(&model, &p)?;
    let set = if p.test.is_empty() { &p.val } else { &p.test };
    let report = evaluate(&model, set, cfg.run.train.fusion_weight)?;
    write_atomic(&out.join(REPORT_FILE), report.to_key_value().as_bytes())?;

    let results = out.join(RESULTS_FILE);
    let mut text = match fs::read_to_string(&results) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => format!("{REPORT_CSV_HEADER}\n"),
        Err(e) => return Err(e.into()),
    };
    let label = ckpt.file_stem().map_or("model".into(), |s| s.to_string_lossy());
    let _ = writeln!(text, "{}", report.csv_row(&label));
    write_atomic(&results, text.as_bytes())?;
    Ok(report)
}

fn check_model_dims(model: &TrainedModel, p: &Prepared) -> Result<()> {
    let (img, tab, classes) = match model {
        TrainedModel::Shared(s) => (&s.encoder_image, &s.encoder_tabular, s.classes()),
        TrainedModel::Joint(j) => (&j.encoder_image, &j.encoder_tabular, j.head.classes()),
    };
    if img.input_dim() != p.dims.image_in || tab.input_dim() != p.dims.tabular_in || classes != p.dims.classes {
        return Err(Error::Data(format!(
            "checkpoint expects image {} / tabular {} inputs and {} classes, data has {} / {} and {}",
            img.input_dim(),
            tab.input_dim(),
            classes,
            p.dims.image_in,
            p.dims.tabular_in,
            p.dims.classes
        )));
    }
    Ok(())
}

/// One train+evaluate per `(config, seed)` job, in parallel, results in job
/// order.
fn run_jobs(cfg: &ExperimentConfig, jobs: &[(TrainConfig, u64)]) -> Result<Vec<EvalReport>> {
    jobs.par_iter()
        .map(|(tc, seed)| {
            let p = prepared(cfg, *seed)?;
            Ok(run_prepared(&p, &TrainConfig { seed: *seed, ..tc.clone() })?.report)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub acc_multi: f64,
    pub acc_image: f64,
    pub acc_tabular: f64,
}

pub const ABLATION_HEADER: &str = "variant,acc_multi,acc_image,acc_tabular";

/// Alternating learning with surgery off, surgery on the full-batch
/// reference gradient, and surgery with hard-sample selection. Medians over
/// the seed list.
pub fn cmd_ablate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<AblationRow>> {
    let variants = [("none", false, false), ("cgs", true, false), ("cgs+ugg", true, true)];
    let mut jobs = Vec::new();
    for &(_, cgs, ugg) in &variants {
        for &seed in &cfg.seeds {
            let mut tc = train_config(cfg, seed);
            tc.baseline = BaselineMode::Gaal;
            tc.surgery.enable_cgs = cgs;
            tc.surgery.enable_ugg = ugg;
            jobs.push((tc, seed));
        }
    }
    let reports = run_jobs(cfg, &jobs)?;
    let rows: Vec<AblationRow> = variants
        .iter()
        .zip(reports.chunks(cfg.seeds.len()))
        .map(|(&(variant, _, _), rs)| {
            let med = |f: fn(&EvalReport) -> f64| median(&rs.iter().map(f).collect::<Vec<_>>());
            AblationRow {
                variant,
                acc_multi: med(|r| r.acc_multi),
                acc_image: med(|r| r.acc_image),
                acc_tabular: med(|r| r.acc_tabular),
            }
        })
        .collect();
    let text = csv(
        ABLATION_HEADER,
        rows.iter()
            .map(|r| format!("{},{},{},{}", r.variant, r.acc_multi, r.acc_image, r.acc_tabular)),
    );
    write_atomic(&out.join(ABLATION_FILE), text.as_bytes())?;
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Epsilon,
    Lambda,
}

impl SweepParam {
    pub fn file_name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "sweep_epsilon.csv",
            SweepParam::Lambda => "sweep_lambda.csv",
        }
    }
}

pub const SWEEP_EPSILON_HEADER: &str = "param_value,seed,acc_multi,acc_image,acc_tabular";
pub const SWEEP_LAMBDA_HEADER: &str = "lambda_image,lambda_tabular,seed,acc_multi,acc_image,acc_tabular";

/// One run per grid point and seed. The lambda grid is the Cartesian
/// product of the list with itself, image fraction first.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, param: SweepParam) -> Result<String> {
    let mut jobs = Vec::new();
    let mut keys = Vec::new();
    match param {
        SweepParam::Epsilon => {
            if cfg.sweep_epsilon.is_empty() {
                return Err(Error::Config("sweep.epsilon is empty".into()));
            }
            for &eps in &cfg.sweep_epsilon {
                for &seed in &cfg.seeds {
                    let mut tc = train_config(cfg, seed);
                    tc.surgery.epsilon = eps;
                    tc.validate()?;
                    jobs.push((tc, seed));
                    keys.push(format!("{eps},{seed}"));
                }
            }
        }
        SweepParam::Lambda => {
            if cfg.sweep_lambda.is_empty() {
                return Err(Error::Config("sweep.lambda is empty".into()));
            }
            for &li in &cfg.sweep_lambda {
                for &lt in &cfg.sweep_lambda {
                    for &seed in &cfg.seeds {
                        let mut tc = train_config(cfg, seed);
                        tc.surgery.lambda_image = li;
                        tc.surgery.lambda_tabular = lt;
                        tc.validate()?;
                        jobs.push((tc, seed));
                        keys.push(format!("{li},{lt},{seed}"));
                    }
                }
            }
        }
    }
    let reports = run_jobs(cfg, &jobs)?;
    let header = match param {
        SweepParam::Epsilon => SWEEP_EPSILON_HEADER,
        SweepParam::Lambda => SWEEP_LAMBDA_HEADER,
    };
    let text = csv(
        header,
        keys.iter()
            .zip(&reports)
            .map(|(k, r)| format!("{k},{},{},{}", r.acc_multi, r.acc_image, r.acc_tabular)),
    );
    write_atomic(&out.join(param.file_name()), text.as_bytes())?;
    Ok(text)
}

pub const CONFLICT_HIST_HEADER: &str = "bin_lo,bin_hi,count";

/// Trains the joint baseline and records the per-step conflict cosine.
pub fn cmd_diagnose(cfg: &ExperimentConfig, out: &Path) -> Result<ConflictTrace> {
    let p = prepared(cfg, cfg.seed)?;
    let tc = TrainConfig {
        baseline: BaselineMode::Joint,
        ..train_config(cfg, cfg.seed)
    };
    let trace = conflict_trace(&p.train, &p.val, &p.dims, &tc)?;
    write_atomic(
        &out.join(CONFLICT_HIST_FILE),
        csv(
            CONFLICT_HIST_HEADER,
            trace.bins.iter().map(|(lo, hi, n)| format!("{lo},{hi},{n}")),
        )
        .as_bytes(),
    )?;
    write_atomic(
        &out.join(CONFLICT_STEPS_FILE),
        csv(
            "t,cosine",
            trace.cosines.iter().enumerate().map(|(i, c)| format!("{},{c}", i + 1)),
        )
        .as_bytes(),
    )?;
    let summary = format!(
        "steps={}\nnegative_fraction={}\n",
        trace.cosines.len(),
        trace.negative_fraction
    );
    write_atomic(&out.join(CONFLICT_SUMMARY_FILE), summary.as_bytes())?;
    Ok(trace)
}
