//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gaal_core::data::BatchPlan;
use gaal_core::experiment::{median, run_synthetic, RunResult, RunSpec};
use gaal_core::model::{init_params, Modality};
use gaal_core::numerics::{dot, softmax_rows, Matrix};
use gaal_core::surgery::{hard_count, project_gradient, sample_entropy, select_hard, DEFAULT_GP_NORM_FLOOR};
use gaal_core::train::{GaalLearner, StepDiag, STREAM_INIT, STREAM_SHUFFLE};
use gaal_core::{BaselineMode, RngStream, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(2024, 1);
    let mut worst: f64 = 0.0;
    let mut largest = 0;
    for _ in 0..10 {
        let (state, xi, xt, labels) = oracle::random_small_case(&mut rng, 500);
        for (m, x) in [(Modality::Image, &xi), (Modality::Tabular, &xt)] {
            let c = oracle::finite_difference_check(&state, m, x, &labels, 1e-5);
            worst = worst.max(c.max_rel_err);
            largest = largest.max(c.n_params);
        }
    }
    let secs = start.elapsed();
    outcome(
        worst <= 1e-6 && secs < Duration::from_secs(30),
        format!("max rel err {worst:.2e} (tol 1e-6), 10 models, up to {largest} params, {secs:.2?}"),
    )
}

fn qp_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(7, 2);
    let (mut worst_x, mut worst_v) = (0.0f64, 0.0f64);
    let mut active = 0;
    let mut n = 0;
    while n < 1000 {
        let d = 2 + rng.below(9);
        let g: Vec<f64> = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let gp: Vec<f64> = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let eps = rng.uniform(0.0, 1.0);
        let gp_sq = dot(&gp, &gp).unwrap();
        if gp_sq < 1e-6 {
            continue;
        }
        n += 1;
        let r = project_gradient(&g, &gp, eps, DEFAULT_GP_NORM_FLOOR).unwrap();
        let want = oracle::qp_oracle(&g, &gp, eps);
        for (a, b) in r.g_tilde.iter().zip(&want) {
            worst_x = worst_x.max((a - b).abs());
        }
        let v = ((eps - dot(&gp, &g).unwrap()) / gp_sq).max(0.0);
        worst_v = worst_v.max((r.v - v).abs());
        active += usize::from(r.applied);
    }
    let secs = start.elapsed();
    outcome(
        worst_x <= 1e-6 && worst_v <= 1e-12 && secs < Duration::from_secs(10),
        format!("1000 triples ({active} active), max |g~ - oracle| {worst_x:.2e} (tol 1e-6), max |v - formula| {worst_v:.2e} (tol 1e-12), {secs:.2?}"),
    )
}

fn surgery_guarantee() -> Outcome {
    let spec = RunSpec::default();
    let seed = 11;
    let ds = gaal_core::experiment::generate_for_seed(&spec.data, seed).unwrap();
    let p = gaal_core::experiment::prepare(&ds, spec.split, &spec.hidden, spec.latent, seed).unwrap();
    let cfg = TrainConfig { seed, ..spec.train.clone() };
    let root = RngStream::new(seed, 0);
    let mut learner = GaalLearner::new(init_params(&p.dims, &root.child(STREAM_INIT)).unwrap());
    let plan = BatchPlan::new(cfg.batch_size, false, root.child(STREAM_SHUFFLE)).unwrap();
    let (mut applied, mut violations, mut not_bitwise, mut conflicting) = (0, 0, 0, 0);
    let mut t = 0;
    'run: for epoch in 0.. {
        for idx in plan.batches(p.train.len(), epoch) {
            let batch = p.train.batch(&idx);
            for _ in 0..2 {
                t += 1;
                let s = learner.step_traced(&batch, cfg.modality_at(t), &cfg, t).unwrap();
                let gp = s.g_p.as_ref().unwrap();
                let after = dot(gp, &s.g_tilde).unwrap();
                if s.diag.applied == Some(true) {
                    applied += 1;
                    violations += usize::from(after < cfg.surgery.epsilon - 1e-9);
                } else if !s.g.iter().zip(&s.g_tilde).all(|(a, b)| a.to_bits() == b.to_bits()) {
                    not_bitwise += 1;
                }
                conflicting += usize::from(after < 0.0);
                if t == 200 {
                    break 'run;
                }
            }
        }
    }
    outcome(
        violations == 0 && not_bitwise == 0 && conflicting == 0 && applied > 0,
        format!(
            "200 steps, {applied} projected, {violations} margin violations, {not_bitwise} inactive steps altered, {conflicting} conflicting after surgery"
        ),
    )
}

fn entropy_selection() -> Outcome {
    let mut rng = RngStream::new(5, 3);
    let mut failures = Vec::new();
    for y in 2..=10 {
        let mut onehot = vec![0.0; y];
        onehot[rng.below(y)] = 1.0;
        if sample_entropy(&onehot).unwrap() != 0.0 {
            failures.push(format!("one-hot Y={y}"));
        }
        let uniform = vec![1.0 / y as f64; y];
        if (sample_entropy(&uniform).unwrap() - (y as f64).ln()).abs() > 1e-12 {
            failures.push(format!("uniform Y={y}"));
        }
    }
    let mut bound_checks = 0;
    for b in 0..1000 {
        let batch = 1 + rng.below(128);
        let classes = 2 + rng.below(8);
        let z = Matrix::new(batch, classes, (0..batch * classes).map(|_| 3.0 * rng.normal()).collect()).unwrap();
        let probs = softmax_rows(&z);
        let mut h = Vec::with_capacity(batch);
        for row in probs.iter_rows() {
            let e = sample_entropy(row).unwrap();
            bound_checks += 1;
            if !(0.0..=(classes as f64).ln()).contains(&e) {
                failures.push(format!("entropy {e} outside [0, ln {classes}]"));
            }
            // Quantize every other batch so ties are common.
            h.push(if b % 2 == 0 { (e * 4.0).round() / 4.0 } else { e });
        }
        let lambda = rng.uniform(0.0, 1.0).max(1e-3);
        let got = select_hard(&h, lambda).unwrap();
        if got.len() != hard_count(batch, lambda) || got.len() != ((lambda * batch as f64).ceil() as usize).max(1) {
            failures.push(format!("batch {b}: {} indices", got.len()));
        }
        if got != oracle::select_hard_oracle(&h, lambda) {
            failures.push(format!("batch {b}: selection differs from oracle"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{bound_checks} entropies bounded, one-hot/uniform Y=2..10, 1000 selections vs scan oracle, {} failures{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(" (first: {f})"))
        ),
    )
}

/// All training runs needed by criteria 5, 6, 7 and 9.
struct Runs {
    gaal: Vec<RunResult>,
    cgs_only: Vec<RunResult>,
    none: Vec<RunResult>,
    joint: Vec<RunResult>,
    image_only: Vec<RunResult>,
    tabular_only: Vec<RunResult>,
    elapsed: Duration,
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn desk_runs() -> Runs {
    let start = Instant::now();
    let base = RunSpec::default();
    let with = |f: &dyn Fn(&mut TrainConfig)| -> Vec<RunResult> {
        SEEDS
            .iter()
            .map(|&seed| {
                let mut spec = base.clone();
                f(&mut spec.train);
                run_synthetic(&spec, seed).unwrap()
            })
            .collect()
    };
    Runs {
        gaal: with(&|_| {}),
        cgs_only: with(&|c| c.surgery.enable_ugg = false),
        none: with(&|c| c.surgery.enable_cgs = false),
        joint: with(&|c| c.baseline = BaselineMode::Joint),
        image_only: with(&|c| c.baseline = BaselineMode::ImageOnly),
        tabular_only: with(&|c| c.baseline = BaselineMode::TabularOnly),
        elapsed: start.elapsed(),
    }
}

fn med(runs: &[RunResult], f: impl Fn(&RunResult) -> f64) -> f64 {
    median(&runs.iter().map(f).collect::<Vec<_>>())
}

fn desk_scale_learning(r: &Runs) -> Outcome {
    let gaal = med(&r.gaal, |x| x.report.acc_multi);
    let joint = med(&r.joint, |x| x.report.acc_multi);
    let image = med(&r.image_only, |x| x.report.acc_image);
    let tabular = med(&r.tabular_only, |x| x.report.acc_tabular);
    let sizes = (r.gaal[0].output.epochs.len(), r.gaal[0].report.n_test);
    outcome(
        gaal >= image - 0.01 && gaal >= tabular - 0.01 && gaal >= joint && r.elapsed < Duration::from_secs(600),
        format!(
            "median fused acc: gaal {gaal:.4}, joint {joint:.4}; unimodal baselines: image {image:.4}, tabular {tabular:.4}; \
             seed 0 ran {} epochs, n_test {}; all 30 runs {:.1?}",
            sizes.0, sizes.1, r.elapsed
        ),
    )
}

fn ablation_direction(r: &Runs) -> Outcome {
    let full = med(&r.gaal, |x| x.report.acc_multi);
    let cgs = med(&r.cgs_only, |x| x.report.acc_multi);
    let none = med(&r.none, |x| x.report.acc_multi);
    outcome(
        full >= cgs - 0.005 && cgs >= none - 0.005,
        format!("median acc_multi: cgs+ugg {full:.4} >= cgs {cgs:.4} >= none {none:.4} (ties within 0.005)"),
    )
}

/// Fraction of steps whose applied head direction has negative cosine with
/// the previous step's, which was taken for the other modality.
fn negative_consecutive_fraction(diag: &[StepDiag]) -> f64 {
    let cos: Vec<f64> = diag.iter().filter_map(|d| d.cos_prev).collect();
    cos.iter().filter(|&&c| c < 0.0).count() as f64 / cos.len() as f64
}

fn conflict_reduction(r: &Runs) -> Outcome {
    let on = med(&r.gaal, |x| negative_consecutive_fraction(&x.output.diag));
    let off = med(&r.none, |x| negative_consecutive_fraction(&x.output.diag));
    outcome(
        on < off,
        format!("median fraction of negative consecutive head-gradient cosines: surgery on {on:.4} < off {off:.4}"),
    )
}

fn worst_rise(losses: &[f64]) -> f64 {
    let mut best = losses[0];
    let mut worst: f64 = 0.0;
    for &l in &losses[1..] {
        worst = worst.max(l / best - 1.0);
        best = best.min(l);
    }
    worst
}

fn convergence(r: &Runs) -> Outcome {
    let rise = |f: fn(&gaal_core::train::EpochMetrics) -> f64| -> Vec<f64> {
        r.gaal
            .iter()
            .map(|x| worst_rise(&x.output.epochs.iter().take(10).map(f).collect::<Vec<_>>()))
            .collect()
    };
    let image = rise(|e| e.loss_image);
    let tabular = rise(|e| e.loss_tabular);
    let (mi, mt) = (median(&image), median(&tabular));
    let epochs: Vec<usize> = r.gaal.iter().map(|x| x.output.epochs.len()).collect();
    outcome(
        mi <= 0.05 && mt <= 0.05 && epochs.iter().all(|&e| e >= 10),
        format!(
            "largest rise over the running minimum in epochs 1-10, median of 5 seeds: L_I {:.2}%, L_T {:.2}% (band 5%); epochs run {epochs:?}",
            100.0 * mi,
            100.0 * mt
        ),
    )
}

fn gaal_cmd(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_gaal"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    fs::write(
        &cfg,
        "seed=3\nseeds=1,2\nsweep.epsilon=0,0.05\nsweep.lambda=0.25,1\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "--config", c],
        vec!["train", "--config", c],
        vec!["train", "--config", c, "--baseline", "joint"],
        vec!["ablate", "--config", c],
        vec!["sweep", "--param", "epsilon", "--config", c],
        vec!["sweep", "--param", "lambda", "--config", c],
        vec!["diagnose", "--config", c],
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let dirs = [tmp.path().join(format!("{i}a")), tmp.path().join(format!("{i}b"))];
        for d in &dirs {
            if !gaal_cmd(args, d) {
                mismatches.push(format!("{} failed", args.join(" ")));
            }
        }
        // Evaluate reads the checkpoint train just wrote.
        if args[0] == "train" {
            for d in &dirs {
                if !gaal_cmd(&["evaluate", "--config", c], d) {
                    mismatches.push("evaluate failed".into());
                }
            }
        }
        let Ok(entries) = fs::read_dir(&dirs[0]) else { continue };
        for e in entries {
            let name = e.unwrap().file_name();
            let a = fs::read(dirs[0].join(&name)).unwrap();
            let b = fs::read(dirs[1].join(&name)).unwrap_or_default();
            compared += 1;
            if a != b {
                mismatches.push(format!("{} -> {:?}", args[0], name));
            }
        }
    }
    outcome(
        mismatches.is_empty() && compared >= 15,
        format!(
            "8 subcommand invocations run twice, {compared} output files compared byte-for-byte, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map_or(String::new(), |m| format!(" (first: {m})"))
        ),
    )
}

fn main() {
    let total = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "gradient correctness", gradient_correctness()),
        (2, "QP oracle equivalence", qp_equivalence()),
        (3, "surgery guarantee", surgery_guarantee()),
        (4, "entropy and selection", entropy_selection()),
    ];
    let runs = desk_runs();
    results.push((5, "desk-scale learning", desk_scale_learning(&runs)));
    results.push((6, "ablation direction", ablation_direction(&runs)));
    results.push((7, "conflict reduction", conflict_reduction(&runs)));
    results.push((8, "determinism", determinism()));
    results.push((9, "convergence", convergence(&runs)));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n} {name}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {}/{} passed in {:.1?}",
        results.len() - failed,
        results.len(),
        total.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
