use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gaal_cli::{
    cmd_ablate, cmd_diagnose, cmd_evaluate, cmd_generate, cmd_sweep, cmd_train, exit_code, ExperimentConfig,
    SweepParam, CHECKPOINT_FILE,
};
use gaal_core::{BaselineMode, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "gaal", version, about = "Alternating multimodal learning with gradient surgery")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_enum)]
    baseline: Option<Baseline>,

    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset and its schema.
    Generate,
    /// Train once and write checkpoint, diagnostics and metrics.
    Train,
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        /// Defaults to `<out>/model.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare surgery off / surgery only / surgery with hard samples.
    Ablate,
    /// Sweep the constraint margin or the hard-sample fractions.
    Sweep {
        #[arg(long, value_enum)]
        param: Param,
    },
    /// Measure gradient conflict in joint training.
    Diagnose,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Baseline {
    Gaal,
    Joint,
    AltNoSurgery,
    Orthogonal,
    ImageOnly,
    TabularOnly,
}

impl From<Baseline> for BaselineMode {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::Gaal => BaselineMode::Gaal,
            Baseline::Joint => BaselineMode::Joint,
            Baseline::AltNoSurgery => BaselineMode::AltNoSurgery,
            Baseline::Orthogonal => BaselineMode::Orthogonal,
            Baseline::ImageOnly => BaselineMode::ImageOnly,
            Baseline::TabularOnly => BaselineMode::TabularOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Param {
    Epsilon,
    Lambda,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let cwd = Path::new("");
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        cfg.set(k.trim(), v.trim(), cwd)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(b) = cli.baseline {
        cfg.run.train.baseline = b.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Generate => println!("{}", cmd_generate(&cfg, out)?),
        Command::Train => {
            let res = cmd_train(&cfg, out)?;
            println!("best_epoch={}", res.output.best_epoch);
            print!("{}", res.report.to_key_value());
        }
        Command::Evaluate { checkpoint } => {
            let ckpt = checkpoint.clone().unwrap_or_else(|| out.join(CHECKPOINT_FILE));
            print!("{}", cmd_evaluate(&cfg, out, &ckpt)?.to_key_value());
        }
        Command::Ablate => {
            for r in cmd_ablate(&cfg, out)? {
                println!(
                    "{:<8} acc_multi={:.4} acc_image={:.4} acc_tabular={:.4}",
                    r.variant, r.acc_multi, r.acc_image, r.acc_tabular
                );
            }
        }
        Command::Sweep { param } => {
            let param = match param {
                Param::Epsilon => SweepParam::Epsilon,
                Param::Lambda => SweepParam::Lambda,
            };
            print!("{}", cmd_sweep(&cfg, out, param)?);
        }
        Command::Diagnose => {
            let trace = cmd_diagnose(&cfg, out)?;
            println!("steps={} negative_fraction={}", trace.cosines.len(), trace.negative_fraction);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
