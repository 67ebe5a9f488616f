//! Flat `key=value` experiment configuration with dotted keys.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed=7
//! surgery.epsilon=0.01
//! sweep.epsilon=0,0.01,0.1
//! ```
//!
//! Every key has a default, so an empty file is a valid config. Relative
//! paths are resolved against the directory holding the config file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gaal_core::data::TabularSchema;
use gaal_core::experiment::RunSpec;
use gaal_core::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Seeds for `ablate` and `sweep`.
    pub seeds: Vec<u64>,
    pub run: RunSpec,
    /// Load this dataset instead of generating one.
    pub data_csv: Option<PathBuf>,
    pub data_schema: Option<PathBuf>,
    pub sweep_epsilon: Vec<f64>,
    pub sweep_lambda: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            run: RunSpec::default(),
            data_csv: None,
            data_schema: None,
            sweep_epsilon: vec![0.0, 0.001, 0.01, 0.05, 0.1],
            sweep_lambda: vec![0.1, 0.5, 1.0],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Reads a config file. Relative paths inside it are anchored at its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&text, base)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            self.set(key.trim(), value.trim(), base)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    /// Sets one key. Used for both file entries and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let run = &mut self.run;
        let data = &mut run.data;
        let tr = &mut run.train;
        let sg = &mut tr.surgery;
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "data.csv" => self.data_csv = Some(base.join(value)),
            "data.schema" => self.data_schema = Some(base.join(value)),
            "data.n" => data.n = parse_value(key, value)?,
            "data.classes" => data.classes = parse_value(key, value)?,
            "data.image_dim" => data.image_dim = parse_value(key, value)?,
            "data.categorical" => {
                let cards: Vec<usize> = parse_list(key, value)?;
                data.schema = TabularSchema::numbered(&cards, data.schema.continuous.len())?;
            }
            "data.continuous" => {
                let cards: Vec<usize> = data.schema.categorical.iter().map(|(_, c)| *c).collect();
                data.schema = TabularSchema::numbered(&cards, parse_value(key, value)?)?;
            }
            "data.informativeness_image" => data.informativeness_image = parse_value(key, value)?,
            "data.informativeness_tabular" => data.informativeness_tabular = parse_value(key, value)?,
            "data.noise" => data.noise = parse_value(key, value)?,
            "data.prototype_dim" => data.prototype_dim = parse_value(key, value)?,
            "data.separation" => data.separation = parse_value(key, value)?,
            "data.mirror_image" => data.mirror_image = parse_value(key, value)?,
            "split.train" => run.split[0] = parse_value(key, value)?,
            "split.val" => run.split[1] = parse_value(key, value)?,
            "split.test" => run.split[2] = parse_value(key, value)?,
            "model.hidden" => run.hidden = parse_list(key, value)?,
            "model.latent" => run.latent = parse_value(key, value)?,
            "train.epochs" => tr.epochs = parse_value(key, value)?,
            "train.batch_size" => tr.batch_size = parse_value(key, value)?,
            "train.lr_encoder" => tr.lr_encoder = parse_value(key, value)?,
            "train.lr_head" => tr.lr_head = parse_value(key, value)?,
            "train.momentum" => tr.momentum = parse_value(key, value)?,
            "train.patience" => tr.patience = parse_value(key, value)?,
            "train.first_modality" => tr.first_modality = value.parse()?,
            "train.baseline" => tr.baseline = value.parse()?,
            "surgery.epsilon" => sg.epsilon = parse_value(key, value)?,
            "surgery.lambda_image" => sg.lambda_image = parse_value(key, value)?,
            "surgery.lambda_tabular" => sg.lambda_tabular = parse_value(key, value)?,
            "surgery.enable_cgs" => sg.enable_cgs = parse_value(key, value)?,
            "surgery.enable_ugg" => sg.enable_ugg = parse_value(key, value)?,
            "surgery.gp_norm_floor" => sg.gp_norm_floor = parse_value(key, value)?,
            "eval.fusion_weight" => tr.fusion_weight = parse_value(key, value)?,
            "sweep.epsilon" => self.sweep_epsilon = parse_list(key, value)?,
            "sweep.lambda" => self.sweep_lambda = parse_list(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Checks everything that can be checked without training.
    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        if self.data_csv.is_none() {
            run.data.validate()?;
        }
        match (&self.data_csv, &self.data_schema) {
            (Some(csv), Some(schema)) => {
                for p in [csv, schema] {
                    if !p.is_file() {
                        return Err(Error::Config(format!("{} does not exist", p.display())));
                    }
                }
            }
            (None, None) => {}
            _ => return Err(Error::Config("data.csv and data.schema must be set together".into())),
        }
        let sum: f64 = run.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || run.split.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!(
                "split fractions {:?} must lie in [0, 1] and sum to 1",
                run.split
            )));
        }
        if run.split[0] == 0.0 {
            return Err(Error::Config("split.train must be positive".into()));
        }
        if run.latent == 0 || run.hidden.contains(&0) {
            return Err(Error::Config("model widths must be positive".into()));
        }
        run.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        Ok(())
    }

    /// Serializes every key; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let run = &self.run;
        let d = &run.data;
        let tr = &run.train;
        let sg = &tr.surgery;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("seed", self.seed.to_string());
        kv("seeds", join(&self.seeds));
        if let Some(p) = &self.data_csv {
            kv("data.csv", p.display().to_string());
        }
        if let Some(p) = &self.data_schema {
            kv("data.schema", p.display().to_string());
        }
        kv("data.n", d.n.to_string());
        kv("data.classes", d.classes.to_string());
        kv("data.image_dim", d.image_dim.to_string());
        let cards: Vec<usize> = d.schema.categorical.iter().map(|(_, c)| *c).collect();
        kv("data.categorical", join(&cards));
        kv("data.continuous", d.schema.continuous.len().to_string());
        kv("data.informativeness_image", d.informativeness_image.to_string());
        kv("data.informativeness_tabular", d.informativeness_tabular.to_string());
        kv("data.noise", d.noise.to_string());
        kv("data.prototype_dim", d.prototype_dim.to_string());
        kv("data.separation", d.separation.to_string());
        kv("data.mirror_image", d.mirror_image.to_string());
        kv("split.train", run.split[0].to_string());
        kv("split.val", run.split[1].to_string());
        kv("split.test", run.split[2].to_string());
        kv("model.hidden", join(&run.hidden));
        kv("model.latent", run.latent.to_string());
        kv("train.epochs", tr.epochs.to_string());
        kv("train.batch_size", tr.batch_size.to_string());
        kv("train.lr_encoder", tr.lr_encoder.to_string());
        kv("train.lr_head", tr.lr_head.to_string());
        kv("train.momentum", tr.momentum.to_string());
        kv("train.patience", tr.patience.to_string());
        kv("train.first_modality", tr.first_modality.to_string());
        kv("train.baseline", tr.baseline.to_string());
        kv("surgery.epsilon", sg.epsilon.to_string());
        kv("surgery.lambda_image", sg.lambda_image.to_string());
        kv("surgery.lambda_tabular", sg.lambda_tabular.to_string());
        kv("surgery.enable_cgs", sg.enable_cgs.to_string());
        kv("surgery.enable_ugg", sg.enable_ugg.to_string());
        kv("surgery.gp_norm_floor", sg.gp_norm_floor.to_string());
        kv("eval.fusion_weight", tr.fusion_weight.to_string());
        kv("sweep.epsilon", join(&self.sweep_epsilon));
        kv("sweep.lambda", join(&self.sweep_lambda));
        s
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaal_core::{BaselineMode, Modality};

    #[test]
    fn empty_text_keeps_defaults() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# nothing\n\n", Path::new("")).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn sets_nested_fields() {
        let mut cfg = ExperimentConfig::default();
        let text = "seed=9\nsurgery.epsilon = 0.25\ntrain.baseline=joint\ntrain.first_modality=tabular\n\
                    data.categorical=2,3\ndata.continuous=4\nsweep.lambda=0.2,0.4\nmodel.hidden=16,8\n";
        cfg.apply_text(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.run.train.surgery.epsilon, 0.25);
        assert_eq!(cfg.run.train.baseline, BaselineMode::Joint);
        assert_eq!(cfg.run.train.first_modality, Modality::Tabular);
        assert_eq!(cfg.run.data.schema.featurized_dim(), 2 + 3 + 4);
        assert_eq!(cfg.sweep_lambda, vec![0.2, 0.4]);
        assert_eq!(cfg.run.hidden, vec![16, 8]);
    }

    #[test]
    fn reports_line_numbers_and_unknown_keys() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_text("seed=1\nbogus.key=3\n", Path::new("")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("bogus.key"), "{err}");
        let err = cfg.apply_text("seed=minus one\n", Path::new("")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(cfg.apply_text("no equals sign\n", Path::new("")).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "seeds=3,1\ndata.n=123\nsurgery.enable_ugg=false\nsweep.epsilon=0.5\ndata.csv=/tmp/a.csv\ndata.schema=/tmp/a.schema\n",
            Path::new(""),
        )
        .unwrap();
        let mut back = ExperimentConfig::default();
        back.apply_text(&cfg.to_text(), Path::new("")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = [
            "data.n=0",
            "split.train=0.5",
            "surgery.lambda_image=0",
            "train.batch_size=0",
            "seeds=",
            "data.csv=/definitely/missing.csv",
            "eval.fusion_weight=1.5",
        ];
        for line in bad {
            let mut cfg = ExperimentConfig::default();
            cfg.apply_text(line, Path::new("")).unwrap();
            assert!(cfg.validate().is_err(), "{line} should fail validation");
        }
    }
}
