//! End-to-end runs: dataset -> split -> featurize -> train -> test report.

use crate::data::{generate_synthetic, split, FeatureSet, FeatureStats, MultimodalDataset, SyntheticSpec};
use crate::error::Result;
use crate::eval::{evaluate, EvalReport};
use crate::model::ModelDims;
use crate::numerics::RngStream;
use crate::train::{train, TrainConfig, TrainOutput, STREAM_DATA, STREAM_SPLIT};

/// Everything needed to reproduce one run apart from the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub data: SyntheticSpec,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub train: TrainConfig,
}

impl Default for RunSpec {
    fn default() -> Self {
        let dims = ModelDims::new(1, 1, 2);
        RunSpec {
            data: SyntheticSpec::default(),
            split: [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            hidden: dims.hidden,
            latent: dims.latent,
            train: TrainConfig::default(),
        }
    }
}

/// Featurized splits plus the model dimensions they imply.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: FeatureSet,
    pub val: FeatureSet,
    pub test: FeatureSet,
    pub dims: ModelDims,
    pub stratified: bool,
}

/// Synthetic dataset for `seed`, drawn from the data stream.
pub fn generate_for_seed(spec: &SyntheticSpec, seed: u64) -> Result<MultimodalDataset> {
    generate_synthetic(spec, &RngStream::new(seed, 0).child(STREAM_DATA))
}

/// Splits `ds` and featurizes every part with training-split statistics.
pub fn prepare(ds: &MultimodalDataset, fractions: [f64; 3], hidden: &[usize], latent: usize, seed: u64) -> Result<Prepared> {
    let parts = split(ds, fractions, &RngStream::new(seed, 0).child(STREAM_SPLIT))?;
    let stats = FeatureStats::fit(&parts.train.tabular)?;
    let train = FeatureSet::from_dataset(&parts.train, &stats)?;
    let val = FeatureSet::from_dataset(&parts.val, &stats)?;
    let test = FeatureSet::from_dataset(&parts.test, &stats)?;
    let dims = ModelDims {
        hidden: hidden.to_vec(),
        latent,
        ..ModelDims::new(train.image.cols(), train.tabular.cols(), ds.classes)
    };
    dims.validate()?;
    Ok(Prepared {
        train,
        val,
        test,
        dims,
        stratified: parts.stratified,
    })
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub output: TrainOutput,
    /// Report on the test split, or on validation when there is no test split.
    pub report: EvalReport,
}

/// Trains on prepared splits with `cfg` and evaluates the selected model.
pub fn run_prepared(p: &Prepared, cfg: &TrainConfig) -> Result<RunResult> {
    let output = train(&p.train, &p.val, &p.dims, cfg)?;
    let target = if !p.test.is_empty() {
        &p.test
    } else if !p.val.is_empty() {
        &p.val
    } else {
        &p.train
    };
    let report = evaluate(&output.model, target, cfg.fusion_weight)?;
    Ok(RunResult { output, report })
}

/// Generates, prepares and trains for one seed. `spec.train.seed` is ignored.
pub fn run_synthetic(spec: &RunSpec, seed: u64) -> Result<RunResult> {
    let ds = generate_for_seed(&spec.data, seed)?;
    let p = prepare(&ds, spec.split, &spec.hidden, spec.latent, seed)?;
    run_prepared(&p, &TrainConfig { seed, ..spec.train.clone() })
}

/// Median of a nonempty sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
