//! Alternating unimodal training over a shared head, with cross-modal
//! gradient surgery, plus the baselines it is compared against.

use std::fmt;
use std::str::FromStr;

use crate::data::{BatchPlan, FeatureSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, TrainedModel};
use crate::model::{
    backward, encode, head_backward, init_joint, init_params, mean_rows, JointState, MlpParams, Modality, ModelDims,
    ModelState,
};
use crate::numerics::{norm2, softmax_rows, RngStream};
use crate::surgery::{
    cosine_similarity, orthogonalize, project_gradient, reference_gradient, row_entropies, select_hard,
    SurgeryConfig, SurgeryResult,
};

/// Child-stream ids under the root seed.
pub const STREAM_DATA: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_SHUFFLE: u64 = 3;
pub const STREAM_SPLIT: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineMode {
    /// Alternating learning with surgery as configured by the toggles.
    Gaal,
    /// Single fused head on concatenated latents, one update per batch.
    Joint,
    /// Alternating learning, surgery forced off.
    AltNoSurgery,
    /// Alternating learning, head gradient always made orthogonal to `g_p`.
    Orthogonal,
    /// Image encoder and head trained on the image view alone.
    ImageOnly,
    /// Tabular encoder and head trained on the tabular view alone.
    TabularOnly,
}

impl BaselineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMode::Gaal => "gaal",
            BaselineMode::Joint => "joint",
            BaselineMode::AltNoSurgery => "alt_no_surgery",
            BaselineMode::Orthogonal => "orthogonal",
            BaselineMode::ImageOnly => "image_only",
            BaselineMode::TabularOnly => "tabular_only",
        }
    }

    fn unimodal(self) -> Option<Modality> {
        match self {
            BaselineMode::ImageOnly => Some(Modality::Image),
            BaselineMode::TabularOnly => Some(Modality::Tabular),
            _ => None,
        }
    }
}

impl fmt::Display for BaselineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaal" => BaselineMode::Gaal,
            "joint" => BaselineMode::Joint,
            "alt_no_surgery" => BaselineMode::AltNoSurgery,
            "orthogonal" => BaselineMode::Orthogonal,
            "image_only" => BaselineMode::ImageOnly,
            "tabular_only" => BaselineMode::TabularOnly,
            other => return Err(Error::Config(format!("unknown baseline mode {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_head: f64,
    /// Momentum of the encoder optimizers. The head uses plain SGD.
    pub momentum: f64,
    pub surgery: SurgeryConfig,
    pub seed: u64,
    pub baseline: BaselineMode,
    /// Modality updated on odd steps.
    pub first_modality: Modality,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Weight of the image logits in fused prediction.
    pub fusion_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            lr_encoder: 1e-2,
            lr_head: 1e-2,
            momentum: 0.9,
            surgery: SurgeryConfig::default(),
            seed: 0,
            baseline: BaselineMode::Gaal,
            first_modality: Modality::Image,
            patience: 10,
            fusion_weight: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        for (name, lr) in [("lr_encoder", self.lr_encoder), ("lr_head", self.lr_head)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} = {lr} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum = {} must lie in [0, 1)", self.momentum)));
        }
        if !(0.0..=1.0).contains(&self.fusion_weight) {
            return Err(Error::Config(format!(
                "fusion_weight = {} must lie in [0, 1]",
                self.fusion_weight
            )));
        }
        self.surgery.validate()
    }

    /// Modality updated at 1-based step `t`.
    pub fn modality_at(&self, t: usize) -> Modality {
        if t % 2 == 1 {
            self.first_modality
        } else {
            self.first_modality.other()
        }
    }
}

/// Per-step diagnostics. Fields that do not apply to a mode are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiag {
    pub t: usize,
    /// `None` for joint steps, which update both modalities.
    pub modality: Option<Modality>,
    pub loss: f64,
    /// Cosine between the raw head gradient `g` and `g_p`.
    pub cos_raw: Option<f64>,
    pub v: Option<f64>,
    pub applied: Option<bool>,
    pub n_hard: Option<usize>,
    pub g_norm: f64,
    pub gp_norm: Option<f64>,
    /// `g_p · g̃` of the direction actually applied to the head.
    pub gp_dot_applied: Option<f64>,
    /// Cosine between the applied head direction and `g_p`.
    pub cos_applied: Option<f64>,
    /// Cosine between the applied head direction and the one applied at the
    /// previous step, which belongs to the other modality.
    pub cos_prev: Option<f64>,
    /// Joint mode only: cosine between the image-branch and the multimodal
    /// gradient on the image block of the fused head.
    pub cos_conflict: Option<f64>,
}

pub const DIAG_HEADER: &str = "t,modality,loss,cos_raw,v,applied,n_hard,g_norm,gp_norm";

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl StepDiag {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.t,
            self.modality.map_or("joint", Modality::as_str),
            self.loss,
            opt(self.cos_raw),
            opt(self.v),
            opt(self.applied.map(u8::from)),
            opt(self.n_hard),
            self.g_norm,
            opt(self.gp_norm),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub acc_multi: f64,
    pub acc_image: f64,
    pub acc_tabular: f64,
    /// Mean training loss of the image steps in this epoch.
    pub loss_image: f64,
    pub loss_tabular: f64,
}

pub const METRICS_HEADER: &str = "epoch,acc_multi,acc_image,acc_tabular,loss_I,loss_T";

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.acc_multi, self.acc_image, self.acc_tabular, self.loss_image, self.loss_tabular
        )
    }
}

/// SGD-with-momentum velocity for both encoders.
#[derive(Clone, Debug)]
struct EncoderMomentum {
    image: MlpParams,
    tabular: MlpParams,
}

impl EncoderMomentum {
    fn new(image: &MlpParams, tabular: &MlpParams) -> Self {
        EncoderMomentum {
            image: image.zeros_like(),
            tabular: tabular.zeros_like(),
        }
    }

    fn get_mut(&mut self, m: Modality) -> &mut MlpParams {
        match m {
            Modality::Image => &mut self.image,
            Modality::Tabular => &mut self.tabular,
        }
    }
}

fn momentum_step(params: &mut MlpParams, velocity: &mut MlpParams, grads: &MlpParams, lr: f64, mu: f64) {
    for ((p, v), g) in params.params_mut().zip(velocity.params_mut()).zip(grads.params()) {
        *v = mu * *v + g;
        *p -= lr * *v;
    }
}

/// Head-gradient vectors of one alternating step.
#[derive(Clone, Debug)]
pub struct StepTrace {
    pub diag: StepDiag,
    /// Raw head gradient of the current modality.
    pub g: Vec<f64>,
    /// Reference gradient; `None` for unimodal baselines.
    pub g_p: Option<Vec<f64>>,
    /// Direction applied to the head.
    pub g_tilde: Vec<f64>,
}

/// Alternating learner: model plus encoder optimizer state.
#[derive(Clone, Debug)]
pub struct GaalLearner {
    pub state: ModelState,
    velocity: EncoderMomentum,
    prev_applied: Option<Vec<f64>>,
}

impl GaalLearner {
    pub fn new(state: ModelState) -> Self {
        let velocity = EncoderMomentum::new(&state.encoder_image, &state.encoder_tabular);
        GaalLearner {
            state,
            velocity,
            prev_applied: None,
        }
    }

    /// One alternating step for modality `m` on `batch`:
    /// loss and gradients for `m`, encoder update, reference gradient from
    /// the other modality's uncertain samples, surgery, head update.
    pub fn step(&mut self, batch: &FeatureSet, m: Modality, cfg: &TrainConfig, t: usize) -> Result<StepDiag> {
        Ok(self.step_traced(batch, m, cfg, t)?.diag)
    }

    /// [`GaalLearner::step`], also returning the gradient vectors.
    pub fn step_traced(&mut self, batch: &FeatureSet, m: Modality, cfg: &TrainConfig, t: usize) -> Result<StepTrace> {
        let x = batch.modality(m);
        let res = backward(&self.state, m, x, &batch.labels)?;
        if !res.loss.is_finite() || !res.head_grad.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                iteration: t,
                loss: res.loss,
            });
        }
        momentum_step(
            self.state.encoder_mut(m),
            self.velocity.get_mut(m),
            &res.encoder_grads,
            cfg.lr_encoder,
            cfg.momentum,
        );
        let g = res.head_grad;
        let g_norm = norm2(&g);
        let floor = cfg.surgery.gp_norm_floor;

        if cfg.baseline.unimodal().is_some() {
            self.state.head.step(&g, cfg.lr_head)?;
            let diag = StepDiag {
                t,
                modality: Some(m),
                loss: res.loss,
                cos_raw: None,
                v: None,
                applied: None,
                n_hard: None,
                g_norm,
                gp_norm: None,
                gp_dot_applied: None,
                cos_applied: None,
                cos_prev: None,
                cos_conflict: None,
            };
            return Ok(StepTrace {
                diag,
                g_tilde: g.clone(),
                g,
                g_p: None,
            });
        }

        // Reference gradient from the other modality. The other encoder is
        // untouched this step, so its predictions are at current parameters.
        let other = m.other();
        let x_other = batch.modality(other);
        let hard = if cfg.surgery.enable_ugg {
            let (latent, _) = encode(self.state.encoder(other), x_other)?;
            let probs = softmax_rows(&self.state.head.logits(&latent)?);
            if !probs.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: t,
                    loss: f64::NAN,
                });
            }
            select_hard(&row_entropies(&probs)?, cfg.surgery.lambda(other))?
        } else {
            (0..batch.len()).collect()
        };
        let g_p = reference_gradient(&self.state, other, x_other, &batch.labels, &hard)?;

        let result = match cfg.baseline {
            BaselineMode::Gaal if cfg.surgery.enable_cgs => project_gradient(&g, &g_p, cfg.surgery.epsilon, floor)?,
            BaselineMode::Orthogonal => orthogonalize(&g, &g_p, floor)?,
            _ => SurgeryResult {
                cos_raw: cosine_similarity(&g, &g_p, floor.sqrt())?,
                g_tilde: g.clone(),
                v: 0.0,
                applied: false,
            },
        };
        self.state.head.step(&result.g_tilde, cfg.lr_head)?;
        let cos_prev = match &self.prev_applied {
            Some(prev) => Some(cosine_similarity(&result.g_tilde, prev, floor.sqrt())?),
            None => None,
        };
        self.prev_applied = Some(result.g_tilde.clone());

        let diag = StepDiag {
            t,
            modality: Some(m),
            loss: res.loss,
            cos_raw: Some(result.cos_raw),
            v: Some(result.v),
            applied: Some(result.applied),
            n_hard: Some(hard.len()),
            g_norm,
            gp_norm: Some(norm2(&g_p)),
            gp_dot_applied: Some(crate::numerics::dot(&g_p, &result.g_tilde)?),
            cos_applied: Some(cosine_similarity(&result.g_tilde, &g_p, floor.sqrt())?),
            cos_prev,
            cos_conflict: None,
        };
        Ok(StepTrace {
            diag,
            g,
            g_p: Some(g_p),
            g_tilde: result.g_tilde,
        })
    }
}

/// Naive joint learner on concatenated latents.
#[derive(Clone, Debug)]
pub struct JointLearner {
    pub state: JointState,
    velocity: EncoderMomentum,
}

impl JointLearner {
    pub fn new(state: JointState) -> Self {
        let velocity = EncoderMomentum::new(&state.encoder_image, &state.encoder_tabular);
        JointLearner { state, velocity }
    }

    pub fn step(&mut self, batch: &FeatureSet, cfg: &TrainConfig, t: usize) -> Result<StepDiag> {
        let res = self.state.backward(&batch.image, &batch.tabular, &batch.labels)?;
        if !res.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: t,
                loss: res.loss,
            });
        }
        let cos_conflict = joint_conflict_cosine(&self.state, &res.latent_image, &res.head_grad, &batch.labels)?;
        momentum_step(
            &mut self.state.encoder_image,
            &mut self.velocity.image,
            &res.image_grads,
            cfg.lr_encoder,
            cfg.momentum,
        );
        momentum_step(
            &mut self.state.encoder_tabular,
            &mut self.velocity.tabular,
            &res.tabular_grads,
            cfg.lr_encoder,
            cfg.momentum,
        );
        self.state.head.step(&res.head_grad, cfg.lr_head)?;
        Ok(StepDiag {
            t,
            modality: None,
            loss: res.loss,
            cos_raw: None,
            v: None,
            applied: None,
            n_hard: None,
            g_norm: norm2(&res.head_grad),
            gp_norm: None,
            gp_dot_applied: None,
            cos_applied: None,
            cos_prev: None,
            cos_conflict: Some(cos_conflict),
        })
    }
}

/// Indices of the image-latent weight columns plus the bias in the
/// flattened fused head.
fn image_block(classes: usize, latent: usize) -> Vec<usize> {
    let width = 2 * latent;
    let mut idx: Vec<usize> = (0..classes).flat_map(|c| (c * width)..(c * width + latent)).collect();
    idx.extend(classes * width..classes * width + classes);
    idx
}

/// Cosine between the image-branch gradient (loss of the fused head with
/// the tabular latent zeroed) and the multimodal gradient, both restricted
/// to the image block of the fused head.
pub fn joint_conflict_cosine(
    state: &JointState,
    latent_image: &crate::numerics::Matrix,
    multimodal_head_grad: &[f64],
    labels: &[usize],
) -> Result<f64> {
    let padded = state.pad_latent(Modality::Image, latent_image)?;
    let image_grad = mean_rows(&head_backward(&state.head, &padded, labels)?.per_sample);
    let block = image_block(state.head.classes(), state.latent_dim());
    let a: Vec<f64> = block.iter().map(|&i| image_grad[i]).collect();
    let b: Vec<f64> = block.iter().map(|&i| multimodal_head_grad[i]).collect();
    cosine_similarity(&a, &b, 1e-12)
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    /// Parameters from the epoch with the best validation accuracy.
    pub model: TrainedModel,
    pub diag: Vec<StepDiag>,
    pub epochs: Vec<EpochMetrics>,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
}

enum Learner {
    Alternating(GaalLearner),
    Joint(JointLearner),
}

impl Learner {
    fn snapshot(&self) -> TrainedModel {
        match self {
            Learner::Alternating(l) => TrainedModel::Shared(l.state.clone()),
            Learner::Joint(l) => TrainedModel::Joint(l.state.clone()),
        }
    }
}

/// Model selection score: fused accuracy, or the trained modality's accuracy
/// for unimodal baselines.
pub fn selection_accuracy(report: &EvalReport, mode: BaselineMode) -> f64 {
    match mode.unimodal() {
        Some(Modality::Image) => report.acc_image,
        Some(Modality::Tabular) => report.acc_tabular,
        None => report.acc_multi,
    }
}

/// Runs training with early stopping on `val` (on `train` when `val` is empty).
pub fn train(train_set: &FeatureSet, val: &FeatureSet, dims: &ModelDims, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train_set.image.cols() != dims.image_in || train_set.tabular.cols() != dims.tabular_in {
        return Err(Error::Config(format!(
            "feature widths ({}, {}) do not match model dims ({}, {})",
            train_set.image.cols(),
            train_set.tabular.cols(),
            dims.image_in,
            dims.tabular_in
        )));
    }
    let root = RngStream::new(cfg.seed, 0);
    let init = root.child(STREAM_INIT);
    let plan = BatchPlan::new(cfg.batch_size, false, root.child(STREAM_SHUFFLE))?;
    let val = if val.is_empty() { train_set } else { val };

    let mut learner = match cfg.baseline {
        BaselineMode::Joint => Learner::Joint(JointLearner::new(init_joint(dims, &init)?)),
        _ => Learner::Alternating(GaalLearner::new(init_params(dims, &init)?)),
    };
    let mut best = learner.snapshot();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut diag = Vec::new();
    let mut epochs = Vec::new();
    let mut t = 0usize;

    for epoch in 1..=cfg.epochs {
        let mut loss_sum = [0.0f64; 2];
        let mut loss_n = [0usize; 2];
        for idx in plan.batches(train_set.len(), epoch - 1) {
            let batch = train_set.batch(&idx);
            match &mut learner {
                Learner::Joint(l) => {
                    t += 1;
                    diag.push(l.step(&batch, cfg, t)?);
                    for m in Modality::BOTH {
                        let logits = l.state.unimodal_logits(m, batch.modality(m))?;
                        loss_sum[m as usize] += crate::model::cross_entropy(&logits, &batch.labels)?;
                        loss_n[m as usize] += 1;
                    }
                }
                Learner::Alternating(l) => {
                    let order: Vec<Modality> = match cfg.baseline.unimodal() {
                        Some(m) => vec![m],
                        None => vec![cfg.modality_at(t + 1), cfg.modality_at(t + 2)],
                    };
                    for m in order {
                        t += 1;
                        let d = l.step(&batch, m, cfg, t)?;
                        loss_sum[m as usize] += d.loss;
                        loss_n[m as usize] += 1;
                        diag.push(d);
                    }
                }
            }
        }
        let snapshot = learner.snapshot();
        if !snapshot.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: t,
                loss: f64::NAN,
            });
        }
        let report = evaluate(&snapshot, val, cfg.fusion_weight)?;
        let mean = |i: usize| if loss_n[i] == 0 { f64::NAN } else { loss_sum[i] / loss_n[i] as f64 };
        epochs.push(EpochMetrics {
            epoch,
            acc_multi: report.acc_multi,
            acc_image: report.acc_image,
            acc_tabular: report.acc_tabular,
            loss_image: mean(Modality::Image as usize),
            loss_tabular: mean(Modality::Tabular as usize),
        });
        let score = selection_accuracy(&report, cfg.baseline);
        if score > best_acc {
            best_acc = score;
            best_epoch = epoch;
            best = snapshot;
        } else if cfg.patience > 0 && epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    Ok(TrainOutput {
        model: best,
        diag,
        epochs,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split, FeatureStats, SyntheticSpec};

    fn tiny_sets(seed: u64) -> (FeatureSet, FeatureSet, ModelDims) {
        let spec = SyntheticSpec {
            n: 200,
            image_dim: 8,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&spec, &RngStream::new(seed, STREAM_DATA)).unwrap();
        let s = split(&ds, [0.75, 0.25, 0.0], &RngStream::new(seed, 9)).unwrap();
        let stats = FeatureStats::fit(&s.train.tabular).unwrap();
        let tr = FeatureSet::from_dataset(&s.train, &stats).unwrap();
        let va = FeatureSet::from_dataset(&s.val, &stats).unwrap();
        let dims = ModelDims {
            hidden: vec![16],
            latent: 8,
            ..ModelDims::new(tr.image.cols(), tr.tabular.cols(), 4)
        };
        (tr, va, dims)
    }

    #[test]
    fn baseline_modes_parse() {
        for m in ["gaal", "joint", "alt_no_surgery", "orthogonal", "image_only", "tabular_only"] {
            assert_eq!(m.parse::<BaselineMode>().unwrap().as_str(), m);
        }
        assert!("mla".parse::<BaselineMode>().is_err());
    }

    #[test]
    fn zero_epochs_returns_initial_state() {
        let (tr, va, dims) = tiny_sets(1);
        let cfg = TrainConfig {
            epochs: 0,
            seed: 4,
            ..TrainConfig::default()
        };
        let out = train(&tr, &va, &dims, &cfg).unwrap();
        let init = init_params(&dims, &RngStream::new(4, 0).child(STREAM_INIT)).unwrap();
        assert_eq!(out.model, TrainedModel::Shared(init));
        assert!(out.diag.is_empty() && out.epochs.is_empty());
    }

    #[test]
    fn alternation_and_hard_counts() {
        let (tr, va, dims) = tiny_sets(2);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let out = train(&tr, &va, &dims, &cfg).unwrap();
        for d in &out.diag {
            let m = d.modality.unwrap();
            assert_eq!(m == Modality::Image, d.t % 2 == 1);
        }
        // Same batch serves both steps of a pair.
        let sizes: Vec<usize> = (0..tr.len()).step_by(32).map(|s| (tr.len() - s).min(32)).collect();
        let expected: Vec<usize> = sizes.iter().flat_map(|&b| [b, b]).collect();
        let got: Vec<usize> = out.diag[..expected.len()].iter().map(|d| d.n_hard.unwrap()).collect();
        let hard: Vec<usize> = expected.iter().map(|&b| crate::surgery::hard_count(b, 0.5)).collect();
        assert_eq!(got, hard);

        let tab_first = TrainConfig {
            first_modality: Modality::Tabular,
            ..cfg.clone()
        };
        let out = train(&tr, &va, &dims, &tab_first).unwrap();
        assert_eq!(out.diag[0].modality, Some(Modality::Tabular));
    }

    #[test]
    fn ugg_off_uses_whole_batch() {
        let (tr, va, dims) = tiny_sets(3);
        let mut cfg = TrainConfig {
            epochs: 1,
            batch_size: 50,
            ..TrainConfig::default()
        };
        cfg.surgery.enable_ugg = false;
        let out = train(&tr, &va, &dims, &cfg).unwrap();
        let sizes: Vec<usize> = (0..tr.len()).step_by(50).map(|s| (tr.len() - s).min(50)).collect();
        let got: Vec<usize> = out.diag.iter().map(|d| d.n_hard.unwrap()).collect();
        assert_eq!(got, sizes.iter().flat_map(|&b| [b, b]).collect::<Vec<_>>());
    }

    #[test]
    fn cgs_off_leaves_gradient_untouched() {
        let (tr, _, dims) = tiny_sets(5);
        let mut cfg = TrainConfig::default();
        cfg.surgery.enable_cgs = false;
        let state = init_params(&dims, &RngStream::new(0, 2)).unwrap();
        let batch = tr.batch(&(0..40).collect::<Vec<_>>());
        let g = backward(&state, Modality::Image, &batch.image, &batch.labels).unwrap().head_grad;
        let mut learner = GaalLearner::new(state.clone());
        learner.step(&batch, Modality::Image, &cfg, 1).unwrap();
        let mut expected = state.head.clone();
        expected.step(&g, cfg.lr_head).unwrap();
        assert_eq!(learner.state.head, expected);
    }

    #[test]
    fn non_conflicting_step_matches_cgs_off() {
        let (tr, _, dims) = tiny_sets(6);
        let state = init_params(&dims, &RngStream::new(3, 2)).unwrap();
        let batch = tr.batch(&(0..40).collect::<Vec<_>>());
        // ε = 0 and huge negative margin both keep any non-conflicting step inactive.
        let on = TrainConfig::default();
        let mut off = on.clone();
        off.surgery.enable_cgs = false;
        let mut a = GaalLearner::new(state.clone());
        let mut b = GaalLearner::new(state);
        let da = a.step(&batch, Modality::Image, &on, 1).unwrap();
        b.step(&batch, Modality::Image, &off, 1).unwrap();
        if da.applied == Some(false) {
            assert_eq!(a.state, b.state);
        } else {
            assert_ne!(a.state.head, b.state.head);
        }
    }

    #[test]
    fn joint_diag_has_no_surgery_fields() {
        let (tr, va, dims) = tiny_sets(7);
        let cfg = TrainConfig {
            epochs: 1,
            baseline: BaselineMode::Joint,
            ..TrainConfig::default()
        };
        let out = train(&tr, &va, &dims, &cfg).unwrap();
        for d in &out.diag {
            assert!(d.v.is_none() && d.modality.is_none());
            let row = d.csv_row();
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols.len(), 9);
            assert_eq!(cols[1], "joint");
            assert_eq!(cols[4], "");
        }
        assert!(matches!(out.model, TrainedModel::Joint(_)));
    }

    #[test]
    fn unimodal_baseline_touches_one_encoder() {
        let (tr, va, dims) = tiny_sets(8);
        let cfg = TrainConfig {
            epochs: 1,
            patience: 0,
            baseline: BaselineMode::ImageOnly,
            ..TrainConfig::default()
        };
        let out = train(&tr, &va, &dims, &cfg).unwrap();
        let init = init_params(&dims, &RngStream::new(0, 0).child(STREAM_INIT)).unwrap();
        match out.model {
            TrainedModel::Shared(s) => {
                assert_eq!(s.encoder_tabular, init.encoder_tabular);
                assert_ne!(s.encoder_image, init.encoder_image);
            }
            _ => panic!("expected shared model"),
        }
        assert!(out.diag.iter().all(|d| d.modality == Some(Modality::Image)));
    }

    #[test]
    fn runs_are_deterministic() {
        let (tr, va, dims) = tiny_sets(9);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let a = train(&tr, &va, &dims, &cfg).unwrap();
        let b = train(&tr, &va, &dims, &cfg).unwrap();
        assert_eq!(a.diag, b.diag);
        assert_eq!(a.epochs, b.epochs);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn diverging_run_reports_iteration() {
        let (tr, va, dims) = tiny_sets(10);
        let cfg = TrainConfig {
            epochs: 5,
            lr_encoder: 1e6,
            lr_head: 1e6,
            ..TrainConfig::default()
        };
        match train(&tr, &va, &dims, &cfg) {
            Err(Error::NonFiniteLoss { iteration, .. }) => assert!(iteration >= 1),
            Err(Error::NonFinite(_)) => {}
            other => panic!("expected a numeric failure, got {:?}", other.map(|o| o.best_epoch)),
        }
    }
}
