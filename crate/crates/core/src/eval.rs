//! Unimodal and fused prediction, accuracy, and the joint-learning conflict
//! diagnostic.

use std::fmt::Write as _;

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::model::{forward_logits, head_backward, JointState, Modality, ModelDims, ModelState, SharedClassifier};
use crate::numerics::{argmax, softmax_rows, Matrix};
use crate::train::{train, BaselineMode, TrainConfig};

/// A trained model of either architecture.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Shared(ModelState),
    Joint(JointState),
}

impl TrainedModel {
    pub fn unimodal_logits(&self, m: Modality, x: &Matrix) -> Result<Matrix> {
        match self {
            TrainedModel::Shared(s) => forward_logits(s, m, x),
            TrainedModel::Joint(j) => j.unimodal_logits(m, x),
        }
    }

    /// Fused logits. For the shared-head model this is the weighted mean of
    /// the unimodal logits; the joint model ignores `weight`.
    pub fn fused_logits(&self, x_image: &Matrix, x_tabular: &Matrix, weight: f64) -> Result<Matrix> {
        match self {
            TrainedModel::Shared(s) => fuse_logits(
                &forward_logits(s, Modality::Image, x_image)?,
                &forward_logits(s, Modality::Tabular, x_tabular)?,
                weight,
            ),
            TrainedModel::Joint(j) => j.fused_logits(x_image, x_tabular),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            TrainedModel::Shared(s) => s.is_finite(),
            TrainedModel::Joint(j) => j.is_finite(),
        }
    }
}

/// `w·f_image + (1 − w)·f_tabular`, elementwise.
pub fn fuse_logits(image: &Matrix, tabular: &Matrix, weight: f64) -> Result<Matrix> {
    if image.shape() != tabular.shape() {
        return Err(Error::shape("fuse_logits", image.shape(), tabular.shape()));
    }
    let data = image
        .data()
        .iter()
        .zip(tabular.data())
        .map(|(a, b)| weight * a + (1.0 - weight) * b)
        .collect();
    Matrix::new(image.rows(), image.cols(), data)
}

/// Class probabilities from one modality alone.
pub fn unimodal_predict(state: &ModelState, m: Modality, x: &Matrix) -> Result<Matrix> {
    Ok(softmax_rows(&forward_logits(state, m, x)?))
}

/// `softmax(½(f_image + f_tabular))`.
pub fn fused_predict(state: &ModelState, x_image: &Matrix, x_tabular: &Matrix) -> Result<Matrix> {
    fused_predict_weighted(state, x_image, x_tabular, 0.5)
}

pub fn fused_predict_weighted(state: &ModelState, x_image: &Matrix, x_tabular: &Matrix, weight: f64) -> Result<Matrix> {
    if x_image.rows() != x_tabular.rows() {
        return Err(Error::Length {
            op: "fused_predict (row counts)",
            left: x_image.rows(),
            right: x_tabular.rows(),
        });
    }
    let fused = fuse_logits(
        &forward_logits(state, Modality::Image, x_image)?,
        &forward_logits(state, Modality::Tabular, x_tabular)?,
        weight,
    )?;
    Ok(softmax_rows(&fused))
}

/// Fraction of rows whose argmax (ties to the lowest class) equals the label.
pub fn accuracy(p: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("accuracy"));
    }
    if p.rows() != labels.len() {
        return Err(Error::Length {
            op: "accuracy",
            left: p.rows(),
            right: labels.len(),
        });
    }
    let hits = p.iter_rows().zip(labels).filter(|(row, &y)| argmax(row) == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Probabilities and logits of both modalities plus the fused prediction.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    pub logits_image: Matrix,
    pub logits_tabular: Matrix,
    pub p_image: Matrix,
    pub p_tabular: Matrix,
    pub p_fused: Matrix,
    pub labels: Vec<usize>,
}

impl PredictionSet {
    pub fn compute(model: &TrainedModel, set: &FeatureSet, weight: f64) -> Result<Self> {
        let logits_image = model.unimodal_logits(Modality::Image, &set.image)?;
        let logits_tabular = model.unimodal_logits(Modality::Tabular, &set.tabular)?;
        let p_fused = softmax_rows(&model.fused_logits(&set.image, &set.tabular, weight)?);
        Ok(PredictionSet {
            p_image: softmax_rows(&logits_image),
            p_tabular: softmax_rows(&logits_tabular),
            logits_image,
            logits_tabular,
            p_fused,
            labels: set.labels.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub acc_multi: f64,
    pub acc_image: f64,
    pub acc_tabular: f64,
    /// Fused accuracy per class; NaN for classes absent from the set.
    pub per_class: Vec<f64>,
    pub n_test: usize,
}

pub const REPORT_CSV_HEADER: &str = "label,acc_multi,acc_image,acc_tabular,n_test";

impl EvalReport {
    pub fn from_predictions(p: &PredictionSet) -> Result<Self> {
        let classes = p.p_fused.cols();
        let mut hits = vec![0usize; classes];
        let mut totals = vec![0usize; classes];
        for (row, &y) in p.p_fused.iter_rows().zip(&p.labels) {
            totals[y] += 1;
            if argmax(row) == y {
                hits[y] += 1;
            }
        }
        Ok(EvalReport {
            acc_multi: accuracy(&p.p_fused, &p.labels)?,
            acc_image: accuracy(&p.p_image, &p.labels)?,
            acc_tabular: accuracy(&p.p_tabular, &p.labels)?,
            per_class: hits
                .iter()
                .zip(&totals)
                .map(|(&h, &n)| if n == 0 { f64::NAN } else { h as f64 / n as f64 })
                .collect(),
            n_test: p.labels.len(),
        })
    }

    /// Flat `key=value` block.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "acc_multi={}", self.acc_multi);
        let _ = writeln!(s, "acc_image={}", self.acc_image);
        let _ = writeln!(s, "acc_tabular={}", self.acc_tabular);
        for (c, a) in self.per_class.iter().enumerate() {
            let _ = writeln!(s, "acc_class.{c}={a}");
        }
        let _ = writeln!(s, "n_test={}", self.n_test);
        s
    }

    /// Row for an experiment results file, see [`REPORT_CSV_HEADER`].
    pub fn csv_row(&self, label: &str) -> String {
        format!(
            "{label},{},{},{},{}",
            self.acc_multi, self.acc_image, self.acc_tabular, self.n_test
        )
    }
}

pub fn evaluate(model: &TrainedModel, set: &FeatureSet, fusion_weight: f64) -> Result<EvalReport> {
    EvalReport::from_predictions(&PredictionSet::compute(model, set, fusion_weight)?)
}

/// Per-step cosines from a joint-learning run, with a histogram on [−1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ConflictTrace {
    pub cosines: Vec<f64>,
    /// `(lower edge, upper edge, count)`; the last bin includes 1.
    pub bins: Vec<(f64, f64, usize)>,
    pub negative_fraction: f64,
}

pub const CONFLICT_BINS: usize = 20;

impl ConflictTrace {
    pub fn from_cosines(cosines: Vec<f64>, n_bins: usize) -> Self {
        let width = 2.0 / n_bins as f64;
        let mut bins: Vec<(f64, f64, usize)> = (0..n_bins)
            .map(|i| (-1.0 + i as f64 * width, -1.0 + (i + 1) as f64 * width, 0))
            .collect();
        for &c in &cosines {
            let i = (((c.clamp(-1.0, 1.0) + 1.0) / width).floor() as usize).min(n_bins - 1);
            bins[i].2 += 1;
        }
        let negative = cosines.iter().filter(|&&c| c < 0.0).count();
        let negative_fraction = if cosines.is_empty() {
            0.0
        } else {
            negative as f64 / cosines.len() as f64
        };
        ConflictTrace {
            cosines,
            bins,
            negative_fraction,
        }
    }
}

/// Trains the naive joint baseline and records, at every step, the cosine
/// between the image-branch gradient and the multimodal gradient on the
/// fused head.
pub fn conflict_trace(train_set: &FeatureSet, val: &FeatureSet, dims: &ModelDims, cfg: &TrainConfig) -> Result<ConflictTrace> {
    if cfg.baseline != BaselineMode::Joint {
        return Err(Error::Config("conflict_trace requires baseline = joint".into()));
    }
    let out = train(train_set, val, dims, cfg)?;
    let cosines = out.diag.iter().filter_map(|d| d.cos_conflict).collect();
    Ok(ConflictTrace::from_cosines(cosines, CONFLICT_BINS))
}

/// Train accuracy of a softmax-regression probe fit by full-batch gradient
/// descent. Used to measure how much label information a view carries.
pub fn linear_probe_accuracy(x: &Matrix, labels: &[usize], classes: usize, iters: usize, lr: f64) -> Result<f64> {
    linear_probe_test_accuracy(x, labels, x, labels, classes, iters, lr)
}

/// Test accuracy of the same probe fit on `(x, labels)`.
pub fn linear_probe_test_accuracy(
    x: &Matrix,
    labels: &[usize],
    x_test: &Matrix,
    labels_test: &[usize],
    classes: usize,
    iters: usize,
    lr: f64,
) -> Result<f64> {
    let mut head = SharedClassifier::zeros(x.cols(), classes);
    for _ in 0..iters {
        let hb = head_backward(&head, x, labels)?;
        head.step(&crate::model::mean_rows(&hb.per_sample), lr)?;
    }
    accuracy(&softmax_rows(&head.logits(x_test)?), labels_test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelDims};
    use crate::numerics::RngStream;

    fn state() -> ModelState {
        init_params(
            &ModelDims {
                hidden: vec![5],
                latent: 4,
                ..ModelDims::new(3, 2, 3)
            },
            &RngStream::new(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn zero_head_predicts_uniform() {
        let mut s = state();
        s.head = SharedClassifier::zeros(4, 3);
        let p = unimodal_predict(&s, Modality::Image, &Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap()).unwrap();
        for &v in p.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unimodal_predict_is_softmax_of_logits() {
        let s = state();
        let mut r = RngStream::new(2, 2);
        let x = Matrix::new(6, 2, (0..12).map(|_| r.normal()).collect()).unwrap();
        let p = unimodal_predict(&s, Modality::Tabular, &x).unwrap();
        let z = forward_logits(&s, Modality::Tabular, &x).unwrap();
        assert_eq!(p, softmax_rows(&z));
        for (pr, zr) in p.iter_rows().zip(z.iter_rows()) {
            assert_eq!(argmax(pr), argmax(zr));
        }
        assert_eq!(p, unimodal_predict(&s, Modality::Tabular, &x).unwrap());
    }

    #[test]
    fn fusion_cases() {
        let z = Matrix::from_rows(&[[0.3, -1.0, 2.0]]).unwrap();
        let f = softmax_rows(&fuse_logits(&z, &z, 0.5).unwrap());
        assert_eq!(f, softmax_rows(&z));

        let a = Matrix::from_rows(&[[2.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0, 2.0]]).unwrap();
        assert_eq!(softmax_rows(&fuse_logits(&a, &b, 0.5).unwrap()).data(), &[0.5, 0.5]);

        let a = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let p = softmax_rows(&fuse_logits(&a, &b, 0.5).unwrap());
        // e^0.5 / (e^0.5 + 1)
        assert!((p.get(0, 0) - 0.622_459_331_201_854_6).abs() < 1e-15);
        assert!((p.get(0, 1) - 0.377_540_668_798_145_4).abs() < 1e-15);
    }

    #[test]
    fn fused_predict_checks_rows() {
        let s = state();
        assert!(fused_predict(&s, &Matrix::zeros(2, 3), &Matrix::zeros(3, 2)).is_err());
        let p = fused_predict(&s, &Matrix::zeros(2, 3), &Matrix::zeros(2, 2)).unwrap();
        for row in p.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_cases() {
        let p = Matrix::from_rows(&[[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.5, 0.5]]).unwrap();
        assert_eq!(accuracy(&p, &[0, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&p, &[1, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&p, &[0, 1, 1, 0]).unwrap(), 0.75);
        assert!(accuracy(&Matrix::zeros(0, 2), &[]).is_err());
    }

    #[test]
    fn histogram_covers_range() {
        let t = ConflictTrace::from_cosines(vec![-1.0, -0.95, 0.0, 0.4, 1.0], 20);
        assert_eq!(t.bins.len(), 20);
        assert_eq!(t.bins[0].0, -1.0);
        assert!((t.bins[19].1 - 1.0).abs() < 1e-12);
        assert_eq!(t.bins.iter().map(|b| b.2).sum::<usize>(), 5);
        assert_eq!(t.bins[0].2, 2);
        assert_eq!(t.bins[19].2, 1);
        assert!((t.negative_fraction - 0.4).abs() < 1e-15);
    }

    #[test]
    fn report_serializations() {
        let r = EvalReport {
            acc_multi: 0.5,
            acc_image: 0.25,
            acc_tabular: 1.0,
            per_class: vec![1.0, 0.0],
            n_test: 4,
        };
        let kv = r.to_key_value();
        assert!(kv.contains("acc_multi=0.5\n"));
        assert!(kv.contains("acc_class.1=0\n"));
        assert_eq!(r.csv_row("run"), "run,0.5,0.25,1,4");
    }
}
