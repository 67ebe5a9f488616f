//! Modality encoders, the shared linear classifier, and manual backprop.
//!
//! Encoders are ReLU MLPs with an identity output layer. The shared head maps
//! a latent vector to class logits and its gradient is handled as one flat
//! vector (weight row-major, then bias) so it can be projected directly.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{log_softmax_at, relu, relu_grad, softmax_rows, Matrix, RngStream};

/// Floor for probabilities inside the log of the cross-entropy.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    Image,
    Tabular,
}

impl Modality {
    pub const BOTH: [Modality; 2] = [Modality::Image, Modality::Tabular];

    pub fn other(self) -> Modality {
        match self {
            Modality::Image => Modality::Tabular,
            Modality::Tabular => Modality::Image,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Tabular => "tabular",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Modality::Image),
            "tabular" => Ok(Modality::Tabular),
            other => Err(Error::Config(format!("unknown modality {other:?}"))),
        }
    }
}

/// One affine layer, weight stored `[out × in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Length {
                op: "Dense::new",
                left: weight.rows(),
                right: bias.len(),
            });
        }
        Ok(Dense { weight, bias })
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Matrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    fn num_params(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul_t(&self.weight)?;
        z.add_row_vector(&self.bias)?;
        Ok(z)
    }
}

/// ReLU MLP: ReLU after every hidden layer, identity on the last.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

impl MlpParams {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(
                    "MlpParams::new",
                    pair[0].weight.shape(),
                    pair[1].weight.shape(),
                ));
            }
        }
        Ok(MlpParams { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Dense::output_dim));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    /// Parameters in declaration order: per layer, weight row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.data_mut().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.iter()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }
}

/// Intermediate values of an encoder pass needed for backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

/// Forward pass of an encoder; returns latents plus the backprop cache.
pub fn encode(params: &MlpParams, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    if x.cols() != params.input_dim() {
        return Err(Error::shape(
            "encode",
            x.shape(),
            params.layers[0].weight.transpose().shape(),
        ));
    }
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut h = x.clone();
    for (k, layer) in params.layers.iter().enumerate() {
        let z = layer.forward(&h)?;
        let out = if k + 1 < n { z.map(relu) } else { z.clone() };
        inputs.push(h);
        pre.push(z);
        h = out;
    }
    Ok((h, ForwardCache { inputs, pre }))
}

/// Backprop `d_out` (gradient w.r.t. encoder output) through the encoder.
/// `d_out` must already carry any batch averaging.
pub fn encoder_backward(params: &MlpParams, cache: &ForwardCache, d_out: &Matrix) -> Result<MlpParams> {
    let n = params.layers.len();
    let mut grads = Vec::with_capacity(n);
    let mut delta = d_out.clone();
    for k in (0..n).rev() {
        if k + 1 < n {
            for (d, &z) in delta.data_mut().iter_mut().zip(cache.pre[k].data()) {
                *d *= relu_grad(z);
            }
        }
        let weight = delta.t_matmul(&cache.inputs[k])?;
        let bias = delta.column_sums();
        if k > 0 {
            delta = delta.matmul(&params.layers[k].weight)?;
        }
        grads.push(Dense { weight, bias });
    }
    grads.reverse();
    Ok(MlpParams { layers: grads })
}

/// Linear classifier shared by both modalities.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedClassifier {
    /// `[classes × latent]`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl SharedClassifier {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Length {
                op: "SharedClassifier::new",
                left: weight.rows(),
                right: bias.len(),
            });
        }
        Ok(SharedClassifier { weight, bias })
    }

    pub fn zeros(latent: usize, classes: usize) -> Self {
        SharedClassifier {
            weight: Matrix::zeros(classes, latent),
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn num_params(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(self.weight.data());
        out.extend_from_slice(&self.bias);
        out
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.data_mut().iter_mut().chain(self.bias.iter_mut())
    }

    /// `self ← self − lr · direction`, `direction` in flattened layout.
    pub fn step(&mut self, direction: &[f64], lr: f64) -> Result<()> {
        if direction.len() != self.num_params() {
            return Err(Error::Length {
                op: "SharedClassifier::step",
                left: self.num_params(),
                right: direction.len(),
            });
        }
        for (p, d) in self.params_mut().zip(direction) {
            *p -= lr * d;
        }
        Ok(())
    }

    pub fn logits(&self, latent: &Matrix) -> Result<Matrix> {
        if latent.cols() != self.latent_dim() {
            return Err(Error::shape("head", latent.shape(), self.weight.shape()));
        }
        let mut z = latent.matmul_t(&self.weight)?;
        z.add_row_vector(&self.bias)?;
        Ok(z)
    }
}

/// Two encoders feeding one shared head.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub encoder_image: MlpParams,
    pub encoder_tabular: MlpParams,
    pub head: SharedClassifier,
}

impl ModelState {
    pub fn new(encoder_image: MlpParams, encoder_tabular: MlpParams, head: SharedClassifier) -> Result<Self> {
        for enc in [&encoder_image, &encoder_tabular] {
            if enc.output_dim() != head.latent_dim() {
                return Err(Error::Length {
                    op: "ModelState::new (encoder output vs head input)",
                    left: enc.output_dim(),
                    right: head.latent_dim(),
                });
            }
        }
        Ok(ModelState {
            encoder_image,
            encoder_tabular,
            head,
        })
    }

    pub fn encoder(&self, m: Modality) -> &MlpParams {
        match m {
            Modality::Image => &self.encoder_image,
            Modality::Tabular => &self.encoder_tabular,
        }
    }

    pub fn encoder_mut(&mut self, m: Modality) -> &mut MlpParams {
        match m {
            Modality::Image => &mut self.encoder_image,
            Modality::Tabular => &mut self.encoder_tabular,
        }
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn is_finite(&self) -> bool {
        self.encoder_image.is_finite()
            && self.encoder_tabular.is_finite()
            && self.head.flatten().iter().all(|v| v.is_finite())
    }
}

pub fn forward_logits(state: &ModelState, m: Modality, x: &Matrix) -> Result<Matrix> {
    let (latent, _) = encode(state.encoder(m), x)?;
    state.head.logits(&latent)
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&y| y >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

/// Mean cross-entropy of softmax(logits) against integer labels.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(Error::Length {
            op: "cross_entropy",
            left: logits.rows(),
            right: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("cross_entropy batch"));
    }
    check_labels(labels, logits.cols())?;
    let floor = LOG_PROB_FLOOR.ln();
    let total: f64 = logits
        .iter_rows()
        .zip(labels)
        .map(|(row, &y)| {
            // f64::max would swallow a NaN here.
            let lp = log_softmax_at(row, y);
            if lp.is_nan() {
                f64::NAN
            } else {
                -lp.max(floor)
            }
        })
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradients of the mean cross-entropy for one modality.
#[derive(Clone, Debug)]
pub struct BackwardResult {
    pub encoder_grads: MlpParams,
    /// Batch-mean head gradient, flattened.
    pub head_grad: Vec<f64>,
    /// Row `i` is the gradient of sample `i`'s own loss w.r.t. the head.
    pub head_grad_per_sample: Matrix,
    pub loss: f64,
    pub probs: Matrix,
}

/// Head-level backward: per-sample head gradients and `∂L/∂latent` for the
/// batch-mean loss.
pub(crate) struct HeadBackward {
    pub d_latent: Matrix,
    pub per_sample: Matrix,
    pub loss: f64,
    pub probs: Matrix,
}

pub(crate) fn head_backward(head: &SharedClassifier, latent: &Matrix, labels: &[usize]) -> Result<HeadBackward> {
    let logits = head.logits(latent)?;
    let loss = cross_entropy(&logits, labels)?;
    let probs = softmax_rows(&logits);
    let (b, classes, d) = (latent.rows(), head.classes(), head.latent_dim());

    // Per-sample ∂ℓᵢ/∂zᵢ = pᵢ − onehot(yᵢ).
    let mut dz = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        dz.set(i, y, dz.get(i, y) - 1.0);
    }

    let p = classes * d + classes;
    let mut per_sample = Matrix::zeros(b, p);
    for i in 0..b {
        let u = latent.row(i);
        let dzi = dz.row(i);
        let row = per_sample.row_mut(i);
        for c in 0..classes {
            let g = dzi[c];
            for (dst, &uj) in row[c * d..(c + 1) * d].iter_mut().zip(u) {
                *dst = g * uj;
            }
        }
        row[classes * d..].copy_from_slice(dzi);
    }

    dz.scale(1.0 / b as f64);
    let d_latent = dz.matmul(&head.weight)?;
    Ok(HeadBackward {
        d_latent,
        per_sample,
        loss,
        probs,
    })
}

/// Column mean of a `[B × P]` matrix, summed in row order.
pub fn mean_rows(m: &Matrix) -> Vec<f64> {
    let mut out = m.column_sums();
    let inv = 1.0 / m.rows() as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    out
}

/// Exact gradients of the mean cross-entropy of modality `m` w.r.t. that
/// modality's encoder and the shared head.
pub fn backward(state: &ModelState, m: Modality, x: &Matrix, labels: &[usize]) -> Result<BackwardResult> {
    if x.rows() != labels.len() {
        return Err(Error::Length {
            op: "backward",
            left: x.rows(),
            right: labels.len(),
        });
    }
    let encoder = state.encoder(m);
    let (latent, cache) = encode(encoder, x)?;
    let hb = head_backward(&state.head, &latent, labels)?;
    let encoder_grads = encoder_backward(encoder, &cache, &hb.d_latent)?;
    Ok(BackwardResult {
        encoder_grads,
        head_grad: mean_rows(&hb.per_sample),
        head_grad_per_sample: hb.per_sample,
        loss: hb.loss,
        probs: hb.probs,
    })
}

/// Layer widths of a two-encoder model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDims {
    pub image_in: usize,
    pub tabular_in: usize,
    /// Hidden widths, shared by both encoders.
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub classes: usize,
}

impl ModelDims {
    pub fn new(image_in: usize, tabular_in: usize, classes: usize) -> Self {
        ModelDims {
            image_in,
            tabular_in,
            hidden: vec![64],
            latent: 32,
            classes,
        }
    }

    fn chain(&self, input: usize) -> Vec<usize> {
        let mut c = vec![input];
        c.extend(&self.hidden);
        c.push(self.latent);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.image_in, self.tabular_in, self.latent, self.classes];
        if all.iter().chain(&self.hidden).any(|&d| d == 0) {
            return Err(Error::Config(format!("all layer widths must be positive: {self:?}")));
        }
        if self.classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        Ok(())
    }
}

/// `U(−√(6/fan_in), √(6/fan_in))` weights, zero biases.
fn init_dense(input: usize, output: usize, rng: &mut RngStream) -> Dense {
    let bound = (6.0 / input as f64).sqrt();
    let data = (0..input * output).map(|_| rng.uniform(-bound, bound)).collect();
    Dense {
        weight: Matrix::new(output, input, data).expect("sized by construction"),
        bias: vec![0.0; output],
    }
}

pub fn init_mlp(chain: &[usize], rng: &mut RngStream) -> Result<MlpParams> {
    if chain.len() < 2 || chain.contains(&0) {
        return Err(Error::Config(format!("invalid layer chain {chain:?}")));
    }
    MlpParams::new(chain.windows(2).map(|w| init_dense(w[0], w[1], rng)).collect())
}

pub fn init_params(dims: &ModelDims, rng: &RngStream) -> Result<ModelState> {
    dims.validate()?;
    let encoder_image = init_mlp(&dims.chain(dims.image_in), &mut rng.child(0))?;
    let encoder_tabular = init_mlp(&dims.chain(dims.tabular_in), &mut rng.child(1))?;
    let head = init_dense(dims.latent, dims.classes, &mut rng.child(2));
    ModelState::new(
        encoder_image,
        encoder_tabular,
        SharedClassifier {
            weight: head.weight,
            bias: head.bias,
        },
    )
}

/// Naive joint-learning model: one fused head on `[u_image : u_tabular]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub encoder_image: MlpParams,
    pub encoder_tabular: MlpParams,
    /// `[classes × 2·latent]`, image block first.
    pub head: SharedClassifier,
}

/// Gradients of the joint objective.
#[derive(Clone, Debug)]
pub struct JointBackward {
    pub image_grads: MlpParams,
    pub tabular_grads: MlpParams,
    pub head_grad: Vec<f64>,
    pub loss: f64,
    pub latent_image: Matrix,
    pub latent_tabular: Matrix,
}

impl JointState {
    pub fn encoder(&self, m: Modality) -> &MlpParams {
        match m {
            Modality::Image => &self.encoder_image,
            Modality::Tabular => &self.encoder_tabular,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_image.output_dim()
    }

    pub fn fused_logits(&self, x_image: &Matrix, x_tabular: &Matrix) -> Result<Matrix> {
        let (ui, _) = encode(&self.encoder_image, x_image)?;
        let (ut, _) = encode(&self.encoder_tabular, x_tabular)?;
        self.head.logits(&ui.hcat(&ut)?)
    }

    /// Fused head applied with the other modality's latent zeroed.
    pub fn unimodal_logits(&self, m: Modality, x: &Matrix) -> Result<Matrix> {
        let (u, _) = encode(self.encoder(m), x)?;
        self.head.logits(&self.pad_latent(m, &u)?)
    }

    pub(crate) fn pad_latent(&self, m: Modality, u: &Matrix) -> Result<Matrix> {
        let zeros = Matrix::zeros(u.rows(), self.latent_dim());
        match m {
            Modality::Image => u.hcat(&zeros),
            Modality::Tabular => zeros.hcat(u),
        }
    }

    pub fn backward(&self, x_image: &Matrix, x_tabular: &Matrix, labels: &[usize]) -> Result<JointBackward> {
        let (ui, ci) = encode(&self.encoder_image, x_image)?;
        let (ut, ct) = encode(&self.encoder_tabular, x_tabular)?;
        let fused = ui.hcat(&ut)?;
        let hb = head_backward(&self.head, &fused, labels)?;
        let d = self.latent_dim();
        let mut d_image = Matrix::zeros(ui.rows(), d);
        let mut d_tabular = Matrix::zeros(ut.rows(), d);
        for r in 0..ui.rows() {
            let row = hb.d_latent.row(r);
            d_image.row_mut(r).copy_from_slice(&row[..d]);
            d_tabular.row_mut(r).copy_from_slice(&row[d..]);
        }
        Ok(JointBackward {
            image_grads: encoder_backward(&self.encoder_image, &ci, &d_image)?,
            tabular_grads: encoder_backward(&self.encoder_tabular, &ct, &d_tabular)?,
            head_grad: mean_rows(&hb.per_sample),
            loss: hb.loss,
            latent_image: ui,
            latent_tabular: ut,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.encoder_image.is_finite()
            && self.encoder_tabular.is_finite()
            && self.head.flatten().iter().all(|v| v.is_finite())
    }
}

pub fn init_joint(dims: &ModelDims, rng: &RngStream) -> Result<JointState> {
    dims.validate()?;
    let encoder_image = init_mlp(&dims.chain(dims.image_in), &mut rng.child(0))?;
    let encoder_tabular = init_mlp(&dims.chain(dims.tabular_in), &mut rng.child(1))?;
    let head = init_dense(2 * dims.latent, dims.classes, &mut rng.child(2));
    Ok(JointState {
        encoder_image,
        encoder_tabular,
        head: SharedClassifier {
            weight: head.weight,
            bias: head.bias,
        },
    })
}
