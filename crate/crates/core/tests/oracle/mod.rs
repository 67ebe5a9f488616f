//! Reference implementations that the property tests compare against.
//! Written with plain loops and no shared code paths with the library.
#![allow(dead_code)]

use gaal_core::model::{backward, Modality, ModelDims, ModelState};
use gaal_core::numerics::Matrix;
use gaal_core::RngStream;

/// Mean cross-entropy of modality `m` by explicit loops, plus the smallest
/// |pre-activation| seen in a hidden layer (distance to a ReLU kink).
pub fn naive_loss(state: &ModelState, m: Modality, x: &Matrix, labels: &[usize]) -> (f64, f64) {
    let enc = match m {
        Modality::Image => &state.encoder_image,
        Modality::Tabular => &state.encoder_tabular,
    };
    let n_layers = enc.layers.len();
    let mut total = 0.0;
    let mut min_gap = f64::INFINITY;
    for (i, &y) in labels.iter().enumerate() {
        let mut h: Vec<f64> = x.row(i).to_vec();
        for (k, layer) in enc.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.weight.rows()];
            for (j, zj) in z.iter_mut().enumerate() {
                let mut acc = layer.bias[j];
                for (c, hc) in h.iter().enumerate() {
                    acc += layer.weight.get(j, c) * hc;
                }
                *zj = acc;
            }
            if k + 1 < n_layers {
                for zj in &mut z {
                    min_gap = min_gap.min(zj.abs());
                    *zj = zj.max(0.0);
                }
            }
            h = z;
        }
        let head = &state.head;
        let logits: Vec<f64> = (0..head.weight.rows())
            .map(|c| head.bias[c] + (0..h.len()).map(|j| head.weight.get(c, j) * h[j]).sum::<f64>())
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += lse - logits[y];
    }
    (total / labels.len() as f64, min_gap)
}

fn param_mut(state: &mut ModelState, m: Modality, idx: usize) -> &mut f64 {
    let enc_len = state.encoder(m).num_params();
    if idx < enc_len {
        state.encoder_mut(m).params_mut().nth(idx).unwrap()
    } else {
        state.head.params_mut().nth(idx - enc_len).unwrap()
    }
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub n_params: usize,
}

/// Denominator floor for the relative error, so parameters whose gradient
/// is essentially zero are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-4;

/// Central finite differences of [`naive_loss`] against the analytic
/// encoder + head gradient of `backward`.
pub fn finite_difference_check(state: &ModelState, m: Modality, x: &Matrix, labels: &[usize], h: f64) -> GradCheck {
    let res = backward(state, m, x, labels).unwrap();
    let analytic: Vec<f64> = res.encoder_grads.flatten().into_iter().chain(res.head_grad).collect();
    let mut work = state.clone();
    let mut max_rel_err: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *param_mut(&mut work, m, i);
        *param_mut(&mut work, m, i) = orig + h;
        let (lp, _) = naive_loss(&work, m, x, labels);
        *param_mut(&mut work, m, i) = orig - h;
        let (lm, _) = naive_loss(&work, m, x, labels);
        *param_mut(&mut work, m, i) = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel_err = max_rel_err.max(rel);
    }
    GradCheck {
        max_rel_err,
        n_params: analytic.len(),
    }
}

/// A random model with at most `max_params` parameters per modality, an
/// input batch away from ReLU kinks, and labels.
pub fn random_small_case(rng: &mut RngStream, max_params: usize) -> (ModelState, Matrix, Matrix, Vec<usize>) {
    loop {
        let image_in = 2 + rng.below(6);
        let tabular_in = 2 + rng.below(6);
        let hidden = vec![2 + rng.below(8)];
        let latent = 2 + rng.below(5);
        let classes = 2 + rng.below(3);
        let dims = ModelDims {
            hidden,
            latent,
            ..ModelDims::new(image_in, tabular_in, classes)
        };
        let state = gaal_core::model::init_params(&dims, &rng.child(7)).unwrap();
        let per_modality = |m: Modality| state.encoder(m).num_params() + state.head.num_params();
        if per_modality(Modality::Image).max(per_modality(Modality::Tabular)) > max_params {
            continue;
        }
        // Non-zero biases so the test covers them too.
        let mut state = state;
        for m in Modality::BOTH {
            for l in &mut state.encoder_mut(m).layers {
                for b in &mut l.bias {
                    *b = rng.uniform(-0.5, 0.5);
                }
            }
        }
        for b in &mut state.head.bias {
            *b = rng.uniform(-0.5, 0.5);
        }
        let batch = 3 + rng.below(6);
        let xi = Matrix::new(batch, image_in, (0..batch * image_in).map(|_| rng.normal()).collect()).unwrap();
        let xt = Matrix::new(batch, tabular_in, (0..batch * tabular_in).map(|_| rng.normal()).collect()).unwrap();
        let labels: Vec<usize> = (0..batch).map(|_| rng.below(classes)).collect();
        let gap = Modality::BOTH
            .iter()
            .map(|&m| naive_loss(&state, m, if m == Modality::Image { &xi } else { &xt }, &labels).1)
            .fold(f64::INFINITY, f64::min);
        // Central differences straddling a kink measure a different function.
        if gap > 1e-3 {
            return (state, xi, xt, labels);
        }
    }
}

/// Minimizer of ½‖x − g‖² s.t. g_p·x ≥ ε found numerically: the
/// multiplier of the single constraint is located by bisection on the KKT
/// condition instead of being solved for in closed form.
pub fn qp_oracle(g: &[f64], g_p: &[f64], eps: f64) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let at = |lambda: f64| -> Vec<f64> { g.iter().zip(g_p).map(|(a, b)| a + lambda * b).collect() };
    if dot(g_p, g) >= eps {
        return g.to_vec();
    }
    let slack = |lambda: f64| dot(g_p, &at(lambda)) - eps;
    let mut hi = 1.0;
    while slack(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slack(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// Top-k by repeated linear scans: each pass takes the largest remaining
/// entropy, first index on ties.
pub fn select_hard_oracle(entropies: &[f64], lambda: f64) -> Vec<usize> {
    let b = entropies.len();
    let k = ((lambda * b as f64).ceil() as usize).max(1).min(b);
    let mut taken = vec![false; b];
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..b {
            if taken[i] {
                continue;
            }
            if best.map_or(true, |j| entropies[i] > entropies[j]) {
                best = Some(i);
            }
        }
        taken[best.unwrap()] = true;
    }
    (0..b).filter(|&i| taken[i]).collect()
}

pub fn entropy_oracle(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}
