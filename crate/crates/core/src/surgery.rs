//! Cross-modal gradient surgery on the shared-head gradient.
//!
//! The current modality's head gradient `g` is replaced by the point nearest
//! to it in Euclidean distance that satisfies `g_p · g̃ ≥ ε`, where `g_p` is
//! the head gradient of the other modality's most uncertain samples.

use crate::error::{Error, Result};
use crate::model::{backward, mean_rows, Modality, ModelState};
use crate::numerics::{dot, norm2, Matrix};

/// Default floor on `‖g_p‖²` below which surgery is skipped.
pub const DEFAULT_GP_NORM_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SurgeryConfig {
    /// Constraint margin ε.
    pub epsilon: f64,
    /// Fraction of the batch used as hard samples when the image modality
    /// supplies the reference gradient.
    pub lambda_image: f64,
    pub lambda_tabular: f64,
    /// Cross-modal gradient surgery.
    pub enable_cgs: bool,
    /// Entropy-based hard-sample selection for `g_p`; full batch when off.
    pub enable_ugg: bool,
    pub gp_norm_floor: f64,
}

impl Default for SurgeryConfig {
    fn default() -> Self {
        SurgeryConfig {
            epsilon: 0.01,
            lambda_image: 0.5,
            lambda_tabular: 0.5,
            enable_cgs: true,
            enable_ugg: true,
            gp_norm_floor: DEFAULT_GP_NORM_FLOOR,
        }
    }
}

impl SurgeryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon = {} must be finite and >= 0", self.epsilon)));
        }
        for (name, l) in [("lambda_image", self.lambda_image), ("lambda_tabular", self.lambda_tabular)] {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::Config(format!("{name} = {l} must lie in (0, 1]")));
            }
        }
        if !(self.gp_norm_floor >= 0.0) {
            return Err(Error::Config("gp_norm_floor must be >= 0".into()));
        }
        Ok(())
    }

    pub fn lambda(&self, m: Modality) -> f64 {
        match m {
            Modality::Image => self.lambda_image,
            Modality::Tabular => self.lambda_tabular,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurgeryResult {
    pub g_tilde: Vec<f64>,
    /// Dual weight; `g̃ = g + v·g_p`.
    pub v: f64,
    pub cos_raw: f64,
    pub applied: bool,
}

fn check_pair(g: &[f64], g_p: &[f64], op: &'static str) -> Result<()> {
    if g.len() != g_p.len() {
        return Err(Error::Length {
            op,
            left: g.len(),
            right: g_p.len(),
        });
    }
    if !g.iter().chain(g_p).all(|v| v.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(())
}

/// Cosine of the angle between two gradients; 0 if either norm is below
/// `floor`.
pub fn cosine_similarity(g: &[f64], g_p: &[f64], floor: f64) -> Result<f64> {
    let d = dot(g, g_p)?;
    let (a, b) = (norm2(g), norm2(g_p));
    if a < floor || b < floor {
        return Ok(0.0);
    }
    Ok((d / (a * b)).clamp(-1.0, 1.0))
}

/// Closed-form solution of `min ½‖g̃ − g‖²  s.t.  g_pᵀg̃ ≥ ε`.
///
/// `v = max(0, (ε − g_pᵀg)/‖g_p‖²)`, `g̃ = g + v·g_p`. When `‖g_p‖² < floor`
/// the constraint direction is undefined and `g` is returned unchanged.
pub fn project_gradient(g: &[f64], g_p: &[f64], epsilon: f64, floor: f64) -> Result<SurgeryResult> {
    check_pair(g, g_p, "project_gradient")?;
    let gp_sq = dot(g_p, g_p)?;
    let cos_raw = cosine_similarity(g, g_p, floor.sqrt())?;
    if gp_sq < floor {
        return Ok(SurgeryResult {
            g_tilde: g.to_vec(),
            v: 0.0,
            cos_raw,
            applied: false,
        });
    }
    let v = ((epsilon - dot(g_p, g)?) / gp_sq).max(0.0);
    if v > 0.0 {
        let g_tilde = g.iter().zip(g_p).map(|(a, b)| a + v * b).collect();
        Ok(SurgeryResult {
            g_tilde,
            v,
            cos_raw,
            applied: true,
        })
    } else {
        Ok(SurgeryResult {
            g_tilde: g.to_vec(),
            v: 0.0,
            cos_raw,
            applied: false,
        })
    }
}

/// Removes the `g_p` component of `g` unconditionally (`g̃ ⟂ g_p`).
///
/// Backs the orthogonal-projection baseline; `v` may be negative here.
pub fn orthogonalize(g: &[f64], g_p: &[f64], floor: f64) -> Result<SurgeryResult> {
    check_pair(g, g_p, "orthogonalize")?;
    let gp_sq = dot(g_p, g_p)?;
    let cos_raw = cosine_similarity(g, g_p, floor.sqrt())?;
    if gp_sq < floor {
        return Ok(SurgeryResult {
            g_tilde: g.to_vec(),
            v: 0.0,
            cos_raw,
            applied: false,
        });
    }
    let v = -dot(g_p, g)? / gp_sq;
    Ok(SurgeryResult {
        g_tilde: g.iter().zip(g_p).map(|(a, b)| a + v * b).collect(),
        v,
        cos_raw,
        applied: true,
    })
}

/// Shannon entropy (nats) of one predicted distribution, `0·ln 0 = 0`.
pub fn sample_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty distribution".into()));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidDistribution(format!("negative or non-finite entry in {p:?}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    let h: f64 = -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
    Ok(h.clamp(0.0, (p.len() as f64).ln()))
}

/// Entropy of every row of a probability matrix.
pub fn row_entropies(probs: &Matrix) -> Result<Vec<f64>> {
    probs.iter_rows().map(sample_entropy).collect()
}

/// Number of hard samples for a batch of `b` at fraction `lambda`.
pub fn hard_count(b: usize, lambda: f64) -> usize {
    ((lambda * b as f64).ceil() as usize).clamp(1, b.max(1))
}

/// Indices of the `max(1, ⌈λB⌉)` largest entropies, ties to the smaller
/// index, returned ascending.
pub fn select_hard(entropies: &[f64], lambda: f64) -> Result<Vec<usize>> {
    if entropies.is_empty() {
        return Err(Error::Empty("select_hard batch"));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("lambda = {lambda} must lie in (0, 1]")));
    }
    let k = hard_count(entropies.len(), lambda);
    let mut order: Vec<usize> = (0..entropies.len()).collect();
    order.sort_by(|&a, &b| entropies[b].total_cmp(&entropies[a]).then(a.cmp(&b)));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Mean per-sample head gradient of modality `m` over `hard_idx`, at the
/// current head and `m`'s encoder.
pub fn reference_gradient(
    state: &ModelState,
    m: Modality,
    x: &Matrix,
    labels: &[usize],
    hard_idx: &[usize],
) -> Result<Vec<f64>> {
    if hard_idx.is_empty() {
        return Err(Error::Empty("reference_gradient hard index set"));
    }
    if let Some(&bad) = hard_idx.iter().find(|&&i| i >= x.rows()) {
        return Err(Error::Length {
            op: "reference_gradient (index out of batch)",
            left: x.rows(),
            right: bad,
        });
    }
    let xs = x.select_rows(hard_idx);
    let ys: Vec<usize> = hard_idx.iter().map(|&i| labels[i]).collect();
    let res = backward(state, m, &xs, &ys)?;
    Ok(mean_rows(&res.head_grad_per_sample))
}
