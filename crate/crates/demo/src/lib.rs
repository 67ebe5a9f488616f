//! WebAssembly bindings for the browser demo in `www/`.

use gaal_core::experiment::{run_synthetic, RunSpec};
use gaal_core::numerics::{softmax_rows, Matrix};
use gaal_core::surgery::{cosine_similarity, orthogonalize, project_gradient, row_entropies, select_hard, DEFAULT_GP_NORM_FLOOR};
use gaal_core::BaselineMode;
use wasm_bindgen::prelude::*;

fn js_err(e: gaal_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Projection {
    g_tilde: Vec<f64>,
    v: f64,
    cos_before: f64,
    cos_after: f64,
    applied: bool,
}

#[wasm_bindgen]
impl Projection {
    #[wasm_bindgen(getter)]
    pub fn g_tilde(&self) -> Vec<f64> {
        self.g_tilde.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn v(&self) -> f64 {
        self.v
    }
    #[wasm_bindgen(getter)]
    pub fn cos_before(&self) -> f64 {
        self.cos_before
    }
    #[wasm_bindgen(getter)]
    pub fn cos_after(&self) -> f64 {
        self.cos_after
    }
    #[wasm_bindgen(getter)]
    pub fn applied(&self) -> bool {
        self.applied
    }
}

/// Projects `g` against the reference direction `g_p`. With `orthogonal` the
/// `g_p` component is always removed instead of enforcing the margin.
#[wasm_bindgen]
pub fn project(g: Vec<f64>, g_p: Vec<f64>, epsilon: f64, orthogonal: bool) -> Result<Projection, JsError> {
    let r = if orthogonal {
        orthogonalize(&g, &g_p, DEFAULT_GP_NORM_FLOOR)
    } else {
        project_gradient(&g, &g_p, epsilon, DEFAULT_GP_NORM_FLOOR)
    }
    .map_err(js_err)?;
    let cos_after = cosine_similarity(&r.g_tilde, &g_p, DEFAULT_GP_NORM_FLOOR.sqrt()).map_err(js_err)?;
    Ok(Projection {
        cos_before: r.cos_raw,
        cos_after,
        v: r.v,
        applied: r.applied,
        g_tilde: r.g_tilde,
    })
}

#[wasm_bindgen]
pub struct Selection {
    probs: Vec<f64>,
    entropies: Vec<f64>,
    hard: Vec<u32>,
}

#[wasm_bindgen]
impl Selection {
    /// Row-major softmax probabilities.
    #[wasm_bindgen(getter)]
    pub fn probs(&self) -> Vec<f64> {
        self.probs.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn entropies(&self) -> Vec<f64> {
        self.entropies.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn hard(&self) -> Vec<u32> {
        self.hard.clone()
    }
}

/// Softmax entropies of a row-major logit batch and the `⌈λB⌉` most
/// uncertain rows.
#[wasm_bindgen]
pub fn hard_samples(logits: Vec<f64>, classes: usize, lambda: f64) -> Result<Selection, JsError> {
    if classes == 0 || logits.len() % classes != 0 {
        return Err(JsError::new("logit count is not a multiple of the class count"));
    }
    let z = Matrix::new(logits.len() / classes, classes, logits).map_err(js_err)?;
    let p = softmax_rows(&z);
    let entropies = row_entropies(&p).map_err(js_err)?;
    let hard = select_hard(&entropies, lambda).map_err(js_err)?;
    Ok(Selection {
        probs: p.iter_rows().flatten().copied().collect(),
        entropies,
        hard: hard.into_iter().map(|i| i as u32).collect(),
    })
}

#[wasm_bindgen]
pub struct RunSummary {
    acc_multi: Vec<f64>,
    loss_image: Vec<f64>,
    loss_tabular: Vec<f64>,
    cos_prev: Vec<f64>,
    test: Vec<f64>,
}

#[wasm_bindgen]
impl RunSummary {
    /// Validation fused accuracy per epoch.
    #[wasm_bindgen(getter)]
    pub fn acc_multi(&self) -> Vec<f64> {
        self.acc_multi.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn loss_image(&self) -> Vec<f64> {
        self.loss_image.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn loss_tabular(&self) -> Vec<f64> {
        self.loss_tabular.clone()
    }
    /// Cosine between consecutive applied head directions, one per step.
    #[wasm_bindgen(getter)]
    pub fn cos_prev(&self) -> Vec<f64> {
        self.cos_prev.clone()
    }
    /// Test accuracy `[fused, image, tabular]`.
    #[wasm_bindgen(getter)]
    pub fn test(&self) -> Vec<f64> {
        self.test.clone()
    }
}

/// Trains on a small synthetic problem and returns the learning curves.
#[wasm_bindgen]
pub fn train_run(seed: u32, n: usize, epochs: usize, baseline: &str, surgery: bool) -> Result<RunSummary, JsError> {
    let mut spec = RunSpec::default();
    spec.data.n = n;
    spec.train.epochs = epochs;
    spec.train.baseline = baseline.parse::<BaselineMode>().map_err(js_err)?;
    spec.train.surgery.enable_cgs = surgery;
    spec.train.surgery.enable_ugg = surgery;
    let r = run_synthetic(&spec, u64::from(seed)).map_err(js_err)?;
    let e = &r.output.epochs;
    Ok(RunSummary {
        acc_multi: e.iter().map(|m| m.acc_multi).collect(),
        loss_image: e.iter().map(|m| m.loss_image).collect(),
        loss_tabular: e.iter().map(|m| m.loss_tabular).collect(),
        cos_prev: r.output.diag.iter().filter_map(|d| d.cos_prev).collect(),
        test: vec![r.report.acc_multi, r.report.acc_image, r.report.acc_tabular],
    })
}
