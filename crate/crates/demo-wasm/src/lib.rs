//! wasm-bindgen exports for the static page in `www/`.

use wasm_bindgen::prelude::*;

pub mod ops;

/// Spectral radius of the MGSS iteration matrix over a log grid of
/// `(alpha, beta)`; see [`ops::spectral_radius_map`].
#[wasm_bindgen(js_name = spectralRadiusMap)]
pub fn spectral_radius_map(grid: usize, nu: f64, stab: f64, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    ops::spectral_radius_map(grid, nu, stab, lo, hi, steps).map_err(|e| JsError::new(&e))
}

/// Residual histories as JSON: `[{method, converged, iterations, inner_iterations, residuals}]`.
#[wasm_bindgen(js_name = residualHistories)]
pub fn residual_histories(grid: usize, nu: f64, stab: f64, alpha: f64, beta: f64) -> Result<String, JsError> {
    let runs = ops::residual_histories(grid, nu, stab, alpha, beta).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&runs).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = sparsityPattern)]
pub fn sparsity_pattern(grid: usize, nu: f64, stab: f64) -> Result<Vec<u32>, JsError> {
    ops::sparsity_pattern(grid, nu, stab).map_err(|e| JsError::new(&e))
}
