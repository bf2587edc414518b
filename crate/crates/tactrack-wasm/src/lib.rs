//! wasm-bindgen surface for the browser demo. Every export takes a JSON
//! config string and returns a JSON result string; all real work lives in
//! [`demo`], which is plain Rust and unit-tested on the host.

use wasm_bindgen::prelude::*;

pub mod demo;

/// Runs all three tracking modes on one synthetic trajectory and returns
/// ground-truth/estimated paths plus per-frame errors and aggregates.
#[wasm_bindgen]
pub fn compare_modes(config: &str) -> Result<String, JsError> {
    demo::compare_modes(config).map_err(|e| JsError::new(&e))
}

/// Sweeps the sliding-window length for fused tracking and returns the
/// error-vs-N curve.
#[wasm_bindgen]
pub fn window_sweep(config: &str) -> Result<String, JsError> {
    demo::window_sweep(config).map_err(|e| JsError::new(&e))
}

/// Sweeps contact position noise and returns fused vs kinematics-only
/// error curves.
#[wasm_bindgen]
pub fn noise_sweep(config: &str) -> Result<String, JsError> {
    demo::noise_sweep(config).map_err(|e| JsError::new(&e))
}
