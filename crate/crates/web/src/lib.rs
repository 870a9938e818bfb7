//! WebAssembly bindings for the browser demo.
//!
//! Every exported function takes and returns JSON strings so the page needs
//! no generated glue beyond `wasm-bindgen`'s. The logic lives in [`ops`] and
//! is tested natively.

use wasm_bindgen::prelude::*;

pub mod ops;

/// Classifies a map on the real line (or an interval). See [`ops::ClassifyRequest`].
#[wasm_bindgen]
pub fn classify(request: &str) -> Result<String, JsError> {
    ops::classify_json(request).map_err(|e| JsError::new(&e))
}

/// Classifies, then runs Picard iteration with the certified factor.
/// See [`ops::IterateRequest`].
#[wasm_bindgen]
pub fn iterate(request: &str) -> Result<String, JsError> {
    ops::iterate_json(request).map_err(|e| JsError::new(&e))
}

/// `max{a, b/(1-b(t-1)), c/(1-c(t-1))}`, or an error outside the admissible box.
#[wasm_bindgen]
pub fn contraction_factor(a: f64, b: f64, c: f64, t: usize) -> Result<f64, JsError> {
    ops::contraction_factor(a, b, c, t).map_err(|e| JsError::new(&e))
}
