//! Browser demo bindings.
//!
//! The exported operations are: a gaze heatmap for a set of highlights,
//! step-by-step episodes under a baseline policy, and a side-by-side policy
//! comparison. The logic lives in [`demo`] so it can be tested natively.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js_err(e: String) -> JsError {
    JsError::new(&e)
}

/// Canonical attribute names, in display order, as a JSON array.
#[wasm_bindgen]
pub fn attribute_names() -> String {
    demo::attribute_names_json()
}

/// Gaze probability of all 32 icons given highlight bits (0/1 per icon).
#[wasm_bindgen]
pub fn gaze_heatmap(highlights: &[u8], highlight_boost: f64, temperature: f64) -> Result<Vec<f64>, JsError> {
    demo::gaze_heatmap(highlights, highlight_boost, temperature).map_err(js_err)
}

/// Mean episode reward of never, rule-based and always highlighting, as JSON.
#[wasm_bindgen]
pub fn compare_policies(
    episodes: u32,
    seed: u32,
    highlight_penalty: f64,
    highlight_boost: f64,
) -> Result<String, JsError> {
    demo::compare_policies(episodes as usize, seed as u64, highlight_penalty, highlight_boost).map_err(js_err)
}

/// One episode stepped from JavaScript.
#[wasm_bindgen]
pub struct Episode {
    inner: demo::DemoEpisode,
}

#[wasm_bindgen]
impl Episode {
    #[wasm_bindgen(constructor)]
    pub fn new(policy: &str, seed: u32, highlight_boost: f64) -> Result<Episode, JsError> {
        Ok(Episode {
            inner: demo::DemoEpisode::new(policy, seed as u64, highlight_boost).map_err(js_err)?,
        })
    }

    /// Advance one step and return the new frame as JSON.
    pub fn step(&mut self) -> Result<String, JsError> {
        let frame = self.inner.step().map_err(js_err)?;
        Ok(serde_json::to_string(&frame).expect("serializable frame"))
    }

    /// The current frame as JSON.
    pub fn frame(&self) -> String {
        serde_json::to_string(&self.inner.frame()).expect("serializable frame")
    }

    pub fn done(&self) -> bool {
        self.inner.done()
    }
}
