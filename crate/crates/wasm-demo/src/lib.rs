//! WebAssembly bindings for the demo page. The page generates a synthetic
//! archive in the browser, then contours any month, renders its thumbnail
//! and draws a relative-intensity heatmap for a region.

pub mod explorer;

use wasm_bindgen::prelude::*;

pub use explorer::{parse_ramp, swatches, DemoError, Explorer, HeatCell, Swatch};

fn js(e: DemoError) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo values serialize")
}

#[wasm_bindgen]
pub struct Demo {
    inner: Explorer,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        Explorer::generate(seed as u64).map(|inner| Demo { inner }).map_err(js)
    }

    /// `{"1": "Northeast", ...}`
    pub fn regions(&self) -> String {
        json(self.inner.regions())
    }

    pub fn first_year(&self) -> i32 {
        explorer::FIRST_YEAR
    }

    pub fn last_year(&self) -> i32 {
        explorer::LAST_YEAR
    }

    /// GeoJSON FeatureCollection of the month's bands.
    pub fn contour(&self, year: i32, month: u32, thresholds: &str) -> Result<String, JsError> {
        self.inner.geojson(year, month, thresholds).map_err(js)
    }

    /// PNG bytes.
    pub fn thumbnail(&self, year: i32, month: u32, thresholds: &str, ramp: &str, width: u32) -> Result<Vec<u8>, JsError> {
        let ramp = parse_ramp(ramp).map_err(js)?;
        self.inner.thumbnail(year, month, thresholds, ramp, width).map_err(js)
    }

    /// JSON array of `{year, month, value, ri_signed}`.
    pub fn heatmap(&self, region: u32, retro_start: i32, retro_end: i32) -> Result<String, JsError> {
        self.inner.heatmap(region, retro_start, retro_end).map(|c| json(&c)).map_err(js)
    }
}

/// JSON array of `{lo, hi, color}` legend entries.
#[wasm_bindgen]
pub fn legend(thresholds: &str, ramp: &str) -> Result<String, JsError> {
    let ramp = parse_ramp(ramp).map_err(js)?;
    swatches(thresholds, ramp).map(|s| json(&s)).map_err(js)
}
