use std::collections::BTreeMap;
use std::str::FromStr;

use dcpviz_core::analytics::RetroWindow;
use dcpviz_core::grid::{RegionMask, SeasonIndex};

use crate::error::ApiError;

/// Raw query string parameters with typed, problem-reporting accessors.
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn raw(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str).filter(|s| !s.is_empty())
    }

    pub fn parse<T: FromStr>(&self, name: &str) -> Result<Option<T>, ApiError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(name) {
            None => Ok(None),
            Some(s) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| ApiError::bad_param(name, "bad_parameter", format!("{name}: {e}"))),
        }
    }

    pub fn flag(&self, name: &str) -> Result<bool, ApiError> {
        match self.raw(name) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(s) => Err(ApiError::bad_param(name, "bad_parameter", format!("{name}: `{s}` is not a boolean"))),
        }
    }

    /// Finite float.
    pub fn number(&self, name: &str) -> Result<Option<f64>, ApiError> {
        let v: Option<f64> = self.parse(name)?;
        match v {
            Some(x) if !x.is_finite() => Err(ApiError::bad_param(name, "bad_parameter", format!("{name} must be finite"))),
            v => Ok(v),
        }
    }

    pub fn season(&self, name: &str) -> Result<Option<SeasonIndex>, ApiError> {
        match self.parse::<u8>(name)? {
            None => Ok(None),
            Some(s) => SeasonIndex::new(s)
                .map(Some)
                .map_err(|e| ApiError::bad_param(name, "bad_parameter", e.to_string())),
        }
    }

    /// Region by id or case-insensitive name.
    pub fn region(&self, mask: Option<&RegionMask>) -> Result<u32, ApiError> {
        let key = self
            .raw("region")
            .ok_or_else(|| ApiError::bad_param("region", "missing_parameter", "`region` is required"))?;
        mask.and_then(|m| m.resolve(key))
            .ok_or_else(|| ApiError::bad_param("region", "unknown_region", format!("unknown region `{key}`")))
    }

    /// Inclusive year range from `<prefix>_start`/`<prefix>_end`; either
    /// bound may be open.
    pub fn year_range(&self, prefix: &str) -> Result<Option<(i32, i32)>, ApiError> {
        let (s, e) = (format!("{prefix}_start"), format!("{prefix}_end"));
        let a: Option<i32> = self.parse(&s)?;
        let b: Option<i32> = self.parse(&e)?;
        match (a, b) {
            (None, None) => Ok(None),
            (a, b) => {
                let (a, b) = (a.unwrap_or(i32::MIN), b.unwrap_or(i32::MAX));
                if a > b {
                    return Err(ApiError::bad_param(&s, "invalid_range", format!("{s} {a} is after {e} {b}")));
                }
                Ok(Some((a, b)))
            }
        }
    }

    pub fn retro(&self) -> Result<RetroWindow, ApiError> {
        let d = RetroWindow::DEFAULT;
        let t0 = self.parse("retro_start")?.unwrap_or(d.t0);
        let t1 = self.parse("retro_end")?.unwrap_or(d.t1);
        RetroWindow::new(t0, t1).map_err(|e| ApiError::bad_param("retro_start", "invalid_window", e.to_string()))
    }

    pub fn page(&self, default_limit: usize, max_limit: usize) -> Result<(usize, usize), ApiError> {
        let offset = self.parse("offset")?.unwrap_or(0);
        let limit: usize = self.parse("limit")?.unwrap_or(default_limit);
        if limit == 0 {
            return Err(ApiError::bad_param("limit", "bad_parameter", "limit must be positive"));
        }
        Ok((offset, limit.min(max_limit)))
    }
}
