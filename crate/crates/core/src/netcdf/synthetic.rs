//! Seeded desk-scale stand-ins for monthly downscaled projection files.

use std::f64::consts::TAU;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttrValue, FormatVersion, NcAttribute, NcBuilder, NcError, VarData};
use crate::grid::{units::conversion_for, Variable};

pub const TIME_UNITS: &str = "days since 1950-01-01 00:00:00";

/// A regularly spaced coordinate axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.start + self.step * i as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Every cell holds `value` (file units).
    Constant { value: f64 },
    /// Independent uniform draws in `[lo, hi)` (file units).
    Uniform { lo: f64, hi: f64 },
    /// Smooth spatial pattern with a seasonal cycle and a slow trend.
    #[default]
    Climate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Float,
    Double,
    PackedShort { scale: f64, offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    pub units: String,
    #[serde(default)]
    pub generator: Generator,
    #[serde(default)]
    pub encoding: Encoding,
    /// Fraction of grid cells that are fill (same cells every month).
    #[serde(default)]
    pub missing_fraction: f64,
}

fn default_format() -> FormatVersion {
    FormatVersion::Cdf1
}
fn default_start_month() -> u32 {
    1
}
fn default_months() -> usize {
    60
}
fn default_true() -> bool {
    true
}

/// Description of one synthetic archive file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_format")]
    pub format: FormatVersion,
    pub model: String,
    pub scenario: String,
    pub lat: AxisSpec,
    pub lon: AxisSpec,
    pub start_year: i32,
    #[serde(default = "default_start_month")]
    pub start_month: u32,
    /// One file spans five years unless told otherwise.
    #[serde(default = "default_months")]
    pub months: usize,
    pub variables: Vec<VarSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Store time as the unlimited (record) dimension.
    #[serde(default = "default_true")]
    pub record_time: bool,
}

pub(crate) const FLOAT_FILL: f32 = 1.0e20;
pub(crate) const SHORT_FILL: i16 = i16::MIN;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), NcError> {
        let bad = |m: String| Err(NcError::SpecInvalid(m));
        if self.lat.count == 0 || self.lon.count == 0 || self.months == 0 {
            return bad("zero-length dimension".into());
        }
        if !(self.lat.step.is_finite() && self.lon.step.is_finite())
            || self.lat.step == 0.0
            || self.lon.step == 0.0
        {
            return bad("axis step must be finite and nonzero".into());
        }
        if !(1..=12).contains(&self.start_month) {
            return bad(format!("start_month {} outside 1..=12", self.start_month));
        }
        if self.variables.is_empty() {
            return bad("no variables".into());
        }
        let mut names: Vec<&str> = vec!["time", "lat", "lon"];
        for v in &self.variables {
            if v.name.is_empty() || names.contains(&v.name.as_str()) {
                return bad(format!("duplicate variable name `{}`", v.name));
            }
            names.push(&v.name);
            if !(0.0..1.0).contains(&v.missing_fraction) {
                return bad(format!("`{}`: missing_fraction must be in [0, 1)", v.name));
            }
            if let Encoding::PackedShort { scale, .. } = v.encoding {
                if scale == 0.0 || !scale.is_finite() {
                    return bad(format!("`{}`: packing scale must be nonzero", v.name));
                }
            }
            if v.generator == Generator::Climate {
                let var = Variable::from_str(&v.name).map_err(|_| {
                    NcError::SpecInvalid(format!(
                        "`{}`: the climate generator needs pr, tasmax or tasmin",
                        v.name
                    ))
                })?;
                conversion_for(var, &v.units)
                    .map_err(|e| NcError::SpecInvalid(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// `(year, month)` of the `k`-th time step.
    pub fn year_month(&self, k: usize) -> (i32, u32) {
        let m0 = self.start_month as i64 - 1 + k as i64;
        (self.start_year + m0.div_euclid(12) as i32, m0.rem_euclid(12) as u32 + 1)
    }

    fn time_values(&self) -> Vec<f64> {
        let epoch = NaiveDate::from_ymd_opt(1950, 1, 1).expect("valid epoch");
        (0..self.months)
            .map(|k| {
                let (y, m) = self.year_month(k);
                let mid = NaiveDate::from_ymd_opt(y, m, 15).expect("valid mid-month date");
                (mid - epoch).num_days() as f64
            })
            .collect()
    }
}

fn var_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, mixed with the spec seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Physical values in the file's own units plus the fill mask, before encoding.
fn generate(spec: &SyntheticSpec, var: &VarSpec) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(var_seed(spec.seed, &var.name));
    let lat = spec.lat.values();
    let lon = spec.lon.values();
    let (nlat, nlon) = (lat.len(), lon.len());
    let cells = nlat * nlon;

    let missing_cells: Vec<bool> = (0..cells)
        .map(|_| rng.gen::<f64>() < var.missing_fraction)
        .collect();

    let span = |a: &[f64]| (a[a.len() - 1] - a[0]).abs().max(1e-9);
    let (lat_span, lon_span) = (span(&lat), span(&lon));
    let phases: [f64; 4] = [
        rng.gen::<f64>() * TAU,
        rng.gen::<f64>() * TAU,
        rng.gen::<f64>() * TAU,
        rng.gen::<f64>() * TAU,
    ];

    let trend = scenario_trend(&spec.scenario);
    let mut values = Vec::with_capacity(spec.months * cells);
    let mut missing = Vec::with_capacity(spec.months * cells);
    for k in 0..spec.months {
        let (year, month) = spec.year_month(k);
        let absolute = i64::from(year) * 12 + i64::from(month);
        let mut rng = ChaCha8Rng::seed_from_u64(var_seed(spec.seed ^ absolute as u64, &var.name));
        let wobble: [f64; 3] = [
            rng.gen::<f64>() * TAU,
            rng.gen::<f64>() * TAU,
            rng.gen::<f64>() - 0.5,
        ];
        for i in 0..nlat {
            for j in 0..nlon {
                let y = (lat[i] - lat[0]) / lat_span;
                let x = (lon[j] - lon[0]) / lon_span;
                let v = match &var.generator {
                    Generator::Constant { value } => *value,
                    Generator::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
                    Generator::Climate => {
                        let kind = Variable::from_str(&var.name).expect("validated");
                        let canonical = climate_value(
                            kind, lat[i], x, y, year, month, &phases, &wobble, trend,
                        );
                        conversion_for(kind, &var.units)
                            .expect("validated")
                            .invert(canonical)
                    }
                };
                values.push(v);
                missing.push(missing_cells[i * nlon + j]);
            }
        }
    }
    (values, missing)
}

/// Multiplier on the long-term trend, so the pathways drift apart.
fn scenario_trend(scenario: &str) -> f64 {
    match scenario.to_ascii_lowercase().replace(['.', '_'], "").as_str() {
        "rcp26" => 0.4,
        "rcp85" => 2.0,
        _ => 1.0,
    }
}

#[allow(clippy::too_many_arguments)]
fn climate_value(
    kind: Variable,
    lat_deg: f64,
    x: f64,
    y: f64,
    year: i32,
    month: u32,
    phases: &[f64; 4],
    wobble: &[f64; 3],
    trend: f64,
) -> f64 {
    let season = TAU * (f64::from(month) - 1.0) / 12.0;
    let years = trend * f64::from(year - 2000);
    let weather = wobble[2] * (TAU * x + wobble[0]).sin() * (TAU * y + wobble[1]).cos();
    match kind {
        Variable::Pr => {
            let base = 2.6
                + 1.3 * (TAU * 1.3 * x + phases[0]).sin()
                + 0.9 * (TAU * 0.9 * y + phases[1]).cos();
            let seasonal = 0.8 * (season + phases[2] + 2.0 * x).sin();
            (base + seasonal + 0.01 * years + 0.6 * weather).max(0.0)
        }
        Variable::Tasmax | Variable::Tasmin => {
            let base = 31.0 - 0.65 * (lat_deg - 25.0) + 2.0 * (TAU * x + phases[3]).sin();
            let seasonal = -13.0 * (season + 0.3).cos();
            let t = base + seasonal + 0.035 * years + 1.5 * weather;
            if kind == Variable::Tasmin {
                t - 12.5
            } else {
                t
            }
        }
    }
}

enum Encoded {
    Float(Vec<f32>),
    Double(Vec<f64>),
    Short(Vec<i16>),
}

fn encode(var: &VarSpec, values: &[f64], missing: &[bool]) -> (Encoded, Vec<f64>) {
    match var.encoding {
        Encoding::Float => {
            let raw: Vec<f32> = values
                .iter()
                .zip(missing)
                .map(|(&v, &m)| if m { FLOAT_FILL } else { v as f32 })
                .collect();
            let expected = raw
                .iter()
                .zip(missing)
                .map(|(&r, &m)| if m { 0.0 } else { f64::from(r) })
                .collect();
            (Encoded::Float(raw), expected)
        }
        Encoding::Double => {
            let fill = f64::from(FLOAT_FILL);
            let raw: Vec<f64> = values
                .iter()
                .zip(missing)
                .map(|(&v, &m)| if m { fill } else { v })
                .collect();
            let expected = values
                .iter()
                .zip(missing)
                .map(|(&v, &m)| if m { 0.0 } else { v })
                .collect();
            (Encoded::Double(raw), expected)
        }
        Encoding::PackedShort { scale, offset } => {
            let raw: Vec<i16> = values
                .iter()
                .zip(missing)
                .map(|(&v, &m)| {
                    if m {
                        SHORT_FILL
                    } else {
                        ((v - offset) / scale).round().clamp(-32767.0, 32767.0) as i16
                    }
                })
                .collect();
            let expected = raw
                .iter()
                .zip(missing)
                .map(|(&r, &m)| if m { 0.0 } else { f64::from(r) * scale + offset })
                .collect();
            (Encoded::Short(raw), expected)
        }
    }
}

/// Unpacked values and mask that reading `var_name` back must reproduce, in
/// `(time, lat, lon)` order.
pub fn expected_values(spec: &SyntheticSpec, var_name: &str) -> Result<(Vec<f64>, Vec<bool>), NcError> {
    spec.validate()?;
    let var = spec
        .variables
        .iter()
        .find(|v| v.name == var_name)
        .ok_or_else(|| NcError::NoSuchVariable(var_name.to_string()))?;
    let (values, missing) = generate(spec, var);
    let (_, expected) = encode(var, &values, &missing);
    Ok((expected, missing))
}

fn text(name: &str, value: &str) -> NcAttribute {
    NcAttribute {
        name: name.to_string(),
        value: AttrValue::Text(value.to_string()),
    }
}

/// Serializes `spec` as a classic NetCDF file with dimensions `(time, lat, lon)`.
pub fn write_synthetic_archive(spec: &SyntheticSpec) -> Result<Vec<u8>, NcError> {
    spec.validate()?;
    let mut b = NcBuilder::new(spec.format);
    let t = if spec.record_time {
        b.record_dim("time", spec.months)?
    } else {
        b.dim("time", spec.months)?
    };
    let la = b.dim("lat", spec.lat.count)?;
    let lo = b.dim("lon", spec.lon.count)?;

    b.global_attr("Conventions", AttrValue::Text("CF-1.4".into()))
        .global_attr("title", AttrValue::Text("synthetic monthly downscaled projection".into()))
        .global_attr("model_id", AttrValue::Text(spec.model.clone()))
        .global_attr("experiment_id", AttrValue::Text(spec.scenario.clone()))
        .global_attr("frequency", AttrValue::Text("mon".into()))
        .global_attr("seed", AttrValue::Doubles(vec![spec.seed as f64]));

    b.var(
        "time",
        &[t],
        vec![
            text("units", TIME_UNITS),
            text("calendar", "standard"),
            text("axis", "T"),
        ],
        VarData::Double(spec.time_values()),
    )?;
    b.var(
        "lat",
        &[la],
        vec![text("units", "degrees_north"), text("axis", "Y")],
        VarData::Double(spec.lat.values()),
    )?;
    b.var(
        "lon",
        &[lo],
        vec![text("units", "degrees_east"), text("axis", "X")],
        VarData::Double(spec.lon.values()),
    )?;

    for var in &spec.variables {
        let (values, missing) = generate(spec, var);
        let (encoded, _) = encode(var, &values, &missing);
        let mut attrs = vec![text("units", &var.units), text("long_name", &var.name)];
        let data = match encoded {
            Encoded::Float(raw) => {
                attrs.push(NcAttribute {
                    name: "_FillValue".into(),
                    value: AttrValue::Floats(vec![FLOAT_FILL]),
                });
                VarData::Float(raw)
            }
            Encoded::Double(raw) => {
                attrs.push(NcAttribute {
                    name: "_FillValue".into(),
                    value: AttrValue::Doubles(vec![f64::from(FLOAT_FILL)]),
                });
                VarData::Double(raw)
            }
            Encoded::Short(raw) => {
                let Encoding::PackedShort { scale, offset } = var.encoding else {
                    unreachable!()
                };
                attrs.push(NcAttribute {
                    name: "_FillValue".into(),
                    value: AttrValue::Shorts(vec![SHORT_FILL]),
                });
                attrs.push(NcAttribute {
                    name: "scale_factor".into(),
                    value: AttrValue::Doubles(vec![scale]),
                });
                attrs.push(NcAttribute {
                    name: "add_offset".into(),
                    value: AttrValue::Doubles(vec![offset]),
                });
                VarData::Short(raw)
            }
        };
        b.var(&var.name, &[t, la, lo], attrs, data)?;
    }
    Ok(b.finish()?.1)
}
