//! In-memory grid model: monthly snapshots on a rectilinear lat/lon grid,
//! canonical units, region masks and seasons.

mod mask;
mod season;
mod time;
pub mod units;

use std::fmt;
use std::io::{Read, Seek};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use mask::{RegionMask, NCA_REGIONS};
pub use season::SeasonIndex;
pub use time::{decode_time_axis, TimeAxisError};

use crate::netcdf::{NcError, NcFile};

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("missing coordinate variable `{0}`")]
    MissingCoordinate(String),
    #[error("unknown units `{units}` for {variable}")]
    UnitUnknown { variable: String, units: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("region id {0} has no name entry")]
    UnknownRegionId(u32),
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("scenario {scenario} cannot hold year {year}")]
    ScenarioYear { scenario: Scenario, year: i32 },
    #[error("time index {index} outside 0..{len}")]
    TimeIndex { index: usize, len: usize },
    #[error("bad time axis: {0}")]
    Time(#[from] TimeAxisError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Pr,
    Tasmax,
    Tasmin,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Pr, Variable::Tasmax, Variable::Tasmin];

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Pr => "pr",
            Variable::Tasmax => "tasmax",
            Variable::Tasmin => "tasmin",
        }
    }

    pub fn canonical_units(self) -> &'static str {
        units::canonical_units(self)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variable {
    type Err = GridError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pr" => Ok(Variable::Pr),
            "tasmax" => Ok(Variable::Tasmax),
            "tasmin" => Ok(Variable::Tasmin),
            other => Err(GridError::Parse(format!("unknown variable `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Historical,
    Rcp26,
    Rcp45,
    Rcp85,
}

/// Last year of the historical record; projections start the year after.
pub const LAST_HISTORICAL_YEAR: i32 = 2005;

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Historical,
        Scenario::Rcp26,
        Scenario::Rcp45,
        Scenario::Rcp85,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Historical => "historical",
            Scenario::Rcp26 => "rcp26",
            Scenario::Rcp45 => "rcp45",
            Scenario::Rcp85 => "rcp85",
        }
    }

    pub fn is_projection(self) -> bool {
        self != Scenario::Historical
    }

    pub fn admits_year(self, year: i32) -> bool {
        if self.is_projection() {
            year > LAST_HISTORICAL_YEAR
        } else {
            year <= LAST_HISTORICAL_YEAR
        }
    }

    /// The scenario whose files hold `year` for a query on `self`.
    pub fn source_for_year(self, year: i32) -> Scenario {
        if year <= LAST_HISTORICAL_YEAR {
            Scenario::Historical
        } else {
            self
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = GridError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['.', '_'], "").as_str() {
            "historical" => Ok(Scenario::Historical),
            "rcp26" => Ok(Scenario::Rcp26),
            "rcp45" => Ok(Scenario::Rcp45),
            "rcp85" => Ok(Scenario::Rcp85),
            _ => Err(GridError::Parse(format!("unknown scenario `{s}`"))),
        }
    }
}

pub(crate) fn check_axis(name: &str, axis: &[f64]) -> Result<(), GridError> {
    if axis.is_empty() {
        return Err(GridError::InvalidAxis(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(GridError::InvalidAxis(format!("{name} axis has non-finite values")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GridError::InvalidAxis(format!(
            "{name} axis is not strictly ascending"
        )));
    }
    Ok(())
}

/// One monthly field in canonical units, stored row-major `[lat][lon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSnapshot {
    pub variable: Variable,
    pub model: String,
    pub scenario: Scenario,
    pub year: i32,
    pub month: u32,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl GridSnapshot {
    /// Builds a snapshot, zeroing any value under the mask and rejecting NaN
    /// outside it.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variable: Variable,
        model: impl Into<String>,
        scenario: Scenario,
        year: i32,
        month: u32,
        lat: Vec<f64>,
        lon: Vec<f64>,
        mut values: Vec<f64>,
        mut missing: Vec<bool>,
    ) -> Result<Self, GridError> {
        check_axis("lat", &lat)?;
        check_axis("lon", &lon)?;
        let n = lat.len() * lon.len();
        if values.len() != n || missing.len() != n {
            return Err(GridError::ShapeMismatch(format!(
                "expected {} x {} = {n} cells, got {} values and {} mask entries",
                lat.len(),
                lon.len(),
                values.len(),
                missing.len()
            )));
        }
        if !(1..=12).contains(&month) {
            return Err(GridError::Parse(format!("month {month} outside 1..=12")));
        }
        if !scenario.admits_year(year) {
            return Err(GridError::ScenarioYear { scenario, year });
        }
        for (v, m) in values.iter_mut().zip(missing.iter_mut()) {
            if !v.is_finite() {
                *m = true;
            }
            if *m {
                *v = 0.0;
            }
        }
        Ok(GridSnapshot {
            variable,
            model: model.into(),
            scenario,
            year,
            month,
            lat,
            lon,
            values,
            missing,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.lat.len(), self.lon.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    /// `None` for missing cells.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.lon.len() + j;
        (!self.missing[k]).then_some(self.values[k])
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.lon.len() + j]
    }

    pub fn units(&self) -> &'static str {
        self.variable.canonical_units()
    }

    /// Min and max over valid cells.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.missing)
            .filter(|(_, &m)| !m)
            .fold(None, |acc, (&v, _)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// Applies `f` to every valid value (mask unchanged).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> GridSnapshot {
        let mut out = self.clone();
        for (v, &m) in out.values.iter_mut().zip(&self.missing) {
            if !m {
                *v = f(*v);
            }
        }
        out
    }
}

/// Identity of the run a file belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub model: String,
    pub scenario: Scenario,
}

const LAT_NAMES: [&str; 2] = ["lat", "latitude"];
const LON_NAMES: [&str; 2] = ["lon", "longitude"];

fn read_coordinate<R: Read + Seek>(
    file: &NcFile,
    src: &mut R,
    names: &[&str],
) -> Result<(String, Vec<f64>), GridError> {
    for name in names {
        if let (Some(var), Some(dim)) = (file.variable(name), file.dimension(name)) {
            if var.dim_ids.len() == 1 && file.dimensions[var.dim_ids[0]].name == dim.name {
                let slab = file.read_slab(src, name, &[0], &[file.shape(var)[0]])?;
                if slab.missing.iter().any(|&m| m) {
                    return Err(GridError::InvalidAxis(format!("`{name}` has fill values")));
                }
                return Ok((name.to_string(), slab.values));
            }
        }
    }
    Err(GridError::MissingCoordinate(names[0].to_string()))
}

/// Number of time steps for `variable` in `file`.
pub fn time_len(file: &NcFile, variable: Variable) -> Result<usize, GridError> {
    let var = file
        .variable(variable.as_str())
        .ok_or_else(|| NcError::NoSuchVariable(variable.to_string()))?;
    Ok(file.shape(var).first().copied().unwrap_or(0))
}

/// Extracts time step `time_index` of `variable` as a canonical-unit snapshot.
///
/// Descending axes are flipped to ascending order and 0..360 longitudes are
/// shifted to -180..180.
pub fn snapshot_from_slab<R: Read + Seek>(
    file: &NcFile,
    src: &mut R,
    variable: Variable,
    time_index: usize,
    meta: &SnapshotMeta,
) -> Result<GridSnapshot, GridError> {
    let var = file
        .variable(variable.as_str())
        .ok_or_else(|| NcError::NoSuchVariable(variable.to_string()))?;
    let (lat_name, mut lat) = read_coordinate(file, src, &LAT_NAMES)?;
    let (lon_name, mut lon) = read_coordinate(file, src, &LON_NAMES)?;
    let dims = file.dim_names(var);
    if dims.len() != 3 || dims[1] != lat_name || dims[2] != lon_name {
        return Err(GridError::ShapeMismatch(format!(
            "`{variable}` has dimensions {dims:?}, expected (time, {lat_name}, {lon_name})"
        )));
    }
    let ntime = file.shape(var)[0];
    if time_index >= ntime {
        return Err(GridError::TimeIndex {
            index: time_index,
            len: ntime,
        });
    }
    let time_var = file
        .variable(dims[0])
        .ok_or_else(|| GridError::MissingCoordinate(dims[0].to_string()))?;
    let time_slab = file.read_slab(src, dims[0], &[time_index], &[1])?;
    let (year, month) = decode_time_axis(
        time_var.units().unwrap_or(""),
        time_var.attr("calendar").and_then(|a| a.as_text()),
        time_slab.values[0],
    )?;

    let units = var.units().ok_or_else(|| GridError::UnitUnknown {
        variable: variable.to_string(),
        units: String::new(),
    })?;
    let conv = units::conversion_for(variable, units)?;

    let (nlat, nlon) = (lat.len(), lon.len());
    let slab = file.read_slab(src, variable.as_str(), &[time_index, 0, 0], &[1, nlat, nlon])?;
    let mut values: Vec<f64> = slab.values.iter().map(|&v| conv.apply(v)).collect();
    let mut missing = slab.missing;

    if nlat > 1 && lat[0] > lat[nlat - 1] {
        lat.reverse();
        flip_rows(&mut values, nlat, nlon);
        flip_rows(&mut missing, nlat, nlon);
    }
    if lon.iter().all(|&x| x >= 180.0) {
        lon.iter_mut().for_each(|x| *x -= 360.0);
    }
    if nlon > 1 && lon[0] > lon[nlon - 1] {
        lon.reverse();
        for row in 0..nlat {
            values[row * nlon..(row + 1) * nlon].reverse();
            missing[row * nlon..(row + 1) * nlon].reverse();
        }
    }
    GridSnapshot::new(
        variable,
        meta.model.clone(),
        meta.scenario,
        year,
        month,
        lat,
        lon,
        values,
        missing,
    )
}

fn flip_rows<T>(data: &mut [T], nrows: usize, ncols: usize) {
    for r in 0..nrows / 2 {
        let (top, bottom) = data.split_at_mut((nrows - 1 - r) * ncols);
        top[r * ncols..(r + 1) * ncols].swap_with_slice(&mut bottom[..ncols]);
    }
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use super::*;
    use crate::netcdf::{
        parse_header, write_synthetic_archive, AxisSpec, Encoding, Generator, SyntheticSpec,
        VarSpec,
    };

    fn file_with(var: &str, units: &str, value: f64) -> Vec<u8> {
        let spec = SyntheticSpec {
            format: crate::netcdf::FormatVersion::Cdf2,
            model: "CESM1-CAM5".into(),
            scenario: "rcp85".into(),
            lat: AxisSpec {
                start: 40.0,
                step: -1.0,
                count: 3,
            },
            lon: AxisSpec {
                start: 250.0,
                step: 0.5,
                count: 4,
            },
            start_year: 2036,
            start_month: 1,
            months: 24,
            variables: vec![VarSpec {
                name: var.into(),
                units: units.into(),
                generator: Generator::Constant { value },
                encoding: Encoding::Double,
                missing_fraction: 0.0,
            }],
            seed: 1,
            record_time: false,
        };
        write_synthetic_archive(&spec).unwrap()
    }

    fn meta() -> SnapshotMeta {
        SnapshotMeta {
            model: "CESM1-CAM5".into(),
            scenario: Scenario::Rcp85,
        }
    }

    #[test]
    fn kelvin_freezing_point_becomes_zero() {
        let bytes = file_with("tasmax", "K", 273.15);
        let file = parse_header(&bytes[..]).unwrap();
        let snap =
            snapshot_from_slab(&file, &mut Cursor::new(&bytes), Variable::Tasmax, 0, &meta())
                .unwrap();
        assert!(snap.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flux_becomes_mm_per_day() {
        let bytes = file_with("pr", "kg m-2 s-1", 1.0);
        let file = parse_header(&bytes[..]).unwrap();
        let snap =
            snapshot_from_slab(&file, &mut Cursor::new(&bytes), Variable::Pr, 0, &meta()).unwrap();
        assert!(snap.values().iter().all(|&v| v == 86_400.0));
    }

    #[test]
    fn month_index_13_is_february_next_year() {
        let bytes = file_with("pr", "mm/day", 1.0);
        let file = parse_header(&bytes[..]).unwrap();
        let snap =
            snapshot_from_slab(&file, &mut Cursor::new(&bytes), Variable::Pr, 13, &meta())
                .unwrap();
        assert_eq!((snap.year, snap.month), (2037, 2));
    }

    #[test]
    fn axes_are_normalized() {
        let bytes = file_with("pr", "mm/day", 1.0);
        let file = parse_header(&bytes[..]).unwrap();
        let snap =
            snapshot_from_slab(&file, &mut Cursor::new(&bytes), Variable::Pr, 0, &meta()).unwrap();
        assert_eq!(snap.lat, vec![38.0, 39.0, 40.0]);
        assert_eq!(snap.lon, vec![-110.0, -109.5, -109.0, -108.5]);
    }

    #[test]
    fn unknown_units_rejected() {
        let bytes = file_with("pr", "inches/fortnight", 1.0);
        let file = parse_header(&bytes[..]).unwrap();
        assert!(matches!(
            snapshot_from_slab(&file, &mut Cursor::new(&bytes), Variable::Pr, 0, &meta()),
            Err(GridError::UnitUnknown { .. })
        ));
    }

    #[test]
    fn scenario_year_consistency() {
        let r = GridSnapshot::new(
            Variable::Pr,
            "m",
            Scenario::Historical,
            2030,
            1,
            vec![0.0],
            vec![0.0],
            vec![1.0],
            vec![false],
        );
        assert!(matches!(r, Err(GridError::ScenarioYear { .. })));
    }

    #[test]
    fn nan_goes_to_mask() {
        let s = GridSnapshot::new(
            Variable::Pr,
            "m",
            Scenario::Rcp45,
            2030,
            1,
            vec![0.0, 1.0],
            vec![0.0],
            vec![f64::NAN, 2.0],
            vec![false, false],
        )
        .unwrap();
        assert_eq!(s.missing_mask(), &[true, false]);
        assert!(s.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn row_flip() {
        let mut d = vec![1, 2, 3, 4, 5, 6];
        flip_rows(&mut d, 3, 2);
        assert_eq!(d, vec![5, 6, 3, 4, 1, 2]);
    }
}
