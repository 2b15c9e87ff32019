//! In-memory synthetic archive plus the operations the demo page exposes.

use std::collections::BTreeMap;
use std::io::Cursor;

use serde::Serialize;

use dcpviz_core::analytics::{anomaly_table, build_series, AnalyticsError, RegionalSeries, RetroWindow, Weighting};
use dcpviz_core::contour::{
    marching_squares_bands, ramp, render_thumbnail, to_geojson, BandSpec, ContourError, ContourParams,
    ContourProduct, RampId,
};
use dcpviz_core::grid::{snapshot_from_slab, GridError, GridSnapshot, RegionMask, Scenario, SnapshotMeta, Variable};
use dcpviz_core::index::{make_index, IndexError};
use dcpviz_core::netcdf::{
    parse_header, write_synthetic_archive, AxisSpec, Encoding, FormatVersion, Generator, NcError, SyntheticSpec,
    VarSpec,
};

pub const MODEL: &str = "CESM1-CAM5";
pub const FIRST_YEAR: i32 = 2001;
pub const LAST_YEAR: i32 = 2012;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    NetCdf(#[from] NcError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("no snapshot for {0}-{1:02}")]
    NoSnapshot(i32, u32),
    #[error("unknown region {0}")]
    UnknownRegion(u32),
    #[error("unknown ramp `{0}`")]
    UnknownRamp(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatCell {
    pub year: i32,
    pub month: u32,
    pub value: f64,
    /// `None` when the baseline is incomplete or zero.
    pub ri_signed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Swatch {
    pub lo: f64,
    pub hi: f64,
    pub color: String,
}

/// Monthly precipitation for 2001-2012 on a coarse grid: a historical file
/// for 2001-2005 and an rcp85 file for the rest, written as NetCDF in memory
/// and read back through the normal ingest path.
pub struct Explorer {
    snapshots: BTreeMap<(i32, u32), GridSnapshot>,
    mask: RegionMask,
    series: BTreeMap<u32, RegionalSeries>,
}

fn spec(seed: u64, scenario: &str, start_year: i32, years: usize) -> SyntheticSpec {
    SyntheticSpec {
        format: FormatVersion::Cdf2,
        model: MODEL.into(),
        scenario: scenario.into(),
        lat: AxisSpec { start: 24.5, step: 1.0, count: 26 },
        lon: AxisSpec { start: -124.5, step: 1.5, count: 40 },
        start_year,
        start_month: 1,
        months: 12 * years,
        variables: vec![VarSpec {
            name: "pr".into(),
            units: "kg m-2 s-1".into(),
            generator: Generator::Climate,
            encoding: Encoding::Float,
            missing_fraction: 0.0,
        }],
        seed,
        record_time: true,
    }
}

pub fn parse_ramp(name: &str) -> Result<RampId, DemoError> {
    match name {
        "yl_gn_bu" => Ok(RampId::YlGnBu),
        "rd_yl_bu" => Ok(RampId::RdYlBu),
        "temperature" => Ok(RampId::Temperature),
        _ => Err(DemoError::UnknownRamp(name.into())),
    }
}

impl Explorer {
    pub fn generate(seed: u64) -> Result<Explorer, DemoError> {
        let files = [
            (spec(seed, "historical", FIRST_YEAR, 5), Scenario::Historical),
            (spec(seed.wrapping_add(1), "rcp85", 2006, (LAST_YEAR - 2005) as usize), Scenario::Rcp85),
        ];
        let mut snapshots = BTreeMap::new();
        for (spec, scenario) in files {
            let bytes = write_synthetic_archive(&spec)?;
            let file = parse_header(&bytes[..])?;
            let mut src = Cursor::new(&bytes);
            let meta = SnapshotMeta {
                model: MODEL.into(),
                scenario,
            };
            for k in 0..spec.months {
                let s = snapshot_from_slab(&file, &mut src, Variable::Pr, k, &meta)?;
                snapshots.insert((s.year, s.month), s);
            }
        }
        let first = snapshots.values().next().expect("archive has months");
        let mask = RegionMask::synthetic_nca(first.lat.clone(), first.lon.clone())?;
        let series = build_series(snapshots.values(), &mask, Scenario::Rcp85, Weighting::Unweighted)?;
        Ok(Explorer { snapshots, mask, series })
    }

    pub fn regions(&self) -> &BTreeMap<u32, String> {
        self.mask.names()
    }

    pub fn snapshot(&self, year: i32, month: u32) -> Result<&GridSnapshot, DemoError> {
        self.snapshots.get(&(year, month)).ok_or(DemoError::NoSnapshot(year, month))
    }

    pub fn contour(&self, year: i32, month: u32, thresholds: &str) -> Result<ContourProduct, DemoError> {
        let s = self.snapshot(year, month)?;
        let spec = BandSpec::parse(thresholds)?;
        let idx = make_index("NEX-DCP", MODEL, "pr", year, month)?;
        Ok(marching_squares_bands(s, &spec, idx, ContourParams::default())?)
    }

    pub fn geojson(&self, year: i32, month: u32, thresholds: &str) -> Result<String, DemoError> {
        Ok(to_geojson(&self.contour(year, month, thresholds)?))
    }

    pub fn thumbnail(&self, year: i32, month: u32, thresholds: &str, ramp: RampId, width: u32) -> Result<Vec<u8>, DemoError> {
        let p = self.contour(year, month, thresholds)?;
        let [x0, y0, x1, y1] = p.bbox;
        let height = ((width as f64) * (y1 - y0) / (x1 - x0)).round().max(1.0) as u32;
        Ok(render_thumbnail(&p, width, height, ramp)?)
    }

    /// Signed relative intensity of every month against the baseline
    /// window `t0..=t1`.
    pub fn heatmap(&self, region: u32, t0: i32, t1: i32) -> Result<Vec<HeatCell>, DemoError> {
        let s = self.series.get(&region).ok_or(DemoError::UnknownRegion(region))?;
        let window = RetroWindow::new(t0, t1)?;
        let months: Vec<(i32, u32)> = s.iter().map(|(k, _)| k).collect();
        Ok(anomaly_table(s, window, months)
            .into_iter()
            .map(|((year, month), cell)| HeatCell {
                year,
                month,
                value: s.get(year, month).unwrap_or(f64::NAN),
                ri_signed: cell.map(|c| c.ri_signed),
            })
            .collect())
    }
}

/// Legend entries for `thresholds` under `ramp`.
pub fn swatches(thresholds: &str, ramp_id: RampId) -> Result<Vec<Swatch>, DemoError> {
    let spec = BandSpec::parse(thresholds)?;
    let r = ramp(ramp_id);
    let n = spec.band_count();
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = spec.band_range(i);
            let [red, green, blue] = r.band_color(i, n).0;
            Swatch {
                lo,
                hi,
                color: format!("#{red:02x}{green:02x}{blue:02x}"),
            }
        })
        .collect())
}
