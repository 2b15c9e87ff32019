//! Regional aggregation and anomaly analytics over monthly snapshots.
//!
//! `RegionalSeries` holds the monthly regional means; the retrospective mean
//! of a season is the mean of its three monthly values over every year of a
//! `RetroWindow`, and relative intensity measures a month against that
//! baseline.

mod export;
mod summary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use export::{
    read_aggregate_csv, write_aggregate_csv, write_anomaly_csv, AggregateRow, AnomalyRow,
};
pub use summary::{scenario_spread, treemap_hierarchy, ScenarioSpread, SpreadRow, TreeNode};

use crate::grid::{GridSnapshot, RegionMask, Scenario, SeasonIndex, Variable};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("snapshot and mask axes differ")]
    AxisMismatch,
    #[error("season {season} of {year} is incomplete")]
    IncompleteSeason { year: i32, season: SeasonIndex },
    #[error("year {0} does not have all 12 months")]
    IncompleteYear(i32),
    #[error("retrospective window {t0}-{t1} lacks season {season} of {year}")]
    IncompleteWindow {
        t0: i32,
        t1: i32,
        year: i32,
        season: SeasonIndex,
    },
    #[error("no value for {year}-{month:02}")]
    MissingMonth { year: i32, month: u32 },
    #[error("retrospective mean is zero")]
    ZeroBaseline,
    #[error("invalid retrospective window {t0}-{t1}")]
    InvalidWindow { t0: i32, t1: i32 },
    #[error("no common years across scenarios")]
    NoCommonYears,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad aggregate record: {0}")]
    BadRecord(String),
}

/// How cells are weighted inside a regional mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Weight each cell by the cosine of its latitude.
    CosLatitude,
}

/// Per-region `(mean, cell_count)` of one snapshot. Regions with no valid
/// cells are absent.
pub fn regional_monthly_mean(
    snapshot: &GridSnapshot,
    mask: &RegionMask,
    weighting: Weighting,
) -> Result<BTreeMap<u32, (f64, usize)>, AnalyticsError> {
    if !mask.matches_axes(&snapshot.lat, &snapshot.lon) {
        return Err(AnalyticsError::AxisMismatch);
    }
    let nlon = snapshot.lon.len();
    let mut acc: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
    let values = snapshot.values();
    let missing = snapshot.missing_mask();
    for (k, &id) in mask.ids().iter().enumerate() {
        if id == 0 || missing[k] {
            continue;
        }
        let w = match weighting {
            Weighting::Unweighted => 1.0,
            Weighting::CosLatitude => snapshot.lat[k / nlon].to_radians().cos(),
        };
        let e = acc.entry(id).or_insert((0.0, 0.0, 0));
        e.0 += w * values[k];
        e.1 += w;
        e.2 += 1;
    }
    Ok(acc
        .into_iter()
        .filter(|(_, (_, w, _))| *w > 0.0)
        .map(|(id, (sum, w, n))| (id, (sum / w, n)))
        .collect())
}

/// Monthly regional means `X_r(y, m)` for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalSeries {
    pub region_id: u32,
    pub variable: Variable,
    pub model: String,
    pub scenario: Scenario,
    entries: BTreeMap<(i32, u32), f64>,
    cell_counts: BTreeMap<(i32, u32), usize>,
}

impl RegionalSeries {
    pub fn new(region_id: u32, variable: Variable, model: impl Into<String>, scenario: Scenario) -> Self {
        RegionalSeries {
            region_id,
            variable,
            model: model.into(),
            scenario,
            entries: BTreeMap::new(),
            cell_counts: BTreeMap::new(),
        }
    }

    /// Records a monthly mean. Zero-count entries are ignored.
    pub fn insert(&mut self, year: i32, month: u32, value: f64, cell_count: usize) {
        if cell_count == 0 {
            return;
        }
        self.entries.insert((year, month), value);
        self.cell_counts.insert((year, month), cell_count);
    }

    pub fn get(&self, year: i32, month: u32) -> Option<f64> {
        self.entries.get(&(year, month)).copied()
    }

    pub fn cell_count(&self, year: i32, month: u32) -> Option<usize> {
        self.cell_counts.get(&(year, month)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `((year, month), value)` in chronological order.
    pub fn iter(&self) -> impl Iterator<Item = ((i32, u32), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn years(&self) -> Vec<i32> {
        let mut ys: Vec<i32> = self.entries.keys().map(|&(y, _)| y).collect();
        ys.dedup();
        ys
    }

    /// Copies entries of `other` (same region and variable) into `self`,
    /// keeping existing values on conflict.
    pub fn merge_from(&mut self, other: &RegionalSeries) {
        for (&k, &v) in &other.entries {
            if let std::collections::btree_map::Entry::Vacant(e) = self.entries.entry(k) {
                e.insert(v);
                self.cell_counts.insert(k, other.cell_counts[&k]);
            }
        }
    }

    fn season_values(&self, year: i32, season: SeasonIndex) -> Option<[f64; 3]> {
        let [a, b, c] = season.months();
        Some([self.get(year, a)?, self.get(year, b)?, self.get(year, c)?])
    }
}

/// Folds snapshots into one series per region in the mask.
pub fn build_series<'a>(
    snapshots: impl IntoIterator<Item = &'a GridSnapshot>,
    mask: &RegionMask,
    scenario: Scenario,
    weighting: Weighting,
) -> Result<BTreeMap<u32, RegionalSeries>, AnalyticsError> {
    let mut out: BTreeMap<u32, RegionalSeries> = BTreeMap::new();
    for snap in snapshots {
        for (id, (mean, n)) in regional_monthly_mean(snap, mask, weighting)? {
            out.entry(id)
                .or_insert_with(|| RegionalSeries::new(id, snap.variable, snap.model.clone(), scenario))
                .insert(snap.year, snap.month, mean, n);
        }
    }
    Ok(out)
}

/// Unweighted mean of the season's three monthly means.
pub fn seasonal_mean(
    series: &RegionalSeries,
    year: i32,
    season: SeasonIndex,
) -> Result<f64, AnalyticsError> {
    let [a, b, c] = series
        .season_values(year, season)
        .ok_or(AnalyticsError::IncompleteSeason { year, season })?;
    Ok((a + b + c) / 3.0)
}

/// Unweighted mean of the twelve monthly means.
pub fn yearly_mean(series: &RegionalSeries, year: i32) -> Result<f64, AnalyticsError> {
    let mut sum = 0.0;
    for m in 1..=12 {
        sum += series.get(year, m).ok_or(AnalyticsError::IncompleteYear(year))?;
    }
    Ok(sum / 12.0)
}

/// Inclusive baseline year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RetroWindow {
    pub t0: i32,
    pub t1: i32,
}

impl RetroWindow {
    pub const DEFAULT: RetroWindow = RetroWindow { t0: 1985, t1: 2005 };

    pub fn new(t0: i32, t1: i32) -> Result<Self, AnalyticsError> {
        if t0 > t1 {
            return Err(AnalyticsError::InvalidWindow { t0, t1 });
        }
        Ok(RetroWindow { t0, t1 })
    }

    pub fn delta_t(&self) -> i32 {
        self.t1 - self.t0 + 1
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.t0..=self.t1
    }

    pub fn contains(&self, year: i32) -> bool {
        self.years().contains(&year)
    }
}

impl Default for RetroWindow {
    fn default() -> Self {
        RetroWindow::DEFAULT
    }
}

/// Seasonal baseline: the sum of the season's three monthly means over every
/// year of the window, divided by `3 * delta_t`.
pub fn retrospective_mean(
    series: &RegionalSeries,
    window: RetroWindow,
    season: SeasonIndex,
) -> Result<f64, AnalyticsError> {
    let mut sum = 0.0;
    for year in window.years() {
        let vals = series
            .season_values(year, season)
            .ok_or(AnalyticsError::IncompleteWindow {
                t0: window.t0,
                t1: window.t1,
                year,
                season,
            })?;
        for v in vals {
            sum += v;
        }
    }
    Ok(sum / (3.0 * f64::from(window.delta_t())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyCell {
    pub year: i32,
    pub month: u32,
    pub region_id: u32,
    pub value: f64,
    pub baseline: f64,
    pub ri_signed: f64,
    pub ri_magnitude: f64,
}

/// `(signed, magnitude)` relative intensity of `x` against baseline `rm`.
///
/// The magnitude is `|rm - x| / rm` for positive baselines. Dividing by
/// `|rm|` keeps the sign meaning "above baseline" for negative baselines.
pub fn ri_pair(rm: f64, x: f64) -> Result<(f64, f64), AnalyticsError> {
    if rm == 0.0 {
        return Err(AnalyticsError::ZeroBaseline);
    }
    let denom = rm.abs();
    Ok(((x - rm) / denom, (rm - x).abs() / denom))
}

pub fn relative_intensity(
    series: &RegionalSeries,
    window: RetroWindow,
    year: i32,
    month: u32,
) -> Result<AnomalyCell, AnalyticsError> {
    let season = SeasonIndex::of_month(month)
        .map_err(|_| AnalyticsError::MissingMonth { year, month })?;
    let rm = retrospective_mean(series, window, season)?;
    let x = series
        .get(year, month)
        .ok_or(AnalyticsError::MissingMonth { year, month })?;
    let (ri_signed, ri_magnitude) = ri_pair(rm, x)?;
    Ok(AnomalyCell {
        year,
        month,
        region_id: series.region_id,
        value: x,
        baseline: rm,
        ri_signed,
        ri_magnitude,
    })
}

/// Relative intensity for each listed month; `None` marks an undefined cell
/// (zero baseline, incomplete window, or missing month).
pub fn anomaly_table(
    series: &RegionalSeries,
    window: RetroWindow,
    months: impl IntoIterator<Item = (i32, u32)>,
) -> Vec<((i32, u32), Option<AnomalyCell>)> {
    let baselines: Vec<Option<f64>> = SeasonIndex::ALL
        .iter()
        .map(|&s| retrospective_mean(series, window, s).ok())
        .collect();
    months
        .into_iter()
        .map(|(year, month)| {
            let cell = SeasonIndex::of_month(month).ok().and_then(|s| {
                let rm = baselines[s.index() as usize]?;
                let x = series.get(year, month)?;
                let (ri_signed, ri_magnitude) = ri_pair(rm, x).ok()?;
                Some(AnomalyCell {
                    year,
                    month,
                    region_id: series.region_id,
                    value: x,
                    baseline: rm,
                    ri_signed,
                    ri_magnitude,
                })
            });
            ((year, month), cell)
        })
        .collect()
}
