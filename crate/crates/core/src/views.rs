//! Read models over a product store: the catalog document and the series
//! behind each chart, built from stored aggregate CSVs.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::analytics::{
    anomaly_table, read_aggregate_csv, scenario_spread, seasonal_mean, treemap_hierarchy, yearly_mean,
    AnalyticsError, RegionalSeries, RetroWindow, ScenarioSpread, TreeNode,
};
use crate::contour::{ramps, BandSpec, Ramp};
use crate::grid::{RegionMask, Scenario, SeasonIndex, Variable, LAST_HISTORICAL_YEAR};
use crate::store::{ProductKey, ProductKind, Query, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ViewError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("stored aggregate {key} is unreadable: {source}")]
    BadAggregate {
        key: String,
        #[source]
        source: AnalyticsError,
    },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// Which stored series to read.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesKey {
    pub dataset: String,
    pub model: String,
    pub variable: Variable,
    pub scenario: Scenario,
}

/// Per-region monthly series for `key`. Projection scenarios are joined
/// with the historical aggregates of the same model, so baselines before
/// 2006 resolve; every returned series carries `key.scenario`.
pub fn load_series(store: &Store, key: &SeriesKey) -> Result<BTreeMap<u32, RegionalSeries>, ViewError> {
    let mut scenarios = vec![key.scenario];
    if key.scenario.is_projection() {
        scenarios.push(Scenario::Historical);
    }
    let mut out: BTreeMap<u32, RegionalSeries> = BTreeMap::new();
    for scenario in scenarios {
        let refs = store.query(&Query {
            dataset: Some(key.dataset.clone()),
            model: Some(key.model.clone()),
            variable: Some(key.variable.as_str().to_string()),
            scenario: Some(scenario),
            kind: Some(ProductKind::Aggregate),
            ..Query::default()
        });
        for r in refs {
            if scenario != key.scenario && r.index.year > LAST_HISTORICAL_YEAR {
                continue;
            }
            let pk = ProductKey::new(r.index.clone(), scenario, ProductKind::Aggregate);
            let bytes = store.get(&pk)?;
            let rows = read_aggregate_csv(bytes.as_slice()).map_err(|source| ViewError::BadAggregate {
                key: pk.rel_path(),
                source,
            })?;
            for row in rows {
                out.entry(row.region)
                    .or_insert_with(|| RegionalSeries::new(row.region, key.variable, key.model.clone(), key.scenario))
                    .insert(row.year, row.month, row.value, row.cell_count);
            }
        }
    }
    Ok(out)
}

/// Years a scenario speaks for: up to 2005 for historical, after it otherwise.
pub fn native_years(scenario: Scenario) -> RangeInclusive<i32> {
    if scenario.is_projection() {
        LAST_HISTORICAL_YEAR + 1..=i32::MAX
    } else {
        i32::MIN..=LAST_HISTORICAL_YEAR
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapParams {
    pub relative: bool,
    pub window: RetroWindow,
    /// Cells whose shown measure falls outside `[lo, hi]` are flagged.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Defaults to the scenario's own years.
    pub years: Option<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub year: i32,
    pub month: u32,
    pub value: f64,
    pub ri_signed: Option<f64>,
    pub ri_magnitude: Option<f64>,
    /// No relative intensity exists for this cell.
    pub undefined: bool,
    /// The shown measure (`ri_signed` when relative, else `value`) lies
    /// outside the requested limits.
    pub filtered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub region_id: u32,
    pub variable: Variable,
    pub model: String,
    pub scenario: Scenario,
    pub relative: bool,
    pub retro_start: i32,
    pub retro_end: i32,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub years: Vec<i32>,
    pub cells: Vec<HeatmapCell>,
}

/// Year-by-month matrix of one regional series.
pub fn heatmap(series: &RegionalSeries, p: &HeatmapParams) -> Heatmap {
    let range = match p.years {
        Some((a, b)) => a..=b,
        None => native_years(series.scenario),
    };
    let months: Vec<(i32, u32)> = series
        .iter()
        .map(|(k, _)| k)
        .filter(|(y, _)| range.contains(y))
        .collect();
    let table = anomaly_table(series, p.window, months);
    let cells: Vec<HeatmapCell> = table
        .into_iter()
        .map(|((year, month), cell)| {
            let value = series.get(year, month).expect("month came from the series");
            let shown = if p.relative { cell.map(|c| c.ri_signed) } else { Some(value) };
            let filtered = shown.is_some_and(|v| p.lo.is_some_and(|lo| v < lo) || p.hi.is_some_and(|hi| v > hi));
            HeatmapCell {
                year,
                month,
                value,
                ri_signed: cell.map(|c| c.ri_signed),
                ri_magnitude: cell.map(|c| c.ri_magnitude),
                undefined: cell.is_none(),
                filtered,
            }
        })
        .collect();
    let years: BTreeSet<i32> = cells.iter().map(|c| c.year).collect();
    Heatmap {
        region_id: series.region_id,
        variable: series.variable,
        model: series.model.clone(),
        scenario: series.scenario,
        relative: p.relative,
        retro_start: p.window.t0,
        retro_end: p.window.t1,
        lo: p.lo,
        hi: p.hi,
        years: years.into_iter().collect(),
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearValue {
    pub year: i32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSeries {
    pub variable: Variable,
    pub points: Vec<YearValue>,
}

/// Seasonal means per year, or yearly means when `season` is `None`. Years
/// without a complete season (or year) are left out.
pub fn yearly_points(series: &RegionalSeries, season: Option<SeasonIndex>, years: &RangeInclusive<i32>) -> VariableSeries {
    let points = series
        .years()
        .into_iter()
        .filter(|y| years.contains(y))
        .filter_map(|year| {
            let v = match season {
                Some(s) => seasonal_mean(series, year, s),
                None => yearly_mean(series, year),
            };
            v.ok().map(|value| YearValue { year, value })
        })
        .collect();
    VariableSeries {
        variable: series.variable,
        points,
    }
}

/// Scenario envelope for one region and season across all `series`,
/// restricted to `years`. No common year gives an empty envelope.
pub fn rcp_compare(series: &[RegionalSeries], season: SeasonIndex, years: &RangeInclusive<i32>) -> ScenarioSpread {
    let refs: Vec<&RegionalSeries> = series.iter().collect();
    let mut scenarios: Vec<Scenario> = series.iter().map(|s| s.scenario).collect();
    scenarios.sort();
    scenarios.dedup();
    match scenario_spread(&refs, season) {
        Ok(mut spread) => {
            spread.rows.retain(|r| years.contains(&r.year));
            spread
        }
        Err(_) => ScenarioSpread {
            region_id: series.first().map_or(0, |s| s.region_id),
            season,
            scenarios,
            rows: Vec::new(),
        },
    }
}

pub fn treemap(
    pr: &BTreeMap<u32, RegionalSeries>,
    tasmax: &BTreeMap<u32, RegionalSeries>,
    mask: Option<&RegionMask>,
    years: RangeInclusive<i32>,
) -> TreeNode {
    let names: BTreeMap<u32, String> = mask.map(|m| m.names().clone()).unwrap_or_default();
    treemap_hierarchy(pr, tasmax, &names, years)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub dataset: String,
    pub model: String,
    pub variable: String,
    pub scenario: Scenario,
    pub first: String,
    pub last: String,
    pub snapshots: usize,
    pub kinds: Vec<ProductKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionInfo {
    pub id: u32,
    pub name: String,
}

/// Everything a client needs to build its controls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Catalog {
    pub datasets: Vec<String>,
    pub models: Vec<String>,
    pub variables: Vec<String>,
    /// Canonical units of every known variable.
    pub units: BTreeMap<Variable, &'static str>,
    pub scenarios: Vec<Scenario>,
    pub coverage: Vec<Coverage>,
    pub regions: Vec<RegionInfo>,
    pub ramps: Vec<Ramp>,
    pub bands: BTreeMap<Variable, BandSpec>,
    pub seasons: Vec<SeasonInfo>,
    pub default_retro: RetroWindow,
    pub products: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeasonInfo {
    pub index: SeasonIndex,
    pub label: &'static str,
    pub months: [u32; 3],
}

pub fn catalog(store: &Store) -> Result<Catalog, ViewError> {
    let refs = store.query(&Query::default());
    let mut groups: BTreeMap<(String, String, String, Scenario), Vec<&crate::store::ProductRef>> = BTreeMap::new();
    for r in &refs {
        let i = &r.index;
        groups
            .entry((i.dataset.clone(), i.model.clone(), i.variable.clone(), r.scenario))
            .or_default()
            .push(r);
    }
    let coverage: Vec<Coverage> = groups
        .into_iter()
        .map(|((dataset, model, variable, scenario), rs)| {
            let first = rs.iter().map(|r| (r.index.year, r.index.month)).min().expect("non-empty group");
            let last = rs.iter().map(|r| (r.index.year, r.index.month)).max().expect("non-empty group");
            let kinds: BTreeSet<ProductKind> = rs.iter().flat_map(|r| r.kinds.iter().copied()).collect();
            Coverage {
                dataset,
                model,
                variable,
                scenario,
                first: format!("{:04}-{:02}", first.0, first.1),
                last: format!("{:04}-{:02}", last.0, last.1),
                snapshots: rs.len(),
                kinds: kinds.into_iter().collect(),
            }
        })
        .collect();
    let set = |f: &dyn Fn(&Coverage) -> String| -> Vec<String> {
        coverage.iter().map(f).collect::<BTreeSet<_>>().into_iter().collect()
    };
    let scenarios: BTreeSet<Scenario> = coverage.iter().map(|c| c.scenario).collect();
    let regions = match store.load_mask()? {
        Some(m) => m
            .names()
            .iter()
            .map(|(&id, name)| RegionInfo { id, name: name.clone() })
            .collect(),
        None => Vec::new(),
    };
    Ok(Catalog {
        datasets: set(&|c| c.dataset.clone()),
        models: set(&|c| c.model.clone()),
        variables: set(&|c| c.variable.clone()),
        units: Variable::ALL.iter().map(|&v| (v, v.canonical_units())).collect(),
        scenarios: scenarios.into_iter().collect(),
        regions,
        ramps: ramps(),
        bands: Variable::ALL.iter().map(|&v| (v, BandSpec::default_for(v))).collect(),
        seasons: SeasonIndex::ALL
            .iter()
            .map(|&s| SeasonInfo {
                index: s,
                label: s.label(),
                months: s.months(),
            })
            .collect(),
        default_retro: RetroWindow::DEFAULT,
        products: refs.len(),
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[(i32, u32, f64)], scenario: Scenario) -> RegionalSeries {
        let mut s = RegionalSeries::new(1, Variable::Pr, "CESM1-CAM5", scenario);
        for &(y, m, v) in values {
            s.insert(y, m, v, 3);
        }
        s
    }

    #[test]
    fn constant_series_relative_is_zero() {
        let vals: Vec<(i32, u32, f64)> = (2006..=2008).flat_map(|y| (1..=12).map(move |m| (y, m, 2.5))).collect();
        let s = series(&vals, Scenario::Rcp45);
        let h = heatmap(
            &s,
            &HeatmapParams {
                relative: true,
                window: RetroWindow::new(2006, 2008).unwrap(),
                lo: None,
                hi: None,
                years: None,
            },
        );
        assert_eq!(h.cells.len(), 36);
        assert!(h.cells.iter().all(|c| c.ri_signed == Some(0.0) && !c.undefined && !c.filtered));
        assert_eq!(h.years, vec![2006, 2007, 2008]);
    }

    #[test]
    fn limits_flag_cells() {
        let vals: Vec<(i32, u32, f64)> = (1..=12).map(|m| (2010, m, f64::from(m))).collect();
        let s = series(&vals, Scenario::Rcp85);
        let h = heatmap(
            &s,
            &HeatmapParams {
                relative: false,
                window: RetroWindow::DEFAULT,
                lo: Some(0.0),
                hi: Some(0.0),
                years: None,
            },
        );
        assert!(h.cells.iter().all(|c| c.filtered && c.undefined));
        let h = heatmap(
            &s,
            &HeatmapParams {
                relative: false,
                window: RetroWindow::DEFAULT,
                lo: Some(3.0),
                hi: Some(5.0),
                years: None,
            },
        );
        let kept: Vec<u32> = h.cells.iter().filter(|c| !c.filtered).map(|c| c.month).collect();
        assert_eq!(kept, vec![3, 4, 5]);
    }

    #[test]
    fn historical_years_hidden_by_default() {
        let vals = [(2005, 1, 1.0), (2006, 1, 2.0)];
        let s = series(&vals, Scenario::Rcp85);
        let p = HeatmapParams {
            relative: false,
            window: RetroWindow::DEFAULT,
            lo: None,
            hi: None,
            years: None,
        };
        assert_eq!(heatmap(&s, &p).years, vec![2006]);
        let p = HeatmapParams { years: Some((2000, 2010)), ..p };
        assert_eq!(heatmap(&s, &p).years, vec![2005, 2006]);
    }

    #[test]
    fn yearly_points_skip_incomplete() {
        let mut vals: Vec<(i32, u32, f64)> = (1..=12).map(|m| (2010, m, f64::from(m))).collect();
        vals.push((2011, 1, 1.0));
        let s = series(&vals, Scenario::Rcp85);
        let all = yearly_points(&s, None, &(0..=9999));
        assert_eq!(all.points, vec![YearValue { year: 2010, value: 6.5 }]);
        let q1 = yearly_points(&s, Some(SeasonIndex::new(0).unwrap()), &(0..=9999));
        assert_eq!(q1.points, vec![YearValue { year: 2010, value: 2.0 }]);
    }
}
