use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{seasonal_mean, AnalyticsError, RegionalSeries};
use crate::grid::{Scenario, SeasonIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub year: i32,
    pub values: BTreeMap<Scenario, f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpread {
    pub region_id: u32,
    pub season: SeasonIndex,
    pub scenarios: Vec<Scenario>,
    pub rows: Vec<SpreadRow>,
}

/// Seasonal means per scenario for every year all scenarios cover, with the
/// per-year envelope across scenarios.
pub fn scenario_spread(
    series: &[&RegionalSeries],
    season: SeasonIndex,
) -> Result<ScenarioSpread, AnalyticsError> {
    let mut by_scenario: BTreeMap<Scenario, &RegionalSeries> = BTreeMap::new();
    for s in series {
        by_scenario.insert(s.scenario, s);
    }
    if by_scenario.len() < 2 {
        return Err(AnalyticsError::NoCommonYears);
    }
    let region_id = series[0].region_id;
    let first = by_scenario.values().next().expect("two scenarios");
    let mut rows = Vec::new();
    'years: for year in first.years() {
        let mut values = BTreeMap::new();
        for (&scen, s) in &by_scenario {
            match seasonal_mean(s, year, season) {
                Ok(v) => {
                    values.insert(scen, v);
                }
                Err(_) => continue 'years,
            }
        }
        let min = values.values().copied().fold(f64::INFINITY, f64::min);
        let max = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
        rows.push(SpreadRow {
            year,
            values,
            min,
            max,
        });
    }
    if rows.is_empty() {
        return Err(AnalyticsError::NoCommonYears);
    }
    Ok(ScenarioSpread {
        region_id,
        season,
        scenarios: by_scenario.keys().copied().collect(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeLevel {
    Root,
    Region,
    Season,
    Year,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub level: TreeLevel,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_id: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub season: Option<SeasonIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    /// Leaves: seasonal pr mean clamped at zero. Parents: sum of children.
    pub size: f64,
    /// Leaves: seasonal tasmax mean. Parents: mean of children.
    pub color: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    fn parent(level: TreeLevel, name: String, children: Vec<TreeNode>) -> TreeNode {
        let size = children.iter().map(|c| c.size).sum();
        let colors: Vec<f64> = children.iter().filter_map(|c| c.color).collect();
        let color = (!colors.is_empty()).then(|| colors.iter().sum::<f64>() / colors.len() as f64);
        TreeNode {
            level,
            name,
            region_id: None,
            season: None,
            year: None,
            size,
            color,
            children,
        }
    }

    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            usize::from(self.level == TreeLevel::Year)
        } else {
            self.children.iter().map(TreeNode::leaf_count).sum()
        }
    }
}

/// Region → season → year hierarchy sized by seasonal precipitation and
/// colored by seasonal maximum temperature. Leaves lacking either value are
/// left out, as are parents left empty.
pub fn treemap_hierarchy(
    pr: &BTreeMap<u32, RegionalSeries>,
    tasmax: &BTreeMap<u32, RegionalSeries>,
    region_names: &BTreeMap<u32, String>,
    years: RangeInclusive<i32>,
) -> TreeNode {
    let mut regions = Vec::new();
    for (&id, pr_series) in pr {
        let Some(tx_series) = tasmax.get(&id) else {
            continue;
        };
        let mut seasons = Vec::new();
        for season in SeasonIndex::ALL {
            let mut leaves = Vec::new();
            for year in pr_series.years().into_iter().filter(|y| years.contains(y)) {
                let (Ok(p), Ok(t)) = (
                    seasonal_mean(pr_series, year, season),
                    seasonal_mean(tx_series, year, season),
                ) else {
                    continue;
                };
                leaves.push(TreeNode {
                    level: TreeLevel::Year,
                    name: year.to_string(),
                    region_id: Some(id),
                    season: Some(season),
                    year: Some(year),
                    size: p.max(0.0),
                    color: Some(t),
                    children: Vec::new(),
                });
            }
            if !leaves.is_empty() {
                let mut node = TreeNode::parent(TreeLevel::Season, season.label().to_string(), leaves);
                node.region_id = Some(id);
                node.season = Some(season);
                seasons.push(node);
            }
        }
        if !seasons.is_empty() {
            let name = region_names
                .get(&id)
                .cloned()
                .unwrap_or_else(|| format!("region {id}"));
            let mut node = TreeNode::parent(TreeLevel::Region, name, seasons);
            node.region_id = Some(id);
            regions.push(node);
        }
    }
    TreeNode::parent(TreeLevel::Root, "all".to_string(), regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Variable;

    fn constant_series(scenario: Scenario, var: Variable, years: RangeInclusive<i32>, v: f64) -> RegionalSeries {
        let mut s = RegionalSeries::new(1, var, "m", scenario);
        for y in years {
            for m in 1..=12 {
                s.insert(y, m, v + f64::from(y - 2006) * 0.1, 4);
            }
        }
        s
    }

    #[test]
    fn identical_scenarios_zero_width() {
        let a = constant_series(Scenario::Rcp26, Variable::Pr, 2006..=2010, 2.0);
        let mut b = a.clone();
        b.scenario = Scenario::Rcp85;
        let sp = scenario_spread(&[&a, &b], SeasonIndex::new(2).unwrap()).unwrap();
        assert_eq!(sp.rows.len(), 5);
        assert!(sp.rows.iter().all(|r| r.min == r.max));
    }

    #[test]
    fn shifted_envelope() {
        let a = constant_series(Scenario::Rcp26, Variable::Pr, 2006..=2008, 2.0);
        let b = constant_series(Scenario::Rcp85, Variable::Pr, 2006..=2008, 3.0);
        let sp = scenario_spread(&[&b, &a], SeasonIndex::new(0).unwrap()).unwrap();
        for r in &sp.rows {
            assert_eq!(r.min, r.values[&Scenario::Rcp26]);
            assert_eq!(r.max, r.values[&Scenario::Rcp85]);
        }
    }

    #[test]
    fn single_scenario_rejected() {
        let a = constant_series(Scenario::Rcp26, Variable::Pr, 2006..=2008, 2.0);
        assert!(matches!(
            scenario_spread(&[&a], SeasonIndex::new(0).unwrap()),
            Err(AnalyticsError::NoCommonYears)
        ));
    }

    #[test]
    fn treemap_sums() {
        let mut pr = RegionalSeries::new(1, Variable::Pr, "m", Scenario::Rcp85);
        let mut tx = RegionalSeries::new(1, Variable::Tasmax, "m", Scenario::Rcp85);
        for m in 1..=3 {
            pr.insert(2040, m, 2.0, 1);
            tx.insert(2040, m, 30.0, 1);
            pr.insert(2041, m, 1.0, 1);
            tx.insert(2041, m, 20.0, 1);
        }
        pr.insert(2042, 1, 5.0, 1);
        let names = BTreeMap::from([(1, "Northeast".to_string())]);
        let root = treemap_hierarchy(
            &BTreeMap::from([(1, pr)]),
            &BTreeMap::from([(1, tx)]),
            &names,
            2040..=2042,
        );
        assert_eq!(root.size, 3.0);
        assert_eq!(root.leaf_count(), 2);
        let season = &root.children[0].children[0];
        assert_eq!(season.children.len(), 2);
        assert_eq!(season.color, Some(25.0));
        assert_eq!(root.children[0].name, "Northeast");
    }
}
