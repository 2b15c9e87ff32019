use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use dcpviz_api::{router, ApiConfig, AppState};
use dcpviz_core::analytics::{
    anomaly_table, build_series, scenario_spread, seasonal_mean, treemap_hierarchy, yearly_mean, RegionalSeries,
    RetroWindow, Weighting,
};
use dcpviz_core::grid::{
    snapshot_from_slab, time_len, GridSnapshot, RegionMask, Scenario, SeasonIndex, SnapshotMeta, Variable,
};
use dcpviz_core::netcdf::parse_header;
use dcpviz_core::store::Store;
use dcpviz_core::workflow::{fixtures, DataSite, WorkflowQuery};

use crate::Faults;

pub const CASES: usize = 50;

const VARIABLES: [Variable; 2] = [Variable::Pr, Variable::Tasmax];
const SCENARIOS: [Scenario; 2] = [Scenario::Rcp45, Scenario::Rcp85];

/// Explorer archive run under both scenarios for 2006-2012 with a
/// 2001-2005 baseline.
fn build_store(raw: &Path, store_path: &Path) {
    fixtures::explorer().write_to(raw).unwrap();
    let site = DataSite::scan("site-a", raw).unwrap();
    let store = Store::open(store_path).unwrap();
    for scenario in SCENARIOS {
        let mut q = WorkflowQuery::new(fixtures::FIXTURE_MODEL, VARIABLES.to_vec(), scenario, (2006, 2012));
        q.retro = Some(RetroWindow::new(2001, 2005).unwrap());
        let r = site.execute(&site.plan(&q).unwrap(), &store).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
    }
}

/// Regional series straight from the raw files, bypassing the store, with
/// historical months labelled as the projection.
struct Direct {
    mask: RegionMask,
    series: BTreeMap<(Variable, Scenario), BTreeMap<u32, RegionalSeries>>,
}

impl Direct {
    fn load(raw: &Path) -> Direct {
        let mut snaps: Vec<(Scenario, GridSnapshot)> = Vec::new();
        let mut paths: Vec<_> = fs::read_dir(raw).unwrap().map(|e| e.unwrap().path()).collect();
        paths.sort();
        for path in paths {
            let mut src = BufReader::new(File::open(&path).unwrap());
            let nc = parse_header(&mut src).unwrap();
            let scenario: Scenario = nc.global_attr("experiment_id").unwrap().as_text().unwrap().parse().unwrap();
            let meta = SnapshotMeta {
                model: fixtures::FIXTURE_MODEL.into(),
                scenario,
            };
            for variable in VARIABLES {
                for k in 0..time_len(&nc, variable).unwrap() {
                    snaps.push((scenario, snapshot_from_slab(&nc, &mut src, variable, k, &meta).unwrap()));
                }
            }
        }
        let mask = RegionMask::synthetic_nca(snaps[0].1.lat.clone(), snaps[0].1.lon.clone()).unwrap();
        let mut series = BTreeMap::new();
        for variable in VARIABLES {
            for scenario in SCENARIOS {
                let picked = snaps
                    .iter()
                    .filter(|(s, g)| g.variable == variable && (*s == scenario || *s == Scenario::Historical))
                    .map(|(_, g)| g);
                series.insert((variable, scenario), build_series(picked, &mask, scenario, Weighting::Unweighted).unwrap());
            }
        }
        Direct { mask, series }
    }

    fn get(&self, variable: Variable, scenario: Scenario) -> &BTreeMap<u32, RegionalSeries> {
        &self.series[&(variable, scenario)]
    }
}

#[derive(Debug)]
struct Case {
    region: u32,
    region_key: String,
    variable: Variable,
    scenario: Scenario,
    relative: bool,
    window: RetroWindow,
    lo: Option<f64>,
    hi: Option<f64>,
    years: Option<(i32, i32)>,
    season: Option<SeasonIndex>,
}

impl Case {
    fn random(rng: &mut ChaCha8Rng, mask: &RegionMask) -> Case {
        let region = rng.gen_range(1..=7u32);
        let region_key = match rng.gen_range(0..3) {
            0 => region.to_string(),
            1 => mask.name(region).unwrap().replace(' ', "%20"),
            _ => mask.name(region).unwrap().to_lowercase().replace(' ', "%20"),
        };
        let t0 = rng.gen_range(1999..=2005);
        let t1 = rng.gen_range(t0..=2006);
        let (lo, hi) = match rng.gen_range(0..4) {
            0 => (None, None),
            1 => (Some(rng.gen_range(-1.0..5.0)), None),
            2 => (None, Some(rng.gen_range(-1.0..5.0))),
            _ => {
                let a = rng.gen_range(-1.0..3.0);
                (Some(a), Some(a + rng.gen_range(0.0..30.0)))
            }
        };
        let years = rng.gen_bool(0.4).then(|| {
            let a = rng.gen_range(2000..=2012);
            (a, rng.gen_range(a..=2013))
        });
        Case {
            region,
            region_key,
            variable: VARIABLES[rng.gen_range(0..2)],
            scenario: SCENARIOS[rng.gen_range(0..2)],
            relative: rng.gen_bool(0.5),
            window: RetroWindow::new(t0, t1).unwrap(),
            lo,
            hi,
            years,
            season: rng.gen_bool(0.8).then(|| SeasonIndex::new(rng.gen_range(0..4)).unwrap()),
        }
    }

    fn range(&self) -> RangeInclusive<i32> {
        match self.years {
            Some((a, b)) => a..=b,
            None => 2006..=i32::MAX,
        }
    }

    fn year_params(&self) -> String {
        self.years.map(|(a, b)| format!("&year_start={a}&year_end={b}")).unwrap_or_default()
    }
}

fn expected_heatmap(s: &RegionalSeries, c: &Case) -> Value {
    let range = c.range();
    let months: Vec<(i32, u32)> = s.iter().map(|(k, _)| k).filter(|(y, _)| range.contains(y)).collect();
    let mut years: Vec<i32> = months.iter().map(|m| m.0).collect();
    years.dedup();
    let cells: Vec<Value> = anomaly_table(s, c.window, months)
        .into_iter()
        .map(|((year, month), cell)| {
            let value = s.get(year, month).unwrap();
            let shown = if c.relative { cell.map(|x| x.ri_signed) } else { Some(value) };
            let filtered = shown.is_some_and(|v| c.lo.is_some_and(|lo| v < lo) || c.hi.is_some_and(|hi| v > hi));
            json!({
                "year": year,
                "month": month,
                "value": value,
                "ri_signed": cell.map(|x| x.ri_signed),
                "ri_magnitude": cell.map(|x| x.ri_magnitude),
                "undefined": cell.is_none(),
                "filtered": filtered,
            })
        })
        .collect();
    json!({ "years": years, "cells": cells })
}

fn expected_timeseries(d: &Direct, c: &Case) -> Value {
    let series: Vec<Value> = VARIABLES
        .into_iter()
        .map(|v| {
            let s = &d.get(v, c.scenario)[&c.region];
            let points: Vec<Value> = s
                .years()
                .into_iter()
                .filter(|y| c.range().contains(y))
                .filter_map(|y| {
                    let r = match c.season {
                        Some(season) => seasonal_mean(s, y, season),
                        None => yearly_mean(s, y),
                    };
                    r.ok().map(|value| json!({ "year": y, "value": value }))
                })
                .collect();
            json!({ "units": v.canonical_units(), "variable": v, "points": points })
        })
        .collect();
    Value::Array(series)
}

fn expected_spread(d: &Direct, c: &Case, season: SeasonIndex) -> Value {
    let a = &d.get(c.variable, Scenario::Rcp45)[&c.region];
    let b = &d.get(c.variable, Scenario::Rcp85)[&c.region];
    let spread = scenario_spread(&[a, b], season).unwrap();
    let rows: Vec<&_> = spread.rows.iter().filter(|r| c.range().contains(&r.year)).collect();
    json!({ "scenarios": spread.scenarios, "rows": rows, "region_id": spread.region_id })
}

fn expected_treemap(d: &Direct, c: &Case) -> Value {
    let tree = treemap_hierarchy(
        d.get(Variable::Pr, c.scenario),
        d.get(Variable::Tasmax, c.scenario),
        d.mask.names(),
        c.range(),
    );
    serde_json::to_value(tree).unwrap()
}

/// First place where the documents differ in shape or in any number's bits.
fn bitwise_diff(got: &Value, want: &Value, path: &str) -> Option<String> {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            (x.to_bits() != y.to_bits()).then(|| format!("{path}: {x} != {y}"))
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Some(format!("{path}: length {} != {}", a.len(), b.len()));
            }
            a.iter().zip(b).enumerate().find_map(|(i, (x, y))| bitwise_diff(x, y, &format!("{path}[{i}]")))
        }
        (Value::Object(a), Value::Object(b)) => {
            if !a.keys().eq(b.keys()) {
                return Some(format!("{path}: keys differ"));
            }
            a.iter().find_map(|(k, x)| bitwise_diff(x, &b[k], &format!("{path}.{k}")))
        }
        (a, b) => (a != b).then(|| format!("{path}: {a} != {b}")),
    }
}

fn count_numbers(v: &Value) -> usize {
    match v {
        Value::Number(_) => 1,
        Value::Array(a) => a.iter().map(count_numbers).sum(),
        Value::Object(o) => o.values().map(count_numbers).sum(),
        _ => 0,
    }
}

async fn get(app: &Router, uri: &str) -> (u16, Option<Value>) {
    let res = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = res.status().as_u16();
    let body = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&body).ok())
}

/// Requests whose parameters are malformed, with the expected problem code.
pub const MALFORMED: [(&str, &str); 16] = [
    ("/api/heatmap", "missing_parameter"),
    ("/api/heatmap?region=Atlantis", "unknown_region"),
    ("/api/heatmap?region=1&retro_start=2005&retro_end=2001", "invalid_window"),
    ("/api/heatmap?region=1&retro_start=soon", "bad_parameter"),
    ("/api/heatmap?region=1&relative=maybe", "bad_parameter"),
    ("/api/heatmap?region=1&variable=snow", "bad_parameter"),
    ("/api/heatmap?region=1&scenario=rcp99", "bad_parameter"),
    ("/api/heatmap?region=1&hi=inf", "bad_parameter"),
    ("/api/heatmap?region=1&year_start=2010&year_end=2008", "invalid_range"),
    ("/api/heatmap?region=1&model=NOPE", "unknown_model"),
    ("/api/timeseries?region=1&season=4", "bad_parameter"),
    ("/api/timeseries?region=1&variables=pr,snow", "bad_parameter"),
    ("/api/rcp-compare?region=1", "missing_parameter"),
    ("/api/treemap?year_start=twenty", "bad_parameter"),
    ("/api/products?limit=0", "bad_parameter"),
    ("/api/snapshot/not-an-index", "malformed_index"),
];

async fn check(app: &Router, d: &Direct, faults: &mut Faults) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa91);
    let mut numbers = 0;
    for n in 0..CASES {
        let c = Case::random(&mut rng, &d.mask);
        let mut uri = format!(
            "/api/heatmap?region={}&variable={}&scenario={}&relative={}&retro_start={}&retro_end={}{}",
            c.region_key,
            c.variable,
            c.scenario,
            c.relative,
            c.window.t0,
            c.window.t1,
            c.year_params()
        );
        if let Some(lo) = c.lo {
            uri += &format!("&lo={lo}");
        }
        if let Some(hi) = c.hi {
            uri += &format!("&hi={hi}");
        }
        let season = c.season.map(|s| format!("&season={}", s.index())).unwrap_or_default();
        let compare_season = c.season.unwrap_or(SeasonIndex::new(2).unwrap());
        // Each request with the top-level keys the oracle computes; an empty
        // list compares the whole body.
        let requests: [(String, &[&str], Value); 4] = [
            (uri, &["years", "cells"], expected_heatmap(&d.get(c.variable, c.scenario)[&c.region], &c)),
            (
                format!("/api/timeseries?region={}&scenario={}&variables=pr,tasmax{season}{}", c.region_key, c.scenario, c.year_params()),
                &["series"],
                json!({ "series": expected_timeseries(d, &c) }),
            ),
            (
                format!(
                    "/api/rcp-compare?region={}&season={}&variable={}{}",
                    c.region_key,
                    compare_season.index(),
                    c.variable,
                    c.year_params()
                ),
                &["scenarios", "rows", "region_id"],
                expected_spread(d, &c, compare_season),
            ),
            (format!("/api/treemap?scenario={}{}", c.scenario, c.year_params()), &[], expected_treemap(d, &c)),
        ];
        for (uri, keys, want) in requests {
            let (status, body) = get(app, &uri).await;
            let Some(body) = body.filter(|_| status == 200) else {
                faults.fail(format!("case {n}: {uri} returned {status}"));
                continue;
            };
            let got = if keys.is_empty() {
                body
            } else {
                Value::Object(keys.iter().map(|k| (k.to_string(), body[*k].clone())).collect())
            };
            if let Some(diff) = bitwise_diff(&got, &want, &uri) {
                faults.fail(format!("case {n}: {diff}"));
            }
            numbers += count_numbers(&want);
        }
    }

    let mut codes = 0;
    for (uri, code) in MALFORMED {
        let (status, body) = get(app, uri).await;
        let got = body.as_ref().and_then(|b| b["code"].as_str().map(str::to_string));
        let ok = status == 400 && got.as_deref() == Some(code);
        faults.check(ok, || format!("{uri}: {status} {got:?}, wanted 400 {code}"));
        codes += ok as usize;
    }
    (numbers, codes)
}

pub fn run() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let (raw, store_path) = (dir.path().join("raw"), dir.path().join("store"));
    build_store(&raw, &store_path);
    let direct = Direct::load(&raw);
    let app = router(Arc::new(AppState::new(Store::open(&store_path).unwrap(), ApiConfig::default())));
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let mut faults = Faults::default();
    let (numbers, codes) = rt.block_on(check(&app, &direct, &mut faults));
    let summary = format!(
        "{CASES} parameter sets x 4 endpoints, {numbers} numbers bit-identical; {codes}/{} malformed requests gave 400 with the expected code",
        MALFORMED.len()
    );
    (faults.is_empty(), faults.report(summary))
}
