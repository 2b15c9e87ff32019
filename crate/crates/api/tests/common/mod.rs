#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use dcpviz_api::{router, ApiConfig, AppState};
use dcpviz_core::analytics::{build_series, RegionalSeries, RetroWindow, Weighting};
use dcpviz_core::grid::{snapshot_from_slab, time_len, GridSnapshot, RegionMask, Scenario, SnapshotMeta, Variable};
use dcpviz_core::netcdf::parse_header;
use dcpviz_core::store::Store;
use dcpviz_core::workflow::{fixtures, DataSite, WorkflowQuery};

pub struct Fixture {
    _dir: tempfile::TempDir,
    pub raw: PathBuf,
    pub store: PathBuf,
}

/// Explorer archive run under rcp45 and rcp85 for 2006-2012 with a
/// 2001-2005 baseline, so historical aggregates exist too.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("raw");
        fixtures::explorer().write_to(&raw).unwrap();
        let site = DataSite::scan("site-a", &raw).unwrap();
        let store_path = dir.path().join("store");
        let store = Store::open(&store_path).unwrap();
        for scenario in [Scenario::Rcp45, Scenario::Rcp85] {
            let mut q = WorkflowQuery::new(
                fixtures::FIXTURE_MODEL,
                vec![Variable::Pr, Variable::Tasmax],
                scenario,
                (2006, 2012),
            );
            q.retro = Some(RetroWindow::new(2001, 2005).unwrap());
            let r = site.execute(&site.plan(&q).unwrap(), &store).unwrap();
            assert!(r.failures.is_empty(), "{:?}", r.failures);
        }
        Fixture {
            _dir: dir,
            raw,
            store: store_path,
        }
    })
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

pub fn app_for(store: &Path) -> Router {
    let store = Store::open(store).unwrap();
    router(Arc::new(AppState::new(store, ApiConfig::default())))
}

/// Shared read-only app over the fixture store.
pub fn shared_app() -> Router {
    static APP: OnceLock<Router> = OnceLock::new();
    APP.get_or_init(|| app_for(&fixture().store)).clone()
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn content_type(&self) -> &str {
        self.headers.get("content-type").map(|v| v.to_str().unwrap()).unwrap_or("")
    }

    /// Machine-readable code of a problem body.
    pub fn code(&self) -> String {
        assert_eq!(self.content_type(), "application/problem+json");
        self.json()["code"].as_str().unwrap().to_string()
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: &serde_json::Value) -> Reply {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(serde_json::to_vec(body).unwrap()))
        .unwrap();
    send(app, req).await
}

pub fn encode(s: &str) -> String {
    s.replace(' ', "%20")
}

/// Regional series computed straight from the raw archive, the way an
/// analyst would without the store: every file's snapshots, masked and
/// averaged, with historical months labelled as `scenario`.
pub struct Direct {
    pub mask: RegionMask,
    series: BTreeMap<(Variable, Scenario), BTreeMap<u32, RegionalSeries>>,
}

impl Direct {
    pub fn get(&self, variable: Variable, scenario: Scenario) -> &BTreeMap<u32, RegionalSeries> {
        &self.series[&(variable, scenario)]
    }
}

pub fn direct() -> &'static Direct {
    static D: OnceLock<Direct> = OnceLock::new();
    D.get_or_init(|| {
        let mut snaps: Vec<(Scenario, GridSnapshot)> = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&fixture().raw).unwrap().map(|e| e.unwrap().path()).collect();
        paths.sort();
        for path in paths {
            let mut src = BufReader::new(File::open(&path).unwrap());
            let nc = parse_header(&mut src).unwrap();
            let scenario: Scenario = nc.global_attr("experiment_id").unwrap().as_text().unwrap().parse().unwrap();
            let meta = SnapshotMeta {
                model: fixtures::FIXTURE_MODEL.into(),
                scenario,
            };
            for variable in [Variable::Pr, Variable::Tasmax] {
                for k in 0..time_len(&nc, variable).unwrap() {
                    snaps.push((scenario, snapshot_from_slab(&nc, &mut src, variable, k, &meta).unwrap()));
                }
            }
        }
        let mask = RegionMask::synthetic_nca(snaps[0].1.lat.clone(), snaps[0].1.lon.clone()).unwrap();
        let mut series = BTreeMap::new();
        for variable in [Variable::Pr, Variable::Tasmax] {
            for scenario in [Scenario::Rcp45, Scenario::Rcp85] {
                let picked = snaps
                    .iter()
                    .filter(|(s, g)| g.variable == variable && (*s == scenario || *s == Scenario::Historical))
                    .map(|(_, g)| g);
                let s = build_series(picked, &mask, scenario, Weighting::Unweighted).unwrap();
                series.insert((variable, scenario), s);
            }
        }
        Direct { mask, series }
    })
}

/// Fails unless both documents have the same shape and every number has
/// the same bits.
pub fn assert_bitwise(got: &serde_json::Value, want: &serde_json::Value, path: &str) {
    use serde_json::Value;
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert_eq!(x.to_bits(), y.to_bits(), "{path}: {x} != {y}");
        }
        (Value::Array(a), Value::Array(b)) => {
            assert_eq!(a.len(), b.len(), "{path}: length");
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                assert_bitwise(x, y, &format!("{path}[{i}]"));
            }
        }
        (Value::Object(a), Value::Object(b)) => {
            let ka: Vec<&String> = a.keys().collect();
            let kb: Vec<&String> = b.keys().collect();
            assert_eq!(ka, kb, "{path}: keys");
            for (k, x) in a {
                assert_bitwise(x, &b[k], &format!("{path}.{k}"));
            }
        }
        (a, b) => assert_eq!(a, b, "{path}"),
    }
}
