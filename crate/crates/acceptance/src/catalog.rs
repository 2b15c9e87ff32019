use std::path::Path;
use std::time::{Duration, Instant};

use dcpviz_core::grid::{Scenario, Variable};
use dcpviz_core::store::{ProductKind, Query, Store};
use dcpviz_core::workflow::{fixtures, ArchiveSpec, DataSite, WorkflowQuery};

use crate::Faults;

pub const TIME_LIMIT: Duration = Duration::from_secs(60);

pub struct Ingest {
    pub geojson: usize,
    pub thumbnails: usize,
    pub files: usize,
    pub failures: usize,
    pub elapsed: Duration,
}

/// Writes `spec`, then scans, plans and executes an rcp85 precipitation
/// query over its full span. The timer covers everything after the write.
pub fn ingest(spec: &ArchiveSpec, dir: &Path) -> Ingest {
    let raw = dir.join("raw");
    spec.write_to(&raw).unwrap();
    let start = Instant::now();
    let site = DataSite::scan("site-a", &raw).unwrap();
    let store = Store::open(dir.join("store")).unwrap();
    let q = WorkflowQuery::new(&spec.model, vec![Variable::Pr], Scenario::Rcp85, (spec.start_year, spec.end_year));
    let plan = site.plan(&q).unwrap();
    let report = site.execute(&plan, &store).unwrap();
    let elapsed = start.elapsed();
    let count = |kind| store.query(&Query { kind: Some(kind), ..Query::default() }).len();
    Ingest {
        geojson: count(ProductKind::Geojson),
        thumbnails: count(ProductKind::Thumbnail),
        files: plan.files().len(),
        failures: report.failures.len(),
        elapsed,
    }
}

pub fn run() -> (bool, String) {
    let mut faults = Faults::default();
    let dir = tempfile::tempdir().unwrap();
    let five = ingest(&fixtures::five_year(), &dir.path().join("five"));
    faults.check(five.geojson == 60 && five.thumbnails == 60, || {
        format!("5-year archive gave {} geojson and {} thumbnails", five.geojson, five.thumbnails)
    });
    faults.check(five.failures == 0, || format!("5-year run had {} failures", five.failures));

    let century = ingest(&fixtures::century(), &dir.path().join("century"));
    faults.check(century.geojson == 1380 && century.thumbnails == 1380, || {
        format!("115-year archive gave {} geojson and {} thumbnails", century.geojson, century.thumbnails)
    });
    faults.check(century.failures == 0, || format!("115-year run had {} failures", century.failures));
    faults.check(century.elapsed < TIME_LIMIT, || format!("115-year run took {:.1} s", century.elapsed.as_secs_f64()));

    let summary = format!(
        "5-year: {}+{} products; 115-year over {} files: {}+{} products in {:.1} s < 60 s",
        five.geojson,
        five.thumbnails,
        century.files,
        century.geojson,
        century.thumbnails,
        century.elapsed.as_secs_f64()
    );
    (faults.is_empty(), faults.report(summary))
}
