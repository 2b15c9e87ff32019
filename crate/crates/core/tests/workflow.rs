use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use dcpviz_core::analytics::{anomaly_table, build_series, AnomalyRow, RetroWindow, Weighting};
use dcpviz_core::grid::{snapshot_from_slab, RegionMask, Scenario, SnapshotMeta, Variable};
use dcpviz_core::netcdf::{parse_header, AxisSpec, FormatVersion, VarSpec};
use dcpviz_core::store::{ProductKey, ProductKind, Query, Store};
use dcpviz_core::workflow::{ArchiveSpec, DataSite, WorkflowError, WorkflowQuery};

const MODEL: &str = "CESM1-CAM5";

fn archive(start: i32, end: i32) -> ArchiveSpec {
    ArchiveSpec {
        model: MODEL.into(),
        scenarios: vec![Scenario::Rcp85],
        start_year: start,
        end_year: end,
        lat: AxisSpec { start: 25.0, step: 2.0, count: 13 },
        lon: AxisSpec { start: -124.0, step: 3.0, count: 20 },
        variables: vec![VarSpec {
            name: "pr".into(),
            units: "kg m-2 s-1".into(),
            generator: Default::default(),
            encoding: Default::default(),
            missing_fraction: 0.02,
        }],
        format: FormatVersion::Cdf2,
        seed: 11,
        years_per_file: 5,
        record_time: true,
    }
}

fn site_for(spec: &ArchiveSpec, dir: &Path) -> DataSite {
    spec.write_to(&dir.join("raw")).unwrap();
    DataSite::scan("site-a", dir.join("raw")).unwrap()
}

fn count(store: &Store, kind: ProductKind) -> usize {
    store
        .query(&Query {
            kind: Some(kind),
            ..Query::default()
        })
        .len()
}

#[test]
fn five_years_give_sixty_snapshots_and_rerun_is_free() {
    let dir = tempfile::tempdir().unwrap();
    let site = site_for(&archive(2036, 2040), dir.path());
    assert_eq!(site.holdings().len(), 1);
    let store = Store::open(dir.path().join("store")).unwrap();
    let q = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2036, 2040));
    let plan = site.plan(&q).unwrap();
    assert_eq!(plan.count("extract"), 60);
    assert_eq!(plan.count("contour"), 60);
    assert_eq!(plan.count("baseline_extract"), 0);

    let first = site.execute(&plan, &store).unwrap();
    assert!(first.failures.is_empty(), "{:?}", first.failures);
    assert_eq!(count(&store, ProductKind::Geojson), 60);
    assert_eq!(count(&store, ProductKind::Thumbnail), 60);
    assert_eq!(count(&store, ProductKind::Aggregate), 60);
    let stored: u64 = store.records().iter().map(|r| r.bytes).sum();
    assert!(first.derived_bytes_emitted >= stored);
    assert_eq!(first.raw_bytes_resident, plan.files().values().sum::<u64>());
    assert_eq!(first.files_touched, 1);

    let second = site.execute(&plan, &store).unwrap();
    assert_eq!(second.derived_bytes_emitted, 0);
    assert_eq!(second.products_written, 0);
    assert_eq!(second.ratio, Some(0.0));
}

#[test]
fn changed_bands_recompute_only_contours() {
    let dir = tempfile::tempdir().unwrap();
    let site = site_for(&archive(2036, 2036), dir.path());
    let store = Store::open(dir.path().join("store")).unwrap();
    let mut q = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2036, 2036));
    site.execute(&site.plan(&q).unwrap(), &store).unwrap();
    q.bands = Some(dcpviz_core::contour::BandSpec::stepped(0.0, 8.0, 1.0).unwrap());
    let r = site.execute(&site.plan(&q).unwrap(), &store).unwrap();
    assert_eq!(r.tasks["contour"].done, 12);
    assert_eq!(r.tasks["aggregate_month"].cached, 12);
    assert!(r.derived_bytes_emitted > 0);
}

#[test]
fn query_validation_and_missing_holdings() {
    let dir = tempfile::tempdir().unwrap();
    let site = site_for(&archive(2036, 2040), dir.path());
    let empty = WorkflowQuery::new(MODEL, vec![], Scenario::Rcp85, (2036, 2040));
    assert!(matches!(site.plan(&empty), Err(WorkflowError::InvalidQuery(_))));

    let reversed = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2040, 2036));
    assert!(matches!(site.plan(&reversed), Err(WorkflowError::InvalidQuery(_))));

    let long = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2036, 2041));
    match site.plan(&long) {
        Err(WorkflowError::HoldingsMissing { missing }) => {
            assert_eq!(missing, vec![(Variable::Pr, 2041)]);
        }
        other => panic!("expected HoldingsMissing, got {other:?}"),
    }

    let other_model = WorkflowQuery::new("GFDL-ESM2M", vec![Variable::Pr], Scenario::Rcp85, (2036, 2036));
    assert!(matches!(
        site.plan(&other_model),
        Err(WorkflowError::HoldingsMissing { .. })
    ));
}

#[test]
fn corrupt_month_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    let spec = archive(2036, 2040);
    spec.write_to(&dir.path().join("raw")).unwrap();
    let path = fs::read_dir(dir.path().join("raw")).unwrap().next().unwrap().unwrap().path();
    let len = fs::metadata(&path).unwrap().len();
    let f = fs::OpenOptions::new().write(true).open(&path).unwrap();
    f.set_len(len - 10).unwrap();
    drop(f);

    let site = DataSite::scan("site-a", dir.path().join("raw")).unwrap();
    assert!(site.rejected().is_empty(), "{:?}", site.rejected());
    let store = Store::open(dir.path().join("store")).unwrap();
    let q = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2036, 2040));
    let plan = site.plan(&q).unwrap();
    assert_eq!(plan.count("extract"), 60);
    let r = site.execute(&plan, &store).unwrap();
    assert_eq!(r.tasks["extract"].done, 59);
    assert_eq!(r.tasks["extract"].failed, 1);
    assert_eq!(r.failures.len(), 1);
    assert!(r.failures[0].task.contains("2040-12"), "{:?}", r.failures);
    assert_eq!(count(&store, ProductKind::Geojson), 59);
    assert_eq!(count(&store, ProductKind::Thumbnail), 59);
}

#[test]
fn products_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let site = site_for(&archive(2036, 2037), dir.path());
    let q = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2036, 2037));
    let plan = site.plan(&q).unwrap();
    let digests = |name: &str| -> BTreeMap<String, String> {
        let store = Store::open(dir.path().join(name)).unwrap();
        site.execute(&plan, &store).unwrap();
        store
            .records()
            .into_iter()
            .map(|r| (r.path.clone(), r.sha256.clone()))
            .collect()
    };
    let a = digests("s1");
    let b = digests("s2");
    assert_eq!(a.len(), 24 * 3);
    assert_eq!(a, b);
}

#[test]
fn anomalies_match_direct_analytics() {
    let dir = tempfile::tempdir().unwrap();
    let spec = archive(1996, 2010);
    let site = site_for(&spec, dir.path());
    let store = Store::open(dir.path().join("store")).unwrap();
    let window = RetroWindow::new(1996, 2005).unwrap();
    let mut q = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2006, 2010));
    q.retro = Some(window);
    let plan = site.plan(&q).unwrap();
    assert_eq!(plan.count("baseline_extract"), 120);
    let r = site.execute(&plan, &store).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    assert_eq!(r.files_touched, 3);

    let mut snaps = Vec::new();
    for entry in fs::read_dir(dir.path().join("raw")).unwrap() {
        let path = entry.unwrap().path();
        let mut src = BufReader::new(File::open(&path).unwrap());
        let nc = parse_header(&mut src).unwrap();
        let scenario: Scenario = nc.global_attr("experiment_id").unwrap().as_text().unwrap().parse().unwrap();
        let meta = SnapshotMeta { model: MODEL.into(), scenario };
        for k in 0..60 {
            snaps.push(snapshot_from_slab(&nc, &mut src, Variable::Pr, k, &meta).unwrap());
        }
    }
    let mask = RegionMask::synthetic_nca(snaps[0].lat.clone(), snaps[0].lon.clone()).unwrap();
    let series = build_series(&snaps, &mask, Scenario::Rcp85, Weighting::Unweighted).unwrap();

    for rec in store.query(&Query {
        kind: Some(ProductKind::Aggregate),
        ..Query::default()
    }) {
        let key = ProductKey::new(rec.index.clone(), rec.scenario, ProductKind::Aggregate);
        let bytes = store.get(&key).unwrap();
        let rows: Vec<AnomalyRow> = csv::Reader::from_reader(bytes.as_slice())
            .deserialize()
            .collect::<Result<_, _>>()
            .unwrap();
        assert!(!rows.is_empty());
        for row in rows {
            let s = &series[&row.region];
            let [(_, cell)] = anomaly_table(s, window, [(row.year, row.month)])[..] else {
                panic!("one month in, one month out");
            };
            assert_eq!(row.value.to_bits(), s.get(row.year, row.month).unwrap().to_bits());
            assert_eq!(row.ri_signed.map(f64::to_bits), cell.map(|c| c.ri_signed.to_bits()));
            assert_eq!(row.ri_magnitude.map(f64::to_bits), cell.map(|c| c.ri_magnitude.to_bits()));
        }
    }
}

#[test]
fn region_mask_is_emitted() {
    let dir = tempfile::tempdir().unwrap();
    let site = site_for(&archive(2036, 2036), dir.path());
    let store = Store::open(dir.path().join("store")).unwrap();
    let q = WorkflowQuery::new(MODEL, vec![Variable::Pr], Scenario::Rcp85, (2036, 2036));
    site.execute(&site.plan(&q).unwrap(), &store).unwrap();
    let mask = store.load_mask().unwrap().expect("mask stored");
    assert_eq!(mask.region_ids().count(), 7);
}
