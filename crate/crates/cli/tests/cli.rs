use std::fs;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use dcpviz_core::workflow::{fixtures, ArchiveSpec};

fn fixture_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn dcpviz(store: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dcpviz"));
    c.env_remove("DCPVIZ_STORE").arg("--store").arg(store);
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn one_line_error(out: &Output) -> String {
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

/// Generates the five-year fixture, registers it and runs it once.
fn prepared(dir: &Path) -> PathBuf {
    let store = dir.join("store");
    let raw = dir.join("raw");
    ok(dcpviz(&store)
        .args(["gen-archive", "--spec"])
        .arg(fixture_file("five-year.toml"))
        .arg("--out")
        .arg(&raw)
        .output()
        .unwrap());
    ok(dcpviz(&store).args(["register-site", "--id", "a", "--root"]).arg(&raw).output().unwrap());
    store
}

fn run_five_year(store: &Path) -> String {
    ok(dcpviz(store)
        .args(["run", "--site", "a", "--model", "CESM1-CAM5", "--variables", "pr"])
        .args(["--scenario", "rcp85", "--years", "2036:2040"])
        .output()
        .unwrap())
}

#[test]
fn empty_store_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dcpviz(&dir.path().join("s")).args(["store", "ls"]).output().unwrap());
    assert_eq!(out, "");
}

#[test]
fn generate_run_list_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let store = prepared(dir.path());
    let first = run_five_year(&store);
    assert!(first.contains("products_written=180"), "{first}");
    assert!(!first.contains("derived_bytes_emitted=0 "), "{first}");

    let ls = ok(dcpviz(&store).args(["store", "ls", "--kind", "geojson"]).output().unwrap());
    assert_eq!(ls.lines().count(), 60);
    assert!(ls.lines().all(|l| l.starts_with("geojson\trcp85\tNEX-DCP_CESM1-CAM5_pr_20")));
    let thumbs = ok(dcpviz(&store).args(["store", "ls", "--kind", "thumbnail", "--years", "2038:2038"]).output().unwrap());
    assert_eq!(thumbs.lines().count(), 12);

    let second = run_five_year(&store);
    assert!(second.contains("derived_bytes_emitted=0 "), "{second}");
    assert!(second.contains("products_written=0 "), "{second}");
}

#[test]
fn store_get_returns_stored_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let store = prepared(dir.path());
    run_five_year(&store);
    let out = dcpviz(&store)
        .args(["store", "get", "NEX-DCP_CESM1-CAM5_pr_2037-06-01", "--kind", "thumbnail"])
        .output()
        .unwrap();
    let bytes = ok_bytes(out);
    let on_disk = fs::read(store.join("products/NEX-DCP/CESM1-CAM5/rcp85/pr/2037-06-01.png")).unwrap();
    assert_eq!(bytes, on_disk);
    assert_eq!(&bytes[1..4], b"PNG");

    let target = dir.path().join("june.geojson");
    ok(dcpviz(&store)
        .args(["store", "get", "NEX-DCP_CESM1-CAM5_pr_2037-06-01", "--out"])
        .arg(&target)
        .output()
        .unwrap());
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&target).unwrap()).unwrap();
    assert_eq!(doc["type"], "FeatureCollection");

    let missing = dcpviz(&store)
        .args(["store", "get", "NEX-DCP_CESM1-CAM5_pr_2099-06-01"])
        .output()
        .unwrap();
    one_line_error(&missing);
}

#[test]
fn closed_stdout_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = prepared(dir.path());
    run_five_year(&store);
    for args in [&["store", "ls"][..], &["store", "get", "NEX-DCP_CESM1-CAM5_pr_2037-06-01"]] {
        let (reader, writer) = std::io::pipe().unwrap();
        drop(reader);
        let out = dcpviz(&store).args(args).stdout(writer).stderr(Stdio::piped()).output().unwrap();
        assert!(out.status.success(), "{args:?}: {:?}", out.status);
        assert!(out.stderr.is_empty(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

fn ok_bytes(out: Output) -> Vec<u8> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn export_writes_anomaly_csv() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let raw = dir.path().join("raw");
    ok(dcpviz(&store).args(["gen-archive", "--spec", "explorer", "--out"]).arg(&raw).output().unwrap());
    ok(dcpviz(&store).args(["register-site", "--id", "x", "--root"]).arg(&raw).output().unwrap());
    let report = ok(dcpviz(&store)
        .args(["run", "--site", "x", "--model", "CESM1-CAM5", "--variables", "pr,tasmax"])
        .args(["--scenario", "rcp45", "--years", "2006:2007", "--retro", "2001:2005", "--json"])
        .output()
        .unwrap());
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["failures"], serde_json::json!([]));
    assert_eq!(report["tasks"]["baseline_extract"]["done"], 120);

    let csv_path = dir.path().join("se.csv");
    ok(dcpviz(&store)
        .args(["export", "--variable", "pr", "--scenario", "rcp45", "--retro", "2001:2005"])
        .args(["--region", "southeast", "--out"])
        .arg(&csv_path)
        .output()
        .unwrap());
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "region", "variable", "model", "scenario", "year", "month", "value", "cell_count", "ri_signed",
            "ri_magnitude", "retro_start", "retro_end"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| &r[0] == "2" && &r[3] == "rcp45" && !r[8].is_empty()));

    let all = ok(dcpviz(&store)
        .args(["export", "--variable", "tasmax", "--scenario", "historical", "--retro", "2001:2005"])
        .output()
        .unwrap());
    assert_eq!(all.lines().count(), 1 + 7 * 60);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    let cases: [&[&str]; 6] = [
        &[],
        &["store"],
        &["store", "ls", "--bogus"],
        &["frobnicate"],
        &["run", "--site", "a", "--model", "M", "--variables", "pr", "--scenario", "rcp85", "--years", "2040"],
        &["run", "--site", "a", "--model", "M", "--variables", "snow", "--scenario", "rcp85", "--years", "1:2"],
    ];
    for args in cases {
        let out = dcpviz(&store).args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_1_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    let out = dcpviz(&store)
        .args(["run", "--site", "nowhere", "--model", "M", "--variables", "pr", "--scenario", "rcp85", "--years", "2040:2041"])
        .output()
        .unwrap();
    let err = one_line_error(&out);
    assert!(err.contains("nowhere"), "{err}");

    let out = dcpviz(&store).args(["gen-archive", "--spec", "missing.toml", "--out"]).arg(dir.path()).output().unwrap();
    one_line_error(&out);

    let store2 = prepared(dir.path());
    let out = dcpviz(&store2)
        .args(["run", "--site", "a", "--model", "CESM1-CAM5", "--variables", "pr", "--scenario", "rcp85", "--years", "2036:2041"])
        .output()
        .unwrap();
    let err = one_line_error(&out);
    assert!(err.contains("2041"), "{err}");
}

#[test]
fn store_path_from_env_and_config_with_flags_winning() {
    let dir = tempfile::tempdir().unwrap();
    let store = prepared(dir.path());
    run_five_year(&store);
    let bin = env!("CARGO_BIN_EXE_dcpviz");
    let count = |out: Output| ok(out).lines().count();

    let via_env = Command::new(bin).env("DCPVIZ_STORE", &store).args(["store", "ls"]).output().unwrap();
    assert_eq!(count(via_env), 180);

    let cfg = dir.path().join("dcpviz.toml");
    fs::write(&cfg, format!("store = {:?}\n", store.to_str().unwrap())).unwrap();
    let via_cfg = Command::new(bin)
        .env_remove("DCPVIZ_STORE")
        .arg("--config")
        .arg(&cfg)
        .args(["store", "ls"])
        .output()
        .unwrap();
    assert_eq!(count(via_cfg), 180);

    let empty = dir.path().join("other");
    let flag_wins = Command::new(bin)
        .env("DCPVIZ_STORE", &store)
        .arg("--config")
        .arg(&cfg)
        .arg("--store")
        .arg(&empty)
        .args(["store", "ls"])
        .output()
        .unwrap();
    assert_eq!(count(flag_wins), 0);

    fs::write(&cfg, "stor = 1\n").unwrap();
    let bad = Command::new(bin).arg("--config").arg(&cfg).args(["store", "ls"]).output().unwrap();
    one_line_error(&bad);
}

#[test]
fn fixture_files_match_builtin_specs() {
    for (file, name) in [("five-year.toml", "five-year"), ("explorer.toml", "explorer")] {
        let spec: ArchiveSpec = toml::from_str(&fs::read_to_string(fixture_file(file)).unwrap()).unwrap();
        assert_eq!(spec, fixtures::by_name(name).unwrap(), "{file}");
    }
    let packed: ArchiveSpec = toml::from_str(&fs::read_to_string(fixture_file("packed-small.toml")).unwrap()).unwrap();
    assert_eq!(packed.files().unwrap().len(), 1 + 2);
}

#[test]
fn packed_archive_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let raw = dir.path().join("raw");
    ok(dcpviz(&store).args(["gen-archive", "--spec"]).arg(fixture_file("packed-small.toml")).arg("--out").arg(&raw).output().unwrap());
    let reg = ok(dcpviz(&store).args(["register-site", "--id", "p", "--root"]).arg(&raw).output().unwrap());
    assert!(reg.contains("3 holdings"), "{reg}");
    let out = ok(dcpviz(&store)
        .args(["run", "--site", "p", "--model", "GFDL-ESM2M", "--variables", "tasmin"])
        .args(["--scenario", "rcp85", "--years", "2006:2007", "--bands", "-10,0,10,20,30"])
        .output()
        .unwrap());
    assert!(out.contains("failures=0"), "{out}");
    let ls = ok(dcpviz(&store).args(["store", "ls", "--kind", "geojson"]).output().unwrap());
    assert_eq!(ls.lines().count(), 24);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[test]
fn serve_answers_catalog_requests() {
    let dir = tempfile::tempdir().unwrap();
    let store = prepared(dir.path());
    run_five_year(&store);
    let port = free_port();
    let mut child = dcpviz(&store)
        .args(["serve", "--bind", &format!("127.0.0.1:{port}")])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let reply = loop {
        if let Some(r) = http_get(port, "/api/catalog") {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(100));
    };
    let bad = http_get(port, "/api/heatmap?region=Atlantis").unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"coverage\""));
    assert!(reply.contains("\"first\":\"2036-01\""));
    assert!(bad.starts_with("HTTP/1.1 400"), "{bad}");
    assert!(bad.contains("\"code\":\"unknown_region\""));
}
