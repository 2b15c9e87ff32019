use std::collections::HashSet;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use dcpviz_core::grid::{Scenario, Variable};
use dcpviz_core::store::{ProductKind, Store};
use dcpviz_core::workflow::{fixtures, DataSite, WorkflowQuery};

use crate::Faults;

pub const RATIO_LIMIT: f64 = 0.2;

/// Store bookkeeping files that sit beside the products.
const BOOKKEEPING: [&str; 3] = ["catalog.jsonl", "annotations.jsonl", "regions.mask"];

fn walk(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk(&path, out);
        } else {
            out.push(path);
        }
    }
}

fn digest(bytes: &[u8]) -> Vec<u8> {
    Sha256::digest(bytes).to_vec()
}

pub fn run() -> (bool, String) {
    let mut faults = Faults::default();
    let dir = tempfile::tempdir().unwrap();
    let spec = fixtures::standard();
    let raw = dir.path().join("raw");
    let raw_files = spec.write_to(&raw).unwrap();
    let site = DataSite::scan("site-a", &raw).unwrap();
    let store_root = dir.path().join("store");
    let store = Store::open(&store_root).unwrap();
    let q = WorkflowQuery::new(&spec.model, vec![Variable::Pr], Scenario::Rcp85, (spec.start_year, spec.end_year));
    let plan = site.plan(&q).unwrap();
    let first = site.execute(&plan, &store).unwrap();
    faults.check(first.failures.is_empty(), || format!("failures: {:?}", first.failures));

    let raw_total: u64 = raw_files.iter().map(|p| fs::metadata(p).unwrap().len()).sum();
    faults.check(first.raw_bytes_resident == raw_total, || {
        format!("raw_bytes_resident {} but files hold {raw_total}", first.raw_bytes_resident)
    });
    let ratio = first.derived_bytes_emitted as f64 / raw_total as f64;
    faults.check(ratio < RATIO_LIMIT, || format!("ratio {ratio:.4}"));

    // Everything that crossed into the store is a derived product or store
    // bookkeeping, and no raw file was copied across.
    let raw_digests: HashSet<Vec<u8>> = raw_files.iter().map(|p| digest(&fs::read(p).unwrap())).collect();
    let derived_ext: Vec<&str> = ProductKind::ALL.iter().map(|k| k.extension()).collect();
    let mut files = Vec::new();
    walk(&store_root, &mut files);
    // Products plus the region mask the site ships with them.
    let mut product_bytes = 0u64;
    for path in &files {
        let rel = path.strip_prefix(&store_root).unwrap();
        let name = rel.to_string_lossy();
        if name == "regions.mask" {
            product_bytes += fs::metadata(path).unwrap().len();
        }
        if BOOKKEEPING.contains(&name.as_ref()) {
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        faults.check(name.starts_with("products") && derived_ext.contains(&ext), || format!("unexpected file {name}"));
        let bytes = fs::read(path).unwrap();
        faults.check(!bytes.starts_with(b"CDF"), || format!("{name} is NetCDF"));
        faults.check(!raw_digests.contains(&digest(&bytes)), || format!("{name} is a raw file"));
        product_bytes += bytes.len() as u64;
    }
    faults.check(product_bytes == first.derived_bytes_emitted, || {
        format!("store holds {product_bytes} derived bytes, report says {}", first.derived_bytes_emitted)
    });

    let second = site.execute(&plan, &store).unwrap();
    faults.check(second.derived_bytes_emitted == 0, || format!("rerun emitted {} bytes", second.derived_bytes_emitted));
    faults.check(second.products_written == 0, || format!("rerun wrote {} products", second.products_written));

    let summary = format!(
        "{} raw bytes resident, {} derived bytes emitted, ratio {ratio:.3} < {RATIO_LIMIT}, {} store files all derived, rerun emitted {} bytes",
        raw_total,
        first.derived_bytes_emitted,
        files.len(),
        second.derived_bytes_emitted
    );
    (faults.is_empty(), faults.report(summary))
}
