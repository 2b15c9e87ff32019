//! On-disk repository of derived products, keyed by [`DataIndex`] plus
//! scenario, with an append-only JSONL catalog and an annotation log.
//!
//! Layout under the root:
//!
//! ```text
//! catalog.jsonl
//! annotations.jsonl
//! regions.mask
//! products/<dataset>/<model>/<scenario>/<variable>/<YYYY-MM-01>.<ext>
//! ```

mod annotations;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grid::{GridError, RegionMask, Scenario};
use crate::index::DataIndex;

pub use annotations::{Annotation, AnnotationFilter, NewAnnotation, Pin};

const CATALOG: &str = "catalog.jsonl";
const ANNOTATIONS: &str = "annotations.jsonl";
const MASK: &str = "regions.mask";
const PRODUCTS: &str = "products";
const TMP_PREFIX: &str = ".tmp-";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("storage full: {needed} bytes needed, quota {quota}")]
    StorageFull { needed: u64, quota: u64 },
    #[error("no stored product {0}")]
    NotFound(String),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("unknown snapshot index {0}")]
    UnknownSnapshot(String),
    #[error("region mask: {0}")]
    Mask(#[from] GridError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductKind {
    Geojson,
    Thumbnail,
    Aggregate,
}

impl ProductKind {
    pub const ALL: [ProductKind; 3] = [ProductKind::Geojson, ProductKind::Thumbnail, ProductKind::Aggregate];

    pub fn as_str(self) -> &'static str {
        match self {
            ProductKind::Geojson => "geojson",
            ProductKind::Thumbnail => "thumbnail",
            ProductKind::Aggregate => "aggregate",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ProductKind::Geojson => "geojson",
            ProductKind::Thumbnail => "png",
            ProductKind::Aggregate => "csv",
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            ProductKind::Geojson => "application/geo+json",
            ProductKind::Thumbnail => "image/png",
            ProductKind::Aggregate => "text/csv",
        }
    }

    fn from_extension(ext: &str) -> Option<ProductKind> {
        ProductKind::ALL.into_iter().find(|k| k.extension() == ext)
    }
}

impl std::str::FromStr for ProductKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProductKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown product kind `{s}`"))
    }
}

/// A product's identity: the data index, the scenario kept beside it,
/// and the kind of artifact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProductKey {
    pub index: DataIndex,
    pub scenario: Scenario,
    pub kind: ProductKind,
}

impl ProductKey {
    pub fn new(index: DataIndex, scenario: Scenario, kind: ProductKind) -> Self {
        ProductKey { index, scenario, kind }
    }

    /// Path relative to the store root, always with `/` separators.
    pub fn rel_path(&self) -> String {
        format!(
            "{PRODUCTS}/{}/{}/{}/{}/{}.{}",
            self.index.dataset,
            self.index.model,
            self.scenario,
            self.index.variable,
            self.index.date(),
            self.kind.extension()
        )
    }
}

/// One catalog line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub index: DataIndex,
    pub scenario: Scenario,
    pub kind: ProductKind,
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
    /// Hash of the generation parameters; empty for records recovered by a
    /// directory scan.
    pub params_hash: String,
    pub stored_at: DateTime<Utc>,
}

impl CatalogRecord {
    pub fn key(&self) -> ProductKey {
        ProductKey::new(self.index.clone(), self.scenario, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Receipt {
    pub record: CatalogRecord,
    /// Whether an older object under the same key was replaced.
    pub replaced: bool,
}

/// A stored snapshot: one index under one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductRef {
    pub index: DataIndex,
    pub scenario: Scenario,
    pub kinds: Vec<ProductKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub dataset: Option<String>,
    pub model: Option<String>,
    pub variable: Option<String>,
    pub scenario: Option<Scenario>,
    /// Inclusive.
    pub years: Option<(i32, i32)>,
    pub months: Option<BTreeSet<u32>>,
    pub kind: Option<ProductKind>,
}

impl Query {
    pub fn matches(&self, r: &CatalogRecord) -> bool {
        let i = &r.index;
        self.dataset.as_ref().is_none_or(|d| *d == i.dataset)
            && self.model.as_ref().is_none_or(|m| *m == i.model)
            && self.variable.as_ref().is_none_or(|v| *v == i.variable)
            && self.scenario.is_none_or(|s| s == r.scenario)
            && self.years.is_none_or(|(a, b)| (a..=b).contains(&i.year))
            && self.months.as_ref().is_none_or(|m| m.contains(&i.month))
            && self.kind.is_none_or(|k| k == r.kind)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short stable hash of any serializable parameter set.
pub fn params_hash<T: Serialize>(params: &T) -> String {
    let json = serde_json::to_vec(params).expect("parameters serialize");
    sha256_hex(&json)[..16].to_string()
}

struct State {
    records: BTreeMap<ProductKey, CatalogRecord>,
    catalog: File,
    used: u64,
    generation: u64,
}

pub struct Store {
    root: PathBuf,
    quota: Option<u64>,
    state: RwLock<State>,
    notes: Mutex<annotations::Log>,
    tmp_seq: AtomicU64,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish()
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8], tag: u64) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("object");
    let tmp = dir.join(format!("{TMP_PREFIX}{}-{tag}-{name}", std::process::id()));
    write_synced(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Vec<T>, usize), StoreError> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    let mut skipped = 0;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push(v),
            Err(_) => skipped += 1,
        }
    }
    Ok((out, skipped))
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, &it).expect("record serializes");
        buf.push(b'\n');
    }
    buf
}

fn open_append(path: &Path) -> Result<File, StoreError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))
}

/// Parses `products/<dataset>/<model>/<scenario>/<variable>/<date>.<ext>`.
fn key_from_rel(parts: &[&str]) -> Option<ProductKey> {
    let [PRODUCTS, dataset, model, scenario, variable, file] = parts else {
        return None;
    };
    let (date, ext) = file.rsplit_once('.')?;
    let kind = ProductKind::from_extension(ext)?;
    let scenario: Scenario = scenario.parse().ok()?;
    let index: DataIndex = format!("{dataset}_{model}_{variable}_{date}").parse().ok()?;
    if index.model != *model || index.dataset != *dataset || index.variable != *variable {
        return None;
    }
    Some(ProductKey::new(index, scenario, kind))
}

fn scan(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), StoreError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(dir)(e)),
    };
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        let ft = entry.file_type().map_err(io_err(&path))?;
        if ft.is_dir() {
            scan(root, &path, out)?;
        } else if entry.file_name().to_string_lossy().starts_with(TMP_PREFIX) {
            let _ = fs::remove_file(&path);
        } else {
            out.push(path.strip_prefix(root).unwrap_or(&path).to_path_buf());
        }
    }
    Ok(())
}

fn record_from_disk(root: &Path, key: ProductKey) -> Result<CatalogRecord, StoreError> {
    let path = root.join(key.rel_path());
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let stored_at = fs::metadata(&path)
        .and_then(|m| m.modified())
        .map(DateTime::<Utc>::from)
        .unwrap_or_else(|_| Utc::now());
    Ok(CatalogRecord {
        path: key.rel_path(),
        index: key.index,
        scenario: key.scenario,
        kind: key.kind,
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
        params_hash: String::new(),
        stored_at,
    })
}

impl Store {
    /// Opens or creates a store. The catalog is compacted to one line per
    /// key and reconciled with the files actually present: records whose
    /// file is gone are dropped, files without a record are re-catalogued.
    pub fn open(root: impl AsRef<Path>) -> Result<Store, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join(PRODUCTS)).map_err(io_err(&root))?;
        let cat_path = root.join(CATALOG);
        let (lines, _) = read_jsonl::<CatalogRecord>(&cat_path)?;
        let mut records: BTreeMap<ProductKey, CatalogRecord> = BTreeMap::new();
        for r in lines {
            records.insert(r.key(), r);
        }
        let mut files = Vec::new();
        scan(&root, &root.join(PRODUCTS), &mut files)?;
        let mut on_disk = BTreeSet::new();
        for rel in files {
            let parts: Vec<&str> = rel.iter().filter_map(|c| c.to_str()).collect();
            if let Some(key) = key_from_rel(&parts) {
                on_disk.insert(key);
            }
        }
        records.retain(|k, _| on_disk.contains(k));
        for key in on_disk {
            let stale = records.get(&key).is_none_or(|r| {
                fs::metadata(root.join(&r.path)).map(|m| m.len()).ok() != Some(r.bytes)
            });
            if stale {
                let r = record_from_disk(&root, key.clone())?;
                records.insert(key, r);
            }
        }
        atomic_write(&cat_path, &jsonl(records.values()), 0)?;
        let catalog = open_append(&cat_path)?;
        let used = records.values().map(|r| r.bytes).sum();
        let notes = annotations::Log::open(&root.join(ANNOTATIONS))?;
        Ok(Store {
            root,
            quota: None,
            state: RwLock::new(State {
                records,
                catalog,
                used,
                generation: 0,
            }),
            notes: Mutex::new(notes),
            tmp_seq: AtomicU64::new(1),
        })
    }

    /// Caps the total size of stored products.
    pub fn with_quota(mut self, bytes: u64) -> Self {
        self.quota = Some(bytes);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn used_bytes(&self) -> u64 {
        self.state.read().unwrap().used
    }

    /// Bumped on every successful put; lets readers invalidate caches.
    pub fn generation(&self) -> u64 {
        self.state.read().unwrap().generation
    }

    /// Durably stores `bytes` under `key`, atomically replacing any previous
    /// object.
    pub fn put(&self, key: &ProductKey, bytes: &[u8], params_hash: &str) -> Result<Receipt, StoreError> {
        let rel = key.rel_path();
        let path = self.root.join(&rel);
        let dir = path.parent().expect("product path has a parent");
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let seq = self.tmp_seq.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!("{TMP_PREFIX}{}-{seq}", std::process::id()));
        let record = CatalogRecord {
            index: key.index.clone(),
            scenario: key.scenario,
            kind: key.kind,
            path: rel,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
            params_hash: params_hash.to_string(),
            stored_at: Utc::now(),
        };
        {
            let st = self.state.read().unwrap();
            self.check_quota(&st, key, record.bytes)?;
        }
        write_synced(&tmp, bytes)?;
        let mut st = self.state.write().unwrap();
        if let Err(e) = self.check_quota(&st, key, record.bytes) {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
        if let Err(e) = fs::rename(&tmp, &path) {
            let _ = fs::remove_file(&tmp);
            return Err(io_err(&path)(e));
        }
        let line = jsonl([&record]);
        let cat_path = self.root.join(CATALOG);
        st.catalog.write_all(&line).map_err(io_err(&cat_path))?;
        st.catalog.flush().map_err(io_err(&cat_path))?;
        let old = st.records.insert(key.clone(), record.clone());
        st.used = st.used - old.as_ref().map_or(0, |r| r.bytes) + record.bytes;
        st.generation += 1;
        Ok(Receipt {
            record,
            replaced: old.is_some(),
        })
    }

    fn check_quota(&self, st: &State, key: &ProductKey, bytes: u64) -> Result<(), StoreError> {
        let Some(quota) = self.quota else {
            return Ok(());
        };
        let old = st.records.get(key).map_or(0, |r| r.bytes);
        let needed = st.used - old + bytes;
        if needed > quota {
            return Err(StoreError::StorageFull { needed, quota });
        }
        Ok(())
    }

    pub fn get(&self, key: &ProductKey) -> Result<Vec<u8>, StoreError> {
        let rel = self
            .record(key)
            .ok_or_else(|| StoreError::NotFound(format!("{} {} {}", key.index, key.scenario, key.kind.as_str())))?
            .path;
        let path = self.root.join(rel);
        fs::read(&path).map_err(io_err(&path))
    }

    pub fn record(&self, key: &ProductKey) -> Option<CatalogRecord> {
        self.state.read().unwrap().records.get(key).cloned()
    }

    /// All current catalog records in key order.
    pub fn records(&self) -> Vec<CatalogRecord> {
        self.state.read().unwrap().records.values().cloned().collect()
    }

    /// Stored snapshots matching every given predicate, sorted by date, then
    /// variable, then the remaining key parts.
    pub fn query(&self, q: &Query) -> Vec<ProductRef> {
        let st = self.state.read().unwrap();
        let mut grouped: BTreeMap<(i32, u32, String, String, String, Scenario), ProductRef> = BTreeMap::new();
        for r in st.records.values().filter(|r| q.matches(r)) {
            let i = &r.index;
            let k = (i.year, i.month, i.variable.clone(), i.model.clone(), i.dataset.clone(), r.scenario);
            grouped
                .entry(k)
                .or_insert_with(|| ProductRef {
                    index: r.index.clone(),
                    scenario: r.scenario,
                    kinds: Vec::new(),
                })
                .kinds
                .push(r.kind);
        }
        grouped.into_values().collect()
    }

    /// Scenarios under which `index` has at least one product.
    pub fn scenarios_of(&self, index: &DataIndex) -> Vec<Scenario> {
        let st = self.state.read().unwrap();
        let set: BTreeSet<Scenario> = st
            .records
            .values()
            .filter(|r| r.index == *index)
            .map(|r| r.scenario)
            .collect();
        set.into_iter().collect()
    }

    /// Rebuilds the catalog from the files on disk alone. Parameter hashes
    /// are lost, so later workflow runs regenerate the products.
    pub fn rebuild(&self) -> Result<usize, StoreError> {
        let mut files = Vec::new();
        scan(&self.root, &self.root.join(PRODUCTS), &mut files)?;
        let mut records = BTreeMap::new();
        for rel in files {
            let parts: Vec<&str> = rel.iter().filter_map(|c| c.to_str()).collect();
            if let Some(key) = key_from_rel(&parts) {
                let r = record_from_disk(&self.root, key.clone())?;
                records.insert(key, r);
            }
        }
        let mut st = self.state.write().unwrap();
        let cat_path = self.root.join(CATALOG);
        atomic_write(&cat_path, &jsonl(records.values()), self.tmp_seq.fetch_add(1, Ordering::Relaxed))?;
        st.catalog = open_append(&cat_path)?;
        st.used = records.values().map(|r| r.bytes).sum();
        st.records = records;
        st.generation += 1;
        Ok(st.records.len())
    }

    pub fn put_mask(&self, mask: &RegionMask) -> Result<(), StoreError> {
        let seq = self.tmp_seq.fetch_add(1, Ordering::Relaxed);
        atomic_write(&self.root.join(MASK), mask.to_text().as_bytes(), seq)
    }

    pub fn load_mask(&self) -> Result<Option<RegionMask>, StoreError> {
        let path = self.root.join(MASK);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(RegionMask::parse(&text)?)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Persists a new annotation. A snapshot reference must name an index
    /// with at least one stored product.
    pub fn add_annotation(&self, new: NewAnnotation) -> Result<Annotation, StoreError> {
        if let Some(idx) = &new.snapshot {
            if self.scenarios_of(idx).is_empty() {
                return Err(StoreError::UnknownSnapshot(idx.to_string()));
            }
        }
        self.notes.lock().unwrap().add(new)
    }

    pub fn list_annotations(&self, filter: &AnnotationFilter) -> Vec<Annotation> {
        self.notes.lock().unwrap().list(filter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::make_index;

    fn key(year: i32, month: u32, kind: ProductKind) -> ProductKey {
        ProductKey::new(
            make_index("NEX-DCP", "CESM1-CAM5", "pr", year, month).unwrap(),
            Scenario::Rcp85,
            kind,
        )
    }

    #[test]
    fn layout_and_scan_parse() {
        let k = key(2021, 3, ProductKind::Thumbnail);
        assert_eq!(
            k.rel_path(),
            "products/NEX-DCP/CESM1-CAM5/rcp85/pr/2021-03-01.png"
        );
        let parts: Vec<&str> = k.rel_path().leak().split('/').collect();
        assert_eq!(key_from_rel(&parts), Some(k));
        assert_eq!(key_from_rel(&["products", "a", "b"]), None);
    }

    #[test]
    fn put_get_replace() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let k = key(2030, 1, ProductKind::Geojson);
        assert!(!s.put(&k, b"one", "h").unwrap().replaced);
        assert!(s.put(&k, b"second", "h").unwrap().replaced);
        assert_eq!(s.get(&k).unwrap(), b"second");
        assert_eq!(s.used_bytes(), 6);
        let files: Vec<_> = fs::read_dir(dir.path().join("products/NEX-DCP/CESM1-CAM5/rcp85/pr"))
            .unwrap()
            .collect();
        assert_eq!(files.len(), 1);
    }

    #[test]
    fn reopen_compacts_and_recovers() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = Store::open(dir.path()).unwrap();
            for m in 1..=3 {
                s.put(&key(2030, m, ProductKind::Geojson), b"{}", "h").unwrap();
            }
            s.put(&key(2030, 1, ProductKind::Geojson), b"{ }", "h2").unwrap();
        }
        let cat = dir.path().join(CATALOG);
        assert_eq!(fs::read_to_string(&cat).unwrap().lines().count(), 4);
        fs::remove_file(dir.path().join(key(2030, 2, ProductKind::Geojson).rel_path())).unwrap();
        let orphan = key(2030, 4, ProductKind::Aggregate);
        let p = dir.path().join(orphan.rel_path());
        fs::write(&p, b"a,b\n").unwrap();
        let mut f = OpenOptions::new().append(true).open(&cat).unwrap();
        f.write_all(b"{\"index\": torn").unwrap();
        drop(f);

        let s = Store::open(dir.path()).unwrap();
        let recs = s.records();
        assert_eq!(recs.len(), 3);
        assert_eq!(s.record(&key(2030, 1, ProductKind::Geojson)).unwrap().params_hash, "h2");
        let o = s.record(&orphan).unwrap();
        assert_eq!(o.params_hash, "");
        assert_eq!(o.sha256, sha256_hex(b"a,b\n"));
        assert_eq!(fs::read_to_string(&cat).unwrap().lines().count(), 3);
    }

    #[test]
    fn quota() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap().with_quota(10);
        s.put(&key(2030, 1, ProductKind::Geojson), &[0; 6], "").unwrap();
        let r = s.put(&key(2030, 2, ProductKind::Geojson), &[0; 6], "");
        assert!(matches!(r, Err(StoreError::StorageFull { needed: 12, quota: 10 })));
        s.put(&key(2030, 1, ProductKind::Geojson), &[0; 10], "").unwrap();
        assert!(s.get(&key(2030, 2, ProductKind::Geojson)).is_err());
        let leftovers = fs::read_dir(dir.path().join("products/NEX-DCP/CESM1-CAM5/rcp85/pr"))
            .unwrap()
            .count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn query_sorting_and_filters() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        assert!(s.query(&Query::default()).is_empty());
        for (var, y, m) in [("tasmax", 2031, 1), ("pr", 2031, 1), ("pr", 2030, 12)] {
            let idx = make_index("NEX-DCP", "CESM1-CAM5", var, y, m).unwrap();
            for kind in [ProductKind::Geojson, ProductKind::Thumbnail] {
                s.put(&ProductKey::new(idx.clone(), Scenario::Rcp45, kind), b"x", "").unwrap();
            }
        }
        let all: Vec<String> = s.query(&Query::default()).iter().map(|r| r.index.to_string()).collect();
        assert_eq!(
            all,
            [
                "NEX-DCP_CESM1-CAM5_pr_2030-12-01",
                "NEX-DCP_CESM1-CAM5_pr_2031-01-01",
                "NEX-DCP_CESM1-CAM5_tasmax_2031-01-01"
            ]
        );
        let q = Query {
            years: Some((2031, 2031)),
            variable: Some("pr".into()),
            ..Query::default()
        };
        let hits = s.query(&q);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].kinds, [ProductKind::Geojson, ProductKind::Thumbnail]);
        let none = Query {
            scenario: Some(Scenario::Rcp85),
            ..Query::default()
        };
        assert!(s.query(&none).is_empty());
    }
}
