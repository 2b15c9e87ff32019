//! Data-local execution: a query is planned against a site's holdings, run
//! next to the raw files, and only derived products are written out.

mod archive;
mod site;
pub mod fixtures;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::analytics::{
    anomaly_table, read_aggregate_csv, regional_monthly_mean, write_aggregate_csv, write_anomaly_csv,
    AggregateRow, AnalyticsError, AnomalyRow, RegionalSeries, RetroWindow, Weighting,
};
use crate::contour::{
    marching_squares_bands, render_thumbnail, to_geojson, BandSpec, ContourError, ContourParams, RampId,
};
use crate::grid::{snapshot_from_slab, GridError, GridSnapshot, RegionMask, Scenario, SnapshotMeta, Variable};
use crate::index::{make_index, DataIndex, IndexError};
use crate::netcdf::NcError;
use crate::store::{params_hash, sha256_hex, ProductKey, ProductKind, Store, StoreError};

pub use archive::ArchiveSpec;
pub use site::{DataSite, Holding, SiteManifest};

pub const DEFAULT_DATASET: &str = "NEX-DCP";

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("holdings do not cover {}", fmt_missing(.missing))]
    HoldingsMissing { missing: Vec<(Variable, i32)> },
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

fn fmt_missing(m: &[(Variable, i32)]) -> String {
    m.iter()
        .map(|(v, y)| format!("{v} {y}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn default_dataset() -> String {
    DEFAULT_DATASET.to_string()
}

fn default_thumb_width() -> u32 {
    160
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowQuery {
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub model: String,
    pub variables: Vec<Variable>,
    /// Experiment id. Years up to 2005 are read from historical files.
    pub scenario: Scenario,
    /// Inclusive.
    pub years: (i32, i32),
    /// Baseline for relative intensity; `None` skips the anomaly step.
    #[serde(default)]
    pub retro: Option<RetroWindow>,
    /// Applied to every variable; each variable's default otherwise.
    #[serde(default)]
    pub bands: Option<BandSpec>,
    #[serde(default = "default_contour")]
    pub contour: ContourParams,
    #[serde(default = "default_thumb_width")]
    pub thumb_width: u32,
    #[serde(default)]
    pub weighting: Weighting,
}

/// Stored products keep coordinates to five decimals (about a metre).
pub fn default_contour() -> ContourParams {
    ContourParams {
        decimals: Some(5),
        ..ContourParams::default()
    }
}

impl WorkflowQuery {
    pub fn new(model: impl Into<String>, variables: Vec<Variable>, scenario: Scenario, years: (i32, i32)) -> Self {
        WorkflowQuery {
            dataset: default_dataset(),
            model: model.into(),
            variables,
            scenario,
            years,
            retro: None,
            bands: None,
            contour: default_contour(),
            thumb_width: default_thumb_width(),
            weighting: Weighting::default(),
        }
    }

    pub fn validate(&self) -> Result<(), WorkflowError> {
        let bad = |m: String| Err(WorkflowError::InvalidQuery(m));
        if self.variables.is_empty() {
            return bad("no variables".into());
        }
        let distinct: BTreeSet<_> = self.variables.iter().collect();
        if distinct.len() != self.variables.len() {
            return bad("variables listed twice".into());
        }
        if self.years.0 > self.years.1 {
            return bad(format!("year range {}:{} is reversed", self.years.0, self.years.1));
        }
        if !self.scenario.is_projection() && self.years.1 > crate::grid::LAST_HISTORICAL_YEAR {
            return bad(format!("historical runs end in {}", crate::grid::LAST_HISTORICAL_YEAR));
        }
        if self.thumb_width == 0 || self.thumb_width > 4096 {
            return bad(format!("thumbnail width {} outside 1..=4096", self.thumb_width));
        }
        if !(self.contour.tolerance_fraction > 0.0) {
            return bad("contour tolerance must be positive".into());
        }
        make_index(&self.dataset, &self.model, "pr", self.years.0.max(0), 1)?;
        Ok(())
    }

    pub fn band_spec(&self, variable: Variable) -> BandSpec {
        self.bands.clone().unwrap_or_else(|| BandSpec::default_for(variable))
    }

    fn months(&self) -> impl Iterator<Item = (i32, u32)> {
        let (a, b) = self.years;
        (a..=b).flat_map(|y| (1..=12).map(move |m| (y, m)))
    }
}

/// One unit of work. Per-month tasks are independent of each other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    Extract { variable: Variable, scenario: Scenario, year: i32, month: u32 },
    Contour { variable: Variable, scenario: Scenario, year: i32, month: u32 },
    /// Regional means of a baseline month outside the query range.
    BaselineExtract { variable: Variable, year: i32, month: u32 },
    Aggregate { variable: Variable },
    Anomaly { variable: Variable, retro: RetroWindow },
    Emit,
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Extract { .. } => "extract",
            Task::Contour { .. } => "contour",
            Task::BaselineExtract { .. } => "baseline_extract",
            Task::Aggregate { .. } => "aggregate",
            Task::Anomaly { .. } => "anomaly",
            Task::Emit => "emit",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Extract { variable, scenario, year, month }
            | Task::Contour { variable, scenario, year, month } => {
                write!(f, "{} {variable} {scenario} {year}-{month:02}", self.kind())
            }
            Task::BaselineExtract { variable, year, month } => {
                write!(f, "{} {variable} {year}-{month:02}", self.kind())
            }
            Task::Aggregate { variable } => write!(f, "aggregate {variable}"),
            Task::Anomaly { variable, retro } => write!(f, "anomaly {variable} {}:{}", retro.t0, retro.t1),
            Task::Emit => f.write_str("emit"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct MonthKey {
    variable: Variable,
    scenario: Scenario,
    year: i32,
    month: u32,
}

#[derive(Debug, Clone)]
struct Source {
    file: String,
    bytes: u64,
    time_index: usize,
}

/// Ordered task list plus where each month's raw data lives.
#[derive(Debug, Clone)]
pub struct Plan {
    pub query: WorkflowQuery,
    pub tasks: Vec<Task>,
    sources: BTreeMap<MonthKey, Source>,
}

impl Plan {
    pub fn count(&self, kind: &str) -> usize {
        self.tasks.iter().filter(|t| t.kind() == kind).count()
    }

    /// Raw files the plan reads from, with their sizes.
    pub fn files(&self) -> BTreeMap<String, u64> {
        self.sources.values().map(|s| (s.file.clone(), s.bytes)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub done: usize,
    pub cached: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task: String,
    pub error: String,
}

/// What crossed the site boundary during one execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub site_id: String,
    /// Total size of the raw files the plan covers.
    pub raw_bytes_resident: u64,
    /// Exact sum of the sizes of products written by this run.
    pub derived_bytes_emitted: u64,
    pub ratio: Option<f64>,
    pub files_touched: usize,
    pub products_written: usize,
    pub products_cached: usize,
    pub tasks: BTreeMap<String, TaskCounts>,
    pub failures: Vec<TaskFailure>,
}

impl TransferReport {
    pub fn summary(&self) -> String {
        let ratio = self.ratio.map_or("n/a".to_string(), |r| format!("{r:.4}"));
        let mut s = format!(
            "site {}: raw_bytes_resident={} derived_bytes_emitted={} ratio={ratio} products_written={} products_cached={} failures={}",
            self.site_id,
            self.raw_bytes_resident,
            self.derived_bytes_emitted,
            self.products_written,
            self.products_cached,
            self.failures.len()
        );
        for f in &self.failures {
            s.push_str(&format!("\n  failed {}: {}", f.task, f.error));
        }
        s
    }
}

/// Thumbnail height for a grid's aspect ratio.
fn thumb_height(width: u32, snap: &GridSnapshot) -> u32 {
    let (nlat, nlon) = snap.shape();
    let dy = snap.lat[nlat - 1] - snap.lat[0];
    let dx = snap.lon[nlon - 1] - snap.lon[0];
    let h = (f64::from(width) * dy / dx).round();
    if h.is_finite() {
        (h as u32).clamp(8, 4 * width.max(2))
    } else {
        width
    }
}

fn ramp_for(variable: Variable) -> RampId {
    match variable {
        Variable::Pr => RampId::YlGnBu,
        Variable::Tasmax | Variable::Tasmin => RampId::Temperature,
    }
}

#[derive(Serialize)]
struct ContourHashInput<'a> {
    kind: ProductKind,
    file: &'a str,
    bytes: u64,
    time_index: usize,
    spec: &'a BandSpec,
    params: ContourParams,
    thumb_width: u32,
    ramp: RampId,
}

#[derive(Serialize)]
struct AggregateHashInput<'a> {
    file: &'a str,
    bytes: u64,
    time_index: usize,
    mask: &'a str,
    weighting: Weighting,
    retro: Option<RetroWindow>,
    baseline: &'a str,
}

struct Hashes {
    geojson: String,
    thumbnail: String,
    aggregate: String,
}

/// Per-month regional means: region id -> (value, cell count).
type Means = BTreeMap<u32, (f64, usize)>;

struct MonthJob {
    key: MonthKey,
    index: DataIndex,
    source: Source,
    contour: bool,
    need_contour: bool,
    need_aggregate: bool,
    hashes: Hashes,
}

#[derive(Default)]
struct Outcome {
    written: usize,
    cached: usize,
    emitted: u64,
    failures: Vec<TaskFailure>,
    counts: BTreeMap<String, TaskCounts>,
}

impl Outcome {
    fn count(&mut self, kind: &str) -> &mut TaskCounts {
        self.counts.entry(kind.to_string()).or_default()
    }

    fn fail(&mut self, task: &Task, err: impl std::fmt::Display) {
        self.count(task.kind()).failed += 1;
        self.failures.push(TaskFailure {
            task: task.to_string(),
            error: err.to_string(),
        });
    }

    fn absorb(&mut self, other: Outcome) {
        self.written += other.written;
        self.cached += other.cached;
        self.emitted += other.emitted;
        self.failures.extend(other.failures);
        for (k, c) in other.counts {
            let t = self.count(&k);
            t.done += c.done;
            t.cached += c.cached;
            t.failed += c.failed;
            t.skipped += c.skipped;
        }
    }
}

fn put(store: &Store, key: &ProductKey, bytes: &[u8], hash: &str, out: &mut Outcome) -> Result<(), StoreError> {
    store.put(key, bytes, hash)?;
    out.written += 1;
    out.emitted += bytes.len() as u64;
    Ok(())
}

fn is_cached(store: &Store, key: &ProductKey, hash: &str) -> bool {
    store.record(key).is_some_and(|r| r.params_hash == hash)
}

impl DataSite {
    /// Orders the work for `query`: per-month extracts and contours, baseline
    /// extracts for window months outside the range, then per-variable
    /// aggregation, anomalies and the final emit.
    pub fn plan(&self, query: &WorkflowQuery) -> Result<Plan, WorkflowError> {
        query.validate()?;
        let mut by_month: BTreeMap<(Variable, Scenario, i32, u32), Source> = BTreeMap::new();
        for h in self.holdings().iter().filter(|h| h.model == query.model) {
            for (k, &(y, m)) in h.months.iter().enumerate() {
                by_month
                    .entry((h.variable, h.scenario, y, m))
                    .or_insert_with(|| Source {
                        file: h.file.clone(),
                        bytes: h.bytes,
                        time_index: k,
                    });
            }
        }
        let in_range = |y: i32| (query.years.0..=query.years.1).contains(&y);
        let mut tasks = Vec::new();
        let mut sources = BTreeMap::new();
        let mut missing: BTreeSet<(Variable, i32)> = BTreeSet::new();
        let mut want = |variable: Variable, year: i32, month: u32, sources: &mut BTreeMap<MonthKey, Source>| {
            let scenario = query.scenario.source_for_year(year);
            match by_month.get(&(variable, scenario, year, month)) {
                Some(src) => {
                    let key = MonthKey { variable, scenario, year, month };
                    sources.insert(key, src.clone());
                    Some(scenario)
                }
                None => {
                    missing.insert((variable, year));
                    None
                }
            }
        };
        for &variable in &query.variables {
            let mut contours = Vec::new();
            for (year, month) in query.months() {
                if let Some(scenario) = want(variable, year, month, &mut sources) {
                    tasks.push(Task::Extract { variable, scenario, year, month });
                    contours.push(Task::Contour { variable, scenario, year, month });
                }
            }
            tasks.extend(contours);
            if let Some(w) = query.retro {
                for year in w.years().filter(|&y| !in_range(y)) {
                    for month in 1..=12 {
                        if want(variable, year, month, &mut sources).is_some() {
                            tasks.push(Task::BaselineExtract { variable, year, month });
                        }
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(WorkflowError::HoldingsMissing {
                missing: missing.into_iter().collect(),
            });
        }
        for &variable in &query.variables {
            tasks.push(Task::Aggregate { variable });
            if let Some(retro) = query.retro {
                tasks.push(Task::Anomaly { variable, retro });
            }
        }
        tasks.push(Task::Emit);
        Ok(Plan {
            query: query.clone(),
            tasks,
            sources,
        })
    }

    fn extract(&self, key: &MonthKey, src: &Source, model: &str) -> Result<GridSnapshot, WorkflowError> {
        let nc = self
            .header_for(&src.file)
            .ok_or_else(|| WorkflowError::InvalidQuery(format!("`{}` is not held here", src.file)))?;
        let mut reader = self.open(&src.file)?;
        let meta = SnapshotMeta {
            model: model.to_string(),
            scenario: key.scenario,
        };
        let snap = snapshot_from_slab(nc, &mut reader, key.variable, src.time_index, &meta)?;
        if (snap.year, snap.month) != (key.year, key.month) {
            return Err(WorkflowError::InvalidQuery(format!(
                "time index {} of `{}` decodes to {}-{:02}, expected {}-{:02}",
                src.time_index, src.file, snap.year, snap.month, key.year, key.month
            )));
        }
        Ok(snap)
    }

    fn mask_once<'a>(
        &self,
        cell: &'a OnceLock<Result<RegionMask, String>>,
        snap: &GridSnapshot,
    ) -> Result<&'a RegionMask, String> {
        cell.get_or_init(|| self.mask_for(&snap.lat, &snap.lon).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Runs `plan` next to the raw files and writes products into `store`.
    ///
    /// Products whose catalog record carries the same parameter hash are
    /// left alone, so an unchanged re-run writes nothing. Per-task failures
    /// are collected in the report rather than aborting the run.
    pub fn execute(&self, plan: &Plan, store: &Store) -> Result<TransferReport, WorkflowError> {
        let q = &plan.query;
        let mask_probe = self.probe_mask(plan)?;
        let mask_hash = mask_probe.as_ref().map_or_else(String::new, |m| sha256_hex(m.to_text().as_bytes()));
        let baseline_hash = {
            let files: BTreeMap<String, u64> = match q.retro {
                Some(w) => plan
                    .sources
                    .iter()
                    .filter(|(k, _)| w.contains(k.year))
                    .map(|(_, s)| (s.file.clone(), s.bytes))
                    .collect(),
                None => BTreeMap::new(),
            };
            params_hash(&files)
        };

        let mut jobs = Vec::new();
        let mut out = Outcome::default();
        for task in &plan.tasks {
            let (variable, scenario, year, month, contour) = match *task {
                Task::Extract { variable, scenario, year, month } => (variable, scenario, year, month, true),
                Task::BaselineExtract { variable, year, month } => {
                    (variable, q.scenario.source_for_year(year), year, month, false)
                }
                _ => continue,
            };
            let key = MonthKey { variable, scenario, year, month };
            let source = plan.sources[&key].clone();
            let index = make_index(&q.dataset, &q.model, variable.as_str(), year, month)?;
            let spec = q.band_spec(variable);
            let contour_input = |kind| ContourHashInput {
                kind,
                file: &source.file,
                bytes: source.bytes,
                time_index: source.time_index,
                spec: &spec,
                params: q.contour,
                thumb_width: q.thumb_width,
                ramp: ramp_for(variable),
            };
            let hashes = Hashes {
                geojson: params_hash(&contour_input(ProductKind::Geojson)),
                thumbnail: params_hash(&contour_input(ProductKind::Thumbnail)),
                aggregate: params_hash(&AggregateHashInput {
                    file: &source.file,
                    bytes: source.bytes,
                    time_index: source.time_index,
                    mask: &mask_hash,
                    weighting: q.weighting,
                    retro: q.retro,
                    baseline: &baseline_hash,
                }),
            };
            let pk = |kind| ProductKey::new(index.clone(), scenario, kind);
            let need_contour = contour
                && !(is_cached(store, &pk(ProductKind::Geojson), &hashes.geojson)
                    && is_cached(store, &pk(ProductKind::Thumbnail), &hashes.thumbnail));
            let need_aggregate = !is_cached(store, &pk(ProductKind::Aggregate), &hashes.aggregate);
            jobs.push(MonthJob {
                key,
                index,
                source,
                contour,
                need_contour,
                need_aggregate,
                hashes,
            });
        }

        let any_aggregate = jobs.iter().any(|j| j.need_aggregate);
        let mask_cell: OnceLock<Result<RegionMask, String>> = OnceLock::new();
        if let Some(m) = mask_probe {
            let _ = mask_cell.set(Ok(m));
        }
        let means: Mutex<BTreeMap<MonthKey, Means>> = Mutex::new(BTreeMap::new());
        let next = AtomicUsize::new(0);
        let outcomes: Mutex<Vec<Outcome>> = Mutex::new(Vec::new());
        let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(jobs.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| {
                    let mut local = Outcome::default();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(job) = jobs.get(i) else { break };
                        if let Some(m) = self.run_month(job, plan, store, &mask_cell, any_aggregate, &mut local) {
                            means.lock().unwrap().insert(job.key, m);
                        }
                    }
                    outcomes.lock().unwrap().push(local);
                });
            }
        });
        for o in outcomes.into_inner().unwrap() {
            out.absorb(o);
        }
        let mut means = means.into_inner().unwrap();

        for task in &plan.tasks {
            match task {
                Task::Aggregate { variable } => {
                    let r = self.write_aggregates(*variable, &jobs, &mut means, plan, store, &mask_cell, &mut out);
                    match r {
                        Ok(()) => out.count("aggregate").done += 1,
                        Err(e) => out.fail(task, e),
                    }
                }
                Task::Anomaly { .. } => out.count("anomaly").done += 1,
                Task::Emit => match self.emit_mask(store, &mask_cell, &mut out) {
                    Ok(()) => out.count("emit").done += 1,
                    Err(e) => out.fail(task, e),
                },
                _ => {}
            }
        }

        let files = plan.files();
        let raw: u64 = files.values().sum();
        out.failures.sort_by(|a, b| a.task.cmp(&b.task));
        Ok(TransferReport {
            site_id: self.site_id.clone(),
            raw_bytes_resident: raw,
            derived_bytes_emitted: out.emitted,
            ratio: (raw > 0).then(|| out.emitted as f64 / raw as f64),
            files_touched: files.len(),
            products_written: out.written,
            products_cached: out.cached,
            tasks: out.counts,
            failures: out.failures,
        })
    }

    /// The region mask for the plan's grid, read from the first month that
    /// extracts cleanly.
    fn probe_mask(&self, plan: &Plan) -> Result<Option<RegionMask>, WorkflowError> {
        for (key, src) in &plan.sources {
            if let Ok(snap) = self.extract(key, src, &plan.query.model) {
                return Ok(Some(self.mask_for(&snap.lat, &snap.lon)?));
            }
        }
        Ok(None)
    }

    /// Extract, contour and regional means for one month. Returns the means
    /// when they were computed.
    fn run_month(
        &self,
        job: &MonthJob,
        plan: &Plan,
        store: &Store,
        mask_cell: &OnceLock<Result<RegionMask, String>>,
        any_aggregate: bool,
        out: &mut Outcome,
    ) -> Option<Means> {
        let q = &plan.query;
        let k = job.key;
        let extract_task = if job.contour {
            Task::Extract { variable: k.variable, scenario: k.scenario, year: k.year, month: k.month }
        } else {
            Task::BaselineExtract { variable: k.variable, year: k.year, month: k.month }
        };
        let contour_task = Task::Contour { variable: k.variable, scenario: k.scenario, year: k.year, month: k.month };
        let need_means = job.need_aggregate || (any_aggregate && q.retro.is_some_and(|w| w.contains(k.year)));
        if !job.need_contour && !need_means {
            out.count(extract_task.kind()).cached += 1;
            if job.contour {
                out.count("contour").cached += 1;
                out.cached += 2;
            }
            return None;
        }
        let snap = match self.extract(&k, &job.source, &q.model) {
            Ok(s) => s,
            Err(e) => {
                out.fail(&extract_task, e);
                if job.contour {
                    out.count("contour").skipped += 1;
                }
                return None;
            }
        };
        out.count(extract_task.kind()).done += 1;

        if job.contour {
            if job.need_contour {
                match self.contour_products(job, &snap, q, store, out) {
                    Ok(()) => out.count("contour").done += 1,
                    Err(e) => out.fail(&contour_task, e),
                }
            } else {
                out.count("contour").cached += 1;
                out.cached += 2;
            }
        }
        if !need_means {
            return None;
        }
        let mask = match self.mask_once(mask_cell, &snap) {
            Ok(m) => m,
            Err(e) => {
                out.fail(&extract_task, e);
                return None;
            }
        };
        match regional_monthly_mean(&snap, mask, q.weighting) {
            Ok(m) => Some(m),
            Err(e) => {
                out.fail(&extract_task, e);
                None
            }
        }
    }

    fn contour_products(
        &self,
        job: &MonthJob,
        snap: &GridSnapshot,
        q: &WorkflowQuery,
        store: &Store,
        out: &mut Outcome,
    ) -> Result<(), String> {
        let spec = q.band_spec(job.key.variable);
        let product = marching_squares_bands(snap, &spec, job.index.clone(), q.contour).map_err(|e| e.to_string())?;
        let geojson = to_geojson(&product);
        let png = render_thumbnail(&product, q.thumb_width, thumb_height(q.thumb_width, snap), ramp_for(job.key.variable))
            .map_err(|e: ContourError| e.to_string())?;
        let pk = |kind| ProductKey::new(job.index.clone(), job.key.scenario, kind);
        let (gk, tk) = (pk(ProductKind::Geojson), pk(ProductKind::Thumbnail));
        if is_cached(store, &gk, &job.hashes.geojson) {
            out.cached += 1;
        } else {
            put(store, &gk, geojson.as_bytes(), &job.hashes.geojson, out).map_err(|e| e.to_string())?;
        }
        if is_cached(store, &tk, &job.hashes.thumbnail) {
            out.cached += 1;
        } else {
            put(store, &tk, &png, &job.hashes.thumbnail, out).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    /// Writes one aggregate CSV per month of `variable` that needs it. Means
    /// of months that were not recomputed are read back from stored
    /// aggregates so baselines stay complete.
    #[allow(clippy::too_many_arguments)]
    fn write_aggregates(
        &self,
        variable: Variable,
        jobs: &[MonthJob],
        means: &mut BTreeMap<MonthKey, Means>,
        plan: &Plan,
        store: &Store,
        mask_cell: &OnceLock<Result<RegionMask, String>>,
        out: &mut Outcome,
    ) -> Result<(), String> {
        let q = &plan.query;
        let jobs: Vec<&MonthJob> = jobs.iter().filter(|j| j.key.variable == variable).collect();
        let pending: Vec<&MonthJob> = jobs.iter().copied().filter(|j| j.need_aggregate).collect();
        out.count("aggregate_month").cached += jobs.len() - pending.len();
        out.cached += jobs.len() - pending.len();
        if pending.is_empty() {
            return Ok(());
        }
        for job in &jobs {
            if means.contains_key(&job.key) {
                continue;
            }
            let in_window = q.retro.is_some_and(|w| w.contains(job.key.year));
            if job.need_aggregate || !in_window {
                continue;
            }
            let key = ProductKey::new(job.index.clone(), job.key.scenario, ProductKind::Aggregate);
            if let Ok(bytes) = store.get(&key) {
                if let Ok(rows) = read_aggregate_csv(bytes.as_slice()) {
                    means.insert(job.key, rows.iter().map(|r| (r.region, (r.value, r.cell_count))).collect());
                }
            }
        }
        let Some(Ok(mask)) = mask_cell.get() else {
            return Err("no region mask available".into());
        };
        let mut series: BTreeMap<u32, RegionalSeries> = mask
            .region_ids()
            .map(|id| (id, RegionalSeries::new(id, variable, q.model.clone(), q.scenario)))
            .collect();
        for (k, m) in means.iter().filter(|(k, _)| k.variable == variable) {
            for (&id, &(v, n)) in m {
                if let Some(s) = series.get_mut(&id) {
                    s.insert(k.year, k.month, v, n);
                }
            }
        }
        for job in pending {
            let k = job.key;
            if !means.contains_key(&k) {
                out.count("aggregate_month").skipped += 1;
                continue;
            }
            let mut buf = Vec::new();
            let written: Result<(), AnalyticsError> = match q.retro {
                Some(w) => {
                    let rows: Vec<AnomalyRow> = series
                        .values()
                        .flat_map(|s| {
                            anomaly_table(s, w, [(k.year, k.month)])
                                .into_iter()
                                .filter_map(|((y, m), cell)| {
                                    let v = s.get(y, m)?;
                                    Some(AnomalyRow {
                                        region: s.region_id,
                                        variable,
                                        model: q.model.clone(),
                                        scenario: k.scenario,
                                        year: y,
                                        month: m,
                                        value: v,
                                        cell_count: s.cell_count(y, m).unwrap_or(0),
                                        ri_signed: cell.map(|c| c.ri_signed),
                                        ri_magnitude: cell.map(|c| c.ri_magnitude),
                                        retro_start: w.t0,
                                        retro_end: w.t1,
                                    })
                                })
                                .collect::<Vec<_>>()
                        })
                        .collect();
                    write_anomaly_csv(&mut buf, &rows)
                }
                None => {
                    let rows: Vec<AggregateRow> = series
                        .values()
                        .filter_map(|s| {
                            Some(AggregateRow {
                                region: s.region_id,
                                variable,
                                model: q.model.clone(),
                                scenario: k.scenario,
                                year: k.year,
                                month: k.month,
                                value: s.get(k.year, k.month)?,
                                cell_count: s.cell_count(k.year, k.month).unwrap_or(0),
                            })
                        })
                        .collect();
                    write_aggregate_csv(&mut buf, &rows)
                }
            };
            written.map_err(|e| e.to_string())?;
            let key = ProductKey::new(job.index.clone(), k.scenario, ProductKind::Aggregate);
            put(store, &key, &buf, &job.hashes.aggregate, out).map_err(|e| e.to_string())?;
            out.count("aggregate_month").done += 1;
        }
        Ok(())
    }

    fn emit_mask(
        &self,
        store: &Store,
        mask_cell: &OnceLock<Result<RegionMask, String>>,
        out: &mut Outcome,
    ) -> Result<(), StoreError> {
        let Some(Ok(mask)) = mask_cell.get() else {
            return Ok(());
        };
        if store.load_mask()?.as_ref() == Some(mask) {
            return Ok(());
        }
        store.put_mask(mask)?;
        out.emitted += mask.to_text().len() as u64;
        Ok(())
    }
}
