use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::WorkflowError;
use crate::grid::{decode_time_axis, time_len, RegionMask, Scenario, Variable};
use crate::netcdf::{parse_header, NcFile};

/// One variable of one raw file held at a site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holding {
    /// Path relative to the archive root, `/`-separated.
    pub file: String,
    pub bytes: u64,
    pub model: String,
    pub scenario: Scenario,
    pub variable: Variable,
    /// `(year, month)` of each time index.
    pub months: Vec<(i32, u32)>,
}

impl Holding {
    pub fn first(&self) -> Option<(i32, u32)> {
        self.months.first().copied()
    }

    pub fn last(&self) -> Option<(i32, u32)> {
        self.months.last().copied()
    }
}

/// What a site persists about itself; the holdings are rescanned on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteManifest {
    pub site_id: String,
    pub archive_root: PathBuf,
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

/// A place where raw files live. Analytics run here; only derived products
/// leave, through [`DataSite::execute`](super::DataSite::execute).
pub struct DataSite {
    pub site_id: String,
    pub archive_root: PathBuf,
    holdings: Vec<Holding>,
    headers: BTreeMap<String, NcFile>,
    mask_path: Option<PathBuf>,
    rejected: Vec<(String, String)>,
}

impl std::fmt::Debug for DataSite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DataSite")
            .field("site_id", &self.site_id)
            .field("archive_root", &self.archive_root)
            .field("holdings", &self.holdings.len())
            .finish()
    }
}

fn nc_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), WorkflowError> {
    let io = |e| WorkflowError::Io(dir.to_path_buf(), e);
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_dir() {
            nc_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "nc") {
            out.push(path);
        }
    }
    Ok(())
}

fn rel_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.iter()
        .map(|c| c.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn next_month((y, m): (i32, u32)) -> (i32, u32) {
    if m == 12 {
        (y + 1, 1)
    } else {
        (y, m + 1)
    }
}

/// Decodes each time step; a step whose value cannot be read is taken to
/// follow its predecessor by one month so that the month still gets a
/// (failing) extract task.
fn time_steps(nc: &NcFile, src: &mut BufReader<File>, variable: Variable) -> Result<Vec<(i32, u32)>, String> {
    let var = nc.variable(variable.as_str()).ok_or("variable vanished")?;
    let dims = nc.dim_names(var);
    if dims.len() != 3 {
        return Err(format!("`{variable}` has {} dimensions, expected 3", dims.len()));
    }
    let n = time_len(nc, variable).map_err(|e| e.to_string())?;
    let time_var = nc
        .variable(dims[0])
        .ok_or_else(|| format!("no coordinate variable for `{}`", dims[0]))?;
    let units = time_var.units().unwrap_or("").to_string();
    let calendar = time_var.attr("calendar").and_then(|a| a.as_text()).map(str::to_string);
    let mut out: Vec<(i32, u32)> = Vec::with_capacity(n);
    for k in 0..n {
        let decoded = nc
            .read_slab(src, dims[0], &[k], &[1])
            .map_err(|e| e.to_string())
            .and_then(|s| decode_time_axis(&units, calendar.as_deref(), s.values[0]).map_err(|e| e.to_string()));
        match (decoded, out.last()) {
            (Ok(ym), _) => out.push(ym),
            (Err(_), Some(&prev)) => out.push(next_month(prev)),
            (Err(e), None) => return Err(e),
        }
    }
    Ok(out)
}

impl DataSite {
    /// Scans `archive_root` for `.nc` files. Files that do not parse, or lack
    /// `model_id`/`experiment_id` global attributes, are listed in
    /// [`DataSite::rejected`] instead of failing the scan.
    pub fn scan(site_id: impl Into<String>, archive_root: impl AsRef<Path>) -> Result<DataSite, WorkflowError> {
        let root = archive_root.as_ref().to_path_buf();
        let mut paths = Vec::new();
        nc_files(&root, &mut paths)?;
        paths.sort();
        let mut site = DataSite {
            site_id: site_id.into(),
            archive_root: root.clone(),
            holdings: Vec::new(),
            headers: BTreeMap::new(),
            mask_path: None,
            rejected: Vec::new(),
        };
        for path in paths {
            let name = rel_name(&root, &path);
            match site.scan_file(&path, &name) {
                Ok(()) => {}
                Err(e) => site.rejected.push((name, e)),
            }
        }
        Ok(site)
    }

    pub fn from_manifest(m: &SiteManifest) -> Result<DataSite, WorkflowError> {
        let mut site = DataSite::scan(m.site_id.clone(), &m.archive_root)?;
        site.mask_path = m.mask.clone();
        Ok(site)
    }

    /// Uses the mask file at `path` instead of the built-in NCA boxes.
    pub fn with_mask(mut self, path: impl Into<PathBuf>) -> Self {
        self.mask_path = Some(path.into());
        self
    }

    fn scan_file(&mut self, path: &Path, name: &str) -> Result<(), String> {
        let f = File::open(path).map_err(|e| e.to_string())?;
        let bytes = f.metadata().map_err(|e| e.to_string())?.len();
        let mut src = BufReader::new(f);
        let nc = parse_header(&mut src).map_err(|e| e.to_string())?;
        let attr = |k: &str| nc.global_attr(k).and_then(|a| a.as_text()).map(str::to_string);
        let model = attr("model_id").ok_or("no `model_id` global attribute")?;
        let scenario: Scenario = attr("experiment_id")
            .ok_or("no `experiment_id` global attribute")?
            .parse()
            .map_err(|e: crate::grid::GridError| e.to_string())?;
        let mut found = Vec::new();
        for variable in Variable::ALL {
            if nc.variable(variable.as_str()).is_none() {
                continue;
            }
            let months = time_steps(&nc, &mut src, variable)?;
            found.push(Holding {
                file: name.to_string(),
                bytes,
                model: model.clone(),
                scenario,
                variable,
                months,
            });
        }
        if found.is_empty() {
            return Err("no pr, tasmax or tasmin variable".into());
        }
        self.headers.insert(name.to_string(), nc);
        self.holdings.extend(found);
        Ok(())
    }

    pub fn holdings(&self) -> &[Holding] {
        &self.holdings
    }

    /// Files that were found but could not be used, with the reason.
    pub fn rejected(&self) -> &[(String, String)] {
        &self.rejected
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.holdings.iter().map(|h| h.model.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub(super) fn header_for(&self, file: &str) -> Option<&NcFile> {
        self.headers.get(file)
    }

    pub(super) fn open(&self, file: &str) -> Result<BufReader<File>, WorkflowError> {
        let path = self.archive_root.join(file);
        File::open(&path)
            .map(BufReader::new)
            .map_err(|e| WorkflowError::Io(path, e))
    }

    pub(super) fn mask_for(&self, lat: &[f64], lon: &[f64]) -> Result<RegionMask, WorkflowError> {
        Ok(match &self.mask_path {
            Some(p) => RegionMask::load_for(p, lat, lon)?,
            None => RegionMask::synthetic_nca(lat.to_vec(), lon.to_vec())?,
        })
    }
}
