use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::WorkflowError;
use crate::grid::{Scenario, LAST_HISTORICAL_YEAR};
use crate::netcdf::{write_synthetic_archive, AxisSpec, FormatVersion, SyntheticSpec, VarSpec};

fn default_years_per_file() -> u32 {
    5
}

fn default_true() -> bool {
    true
}

fn default_format() -> FormatVersion {
    FormatVersion::Cdf1
}

/// A multi-file synthetic archive: historical files up to 2005 and one file
/// series per projection scenario afterwards, each file holding
/// `years_per_file` years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveSpec {
    pub model: String,
    /// Projection scenarios; historical files are written whenever the range
    /// reaches back to 2005 or earlier.
    pub scenarios: Vec<Scenario>,
    pub start_year: i32,
    pub end_year: i32,
    pub lat: AxisSpec,
    pub lon: AxisSpec,
    pub variables: Vec<VarSpec>,
    #[serde(default = "default_format")]
    pub format: FormatVersion,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_years_per_file")]
    pub years_per_file: u32,
    #[serde(default = "default_true")]
    pub record_time: bool,
}

impl ArchiveSpec {
    fn chunks(&self, from: i32, to: i32) -> Vec<(i32, i32)> {
        let step = self.years_per_file.max(1) as i32;
        let mut out = Vec::new();
        let mut y = from;
        while y <= to {
            let end = (y + step - 1).min(to);
            out.push((y, end));
            y = end + 1;
        }
        out
    }

    /// File names and per-file specs, in a fixed order.
    pub fn files(&self) -> Result<Vec<(String, SyntheticSpec)>, WorkflowError> {
        if self.start_year > self.end_year {
            return Err(WorkflowError::InvalidQuery(format!(
                "archive years {}:{} are reversed",
                self.start_year, self.end_year
            )));
        }
        let mut runs: Vec<(Scenario, i32, i32)> = Vec::new();
        if self.start_year <= LAST_HISTORICAL_YEAR {
            for (a, b) in self.chunks(self.start_year, self.end_year.min(LAST_HISTORICAL_YEAR)) {
                runs.push((Scenario::Historical, a, b));
            }
        }
        if self.end_year > LAST_HISTORICAL_YEAR {
            let from = self.start_year.max(LAST_HISTORICAL_YEAR + 1);
            for &s in &self.scenarios {
                if !s.is_projection() {
                    continue;
                }
                for (a, b) in self.chunks(from, self.end_year) {
                    runs.push((s, a, b));
                }
            }
        }
        let vars: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        Ok(runs
            .into_iter()
            .map(|(scenario, a, b)| {
                let name = format!("{}_{}_{}_{a}01-{b}12.nc", vars.join("-"), self.model, scenario);
                let spec = SyntheticSpec {
                    format: self.format,
                    model: self.model.clone(),
                    scenario: scenario.to_string(),
                    lat: self.lat.clone(),
                    lon: self.lon.clone(),
                    start_year: a,
                    start_month: 1,
                    months: ((b - a + 1) * 12) as usize,
                    variables: self.variables.clone(),
                    seed: self.seed,
                    record_time: self.record_time,
                };
                (name, spec)
            })
            .collect())
    }

    /// Writes every file into `dir` and returns their paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, WorkflowError> {
        fs::create_dir_all(dir).map_err(|e| WorkflowError::Io(dir.to_path_buf(), e))?;
        let mut out = Vec::new();
        for (name, spec) in self.files()? {
            let bytes = write_synthetic_archive(&spec)?;
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| WorkflowError::Io(path.clone(), e))?;
            out.push(path);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(a: i32, b: i32) -> ArchiveSpec {
        ArchiveSpec {
            model: "CESM1-CAM5".into(),
            scenarios: vec![Scenario::Rcp45, Scenario::Rcp85],
            start_year: a,
            end_year: b,
            lat: AxisSpec { start: 25.0, step: 1.0, count: 3 },
            lon: AxisSpec { start: -120.0, step: 1.0, count: 4 },
            variables: vec![VarSpec {
                name: "pr".into(),
                units: "kg m-2 s-1".into(),
                generator: Default::default(),
                encoding: Default::default(),
                missing_fraction: 0.0,
            }],
            format: FormatVersion::Cdf1,
            seed: 1,
            years_per_file: 5,
            record_time: true,
        }
    }

    #[test]
    fn splits_at_the_historical_boundary() {
        let files = spec(1996, 2015).files().unwrap();
        let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            [
                "pr_CESM1-CAM5_historical_199601-200012.nc",
                "pr_CESM1-CAM5_historical_200101-200512.nc",
                "pr_CESM1-CAM5_rcp45_200601-201012.nc",
                "pr_CESM1-CAM5_rcp45_201101-201512.nc",
                "pr_CESM1-CAM5_rcp85_200601-201012.nc",
                "pr_CESM1-CAM5_rcp85_201101-201512.nc",
            ]
        );
        assert!(files.iter().all(|(_, s)| s.months == 60));
    }

    #[test]
    fn full_record_is_1380_months() {
        let mut s = spec(1985, 2099);
        s.scenarios = vec![Scenario::Rcp85];
        let months: usize = s.files().unwrap().iter().map(|(_, f)| f.months).sum();
        assert_eq!(months, 1380);
    }
}
