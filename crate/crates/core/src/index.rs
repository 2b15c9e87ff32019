//! Product keys of the form `<dataset>_<model>_<variable>_<YYYY-MM-01>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("invalid index part: {0}")]
    InvalidPart(String),
    #[error("malformed index `{0}`")]
    Malformed(String),
    #[error("model `{0}` is not registered")]
    UnknownModel(String),
}

/// CMIP5 models distributed with NEX-DCP30.
pub const KNOWN_MODELS: &[&str] = &[
    "ACCESS1-0",
    "BCC-CSM1-1",
    "BCC-CSM1-1-M",
    "BNU-ESM",
    "CanESM2",
    "CCSM4",
    "CESM1-BGC",
    "CESM1-CAM5",
    "CMCC-CM",
    "CNRM-CM5",
    "CSIRO-Mk3-6-0",
    "EC-EARTH",
    "FGOALS-g2",
    "FIO-ESM",
    "GFDL-CM3",
    "GFDL-ESM2G",
    "GFDL-ESM2M",
    "GISS-E2-H-CC",
    "GISS-E2-R",
    "GISS-E2-R-CC",
    "HadGEM2-AO",
    "HadGEM2-CC",
    "HadGEM2-ES",
    "INMCM4",
    "IPSL-CM5A-LR",
    "IPSL-CM5A-MR",
    "IPSL-CM5B-LR",
    "MIROC-ESM",
    "MIROC-ESM-CHEM",
    "MIROC5",
    "MPI-ESM-LR",
    "MPI-ESM-MR",
    "MRI-CGCM3",
    "NorESM1-M",
];

pub fn known_models() -> Vec<String> {
    KNOWN_MODELS.iter().map(|m| m.to_string()).collect()
}

/// Identity of one monthly derived product.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataIndex {
    pub dataset: String,
    pub model: String,
    pub variable: String,
    pub year: i32,
    pub month: u32,
}

fn check_part(what: &str, part: &str, allow_underscore: bool) -> Result<(), IndexError> {
    if part.is_empty() {
        return Err(IndexError::InvalidPart(format!("{what} is empty")));
    }
    let bad = part.chars().find(|&c| {
        !(c.is_ascii_alphanumeric() || c == '-' || c == '.' || (allow_underscore && c == '_'))
    });
    if let Some(c) = bad {
        return Err(IndexError::InvalidPart(format!("{what} `{part}` contains `{c}`")));
    }
    if part.starts_with('.') {
        return Err(IndexError::InvalidPart(format!("{what} `{part}` starts with `.`")));
    }
    Ok(())
}

/// Builds a validated index. Models may contain `_`; the dataset and
/// variable may not.
pub fn make_index(
    dataset: &str,
    model: &str,
    variable: &str,
    year: i32,
    month: u32,
) -> Result<DataIndex, IndexError> {
    check_part("dataset", dataset, false)?;
    check_part("model", model, true)?;
    check_part("variable", variable, false)?;
    if model.starts_with('_') || model.ends_with('_') {
        return Err(IndexError::InvalidPart(format!("model `{model}` has an edge `_`")));
    }
    if !(1..=12).contains(&month) {
        return Err(IndexError::InvalidPart(format!("month {month} outside 1..=12")));
    }
    if !(0..=9999).contains(&year) {
        return Err(IndexError::InvalidPart(format!("year {year} outside 0..=9999")));
    }
    Ok(DataIndex {
        dataset: dataset.to_string(),
        model: model.to_string(),
        variable: variable.to_string(),
        year,
        month,
    })
}

impl DataIndex {
    /// `YYYY-MM-01`.
    pub fn date(&self) -> String {
        format!("{:04}-{:02}-01", self.year, self.month)
    }

    /// Parses the string form. With a non-empty `models` list the model part
    /// must be one of them.
    pub fn parse_with(s: &str, models: &[String]) -> Result<DataIndex, IndexError> {
        let malformed = || IndexError::Malformed(s.to_string());
        let (dataset, rest) = s.split_once('_').ok_or_else(malformed)?;
        let (rest, date) = rest.rsplit_once('_').ok_or_else(malformed)?;
        let (model, variable) = rest.rsplit_once('_').ok_or_else(malformed)?;
        let (year, month) = parse_date(date).ok_or_else(malformed)?;
        if !models.is_empty() && !models.iter().any(|m| m == model) {
            return Err(IndexError::UnknownModel(model.to_string()));
        }
        make_index(dataset, model, variable, year, month)
    }
}

fn parse_date(date: &str) -> Option<(i32, u32)> {
    let b = date.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' || &date[8..] != "01" {
        return None;
    }
    let digits = |r: std::ops::Range<usize>| {
        date[r.clone()]
            .bytes()
            .all(|c| c.is_ascii_digit())
            .then(|| date[r].parse::<u32>().ok())
            .flatten()
    };
    let year = digits(0..4)? as i32;
    let month = digits(5..7)?;
    Some((year, month))
}

impl fmt::Display for DataIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}_{}_{}",
            self.dataset,
            self.model,
            self.variable,
            self.date()
        )
    }
}

impl FromStr for DataIndex {
    type Err = IndexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataIndex::parse_with(s, &[])
    }
}

impl Serialize for DataIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DataIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_key() {
        let idx = make_index("NEX-DCP", "CESM1-CAM5", "pr", 2021, 3).unwrap();
        assert_eq!(idx.to_string(), "NEX-DCP_CESM1-CAM5_pr_2021-03-01");
        let back: DataIndex = "NEX-DCP_CESM1-CAM5_pr_2021-03-01".parse().unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn model_with_underscore() {
        let idx = make_index("NEX-DCP", "inmcm4_r1", "tasmax", 2050, 12).unwrap();
        assert_eq!(DataIndex::parse_with(&idx.to_string(), &["inmcm4_r1".into()]).unwrap(), idx);
    }

    #[test]
    fn bad_parts() {
        assert!(matches!(
            make_index("NEX-DCP", "CESM1-CAM5", "pr", 2021, 13),
            Err(IndexError::InvalidPart(_))
        ));
        assert!(make_index("", "m", "pr", 2021, 1).is_err());
        assert!(make_index("NEX_DCP", "m", "pr", 2021, 1).is_err());
        assert!(make_index("NEX-DCP", "m/x", "pr", 2021, 1).is_err());
        for s in [
            "bad key",
            "NEX-DCP_CESM1-CAM5_pr_2021-03-02",
            "NEX-DCP_CESM1-CAM5_pr_2021-13-01",
            "NEX-DCP_pr_2021-03-01",
            "NEX-DCP_CESM1-CAM5_pr_21-03-01",
            "NEX-DCP_CESM1-CAM5_pr_2021-3-01",
        ] {
            assert!(s.parse::<DataIndex>().is_err(), "{s}");
        }
    }

    #[test]
    fn registered_models() {
        let r = DataIndex::parse_with("NEX-DCP_GFDL-ESM2M_pr_2021-03-01", &["CESM1-CAM5".into()]);
        assert!(matches!(r, Err(IndexError::UnknownModel(_))));
    }
}
