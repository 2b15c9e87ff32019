//! Raster region masks in a small text format:
//!
//! ```text
//! lat: 30 31
//! lon: -100 -99
//! names: 1=Northeast;2=Southeast
//! 1 1
//! 2 0
//! ```
//!
//! Row `i` holds the ids for `lat[i]`. Id 0 means outside every region.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_axis, GridError};

/// The seven contiguous-U.S. National Climate Assessment regions.
pub const NCA_REGIONS: [(u32, &str); 7] = [
    (1, "Northeast"),
    (2, "Southeast"),
    (3, "Midwest"),
    (4, "Southwest"),
    (5, "Northwest"),
    (6, "Northern Great Plains"),
    (7, "Southern Great Plains"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    ids: Vec<u32>,
    names: BTreeMap<u32, String>,
}

impl RegionMask {
    pub fn new(
        lat: Vec<f64>,
        lon: Vec<f64>,
        ids: Vec<u32>,
        names: BTreeMap<u32, String>,
    ) -> Result<Self, GridError> {
        check_axis("lat", &lat)?;
        check_axis("lon", &lon)?;
        if ids.len() != lat.len() * lon.len() {
            return Err(GridError::ShapeMismatch(format!(
                "mask has {} ids for a {} x {} grid",
                ids.len(),
                lat.len(),
                lon.len()
            )));
        }
        if let Some(&id) = ids.iter().find(|&&id| id != 0 && !names.contains_key(&id)) {
            return Err(GridError::UnknownRegionId(id));
        }
        if names.contains_key(&0) {
            return Err(GridError::Parse("id 0 is reserved for outside".into()));
        }
        Ok(RegionMask {
            lat,
            lon,
            ids,
            names,
        })
    }

    /// Boxes approximating the NCA regions, rasterized onto the given axes.
    pub fn synthetic_nca(lat: Vec<f64>, lon: Vec<f64>) -> Result<Self, GridError> {
        let mut ids = Vec::with_capacity(lat.len() * lon.len());
        for &la in &lat {
            for &lo in &lon {
                ids.push(nca_box(la, lo));
            }
        }
        let names = NCA_REGIONS
            .iter()
            .map(|&(id, n)| (id, n.to_string()))
            .collect();
        RegionMask::new(lat, lon, ids, names)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn names(&self) -> &BTreeMap<u32, String> {
        &self.names
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    pub fn region_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.names.keys().copied()
    }

    pub fn id_at(&self, i: usize, j: usize) -> u32 {
        self.ids[i * self.lon.len() + j]
    }

    /// True when the mask was built on exactly these axes.
    pub fn matches_axes(&self, lat: &[f64], lon: &[f64]) -> bool {
        self.lat == lat && self.lon == lon
    }

    /// Resolves a region given by id or (case-insensitive) name.
    pub fn resolve(&self, key: &str) -> Option<u32> {
        if let Ok(id) = key.parse::<u32>() {
            return self.names.contains_key(&id).then_some(id);
        }
        self.names
            .iter()
            .find(|(_, n)| n.eq_ignore_ascii_case(key))
            .map(|(&id, _)| id)
    }

    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<String, GridError> {
            let line = lines
                .next()
                .ok_or_else(|| GridError::Parse(format!("missing `{key}:` line")))?;
            line.trim()
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(':'))
                .map(|r| r.trim().to_string())
                .ok_or_else(|| GridError::Parse(format!("expected `{key}:` line, got `{line}`")))
        };
        let lat = parse_floats(&header("lat")?)?;
        let lon = parse_floats(&header("lon")?)?;
        let names_line = header("names")?;
        let mut names = BTreeMap::new();
        for entry in names_line.split(';').map(str::trim).filter(|e| !e.is_empty()) {
            let (id, name) = entry
                .split_once('=')
                .ok_or_else(|| GridError::Parse(format!("bad names entry `{entry}`")))?;
            let id: u32 = id
                .trim()
                .parse()
                .map_err(|_| GridError::Parse(format!("bad region id `{id}`")))?;
            if names.insert(id, name.trim().to_string()).is_some() {
                return Err(GridError::Parse(format!("region id {id} named twice")));
            }
        }
        let mut ids = Vec::with_capacity(lat.len() * lon.len());
        let mut rows = 0;
        for line in lines {
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|_| GridError::Parse(format!("bad id `{t}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != lon.len() {
                return Err(GridError::ShapeMismatch(format!(
                    "row {rows} has {} ids, expected {}",
                    row.len(),
                    lon.len()
                )));
            }
            ids.extend(row);
            rows += 1;
        }
        if rows != lat.len() {
            return Err(GridError::ShapeMismatch(format!(
                "{rows} rows, expected {}",
                lat.len()
            )));
        }
        RegionMask::new(lat, lon, ids, names)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        RegionMask::parse(&std::fs::read_to_string(path)?)
    }

    /// Loads a mask and checks it against the target grid axes.
    pub fn load_for(path: impl AsRef<Path>, lat: &[f64], lon: &[f64]) -> Result<Self, GridError> {
        let mask = RegionMask::load(path)?;
        if !mask.matches_axes(lat, lon) {
            return Err(GridError::ShapeMismatch(
                "mask axes differ from the grid axes".into(),
            ));
        }
        Ok(mask)
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!("lat: {}\nlon: {}\nnames: ", join(&self.lat), join(&self.lon));
        let names: Vec<String> = self.names.iter().map(|(id, n)| format!("{id}={n}")).collect();
        out.push_str(&names.join(";"));
        out.push('\n');
        for row in self.ids.chunks(self.lon.len()) {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, GridError> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| GridError::Parse(format!("bad coordinate `{t}`")))
        })
        .collect()
}

fn nca_box(lat: f64, lon: f64) -> u32 {
    if !(24.0..=50.0).contains(&lat) || !(-125.0..=-66.0).contains(&lon) {
        return 0;
    }
    if lon < -111.0 {
        if lat >= 42.0 {
            5
        } else {
            4
        }
    } else if lon < -104.0 {
        if lat >= 41.0 {
            6
        } else {
            4
        }
    } else if lon < -94.0 {
        if lat >= 40.0 {
            6
        } else {
            7
        }
    } else if lon < -80.0 {
        if lat >= 37.0 {
            3
        } else {
            2
        }
    } else if lat >= 39.0 {
        1
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let m = RegionMask::parse(
            "lat: 0 1\nlon: 0 1\nnames: 1=Northeast;2=Southeast\n1 1\n2 0\n",
        )
        .unwrap();
        assert_eq!(m.names().len(), 2);
        assert_eq!(m.ids(), &[1, 1, 2, 0]);
        assert_eq!(RegionMask::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn unnamed_id() {
        let r = RegionMask::parse("lat: 0 1\nlon: 0 1\nnames: 1=Northeast\n1 9\n0 0\n");
        assert!(matches!(r, Err(GridError::UnknownRegionId(9))));
    }

    #[test]
    fn wrong_shape() {
        let r = RegionMask::parse("lat: 0 1\nlon: 0 1\nnames: 1=A\n1 1\n");
        assert!(matches!(r, Err(GridError::ShapeMismatch(_))));
        let r = RegionMask::parse("lat: 0 1\nlon: 0 1\nnames: 1=A\n1 1 1\n1 1\n");
        assert!(matches!(r, Err(GridError::ShapeMismatch(_))));
    }

    #[test]
    fn synthetic_has_seven_regions() {
        let lat: Vec<f64> = (0..27).map(|i| 24.5 + i as f64).collect();
        let lon: Vec<f64> = (0..58).map(|i| -124.5 + i as f64).collect();
        let m = RegionMask::synthetic_nca(lat, lon).unwrap();
        assert_eq!(m.names().len(), 7);
        for id in 1..=7 {
            assert!(m.ids().contains(&id), "region {id} has no cells");
        }
        assert_eq!(m.resolve("midwest"), Some(3));
        assert_eq!(m.resolve("3"), Some(3));
        assert_eq!(m.resolve("8"), None);
    }
}
