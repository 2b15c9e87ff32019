use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{atomic_write, io_err, jsonl, open_append, read_jsonl, StoreError};
use crate::index::DataIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub author: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin: Option<Pin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<DataIndex>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewAnnotation {
    pub author: String,
    pub text: String,
    #[serde(default)]
    pub pin: Option<Pin>,
    #[serde(default)]
    pub snapshot: Option<DataIndex>,
}

/// Both filters must hold when both are given. The bbox is
/// `[lon_min, lat_min, lon_max, lat_max]` and only matches pinned notes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationFilter {
    pub snapshot: Option<DataIndex>,
    pub bbox: Option<[f64; 4]>,
}

impl AnnotationFilter {
    pub fn matches(&self, a: &Annotation) -> bool {
        let snap_ok = self.snapshot.as_ref().is_none_or(|s| a.snapshot.as_ref() == Some(s));
        let bbox_ok = self.bbox.is_none_or(|[x0, y0, x1, y1]| {
            a.pin
                .is_some_and(|p| p.lon >= x0 && p.lon <= x1 && p.lat >= y0 && p.lat <= y1)
        });
        snap_ok && bbox_ok
    }
}

pub(super) struct Log {
    path: PathBuf,
    file: File,
    items: Vec<Annotation>,
    next_id: u64,
}

impl Log {
    /// Loads the log, dropping unreadable lines and rewriting it compacted.
    pub(super) fn open(path: &Path) -> Result<Log, StoreError> {
        let (mut items, skipped) = read_jsonl::<Annotation>(path)?;
        items.sort_by_key(|a| a.id);
        items.dedup_by_key(|a| a.id);
        if skipped > 0 {
            atomic_write(path, &jsonl(&items), 0)?;
        }
        let next_id = items.last().map_or(1, |a| a.id + 1);
        Ok(Log {
            path: path.to_path_buf(),
            file: open_append(path)?,
            items,
            next_id,
        })
    }

    pub(super) fn add(&mut self, new: NewAnnotation) -> Result<Annotation, StoreError> {
        if new.author.trim().is_empty() {
            return Err(StoreError::InvalidAnnotation("author is empty".into()));
        }
        if let Some(p) = new.pin {
            if !(p.lat.is_finite() && p.lon.is_finite() && p.lat.abs() <= 90.0 && p.lon.abs() <= 360.0) {
                return Err(StoreError::InvalidAnnotation(format!(
                    "pin ({}, {}) is not a coordinate",
                    p.lat, p.lon
                )));
            }
        }
        let a = Annotation {
            id: self.next_id,
            author: new.author,
            text: new.text,
            created_at: Utc::now(),
            pin: new.pin,
            snapshot: new.snapshot,
        };
        self.file.write_all(&jsonl([&a])).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))?;
        self.next_id += 1;
        self.items.push(a.clone());
        Ok(a)
    }

    pub(super) fn list(&self, filter: &AnnotationFilter) -> Vec<Annotation> {
        let unfiltered = filter.snapshot.is_none() && filter.bbox.is_none();
        self.items
            .iter()
            .filter(|a| unfiltered || filter.matches(a))
            .cloned()
            .collect()
    }
}
