use std::fmt;

use serde::{Deserialize, Serialize};

use super::GridError;

/// A calendar quarter: season `s` covers months `3s+1..=3s+3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SeasonIndex(u8);

impl SeasonIndex {
    pub const ALL: [SeasonIndex; 4] = [SeasonIndex(0), SeasonIndex(1), SeasonIndex(2), SeasonIndex(3)];

    pub fn new(season: u8) -> Result<Self, GridError> {
        if season < 4 {
            Ok(SeasonIndex(season))
        } else {
            Err(GridError::Parse(format!("season {season} outside 0..=3")))
        }
    }

    /// Season containing calendar month `month` (1-12).
    pub fn of_month(month: u32) -> Result<Self, GridError> {
        if (1..=12).contains(&month) {
            Ok(SeasonIndex(((month - 1) / 3) as u8))
        } else {
            Err(GridError::Parse(format!("month {month} outside 1..=12")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn months(self) -> [u32; 3] {
        let first = 3 * self.0 as u32 + 1;
        [first, first + 1, first + 2]
    }

    pub fn label(self) -> &'static str {
        ["JFM", "AMJ", "JAS", "OND"][self.0 as usize]
    }
}

impl TryFrom<u8> for SeasonIndex {
    type Error = GridError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        SeasonIndex::new(v)
    }
}

impl From<SeasonIndex> for u8 {
    fn from(s: SeasonIndex) -> u8 {
        s.0
    }
}

impl fmt::Display for SeasonIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
