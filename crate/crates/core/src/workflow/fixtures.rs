//! Named synthetic archives shared by tests, the CLI and the demo data.

use super::ArchiveSpec;
use crate::grid::Scenario;
use crate::netcdf::{AxisSpec, Encoding, FormatVersion, Generator, VarSpec};

pub const FIXTURE_MODEL: &str = "CESM1-CAM5";

fn pr(missing_fraction: f64) -> VarSpec {
    VarSpec {
        name: "pr".into(),
        units: "kg m-2 s-1".into(),
        generator: Generator::Climate,
        encoding: Encoding::Float,
        missing_fraction,
    }
}

fn tasmax(missing_fraction: f64) -> VarSpec {
    VarSpec {
        name: "tasmax".into(),
        units: "K".into(),
        generator: Generator::Climate,
        encoding: Encoding::Float,
        missing_fraction,
    }
}

/// 13 x 20 box over the conterminous US.
fn coarse_axes() -> (AxisSpec, AxisSpec) {
    (
        AxisSpec { start: 25.0, step: 2.0, count: 13 },
        AxisSpec { start: -124.0, step: 3.0, count: 20 },
    )
}

/// Five years of rcp85 precipitation on a 350 x 350 grid, about 29 MB.
pub fn standard() -> ArchiveSpec {
    ArchiveSpec {
        model: FIXTURE_MODEL.into(),
        scenarios: vec![Scenario::Rcp85],
        start_year: 2036,
        end_year: 2040,
        lat: AxisSpec { start: 24.0, step: 26.0 / 350.0, count: 350 },
        lon: AxisSpec { start: -125.0, step: 59.0 / 350.0, count: 350 },
        variables: vec![pr(0.0)],
        format: FormatVersion::Cdf1,
        seed: 3,
        years_per_file: 5,
        record_time: true,
    }
}

/// Five years of rcp85 precipitation on the coarse grid.
pub fn five_year() -> ArchiveSpec {
    let (lat, lon) = coarse_axes();
    ArchiveSpec {
        model: FIXTURE_MODEL.into(),
        scenarios: vec![Scenario::Rcp85],
        start_year: 2036,
        end_year: 2040,
        lat,
        lon,
        variables: vec![pr(0.02)],
        format: FormatVersion::Cdf2,
        seed: 11,
        years_per_file: 5,
        record_time: true,
    }
}

/// 115 years (1985-2099) of rcp85 precipitation on the coarse grid,
/// historical before 2006, in files of up to five years.
pub fn century() -> ArchiveSpec {
    ArchiveSpec {
        start_year: 1985,
        end_year: 2099,
        seed: 5,
        ..five_year()
    }
}

/// pr and tasmax under rcp45 and rcp85 for 2001-2012 on the coarse grid.
pub fn explorer() -> ArchiveSpec {
    let (lat, lon) = coarse_axes();
    ArchiveSpec {
        model: FIXTURE_MODEL.into(),
        scenarios: vec![Scenario::Rcp45, Scenario::Rcp85],
        start_year: 2001,
        end_year: 2012,
        lat,
        lon,
        variables: vec![pr(0.02), tasmax(0.02)],
        format: FormatVersion::Cdf2,
        seed: 17,
        years_per_file: 6,
        record_time: true,
    }
}

pub fn by_name(name: &str) -> Option<ArchiveSpec> {
    match name {
        "standard" => Some(standard()),
        "five-year" => Some(five_year()),
        "century" => Some(century()),
        "explorer" => Some(explorer()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["standard", "five-year", "century", "explorer"];
