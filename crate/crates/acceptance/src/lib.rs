//! Checks for the eight primary acceptance criteria. Each check returns an
//! [`Outcome`] instead of panicking so a runner can report all of them.

pub mod api;
pub mod catalog;
pub mod contour;
pub mod datalocal;
pub mod identity;
pub mod index;
pub mod netcdf;
pub mod oracle;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub criterion: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} {:<4} {} ({}; {:.2} s)",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects failed checks; only the first few messages are kept.
#[derive(Debug, Default)]
pub struct Faults {
    count: usize,
    first: Vec<String>,
}

impl Faults {
    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.count += 1;
            if self.first.len() < 3 {
                self.first.push(msg());
            }
        }
    }

    pub fn fail(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        self.check(false, || msg);
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `summary` when clean, otherwise the count and first failures.
    pub fn report(&self, summary: String) -> String {
        if self.count == 0 {
            summary
        } else {
            format!("{summary}; {} failed checks: {}", self.count, self.first.join(" | "))
        }
    }
}

pub type Check = fn() -> (bool, String);

pub const CRITERIA: [(u8, &str, Check); 8] = [
    (1, "RM/RI brute-force oracle", oracle::run),
    (2, "identity and scale properties", identity::run),
    (3, "snapshot catalog counts", catalog::run),
    (4, "contour soundness", contour::run),
    (5, "NetCDF round-trip", netcdf::run),
    (6, "data-local transfer contract", datalocal::run),
    (7, "API parity", api::run),
    (8, "index grammar", index::run),
];

/// Runs one criterion, turning a panic into a failure.
pub fn evaluate(criterion: u8, title: &'static str, check: Check) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = match catch_unwind(AssertUnwindSafe(check)) {
        Ok(r) => r,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    Outcome {
        criterion,
        title,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn run_all() -> Vec<Outcome> {
    CRITERIA.iter().map(|&(n, t, c)| evaluate(n, t, c)).collect()
}

/// Relative error, falling back to absolute error near zero.
pub fn rel_err(got: f64, want: f64) -> f64 {
    if want.abs() < 1e-6 {
        (got - want).abs()
    } else {
        ((got - want) / want).abs()
    }
}
