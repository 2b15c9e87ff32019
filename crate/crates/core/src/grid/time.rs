//! Decoding CF-style time coordinates (`<unit> since <date>`) into calendar
//! year and month.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimeAxisError {
    #[error("unrecognized time units `{0}`")]
    Units(String),
    #[error("unsupported calendar `{0}`")]
    Calendar(String),
    #[error("time value {0} is not representable")]
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Days,
    Hours,
    Minutes,
    Seconds,
    Months,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Calendar {
    Gregorian,
    NoLeap,
    Day360,
}

fn parse_units(units: &str) -> Result<(Step, NaiveDateTime), TimeAxisError> {
    let err = || TimeAxisError::Units(units.to_string());
    let lower = units.trim().to_ascii_lowercase();
    let (step, origin) = lower.split_once(" since ").ok_or_else(err)?;
    let step = match step.trim() {
        "days" | "day" | "d" => Step::Days,
        "hours" | "hour" | "h" => Step::Hours,
        "minutes" | "minute" | "min" => Step::Minutes,
        "seconds" | "second" | "s" => Step::Seconds,
        "months" | "month" => Step::Months,
        _ => return Err(err()),
    };
    let origin = origin.trim().trim_end_matches('z').trim_end_matches(" utc");
    let mut parts = origin.split(|c: char| c == ' ' || c == 't');
    let date_part = parts.next().ok_or_else(err)?;
    let mut ymd = date_part.split('-').map(|p| p.parse::<i64>());
    let (y, m, d) = match (ymd.next(), ymd.next(), ymd.next()) {
        (Some(Ok(y)), Some(Ok(m)), d) => (y, m, d.and_then(Result::ok).unwrap_or(1)),
        _ => return Err(err()),
    };
    let date = NaiveDate::from_ymd_opt(y as i32, m as u32, d as u32).ok_or_else(err)?;
    let time = match parts.find(|p| !p.is_empty()) {
        Some(t) => {
            let mut hms = t.split(':').map(|p| p.parse::<f64>().unwrap_or(0.0));
            let h = hms.next().unwrap_or(0.0) as u32;
            let mi = hms.next().unwrap_or(0.0) as u32;
            let s = hms.next().unwrap_or(0.0) as u32;
            date.and_hms_opt(h, mi, s).ok_or_else(err)?
        }
        None => date.and_hms_opt(0, 0, 0).expect("midnight"),
    };
    Ok((step, time))
}

fn parse_calendar(calendar: Option<&str>) -> Result<Calendar, TimeAxisError> {
    match calendar.map(|c| c.trim().to_ascii_lowercase()).as_deref() {
        None | Some("") | Some("standard") | Some("gregorian") | Some("proleptic_gregorian") => {
            Ok(Calendar::Gregorian)
        }
        Some("noleap") | Some("365_day") => Ok(Calendar::NoLeap),
        Some("360_day") => Ok(Calendar::Day360),
        Some(other) => Err(TimeAxisError::Calendar(other.to_string())),
    }
}

const NOLEAP_MONTH_DAYS: [i64; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

fn days_of(step: Step, value: f64) -> f64 {
    match step {
        Step::Days => value,
        Step::Hours => value / 24.0,
        Step::Minutes => value / 1440.0,
        Step::Seconds => value / 86_400.0,
        Step::Months => unreachable!(),
    }
}

/// Calendar `(year, month)` of a time coordinate value.
pub fn decode_time_axis(
    units: &str,
    calendar: Option<&str>,
    value: f64,
) -> Result<(i32, u32), TimeAxisError> {
    if !value.is_finite() || value.abs() > 1e12 {
        return Err(TimeAxisError::Value(value));
    }
    let (step, origin) = parse_units(units)?;
    let cal = parse_calendar(calendar)?;
    if step == Step::Months {
        let m0 = origin.year() as i64 * 12 + origin.month0() as i64 + value.floor() as i64;
        return Ok((m0.div_euclid(12) as i32, m0.rem_euclid(12) as u32 + 1));
    }
    let days = days_of(step, value);
    match cal {
        Calendar::Gregorian => {
            let secs = (days * 86_400.0).round() as i64;
            let t = origin
                .checked_add_signed(Duration::seconds(secs))
                .ok_or(TimeAxisError::Value(value))?;
            Ok((t.year(), t.month()))
        }
        Calendar::NoLeap => {
            let start = origin.ordinal0().min(364) as f64;
            let total = start + days;
            let years = (total / 365.0).floor();
            let mut doy = (total - years * 365.0).floor() as i64;
            let mut month = 0;
            while month < 11 && doy >= NOLEAP_MONTH_DAYS[month] {
                doy -= NOLEAP_MONTH_DAYS[month];
                month += 1;
            }
            Ok((origin.year() + years as i32, month as u32 + 1))
        }
        Calendar::Day360 => {
            let start = (origin.month0() * 30 + (origin.day0()).min(29)) as f64;
            let total = start + days;
            let years = (total / 360.0).floor();
            let doy = total - years * 360.0;
            Ok((origin.year() + years as i32, (doy / 30.0).floor() as u32 + 1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn days_since_1950() {
        let u = "days since 1950-01-01 00:00:00";
        assert_eq!(decode_time_axis(u, None, 14.0).unwrap(), (1950, 1));
        assert_eq!(decode_time_axis(u, Some("standard"), 31.0).unwrap(), (1950, 2));
        // 2036-02-15 is day 31455 after 1950-01-01.
        assert_eq!(decode_time_axis(u, None, 31_455.0).unwrap(), (2036, 2));
    }

    #[test]
    fn hours_and_months() {
        assert_eq!(
            decode_time_axis("hours since 2000-01-01", None, 24.0 * 40.0).unwrap(),
            (2000, 2)
        );
        assert_eq!(
            decode_time_axis("months since 2036-01-01", None, 13.0).unwrap(),
            (2037, 2)
        );
    }

    #[test]
    fn noleap_and_360() {
        assert_eq!(
            decode_time_axis("days since 2001-01-01", Some("noleap"), 365.0 + 59.0).unwrap(),
            (2002, 3)
        );
        assert_eq!(
            decode_time_axis("days since 2001-01-01", Some("360_day"), 395.0).unwrap(),
            (2002, 2)
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_time_axis("fortnights", None, 1.0).is_err());
        assert!(decode_time_axis("days since 1950-01-01", Some("julian_moon"), 1.0).is_err());
        assert!(decode_time_axis("days since 1950-01-01", None, f64::NAN).is_err());
    }
}
