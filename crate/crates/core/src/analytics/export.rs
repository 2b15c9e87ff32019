use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, RegionalSeries, RetroWindow};
use crate::grid::{Scenario, Variable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub region: u32,
    pub variable: Variable,
    pub model: String,
    pub scenario: Scenario,
    pub year: i32,
    pub month: u32,
    pub value: f64,
    pub cell_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRow {
    pub region: u32,
    pub variable: Variable,
    pub model: String,
    pub scenario: Scenario,
    pub year: i32,
    pub month: u32,
    pub value: f64,
    pub cell_count: usize,
    /// Empty when the baseline is undefined.
    pub ri_signed: Option<f64>,
    pub ri_magnitude: Option<f64>,
    pub retro_start: i32,
    pub retro_end: i32,
}

impl AggregateRow {
    pub fn from_series(series: &RegionalSeries) -> Vec<AggregateRow> {
        series
            .iter()
            .map(|((year, month), value)| AggregateRow {
                region: series.region_id,
                variable: series.variable,
                model: series.model.clone(),
                scenario: series.scenario,
                year,
                month,
                value,
                cell_count: series.cell_count(year, month).unwrap_or(0),
            })
            .collect()
    }
}

impl AnomalyRow {
    /// One row per month of `series` inside `years`.
    pub fn from_series(
        series: &RegionalSeries,
        window: RetroWindow,
        years: std::ops::RangeInclusive<i32>,
    ) -> Vec<AnomalyRow> {
        let months: Vec<(i32, u32)> = series
            .iter()
            .map(|(k, _)| k)
            .filter(|(y, _)| years.contains(y))
            .collect();
        super::anomaly_table(series, window, months)
            .into_iter()
            .map(|((year, month), cell)| AnomalyRow {
                region: series.region_id,
                variable: series.variable,
                model: series.model.clone(),
                scenario: series.scenario,
                year,
                month,
                value: series.get(year, month).unwrap_or(f64::NAN),
                cell_count: series.cell_count(year, month).unwrap_or(0),
                ri_signed: cell.map(|c| c.ri_signed),
                ri_magnitude: cell.map(|c| c.ri_magnitude),
                retro_start: window.t0,
                retro_end: window.t1,
            })
            .collect()
    }
}

pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_anomaly_csv<W: Write>(out: W, rows: &[AnomalyRow]) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads rows written by either writer; anomaly columns are ignored.
pub fn read_aggregate_csv<R: Read>(input: R) -> Result<Vec<AggregateRow>, AnalyticsError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize::<AggregateRow>() {
        let row = rec?;
        if row.cell_count == 0 || !row.value.is_finite() {
            return Err(AnalyticsError::BadRecord(format!(
                "region {} {}-{:02}",
                row.region, row.year, row.month
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> RegionalSeries {
        let mut s = RegionalSeries::new(3, Variable::Pr, "CESM1-CAM5", Scenario::Rcp45);
        for (m, v) in [(1, 0.1), (2, 1.0 / 3.0), (3, 2.5e-7)] {
            s.insert(2001, m, v, 7);
        }
        s
    }

    #[test]
    fn aggregate_round_trip_is_exact() {
        let rows = AggregateRow::from_series(&series());
        let mut buf = Vec::new();
        write_aggregate_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("region,variable,model,scenario,year,month,value,cell_count\n"));
        assert_eq!(read_aggregate_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn anomaly_header_and_undefined_cells() {
        let s = series();
        let rows = AnomalyRow::from_series(&s, RetroWindow::new(2001, 2001).unwrap(), 2001..=2001);
        let mut buf = Vec::new();
        write_anomaly_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "region,variable,model,scenario,year,month,value,cell_count,ri_signed,ri_magnitude,retro_start,retro_end\n"
        ));
        assert!(rows.iter().all(|r| r.ri_signed.is_some()));
        let back = read_aggregate_csv(&buf[..]).unwrap();
        assert_eq!(back, AggregateRow::from_series(&s));
    }
}
