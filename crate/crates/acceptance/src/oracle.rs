use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcpviz_core::analytics::{
    build_series, relative_intensity, retrospective_mean, AnalyticsError, RegionalSeries, RetroWindow, Weighting,
};
use dcpviz_core::grid::{GridSnapshot, RegionMask, Scenario, SeasonIndex, Variable};

use crate::{rel_err, Faults};

pub const INSTANCES: usize = 1000;
pub const TOLERANCE: f64 = 1e-9;
pub const TIME_LIMIT: Duration = Duration::from_secs(10);

/// Raw cells of a small instance, kept apart from the library types.
#[derive(Debug, Clone)]
pub struct Instance {
    pub nlat: usize,
    pub nlon: usize,
    pub ids: Vec<u32>,
    pub first_year: i32,
    pub years: usize,
    /// `[year][month - 1][cell]`, `None` for missing cells.
    pub cells: Vec<Vec<Vec<Option<f64>>>>,
}

impl Instance {
    /// Up to 8 x 8 cells, 10 years and 3 regions; region 0 is unassigned.
    pub fn random(rng: &mut ChaCha8Rng) -> Instance {
        let nlat = rng.gen_range(1..=8);
        let nlon = rng.gen_range(1..=8);
        let nreg = rng.gen_range(1..=3u32);
        let years = rng.gen_range(1..=10);
        let ids = (0..nlat * nlon).map(|_| rng.gen_range(0..=nreg)).collect();
        let offset = rng.gen_range(-3.0..5.0);
        let cells = (0..years)
            .map(|_| {
                (0..12)
                    .map(|_| {
                        (0..nlat * nlon)
                            .map(|_| (rng.gen::<f64>() > 0.1).then(|| offset + rng.gen::<f64>()))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Instance {
            nlat,
            nlon,
            ids,
            first_year: 1990,
            years,
            cells,
        }
    }

    pub fn constant(c: f64, nlat: usize, nlon: usize, years: usize) -> Instance {
        Instance {
            nlat,
            nlon,
            ids: (0..nlat * nlon).map(|k| 1 + (k % 3) as u32).collect(),
            first_year: 1990,
            years,
            cells: vec![vec![vec![Some(c); nlat * nlon]; 12]; years],
        }
    }

    pub fn scaled(&self, k: f64) -> Instance {
        Instance {
            cells: self
                .cells
                .iter()
                .map(|y| y.iter().map(|m| m.iter().map(|c| c.map(|v| v * k)).collect()).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.years as i32 - 1
    }

    fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        (
            (0..self.nlat).map(|i| 30.0 + i as f64).collect(),
            (0..self.nlon).map(|j| -100.0 + j as f64).collect(),
        )
    }

    pub fn snapshots(&self) -> Vec<GridSnapshot> {
        let (lat, lon) = self.axes();
        let mut out = Vec::new();
        for (yi, months) in self.cells.iter().enumerate() {
            for (mi, cells) in months.iter().enumerate() {
                out.push(
                    GridSnapshot::new(
                        Variable::Tasmax,
                        "CESM1-CAM5",
                        Scenario::Historical,
                        self.first_year + yi as i32,
                        mi as u32 + 1,
                        lat.clone(),
                        lon.clone(),
                        cells.iter().map(|c| c.unwrap_or(0.0)).collect(),
                        cells.iter().map(Option::is_none).collect(),
                    )
                    .unwrap(),
                );
            }
        }
        out
    }

    pub fn mask(&self) -> RegionMask {
        let (lat, lon) = self.axes();
        let names: BTreeMap<u32, String> = (1..=3).map(|id| (id, format!("r{id}"))).collect();
        RegionMask::new(lat, lon, self.ids.clone(), names).unwrap()
    }

    pub fn series(&self) -> BTreeMap<u32, RegionalSeries> {
        build_series(&self.snapshots(), &self.mask(), Scenario::Historical, Weighting::Unweighted).unwrap()
    }

    /// Mean of the region's present cells in one month.
    pub fn x(&self, region: u32, year: i32, month: u32) -> Option<f64> {
        let cells = &self.cells[(year - self.first_year) as usize][month as usize - 1];
        let picked: Vec<f64> = cells
            .iter()
            .zip(&self.ids)
            .filter(|(_, &id)| id == region)
            .filter_map(|(c, _)| *c)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }

    /// Mean over `t0..=t1` of each year's three-month seasonal mean.
    pub fn rm(&self, region: u32, t0: i32, t1: i32, season: u32) -> Option<f64> {
        let mut per_year = Vec::new();
        for year in t0..=t1 {
            let mut s = 0.0;
            for month in 3 * season + 1..=3 * season + 3 {
                s += self.x(region, year, month)?;
            }
            per_year.push(s / 3.0);
        }
        Some(per_year.iter().sum::<f64>() / per_year.len() as f64)
    }
}

pub fn run() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut faults = Faults::default();
    let (mut rm_compared, mut ri_compared, mut worst) = (0usize, 0usize, 0f64);
    for n in 0..INSTANCES {
        let inst = Instance::random(&mut rng);
        let series = inst.series();
        let last = inst.last_year();
        let t0 = rng.gen_range(inst.first_year..=last);
        let t1 = rng.gen_range(t0..=last);
        let window = RetroWindow::new(t0, t1).unwrap();
        for region in 1..=3 {
            let Some(s) = series.get(&region) else {
                let empty = (inst.first_year..=last).all(|y| (1..=12).all(|m| inst.x(region, y, m).is_none()));
                faults.check(empty, || format!("instance {n}: region {region} has data but no series"));
                continue;
            };
            for q in SeasonIndex::ALL {
                let want = inst.rm(region, t0, t1, q.index() as u32);
                match (retrospective_mean(s, window, q), want) {
                    (Ok(got), Some(want)) => {
                        let e = rel_err(got, want);
                        worst = worst.max(e);
                        faults.check(e <= TOLERANCE, || format!("instance {n}: RM {got} vs {want}"));
                        rm_compared += 1;
                    }
                    (Err(_), None) => {}
                    (got, want) => faults.fail(format!("instance {n}: RM {got:?} vs {want:?}")),
                }
            }
            for year in inst.first_year..=last {
                for month in 1..=12 {
                    let got = relative_intensity(s, window, year, month);
                    let want_rm = inst.rm(region, t0, t1, (month - 1) / 3);
                    match (inst.x(region, year, month), want_rm) {
                        (Some(x), Some(rm)) if rm != 0.0 => {
                            let Ok(cell) = got else {
                                faults.fail(format!("instance {n}: {year}-{month} undefined: {got:?}"));
                                continue;
                            };
                            for (g, w) in [
                                (cell.value, x),
                                (cell.baseline, rm),
                                (cell.ri_signed, (x - rm) / rm.abs()),
                                (cell.ri_magnitude, (rm - x).abs() / rm.abs()),
                            ] {
                                let e = rel_err(g, w);
                                worst = worst.max(e);
                                faults.check(e <= TOLERANCE, || format!("instance {n}: {year}-{month}: {g} vs {w}"));
                            }
                            ri_compared += 1;
                        }
                        (Some(_), Some(_)) => {
                            faults.check(matches!(got, Err(AnalyticsError::ZeroBaseline)), || {
                                format!("instance {n}: zero baseline gave {got:?}")
                            })
                        }
                        _ => faults.check(got.is_err(), || format!("instance {n}: {year}-{month} should be undefined")),
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    faults.check(elapsed < TIME_LIMIT, || format!("took {:.2} s", elapsed.as_secs_f64()));
    faults.check(ri_compared > 10 * INSTANCES, || format!("only {ri_compared} defined cells"));
    let summary = format!(
        "{INSTANCES} instances, {rm_compared} RM and {ri_compared} RI values, max rel err {worst:.1e} <= {TOLERANCE:.0e}, {:.2} s < 10 s",
        elapsed.as_secs_f64()
    );
    (faults.is_empty(), faults.report(summary))
}
