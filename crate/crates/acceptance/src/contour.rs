use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcpviz_core::contour::{marching_squares_bands, BandSpec, ContourParams, ContourProduct};
use dcpviz_core::grid::{GridSnapshot, Scenario, Variable};
use dcpviz_core::index::make_index;

use crate::Faults;

pub const GRIDS: usize = 300;
pub const POINTS_PER_CELL: usize = 20;
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;
pub const REQUIRED_FRACTION: f64 = 0.999;

fn axis(rng: &mut ChaCha8Rng, n: usize, start: f64) -> Vec<f64> {
    let mut v = start;
    (0..n)
        .map(|_| {
            let out = v;
            v += rng.gen_range(0.2..1.5);
            out
        })
        .collect()
}

fn random_snapshot(rng: &mut ChaCha8Rng, missing_p: f64) -> GridSnapshot {
    let nlat = rng.gen_range(2..=8);
    let nlon = rng.gen_range(2..=8);
    let n = nlat * nlon;
    let values = (0..n).map(|_| rng.gen_range(-1.0..15.0)).collect();
    let missing = (0..n).map(|_| rng.gen::<f64>() < missing_p).collect();
    GridSnapshot::new(
        Variable::Pr,
        "CESM1-CAM5",
        Scenario::Rcp45,
        2030,
        7,
        axis(rng, nlat, 30.0),
        axis(rng, nlon, -100.0),
        values,
        missing,
    )
    .unwrap()
}

fn random_spec(rng: &mut ChaCha8Rng) -> BandSpec {
    if rng.gen_bool(0.3) {
        return BandSpec::default_for(Variable::Pr);
    }
    let n = rng.gen_range(2..=9);
    let mut th: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..16.0)).collect();
    th.sort_by(f64::total_cmp);
    th.dedup();
    if th.len() < 2 {
        th = vec![0.0, 7.0];
    }
    BandSpec::new(th).unwrap()
}

fn bilinear(s: &GridSnapshot, i: usize, j: usize, tx: f64, ty: f64) -> f64 {
    let v = |a, b| s.get(a, b).unwrap();
    let bottom = v(i, j) * (1.0 - tx) + v(i, j + 1) * tx;
    let top = v(i + 1, j) * (1.0 - tx) + v(i + 1, j + 1) * tx;
    bottom * (1.0 - ty) + top * ty
}

#[derive(Default)]
struct Tally {
    hits: usize,
    total: usize,
    in_missing: usize,
    missing_ok: usize,
}

/// Samples interior points of every grid cell. A point in a cell with a
/// missing corner must fall in no band; any other point must fall in the
/// band containing its bilinear value, or in none when that value is
/// outside the thresholds.
fn sample(s: &GridSnapshot, spec: &BandSpec, p: &ContourProduct, rng: &mut ChaCha8Rng, t: &mut Tally) {
    let tol = BOUNDARY_TOLERANCE;
    let th = spec.thresholds();
    let (lo, hi) = (th[0], th[th.len() - 1]);
    let (nlat, nlon) = s.shape();
    for i in 0..nlat - 1 {
        for j in 0..nlon - 1 {
            let cell_missing =
                s.is_missing(i, j) || s.is_missing(i, j + 1) || s.is_missing(i + 1, j) || s.is_missing(i + 1, j + 1);
            for _ in 0..POINTS_PER_CELL {
                let tx: f64 = rng.gen_range(0.001..0.999);
                let ty: f64 = rng.gen_range(0.001..0.999);
                let lon = s.lon[j] + tx * (s.lon[j + 1] - s.lon[j]);
                let lat = s.lat[i] + ty * (s.lat[i + 1] - s.lat[i]);
                let found = p.band_at([lon, lat]);
                t.total += 1;
                let ok = if cell_missing {
                    t.in_missing += 1;
                    t.missing_ok += found.is_none() as usize;
                    found.is_none()
                } else {
                    let v = bilinear(s, i, j, tx, ty);
                    match found {
                        Some(b) => v >= b.lo - tol && v < b.hi + tol,
                        None => v < lo + tol || v >= hi - tol,
                    }
                };
                t.hits += ok as usize;
            }
        }
    }
}

pub fn run() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut faults = Faults::default();
    let mut tally = Tally::default();
    let mut full_grids = 0;
    for g in 0..GRIDS {
        let missing_p = if g % 3 == 0 { 0.15 } else { 0.0 };
        let s = random_snapshot(&mut rng, missing_p);
        let spec = random_spec(&mut rng);
        let idx = make_index("NEX-DCP", "CESM1-CAM5", "pr", s.year, s.month).unwrap();
        let p = match marching_squares_bands(&s, &spec, idx, ContourParams::default()) {
            Ok(p) => p,
            Err(e) => {
                faults.fail(format!("grid {g}: {e}"));
                continue;
            }
        };
        sample(&s, &spec, &p, &mut rng, &mut tally);

        // With no missing cells and thresholds spanning the data, the bands
        // tile the whole bounding box.
        if missing_p == 0.0 {
            let full = BandSpec::new(vec![-1.0, 3.0, 8.0, 15.0]).unwrap();
            let idx = make_index("NEX-DCP", "CESM1-CAM5", "pr", s.year, s.month).unwrap();
            let q = marching_squares_bands(&s, &full, idx, ContourParams::default()).unwrap();
            let [x0, y0, x1, y1] = q.bbox;
            let bbox = (x1 - x0) * (y1 - y0);
            let area: f64 = q.bands.iter().map(ContourProduct::band_area).sum();
            faults.check(((area - bbox) / bbox).abs() < 1e-6, || format!("grid {g}: bands cover {area} of {bbox}"));
            full_grids += 1;
        }
    }
    let frac = tally.hits as f64 / tally.total as f64;
    faults.check(frac >= REQUIRED_FRACTION, || format!("membership {frac:.5}"));
    faults.check(tally.missing_ok == tally.in_missing, || {
        format!("{} of {} points in missing cells fell in a band", tally.in_missing - tally.missing_ok, tally.in_missing)
    });
    let summary = format!(
        "{GRIDS} grids, {}/{} points in the right band ({:.4}% >= 99.9%), {} points in missing cells all unbanded, {full_grids} complete grids fully covered",
        tally.hits,
        tally.total,
        frac * 100.0,
        tally.in_missing
    );
    (faults.is_empty(), faults.report(summary))
}
