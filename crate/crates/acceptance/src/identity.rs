use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcpviz_core::analytics::{relative_intensity, retrospective_mean, RetroWindow};
use dcpviz_core::grid::SeasonIndex;

use crate::oracle::Instance;
use crate::Faults;

pub const TOLERANCE: f64 = 1e-12;
pub const CASES: usize = 300;

fn constant_fields(rng: &mut ChaCha8Rng, faults: &mut Faults) -> usize {
    let mut checked = 0;
    for _ in 0..CASES {
        let magnitude = 10f64.powf(rng.gen_range(-3.0..3.0));
        let c = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
        let years = rng.gen_range(1..=10);
        let inst = Instance::constant(c, rng.gen_range(1..=8), rng.gen_range(1..=8), years);
        let window = RetroWindow::new(1990, inst.last_year()).unwrap();
        for (id, s) in inst.series() {
            for q in SeasonIndex::ALL {
                match retrospective_mean(&s, window, q) {
                    Ok(rm) => faults.check((rm - c).abs() <= TOLERANCE * c.abs(), || format!("c={c} region {id}: RM {rm}")),
                    Err(e) => faults.fail(format!("c={c} region {id}: {e}")),
                }
            }
            for year in 1990..=inst.last_year() {
                for m in 1..=12 {
                    match relative_intensity(&s, window, year, m) {
                        Ok(cell) => {
                            faults.check(cell.ri_signed.abs() <= TOLERANCE && cell.ri_magnitude.abs() <= TOLERANCE, || {
                                format!("c={c} region {id} {year}-{m}: RI {} {}", cell.ri_signed, cell.ri_magnitude)
                            });
                            checked += 1;
                        }
                        Err(e) => faults.fail(format!("c={c} region {id} {year}-{m}: {e}")),
                    }
                }
            }
        }
    }
    checked
}

fn scaling(rng: &mut ChaCha8Rng, faults: &mut Faults) -> (usize, f64) {
    let (mut checked, mut worst) = (0, 0f64);
    for n in 0..CASES {
        let inst = Instance::random(rng);
        let k = 10f64.powf(rng.gen_range(-3.0..3.0));
        let a = inst.series();
        let b = inst.scaled(k).series();
        faults.check(a.len() == b.len(), || format!("case {n}: region count changed under k={k}"));
        let window = RetroWindow::new(inst.first_year, inst.last_year()).unwrap();
        for (id, s) in &a {
            let Some(t) = b.get(id) else { continue };
            for year in inst.first_year..=inst.last_year() {
                for m in 1..=12 {
                    match (relative_intensity(s, window, year, m), relative_intensity(t, window, year, m)) {
                        (Ok(x), Ok(y)) => {
                            for (p, q) in [(x.ri_signed, y.ri_signed), (x.ri_magnitude, y.ri_magnitude)] {
                                let e = (p - q).abs() / p.abs().max(1.0);
                                worst = worst.max(e);
                                faults.check(e <= TOLERANCE, || format!("case {n} k={k}: {p} vs {q}"));
                            }
                            checked += 1;
                        }
                        (Err(_), Err(_)) => {}
                        (x, y) => faults.fail(format!("case {n} k={k}: definedness changed: {x:?} vs {y:?}")),
                    }
                }
            }
        }
    }
    (checked, worst)
}

pub fn run() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e);
    let mut faults = Faults::default();
    let constant = constant_fields(&mut rng, &mut faults);
    let (scaled, worst) = scaling(&mut rng, &mut faults);
    let summary = format!(
        "{CASES} constant fields, {constant} zero-RI cells; {CASES} scaled instances, {scaled} RI pairs, max diff {worst:.1e} <= {TOLERANCE:.0e}"
    );
    (faults.is_empty(), faults.report(summary))
}
