use std::io::Cursor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcpviz_core::netcdf::{
    expected_values, parse_header, write_synthetic_archive, AttrValue, AxisSpec, Encoding, FormatVersion, Generator,
    NcError, SyntheticSpec, VarSpec, TIME_UNITS,
};

use crate::Faults;

pub const SPECS: usize = 100;

fn random_var(rng: &mut ChaCha8Rng, which: usize) -> VarSpec {
    let alt = rng.gen_bool(0.5);
    let (name, units) = match which {
        0 => ("pr", if alt { "kg m-2 s-1" } else { "mm/day" }),
        1 => ("tasmax", if alt { "K" } else { "degC" }),
        _ => ("tasmin", if alt { "K" } else { "degC" }),
    };
    let generator = match rng.gen_range(0..3) {
        0 => Generator::Constant { value: rng.gen_range(-50.0..50.0) },
        1 => {
            let lo = rng.gen_range(-5.0..5.0);
            Generator::Uniform { lo, hi: lo + rng.gen_range(0.1..10.0) }
        }
        _ => Generator::Climate,
    };
    let encoding = match rng.gen_range(0..3) {
        0 => Encoding::Float,
        1 => Encoding::Double,
        _ => Encoding::PackedShort {
            scale: rng.gen_range(1e-4..0.1),
            offset: rng.gen_range(-10.0..10.0),
        },
    };
    VarSpec {
        name: name.into(),
        units: units.into(),
        generator,
        encoding,
        missing_fraction: if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.3) },
    }
}

fn random_spec(rng: &mut ChaCha8Rng, n: usize) -> SyntheticSpec {
    let start_year = rng.gen_range(1950..2100);
    let nvars = rng.gen_range(1..=3);
    let first = rng.gen_range(0..3);
    SyntheticSpec {
        format: if n % 2 == 0 { FormatVersion::Cdf1 } else { FormatVersion::Cdf2 },
        model: "CESM1-CAM5".into(),
        scenario: if start_year <= 2005 { "historical" } else { "rcp45" }.into(),
        lat: AxisSpec { start: 24.5, step: rng.gen_range(0.1..2.0), count: rng.gen_range(1..8) },
        lon: AxisSpec { start: -124.0, step: rng.gen_range(0.1..2.0), count: rng.gen_range(1..8) },
        start_year,
        start_month: rng.gen_range(1..=12),
        months: rng.gen_range(1..30),
        variables: (0..nvars).map(|k| random_var(rng, (first + k) % 3)).collect(),
        seed: rng.gen(),
        record_time: rng.gen_bool(0.7),
    }
}

fn text(v: Option<&AttrValue>) -> Option<&str> {
    v.and_then(AttrValue::as_text)
}

/// Checks one spec; returns the number of values compared.
fn round_trip(spec: &SyntheticSpec, n: usize, faults: &mut Faults) -> Result<usize, NcError> {
    let bytes = write_synthetic_archive(spec)?;
    let file = parse_header(&bytes[..])?;
    let mut compared = 0;
    faults.check(bytes[..4] == spec.format.magic(), || format!("spec {n}: magic {:?}", &bytes[..4]));
    faults.check(file.format_version == spec.format, || format!("spec {n}: version {:?}", file.format_version));
    let numrecs = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let want_recs = if spec.record_time { spec.months } else { 0 };
    faults.check(numrecs == want_recs, || format!("spec {n}: numrecs {numrecs}"));

    let dims: Vec<(&str, usize, bool)> =
        file.dimensions.iter().map(|d| (d.name.as_str(), d.len, d.is_unlimited)).collect();
    let want = vec![("time", spec.months, spec.record_time), ("lat", spec.lat.count, false), ("lon", spec.lon.count, false)];
    faults.check(dims == want, || format!("spec {n}: dims {dims:?}"));
    faults.check(text(file.global_attr("model_id")) == Some(spec.model.as_str()), || format!("spec {n}: model_id"));
    faults.check(text(file.global_attr("experiment_id")) == Some(spec.scenario.as_str()), || {
        format!("spec {n}: experiment_id")
    });
    faults.check(file.variable("time").and_then(|v| v.units()) == Some(TIME_UNITS), || format!("spec {n}: time units"));

    let mut src = Cursor::new(&bytes);
    for (name, axis) in [("lat", &spec.lat), ("lon", &spec.lon)] {
        let slab = file.read_slab(&mut src, name, &[0], &[axis.count])?;
        let want: Vec<f64> = (0..axis.count).map(|i| axis.start + i as f64 * axis.step).collect();
        faults.check(slab.values.iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("spec {n}: {name} {:?} vs {want:?}", slab.values)
        });
    }
    for v in &spec.variables {
        let Some(var) = file.variable(&v.name) else {
            faults.fail(format!("spec {n}: no variable {}", v.name));
            continue;
        };
        faults.check(var.units() == Some(v.units.as_str()), || format!("spec {n}: {} units", v.name));
        match v.encoding {
            Encoding::PackedShort { scale, offset } => {
                faults.check(var.attr("scale_factor") == Some(&AttrValue::Doubles(vec![scale])), || {
                    format!("spec {n}: {} scale_factor", v.name)
                });
                faults.check(var.attr("add_offset") == Some(&AttrValue::Doubles(vec![offset])), || {
                    format!("spec {n}: {} add_offset", v.name)
                });
            }
            _ => faults.check(var.attr("scale_factor").is_none(), || format!("spec {n}: unexpected scale_factor")),
        }
        let (want, want_missing) = expected_values(spec, &v.name)?;
        let shape = [spec.months, spec.lat.count, spec.lon.count];
        let slab = file.read_slab(&mut src, &v.name, &[0, 0, 0], &shape)?;
        faults.check(slab.missing == want_missing, || format!("spec {n}: {} missing mask", v.name));
        let same = slab.values.len() == want.len()
            && slab.values.iter().zip(&want).zip(&slab.missing).all(|((a, b), m)| *m || a.to_bits() == b.to_bits());
        faults.check(same, || format!("spec {n}: {} values differ", v.name));
        if let (Generator::Constant { value }, Encoding::Double) = (&v.generator, &v.encoding) {
            let exact = slab.values.iter().zip(&slab.missing).all(|(x, m)| *m || x == value);
            faults.check(exact, || format!("spec {n}: {} constant {value} not exact", v.name));
        }
        compared += slab.values.len();

        // A single step read alone matches the full read.
        let k = spec.months / 2;
        let cells = spec.lat.count * spec.lon.count;
        let one = file.read_slab(&mut src, &v.name, &[k, 0, 0], &[1, spec.lat.count, spec.lon.count])?;
        faults.check(one.values[..] == slab.values[k * cells..(k + 1) * cells], || {
            format!("spec {n}: {} step {k} differs", v.name)
        });
    }
    Ok(compared)
}

pub fn run() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0cdf);
    let mut faults = Faults::default();
    let (mut compared, mut cdf1, mut cdf2) = (0, 0, 0);
    for n in 0..SPECS {
        let spec = random_spec(&mut rng, n);
        match spec.format {
            FormatVersion::Cdf1 => cdf1 += 1,
            _ => cdf2 += 1,
        }
        match round_trip(&spec, n, &mut faults) {
            Ok(c) => compared += c,
            Err(e) => faults.fail(format!("spec {n}: {e}")),
        }
    }
    let mut hdf5 = b"\x89HDF\r\n\x1a\n".to_vec();
    hdf5.resize(512, 0);
    let refused = parse_header(&hdf5[..]);
    faults.check(matches!(refused, Err(NcError::Unsupported(_))), || format!("HDF5 input gave {refused:?}"));
    let summary = format!("{SPECS} specs ({cdf1} CDF-1, {cdf2} CDF-2), {compared} values bit-exact, HDF5 refused as unsupported");
    (faults.is_empty(), faults.report(summary))
}
