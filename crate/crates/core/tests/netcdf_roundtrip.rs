use std::io::Cursor;

use proptest::prelude::*;

use dcpviz_core::netcdf::{
    expected_values, parse_header, write_synthetic_archive, AttrValue, AxisSpec, Encoding, FormatVersion, Generator,
    NcAttribute, NcBuilder, NcError, SyntheticSpec, VarData, VarSpec, TIME_UNITS,
};

fn var_spec() -> impl Strategy<Value = VarSpec> {
    let generator = prop_oneof![
        (-50.0..50.0f64).prop_map(|value| Generator::Constant { value }),
        (-5.0..5.0f64, 0.1..10.0f64).prop_map(|(lo, w)| Generator::Uniform { lo, hi: lo + w }),
        Just(Generator::Climate),
    ];
    let encoding = prop_oneof![
        Just(Encoding::Float),
        Just(Encoding::Double),
        (1e-4..0.1f64, -10.0..10.0f64).prop_map(|(scale, offset)| Encoding::PackedShort { scale, offset }),
    ];
    (0usize..3, any::<bool>(), generator, encoding, 0.0..0.3f64).prop_map(|(which, alt, generator, encoding, missing_fraction)| {
        let (name, units) = match which {
            0 => ("pr", if alt { "kg m-2 s-1" } else { "mm/day" }),
            1 => ("tasmax", if alt { "K" } else { "degC" }),
            _ => ("tasmin", if alt { "K" } else { "degC" }),
        };
        VarSpec {
            name: name.into(),
            units: units.into(),
            generator,
            encoding,
            missing_fraction,
        }
    })
}

fn synthetic_spec() -> impl Strategy<Value = SyntheticSpec> {
    (
        any::<bool>(),
        1usize..6,
        1usize..7,
        1usize..30,
        (1950i32..2100, 1u32..=12),
        any::<bool>(),
        any::<u64>(),
        prop::collection::vec(var_spec(), 1..4),
    )
        .prop_map(|(cdf2, nlat, nlon, months, (start_year, start_month), record_time, seed, vars)| {
            let mut variables: Vec<VarSpec> = Vec::new();
            for v in vars {
                if variables.iter().all(|w| w.name != v.name) {
                    variables.push(v);
                }
            }
            SyntheticSpec {
                format: if cdf2 { FormatVersion::Cdf2 } else { FormatVersion::Cdf1 },
                model: "CESM1-CAM5".into(),
                scenario: if start_year <= 2005 { "historical" } else { "rcp45" }.into(),
                lat: AxisSpec { start: 24.5, step: 0.75, count: nlat },
                lon: AxisSpec { start: -124.0, step: 1.25, count: nlon },
                start_year,
                start_month,
                months,
                variables,
                seed,
                record_time,
            }
        })
}

fn text_attr(attrs: &[NcAttribute], name: &str) -> Option<String> {
    attrs.iter().find(|a| a.name == name).and_then(|a| a.value.as_text()).map(str::to_string)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn synthetic_archives_read_back_exactly(spec in synthetic_spec()) {
        let bytes = write_synthetic_archive(&spec).unwrap();
        let file = parse_header(&bytes[..]).unwrap();
        prop_assert_eq!(file.format_version, spec.format);
        prop_assert_eq!(&bytes[..4], &spec.format.magic()[..]);

        let dims: Vec<(&str, usize, bool)> =
            file.dimensions.iter().map(|d| (d.name.as_str(), d.len, d.is_unlimited)).collect();
        prop_assert_eq!(
            dims,
            vec![("time", spec.months, spec.record_time), ("lat", spec.lat.count, false), ("lon", spec.lon.count, false)]
        );
        prop_assert_eq!(text_attr(&file.global_attributes, "model_id"), Some(spec.model.clone()));
        prop_assert_eq!(text_attr(&file.global_attributes, "experiment_id"), Some(spec.scenario.clone()));

        let mut src = Cursor::new(&bytes);
        let lat = file.read_slab(&mut src, "lat", &[0], &[spec.lat.count]).unwrap();
        prop_assert_eq!(lat.values, spec.lat.values());
        let lon = file.read_slab(&mut src, "lon", &[0], &[spec.lon.count]).unwrap();
        prop_assert_eq!(lon.values, spec.lon.values());
        let time_var = file.variable("time").unwrap();
        prop_assert_eq!(time_var.units(), Some(TIME_UNITS));

        for v in &spec.variables {
            let var = file.variable(&v.name).unwrap();
            prop_assert_eq!(var.units(), Some(v.units.as_str()));
            match v.encoding {
                Encoding::PackedShort { scale, offset } => {
                    prop_assert_eq!(var.attr("scale_factor"), Some(&AttrValue::Doubles(vec![scale])));
                    prop_assert_eq!(var.attr("add_offset"), Some(&AttrValue::Doubles(vec![offset])));
                }
                _ => prop_assert!(var.attr("scale_factor").is_none()),
            }
            let (want, want_missing) = expected_values(&spec, &v.name).unwrap();
            let slab = file
                .read_slab(&mut src, &v.name, &[0, 0, 0], &[spec.months, spec.lat.count, spec.lon.count])
                .unwrap();
            prop_assert_eq!(&slab.missing, &want_missing);
            for (got, exp) in slab.values.iter().zip(&want) {
                prop_assert_eq!(got.to_bits(), exp.to_bits());
            }
            if let (Generator::Constant { value }, Encoding::Double) = (&v.generator, &v.encoding) {
                for (got, m) in slab.values.iter().zip(&slab.missing) {
                    if !m {
                        prop_assert_eq!(got, value);
                    }
                }
            }
            // One time step read alone matches the same step of the full read.
            let k = spec.months / 2;
            let one = file.read_slab(&mut src, &v.name, &[k, 0, 0], &[1, spec.lat.count, spec.lon.count]).unwrap();
            let cells = spec.lat.count * spec.lon.count;
            prop_assert_eq!(&one.values[..], &slab.values[k * cells..(k + 1) * cells]);
        }
    }

    #[test]
    fn builder_headers_parse_back_identically(
        cdf2 in any::<bool>(),
        n in 1usize..5,
        recs in 0usize..4,
        shorts in prop::collection::vec(any::<i16>(), 0..5),
        doubles in prop::collection::vec(-1e6..1e6f64, 1..4),
        title in "[a-zA-Z0-9 _.-]{0,17}",
    ) {
        let mut b = NcBuilder::new(if cdf2 { FormatVersion::Cdf2 } else { FormatVersion::Cdf1 });
        let t = b.record_dim("t", recs).unwrap();
        let x = b.dim("x", n).unwrap();
        b.global_attr("title", AttrValue::Text(title))
            .global_attr("s", AttrValue::Shorts(shorts))
            .global_attr("b", AttrValue::Bytes(vec![-3, 0, 7]))
            .global_attr("i", AttrValue::Ints(vec![i32::MIN, 5]))
            .global_attr("f", AttrValue::Floats(vec![1.5, -0.25]))
            .global_attr("d", AttrValue::Doubles(doubles));
        b.var("x", &[x], vec![], VarData::Double((0..n).map(|i| i as f64 * 0.5).collect())).unwrap();
        b.var("bytes", &[x], vec![], VarData::Byte((0..n).map(|i| i as i8 - 2).collect())).unwrap();
        b.var("ints", &[t, x], vec![], VarData::Int((0..recs * n).map(|i| i as i32 * 1000 - 7).collect())).unwrap();
        b.var("shorts", &[t, x], vec![], VarData::Short((0..recs * n).map(|i| i as i16 - 3).collect())).unwrap();
        let (built, bytes) = b.finish().unwrap();
        let parsed = parse_header(&bytes[..]).unwrap();
        prop_assert_eq!(&parsed, &built);
        let mut src = Cursor::new(&bytes);
        if recs > 0 {
            let ints = parsed.read_slab(&mut src, "ints", &[0, 0], &[recs, n]).unwrap();
            let want: Vec<f64> = (0..recs * n).map(|i| (i as i32 * 1000 - 7) as f64).collect();
            prop_assert_eq!(ints.values, want);
            let shorts = parsed.read_slab(&mut src, "shorts", &[0, 0], &[recs, n]).unwrap();
            let want: Vec<f64> = (0..recs * n).map(|i| (i as i16 - 3) as f64).collect();
            prop_assert_eq!(shorts.values, want);
        }
        let bytes_var = parsed.read_slab(&mut src, "bytes", &[0], &[n]).unwrap();
        let want: Vec<f64> = (0..n).map(|i| (i as i8 - 2) as f64).collect();
        prop_assert_eq!(bytes_var.values, want);
    }
}

#[test]
fn hdf5_and_cdf5_are_unsupported() {
    let mut hdf5 = b"\x89HDF\r\n\x1a\n".to_vec();
    hdf5.resize(512, 0);
    assert!(matches!(parse_header(&hdf5[..]), Err(NcError::Unsupported(_))));
    let mut cdf5 = b"CDF\x05".to_vec();
    cdf5.resize(64, 0);
    assert!(matches!(parse_header(&cdf5[..]), Err(NcError::Unsupported(_))));
    assert!(matches!(parse_header(&b"GRIB...."[..]), Err(NcError::BadMagic(_))));
}

#[test]
fn every_truncation_of_a_header_is_reported() {
    let spec = SyntheticSpec {
        format: FormatVersion::Cdf2,
        model: "CESM1-CAM5".into(),
        scenario: "rcp85".into(),
        lat: AxisSpec { start: 30.0, step: 1.0, count: 3 },
        lon: AxisSpec { start: -100.0, step: 1.0, count: 4 },
        start_year: 2040,
        start_month: 1,
        months: 2,
        variables: vec![VarSpec {
            name: "pr".into(),
            units: "kg m-2 s-1".into(),
            generator: Generator::Climate,
            encoding: Encoding::Float,
            missing_fraction: 0.0,
        }],
        seed: 1,
        record_time: true,
    };
    let bytes = write_synthetic_archive(&spec).unwrap();
    let header_len = parse_header(&bytes[..]).unwrap().header_len as usize;
    for cut in 4..header_len {
        let r = parse_header(&bytes[..cut]);
        assert!(matches!(r, Err(NcError::Truncated(_))), "cut at {cut}: {r:?}");
    }
}
