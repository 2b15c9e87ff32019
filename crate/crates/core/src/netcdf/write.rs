use super::header::{check_layout, compute_sizes};
use super::{
    pad4, AttrValue, FormatVersion, NcAttribute, NcDimension, NcError, NcFile, NcType,
    NcVariable,
};

/// Variable payload. Record variables hold all records back to back.
#[derive(Debug, Clone, PartialEq)]
pub enum VarData {
    Byte(Vec<i8>),
    Char(Vec<u8>),
    Short(Vec<i16>),
    Int(Vec<i32>),
    Float(Vec<f32>),
    Double(Vec<f64>),
}

impl VarData {
    pub fn nc_type(&self) -> NcType {
        match self {
            VarData::Byte(_) => NcType::Byte,
            VarData::Char(_) => NcType::Char,
            VarData::Short(_) => NcType::Short,
            VarData::Int(_) => NcType::Int,
            VarData::Float(_) => NcType::Float,
            VarData::Double(_) => NcType::Double,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VarData::Byte(v) => v.len(),
            VarData::Char(v) => v.len(),
            VarData::Short(v) => v.len(),
            VarData::Int(v) => v.len(),
            VarData::Float(v) => v.len(),
            VarData::Double(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn encode_range(&self, from: usize, to: usize, out: &mut Vec<u8>) {
        match self {
            VarData::Byte(v) => out.extend(v[from..to].iter().map(|&x| x as u8)),
            VarData::Char(v) => out.extend_from_slice(&v[from..to]),
            VarData::Short(v) => v[from..to]
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            VarData::Int(v) => v[from..to]
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            VarData::Float(v) => v[from..to]
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            VarData::Double(v) => v[from..to]
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        }
    }
}

/// Assembles a classic NetCDF file in memory.
#[derive(Debug, Clone)]
pub struct NcBuilder {
    version: FormatVersion,
    dims: Vec<NcDimension>,
    gatts: Vec<NcAttribute>,
    vars: Vec<(String, Vec<usize>, Vec<NcAttribute>, VarData)>,
}

impl NcBuilder {
    pub fn new(version: FormatVersion) -> Self {
        NcBuilder {
            version,
            dims: Vec::new(),
            gatts: Vec::new(),
            vars: Vec::new(),
        }
    }

    /// Adds a fixed dimension; `len == 0` is rejected (use [`Self::record_dim`]).
    pub fn dim(&mut self, name: &str, len: usize) -> Result<usize, NcError> {
        if len == 0 {
            return Err(NcError::SpecInvalid(format!("dimension `{name}` has zero length")));
        }
        self.push_dim(name, len, false)
    }

    /// Adds the unlimited dimension with `numrecs` records.
    pub fn record_dim(&mut self, name: &str, numrecs: usize) -> Result<usize, NcError> {
        if self.dims.iter().any(|d| d.is_unlimited) {
            return Err(NcError::SpecInvalid("second unlimited dimension".into()));
        }
        self.push_dim(name, numrecs, true)
    }

    fn push_dim(&mut self, name: &str, len: usize, is_unlimited: bool) -> Result<usize, NcError> {
        if name.is_empty() || self.dims.iter().any(|d| d.name == name) {
            return Err(NcError::SpecInvalid(format!("duplicate or empty dimension name `{name}`")));
        }
        self.dims.push(NcDimension {
            name: name.to_string(),
            len,
            is_unlimited,
        });
        Ok(self.dims.len() - 1)
    }

    pub fn global_attr(&mut self, name: &str, value: AttrValue) -> &mut Self {
        self.gatts.push(NcAttribute {
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn var(
        &mut self,
        name: &str,
        dim_ids: &[usize],
        attributes: Vec<NcAttribute>,
        data: VarData,
    ) -> Result<(), NcError> {
        if name.is_empty() || self.vars.iter().any(|v| v.0 == name) {
            return Err(NcError::SpecInvalid(format!("duplicate or empty variable name `{name}`")));
        }
        if let Some(&bad) = dim_ids.iter().find(|&&d| d >= self.dims.len()) {
            return Err(NcError::SpecInvalid(format!("variable `{name}`: unknown dimension id {bad}")));
        }
        if dim_ids.iter().skip(1).any(|&d| self.dims[d].is_unlimited) {
            return Err(NcError::SpecInvalid(format!(
                "variable `{name}`: unlimited dimension must come first"
            )));
        }
        let expected: usize = dim_ids.iter().map(|&d| self.dims[d].len).product();
        if data.len() != expected {
            return Err(NcError::SpecInvalid(format!(
                "variable `{name}`: expected {expected} values, got {}",
                data.len()
            )));
        }
        self.vars
            .push((name.to_string(), dim_ids.to_vec(), attributes, data));
        Ok(())
    }

    /// Lays out and serializes the file, returning the header alongside the bytes.
    pub fn finish(&self) -> Result<(NcFile, Vec<u8>), NcError> {
        let numrecs = self
            .dims
            .iter()
            .find(|d| d.is_unlimited)
            .map_or(0, |d| d.len);
        let mut file = NcFile {
            format_version: self.version,
            numrecs,
            dimensions: self.dims.clone(),
            global_attributes: self.gatts.clone(),
            variables: self
                .vars
                .iter()
                .map(|(name, dims, attrs, data)| NcVariable {
                    name: name.clone(),
                    dim_ids: dims.clone(),
                    attributes: attrs.clone(),
                    element_type: data.nc_type(),
                    byte_offset: 0,
                    vsize: 0,
                })
                .collect(),
            header_len: 0,
            record_size: 0,
        };
        // Offsets are fixed width, so the header length does not depend on them.
        file.header_len = encode_header(&file).len() as u64;
        compute_sizes(&mut file);

        let mut cursor = file.header_len;
        for i in 0..file.variables.len() {
            if !file.is_record_var(&file.variables[i]) {
                file.variables[i].byte_offset = cursor;
                cursor += file.variables[i].vsize;
            }
        }
        for i in 0..file.variables.len() {
            if file.is_record_var(&file.variables[i]) {
                file.variables[i].byte_offset = cursor;
                cursor += file.variables[i].vsize;
            }
        }

        check_layout(&file)?;
        let mut out = encode_header(&file);
        debug_assert_eq!(out.len() as u64, file.header_len);
        for (var, (_, _, _, data)) in file.variables.iter().zip(&self.vars) {
            if file.is_record_var(var) {
                continue;
            }
            let start = out.len();
            data.encode_range(0, data.len(), &mut out);
            out.resize(start + var.vsize as usize, 0);
        }
        let rec_vars: Vec<usize> = (0..file.variables.len())
            .filter(|&i| file.is_record_var(&file.variables[i]))
            .collect();
        for rec in 0..numrecs {
            for &i in &rec_vars {
                let var = &file.variables[i];
                let data = &self.vars[i].3;
                let per_rec = data.len() / numrecs;
                let start = out.len();
                data.encode_range(rec * per_rec, (rec + 1) * per_rec, &mut out);
                out.resize(start + var.vsize as usize, 0);
            }
        }
        Ok((file, out))
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    out.resize(pad4(out.len() as u64) as usize, 0);
}

fn put_attrs(out: &mut Vec<u8>, attrs: &[NcAttribute]) {
    if attrs.is_empty() {
        out.extend_from_slice(&[0; 8]);
        return;
    }
    put_u32(out, 0x0C);
    put_u32(out, attrs.len() as u32);
    for attr in attrs {
        put_name(out, &attr.name);
        put_u32(out, attr.value.nc_type().code());
        put_u32(out, attr.value.len() as u32);
        match &attr.value {
            AttrValue::Bytes(v) => out.extend(v.iter().map(|&x| x as u8)),
            AttrValue::Text(s) => out.extend_from_slice(s.as_bytes()),
            AttrValue::Shorts(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            AttrValue::Ints(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            AttrValue::Floats(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            AttrValue::Doubles(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        }
        out.resize(pad4(out.len() as u64) as usize, 0);
    }
}

fn encode_header(file: &NcFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&file.format_version.magic());
    put_u32(&mut out, file.numrecs as u32);
    if file.dimensions.is_empty() {
        out.extend_from_slice(&[0; 8]);
    } else {
        put_u32(&mut out, 0x0A);
        put_u32(&mut out, file.dimensions.len() as u32);
        for d in &file.dimensions {
            put_name(&mut out, &d.name);
            put_u32(&mut out, if d.is_unlimited { 0 } else { d.len as u32 });
        }
    }
    put_attrs(&mut out, &file.global_attributes);
    if file.variables.is_empty() {
        out.extend_from_slice(&[0; 8]);
    } else {
        put_u32(&mut out, 0x0B);
        put_u32(&mut out, file.variables.len() as u32);
        for v in &file.variables {
            put_name(&mut out, &v.name);
            put_u32(&mut out, v.dim_ids.len() as u32);
            v.dim_ids.iter().for_each(|&d| put_u32(&mut out, d as u32));
            put_attrs(&mut out, &v.attributes);
            put_u32(&mut out, v.element_type.code());
            put_u32(&mut out, u32::try_from(v.vsize).unwrap_or(u32::MAX));
            match file.format_version {
                FormatVersion::Cdf1 => put_u32(&mut out, v.byte_offset as u32),
                FormatVersion::Cdf2 => out.extend_from_slice(&v.byte_offset.to_be_bytes()),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use super::*;
    use crate::netcdf::parse_header;

    fn two_by_three(version: FormatVersion) -> Vec<u8> {
        let mut b = NcBuilder::new(version);
        let y = b.dim("y", 2).unwrap();
        let x = b.dim("x", 3).unwrap();
        b.var(
            "v",
            &[y, x],
            vec![],
            VarData::Float(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
        b.finish().unwrap().1
    }

    #[test]
    fn full_read_of_small_float_var() {
        for version in [FormatVersion::Cdf1, FormatVersion::Cdf2] {
            let bytes = two_by_three(version);
            let file = parse_header(&bytes[..]).unwrap();
            assert_eq!(file.format_version, version);
            let slab = file
                .read_slab(&mut Cursor::new(&bytes), "v", &[0, 0], &[2, 3])
                .unwrap();
            assert_eq!(slab.values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
            assert!(slab.missing.iter().all(|m| !m));
        }
    }

    #[test]
    fn zero_count_gives_empty_slab() {
        let bytes = two_by_three(FormatVersion::Cdf1);
        let file = parse_header(&bytes[..]).unwrap();
        let slab = file
            .read_slab(&mut Cursor::new(&bytes), "v", &[0, 0], &[0, 0])
            .unwrap();
        assert!(slab.is_empty());
    }

    #[test]
    fn fill_value_marks_missing() {
        let mut b = NcBuilder::new(FormatVersion::Cdf1);
        let x = b.dim("x", 3).unwrap();
        let attrs = vec![NcAttribute {
            name: "_FillValue".into(),
            value: AttrValue::Floats(vec![1e20]),
        }];
        b.var("v", &[x], attrs, VarData::Float(vec![1.0, 1e20, 3.0]))
            .unwrap();
        let (_, bytes) = b.finish().unwrap();
        let file = parse_header(&bytes[..]).unwrap();
        let slab = file
            .read_slab(&mut Cursor::new(&bytes), "v", &[0], &[3])
            .unwrap();
        assert_eq!(slab.missing, vec![false, true, false]);
        assert_eq!(slab.values[1], 0.0);
    }

    #[test]
    fn packed_short_is_unpacked() {
        let mut b = NcBuilder::new(FormatVersion::Cdf2);
        let x = b.dim("x", 2).unwrap();
        let attrs = vec![
            NcAttribute {
                name: "scale_factor".into(),
                value: AttrValue::Doubles(vec![0.5]),
            },
            NcAttribute {
                name: "add_offset".into(),
                value: AttrValue::Doubles(vec![100.0]),
            },
        ];
        b.var("v", &[x], attrs, VarData::Short(vec![-2, 10])).unwrap();
        let (_, bytes) = b.finish().unwrap();
        let file = parse_header(&bytes[..]).unwrap();
        let slab = file
            .read_slab(&mut Cursor::new(&bytes), "v", &[0], &[2])
            .unwrap();
        assert_eq!(slab.values, vec![99.0, 105.0]);
    }

    #[test]
    fn errors_on_bad_requests() {
        let bytes = two_by_three(FormatVersion::Cdf1);
        let file = parse_header(&bytes[..]).unwrap();
        let mut cur = Cursor::new(&bytes);
        assert!(matches!(
            file.read_slab(&mut cur, "nope", &[0, 0], &[1, 1]),
            Err(NcError::NoSuchVariable(_))
        ));
        assert!(matches!(
            file.read_slab(&mut cur, "v", &[1, 0], &[2, 3]),
            Err(NcError::OutOfBounds { .. })
        ));
        assert!(matches!(
            file.read_slab(&mut cur, "v", &[0], &[1]),
            Err(NcError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn char_variable_is_text_not_grid() {
        let mut b = NcBuilder::new(FormatVersion::Cdf1);
        let n = b.dim("n", 8).unwrap();
        b.var("label", &[n], vec![], VarData::Char(b"CESM\0\0\0\0".to_vec()))
            .unwrap();
        let (_, bytes) = b.finish().unwrap();
        let file = parse_header(&bytes[..]).unwrap();
        let mut cur = Cursor::new(&bytes);
        assert!(matches!(
            file.read_slab(&mut cur, "label", &[0], &[8]),
            Err(NcError::TypeMismatch { .. })
        ));
        assert_eq!(file.read_text(&mut cur, "label").unwrap(), "CESM");
    }

    #[test]
    fn record_variables_interleave() {
        let mut b = NcBuilder::new(FormatVersion::Cdf1);
        let t = b.record_dim("time", 3).unwrap();
        let x = b.dim("x", 2).unwrap();
        b.var("time", &[t], vec![], VarData::Double(vec![0.0, 1.0, 2.0]))
            .unwrap();
        b.var("a", &[t, x], vec![], VarData::Short(vec![1, 2, 3, 4, 5, 6]))
            .unwrap();
        let (built, bytes) = b.finish().unwrap();
        let file = parse_header(&bytes[..]).unwrap();
        assert_eq!(file, built);
        assert_eq!(file.record_size, 8 + 4);
        let mut cur = Cursor::new(&bytes);
        let a = file.read_slab(&mut cur, "a", &[1, 0], &[2, 2]).unwrap();
        assert_eq!(a.values, vec![3.0, 4.0, 5.0, 6.0]);
        let t = file.read_slab(&mut cur, "time", &[0], &[3]).unwrap();
        assert_eq!(t.values, vec![0.0, 1.0, 2.0]);
        assert_eq!(bytes.len() as u64, file.data_end());
    }

    #[test]
    fn lone_short_record_var_is_unpadded() {
        let mut b = NcBuilder::new(FormatVersion::Cdf1);
        let t = b.record_dim("t", 3).unwrap();
        b.var("s", &[t], vec![], VarData::Short(vec![7, 8, 9])).unwrap();
        let (_, bytes) = b.finish().unwrap();
        let file = parse_header(&bytes[..]).unwrap();
        assert_eq!(file.record_size, 2);
        let s = file
            .read_slab(&mut Cursor::new(&bytes), "s", &[0], &[3])
            .unwrap();
        assert_eq!(s.values, vec![7.0, 8.0, 9.0]);
    }

    #[test]
    fn truncated_data_is_reported() {
        let bytes = two_by_three(FormatVersion::Cdf1);
        let file = parse_header(&bytes[..]).unwrap();
        let cut = &bytes[..bytes.len() - 4];
        assert!(matches!(
            file.read_slab(&mut Cursor::new(cut), "v", &[1, 2], &[1, 1]),
            Err(NcError::Truncated(_))
        ));
    }

    #[test]
    fn builder_rejects_invalid_specs() {
        let mut b = NcBuilder::new(FormatVersion::Cdf1);
        assert!(b.dim("x", 0).is_err());
        b.dim("x", 2).unwrap();
        assert!(b.dim("x", 3).is_err());
        assert!(b.var("v", &[0], vec![], VarData::Int(vec![1])).is_err());
        b.var("v", &[0], vec![], VarData::Int(vec![1, 2])).unwrap();
        assert!(b.var("v", &[0], vec![], VarData::Int(vec![1, 2])).is_err());
    }
}
