use std::io::Read;

use super::{
    pad4, AttrValue, FormatVersion, NcAttribute, NcDimension, NcError, NcFile, NcType,
    NcVariable,
};

const NC_DIMENSION: u32 = 0x0A;
const NC_VARIABLE: u32 = 0x0B;
const NC_ATTRIBUTE: u32 = 0x0C;
const STREAMING: u32 = 0xFFFF_FFFF;

// Names or attribute payloads beyond this are treated as corruption rather
// than allocated.
const MAX_ELEMENTS: u64 = 1 << 28;

struct HeaderReader<R> {
    inner: R,
    pos: u64,
}

impl<R: Read> HeaderReader<R> {
    fn bytes(&mut self, n: u64, what: &str) -> Result<Vec<u8>, NcError> {
        let mut buf = Vec::new();
        (&mut self.inner)
            .take(n)
            .read_to_end(&mut buf)
            .map_err(|e| NcError::from_io(e, what))?;
        if (buf.len() as u64) < n {
            return Err(NcError::Truncated(what.to_string()));
        }
        self.pos += n;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32, NcError> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64, NcError> {
        let b = self.bytes(8, what)?;
        let mut arr = [0u8; 8];
        arr.copy_from_slice(&b);
        Ok(u64::from_be_bytes(arr))
    }

    fn skip_padding(&mut self, used: u64, what: &str) -> Result<(), NcError> {
        let pad = pad4(used) - used;
        if pad > 0 {
            self.bytes(pad, what)?;
        }
        Ok(())
    }

    fn count(&mut self, what: &str) -> Result<u64, NcError> {
        let n = u64::from(self.u32(what)?);
        if n > MAX_ELEMENTS {
            return Err(NcError::Malformed(format!("{what}: implausible count {n}")));
        }
        Ok(n)
    }

    fn name(&mut self) -> Result<String, NcError> {
        let n = self.count("name length")?;
        let raw = self.bytes(n, "name")?;
        self.skip_padding(n, "name padding")?;
        String::from_utf8(raw).map_err(|_| NcError::Malformed("name is not UTF-8".into()))
    }

    /// Reads a list tag; returns the element count (0 for ABSENT).
    fn list_header(&mut self, tag: u32, what: &str) -> Result<u64, NcError> {
        let got = self.u32(what)?;
        let n = self.count(what)?;
        if got == 0 {
            if n != 0 {
                return Err(NcError::Malformed(format!("{what}: ABSENT with nonzero count")));
            }
            return Ok(0);
        }
        if got != tag {
            return Err(NcError::Malformed(format!(
                "{what}: expected tag {tag:#x}, found {got:#x}"
            )));
        }
        Ok(n)
    }

    fn attributes(&mut self) -> Result<Vec<NcAttribute>, NcError> {
        let n = self.list_header(NC_ATTRIBUTE, "attribute list")?;
        let mut out = Vec::with_capacity(n.min(64) as usize);
        for _ in 0..n {
            let name = self.name()?;
            let nc_type = NcType::from_code(self.u32("attribute type")?)?;
            let nelems = self.count("attribute length")?;
            let nbytes = nelems * nc_type.size() as u64;
            let raw = self.bytes(nbytes, "attribute values")?;
            self.skip_padding(nbytes, "attribute padding")?;
            out.push(NcAttribute {
                name,
                value: decode_attr(nc_type, &raw),
            });
        }
        Ok(out)
    }
}

fn decode_attr(nc_type: NcType, raw: &[u8]) -> AttrValue {
    match nc_type {
        NcType::Byte => AttrValue::Bytes(raw.iter().map(|&b| b as i8).collect()),
        NcType::Char => AttrValue::Text(String::from_utf8_lossy(raw).into_owned()),
        NcType::Short => AttrValue::Shorts(
            raw.chunks_exact(2)
                .map(|c| i16::from_be_bytes([c[0], c[1]]))
                .collect(),
        ),
        NcType::Int => AttrValue::Ints(
            raw.chunks_exact(4)
                .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        NcType::Float => AttrValue::Floats(
            raw.chunks_exact(4)
                .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        NcType::Double => AttrValue::Doubles(
            raw.chunks_exact(8)
                .map(|c| {
                    let mut a = [0u8; 8];
                    a.copy_from_slice(c);
                    f64::from_be_bytes(a)
                })
                .collect(),
        ),
    }
}

fn check_magic(magic: &[u8]) -> Result<FormatVersion, NcError> {
    match magic {
        b"CDF\x01" => Ok(FormatVersion::Cdf1),
        b"CDF\x02" => Ok(FormatVersion::Cdf2),
        b"CDF\x05" => Err(NcError::Unsupported("CDF-5 (64-bit data) format".into())),
        [0x89, b'H', b'D', b'F'] => Err(NcError::Unsupported(
            "HDF5-based NetCDF-4 file".into(),
        )),
        _ => Err(NcError::BadMagic(magic.to_vec())),
    }
}

/// Parses the header of a classic NetCDF file without touching variable data.
pub fn parse_header<R: Read>(source: R) -> Result<NcFile, NcError> {
    let mut r = HeaderReader {
        inner: source,
        pos: 0,
    };
    let magic = r.bytes(4, "magic")?;
    let format_version = check_magic(&magic)?;

    let numrecs = r.u32("numrecs")?;
    if numrecs == STREAMING {
        return Err(NcError::Unsupported("streaming record count".into()));
    }
    let numrecs = numrecs as usize;

    let ndims = r.list_header(NC_DIMENSION, "dimension list")?;
    let mut dimensions = Vec::with_capacity(ndims.min(64) as usize);
    for _ in 0..ndims {
        let name = r.name()?;
        let len = r.u32("dimension length")? as usize;
        dimensions.push(NcDimension {
            name,
            len: if len == 0 { numrecs } else { len },
            is_unlimited: len == 0,
        });
    }
    if dimensions.iter().filter(|d| d.is_unlimited).count() > 1 {
        return Err(NcError::Malformed("more than one unlimited dimension".into()));
    }

    let global_attributes = r.attributes()?;

    let nvars = r.list_header(NC_VARIABLE, "variable list")?;
    let mut variables = Vec::with_capacity(nvars.min(64) as usize);
    for _ in 0..nvars {
        let name = r.name()?;
        let rank = r.count("variable rank")?;
        let mut dim_ids = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            let id = r.u32("dimension id")? as usize;
            if id >= dimensions.len() {
                return Err(NcError::Malformed(format!(
                    "variable `{name}` references undeclared dimension {id}"
                )));
            }
            dim_ids.push(id);
        }
        if dim_ids
            .iter()
            .skip(1)
            .any(|&d| dimensions[d].is_unlimited)
        {
            return Err(NcError::Malformed(format!(
                "variable `{name}` uses the unlimited dimension in a non-leading position"
            )));
        }
        let attributes = r.attributes()?;
        let element_type = NcType::from_code(r.u32("variable type")?)?;
        let _declared_vsize = r.u32("vsize")?;
        let byte_offset = match format_version {
            FormatVersion::Cdf1 => u64::from(r.u32("begin offset")?),
            FormatVersion::Cdf2 => r.u64("begin offset")?,
        };
        variables.push(NcVariable {
            name,
            dim_ids,
            attributes,
            element_type,
            byte_offset,
            vsize: 0,
        });
    }

    let mut file = NcFile {
        format_version,
        numrecs,
        dimensions,
        global_attributes,
        variables,
        header_len: r.pos,
        record_size: 0,
    };
    finish_layout(&mut file)?;
    Ok(file)
}

/// Fills in `vsize` and `record_size` and checks the data layout.
pub(crate) fn finish_layout(file: &mut NcFile) -> Result<(), NcError> {
    compute_sizes(file);
    check_layout(file)
}

pub(crate) fn compute_sizes(file: &mut NcFile) {
    let record_vars: Vec<usize> = (0..file.variables.len())
        .filter(|&i| file.is_record_var(&file.variables[i]))
        .collect();
    for i in 0..file.variables.len() {
        let var = &file.variables[i];
        let is_rec = record_vars.contains(&i);
        let elems: u64 = var
            .dim_ids
            .iter()
            .skip(usize::from(is_rec))
            .map(|&d| file.dimensions[d].len as u64)
            .product();
        let raw = elems * var.element_type.size() as u64;
        // A lone record variable is stored without inter-record padding.
        let vsize = if is_rec && record_vars.len() == 1 {
            raw
        } else {
            pad4(raw)
        };
        file.variables[i].vsize = vsize;
    }
    file.record_size = record_vars.iter().map(|&i| file.variables[i].vsize).sum();
}

pub(crate) fn check_layout(file: &NcFile) -> Result<(), NcError> {
    let record_vars: Vec<usize> = (0..file.variables.len())
        .filter(|&i| file.is_record_var(&file.variables[i]))
        .collect();

    let mut fixed: Vec<(u64, u64, &str)> = file
        .variables
        .iter()
        .filter(|v| !file.is_record_var(v))
        .map(|v| (v.byte_offset, v.byte_offset + v.vsize, v.name.as_str()))
        .collect();
    fixed.sort();
    for (start, _, name) in &fixed {
        if *start < file.header_len {
            return Err(NcError::Malformed(format!(
                "variable `{name}` begins inside the header"
            )));
        }
    }
    for pair in fixed.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(NcError::Malformed(format!(
                "variables `{}` and `{}` overlap",
                pair[0].2, pair[1].2
            )));
        }
    }
    if let Some(rec_start) = record_vars
        .iter()
        .map(|&i| file.variables[i].byte_offset)
        .min()
    {
        if rec_start < file.header_len || fixed.last().is_some_and(|f| f.1 > rec_start) {
            return Err(NcError::Malformed(
                "record section overlaps fixed-size data".into(),
            ));
        }
    }
    Ok(())
}
