//! NetCDF classic (CDF-1 / CDF-2) reading and writing.
//!
//! Only the classic big-endian layout is handled. HDF5-backed NetCDF-4 files
//! and CDF-5 are detected from their magic bytes and rejected with
//! [`NcError::Unsupported`].

mod header;
mod read;
mod synthetic;
mod write;

pub use header::parse_header;
pub use read::Slab;
pub use synthetic::{
    expected_values, write_synthetic_archive, AxisSpec, Encoding, Generator, SyntheticSpec,
    VarSpec, TIME_UNITS,
};
pub use write::{NcBuilder, VarData};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum NcError {
    #[error("bad magic bytes {0:02x?}, not a NetCDF classic file")]
    BadMagic(Vec<u8>),
    #[error("truncated input: {0}")]
    Truncated(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("malformed header: {0}")]
    Malformed(String),
    #[error("no such variable `{0}`")]
    NoSuchVariable(String),
    #[error("slab out of bounds for `{var}`: {detail}")]
    OutOfBounds { var: String, detail: String },
    #[error("type mismatch for `{var}`: {detail}")]
    TypeMismatch { var: String, detail: String },
    #[error("invalid synthetic spec: {0}")]
    SpecInvalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl NcError {
    /// Maps `UnexpectedEof` to [`NcError::Truncated`], everything else to `Io`.
    pub(crate) fn from_io(err: std::io::Error, what: &str) -> Self {
        if err.kind() == std::io::ErrorKind::UnexpectedEof {
            NcError::Truncated(what.to_string())
        } else {
            NcError::Io(err)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatVersion {
    /// 32-bit offsets, magic `CDF\x01`.
    Cdf1,
    /// 64-bit offsets, magic `CDF\x02`.
    Cdf2,
}

impl FormatVersion {
    pub fn magic(self) -> [u8; 4] {
        match self {
            FormatVersion::Cdf1 => *b"CDF\x01",
            FormatVersion::Cdf2 => *b"CDF\x02",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NcType {
    Byte,
    Char,
    Short,
    Int,
    Float,
    Double,
}

impl NcType {
    pub fn code(self) -> u32 {
        match self {
            NcType::Byte => 1,
            NcType::Char => 2,
            NcType::Short => 3,
            NcType::Int => 4,
            NcType::Float => 5,
            NcType::Double => 6,
        }
    }

    pub fn from_code(code: u32) -> Result<Self, NcError> {
        Ok(match code {
            1 => NcType::Byte,
            2 => NcType::Char,
            3 => NcType::Short,
            4 => NcType::Int,
            5 => NcType::Float,
            6 => NcType::Double,
            7..=11 => {
                return Err(NcError::Unsupported(format!(
                    "CDF-5 extended type code {code}"
                )))
            }
            other => return Err(NcError::Malformed(format!("unknown nc_type {other}"))),
        })
    }

    pub fn size(self) -> usize {
        match self {
            NcType::Byte | NcType::Char => 1,
            NcType::Short => 2,
            NcType::Int | NcType::Float => 4,
            NcType::Double => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcDimension {
    pub name: String,
    /// For the unlimited dimension this is the current record count.
    pub len: usize,
    pub is_unlimited: bool,
}

/// Typed attribute payload. Char attributes are decoded as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Bytes(Vec<i8>),
    Text(String),
    Shorts(Vec<i16>),
    Ints(Vec<i32>),
    Floats(Vec<f32>),
    Doubles(Vec<f64>),
}

impl AttrValue {
    pub fn nc_type(&self) -> NcType {
        match self {
            AttrValue::Bytes(_) => NcType::Byte,
            AttrValue::Text(_) => NcType::Char,
            AttrValue::Shorts(_) => NcType::Short,
            AttrValue::Ints(_) => NcType::Int,
            AttrValue::Floats(_) => NcType::Float,
            AttrValue::Doubles(_) => NcType::Double,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AttrValue::Bytes(v) => v.len(),
            AttrValue::Text(s) => s.len(),
            AttrValue::Shorts(v) => v.len(),
            AttrValue::Ints(v) => v.len(),
            AttrValue::Floats(v) => v.len(),
            AttrValue::Doubles(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s.as_str()),
            _ => None,
        }
    }

    /// First numeric element widened to `f64`.
    pub fn first_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Bytes(v) => v.first().map(|&x| f64::from(x)),
            AttrValue::Text(_) => None,
            AttrValue::Shorts(v) => v.first().map(|&x| f64::from(x)),
            AttrValue::Ints(v) => v.first().map(|&x| f64::from(x)),
            AttrValue::Floats(v) => v.first().map(|&x| f64::from(x)),
            AttrValue::Doubles(v) => v.first().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcAttribute {
    pub name: String,
    pub value: AttrValue,
}

pub(crate) fn find_attr<'a>(attrs: &'a [NcAttribute], name: &str) -> Option<&'a AttrValue> {
    attrs.iter().find(|a| a.name == name).map(|a| &a.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcVariable {
    pub name: String,
    pub dim_ids: Vec<usize>,
    pub attributes: Vec<NcAttribute>,
    pub element_type: NcType,
    /// Absolute file offset of the first byte of data.
    pub byte_offset: u64,
    /// Padded size in bytes (per record for record variables).
    pub vsize: u64,
}

impl NcVariable {
    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        find_attr(&self.attributes, name)
    }

    pub fn units(&self) -> Option<&str> {
        self.attr("units").and_then(AttrValue::as_text)
    }
}

/// A parsed file header. Immutable once built; reads take their own cursor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcFile {
    pub format_version: FormatVersion,
    pub numrecs: usize,
    pub dimensions: Vec<NcDimension>,
    pub global_attributes: Vec<NcAttribute>,
    pub variables: Vec<NcVariable>,
    /// Byte length of the header.
    pub header_len: u64,
    /// Byte stride between consecutive records.
    pub record_size: u64,
}

impl NcFile {
    pub fn variable(&self, name: &str) -> Option<&NcVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn dimension(&self, name: &str) -> Option<&NcDimension> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn global_attr(&self, name: &str) -> Option<&AttrValue> {
        find_attr(&self.global_attributes, name)
    }

    pub fn is_record_var(&self, var: &NcVariable) -> bool {
        var.dim_ids
            .first()
            .is_some_and(|&d| self.dimensions[d].is_unlimited)
    }

    /// Shape of `var` with the record dimension resolved to `numrecs`.
    pub fn shape(&self, var: &NcVariable) -> Vec<usize> {
        var.dim_ids
            .iter()
            .map(|&d| {
                let dim = &self.dimensions[d];
                if dim.is_unlimited {
                    self.numrecs
                } else {
                    dim.len
                }
            })
            .collect()
    }

    /// Names of `var`'s dimensions in storage order.
    pub fn dim_names(&self, var: &NcVariable) -> Vec<&str> {
        var.dim_ids
            .iter()
            .map(|&d| self.dimensions[d].name.as_str())
            .collect()
    }

    /// End offset of the data section implied by the header.
    pub fn data_end(&self) -> u64 {
        let fixed_end = self
            .variables
            .iter()
            .filter(|v| !self.is_record_var(v))
            .map(|v| v.byte_offset + v.vsize)
            .max()
            .unwrap_or(self.header_len);
        let rec_start = self
            .variables
            .iter()
            .filter(|v| self.is_record_var(v))
            .map(|v| v.byte_offset)
            .min();
        match rec_start {
            Some(start) => fixed_end.max(start + self.record_size * self.numrecs as u64),
            None => fixed_end,
        }
    }
}

pub(crate) fn pad4(n: u64) -> u64 {
    (n + 3) & !3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_codes_round_trip() {
        for t in [
            NcType::Byte,
            NcType::Char,
            NcType::Short,
            NcType::Int,
            NcType::Float,
            NcType::Double,
        ] {
            assert_eq!(NcType::from_code(t.code()).unwrap(), t);
        }
        assert!(matches!(NcType::from_code(10), Err(NcError::Unsupported(_))));
        assert!(matches!(NcType::from_code(42), Err(NcError::Malformed(_))));
    }

    #[test]
    fn padding() {
        assert_eq!(pad4(0), 0);
        assert_eq!(pad4(1), 4);
        assert_eq!(pad4(4), 4);
        assert_eq!(pad4(7), 8);
    }
}
