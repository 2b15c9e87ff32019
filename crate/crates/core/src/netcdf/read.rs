use std::io::{Read, Seek, SeekFrom};

use serde::{Deserialize, Serialize};

use super::{NcError, NcFile, NcType, NcVariable};

/// A hyperslab in row-major order of the variable's dimensions.
///
/// Values are unpacked to physical units. Cells equal to `_FillValue` (or NaN)
/// are flagged in `missing` and hold `0.0` in `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
    pub units: Option<String>,
}

impl Slab {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

struct Unpack {
    fill: Option<f64>,
    scale: Option<f64>,
    offset: Option<f64>,
}

impl Unpack {
    fn for_var(var: &NcVariable) -> Self {
        Unpack {
            fill: var.attr("_FillValue").and_then(|a| a.first_f64()),
            scale: var.attr("scale_factor").and_then(|a| a.first_f64()),
            offset: var.attr("add_offset").and_then(|a| a.first_f64()),
        }
    }

    /// Returns `None` for a missing cell.
    fn apply(&self, raw: f64) -> Option<f64> {
        if raw.is_nan() || self.fill == Some(raw) {
            return None;
        }
        let scaled = match self.scale {
            Some(s) => raw * s,
            None => raw,
        };
        Some(match self.offset {
            Some(o) => scaled + o,
            None => scaled,
        })
    }
}

fn decode_into(ty: NcType, raw: &[u8], out: &mut Vec<f64>) {
    match ty {
        NcType::Byte => out.extend(raw.iter().map(|&b| f64::from(b as i8))),
        NcType::Char => unreachable!("char variables are rejected before decoding"),
        NcType::Short => out.extend(
            raw.chunks_exact(2)
                .map(|c| f64::from(i16::from_be_bytes([c[0], c[1]]))),
        ),
        NcType::Int => out.extend(
            raw.chunks_exact(4)
                .map(|c| f64::from(i32::from_be_bytes([c[0], c[1], c[2], c[3]]))),
        ),
        NcType::Float => out.extend(
            raw.chunks_exact(4)
                .map(|c| f64::from(f32::from_be_bytes([c[0], c[1], c[2], c[3]]))),
        ),
        NcType::Double => out.extend(raw.chunks_exact(8).map(|c| {
            let mut a = [0u8; 8];
            a.copy_from_slice(c);
            f64::from_be_bytes(a)
        })),
    }
}

impl NcFile {
    fn check_slab(
        &self,
        var: &NcVariable,
        start: &[usize],
        count: &[usize],
    ) -> Result<Vec<usize>, NcError> {
        let shape = self.shape(var);
        let oob = |detail: String| NcError::OutOfBounds {
            var: var.name.clone(),
            detail,
        };
        if start.len() != shape.len() || count.len() != shape.len() {
            return Err(oob(format!(
                "variable has rank {}, got start of length {} and count of length {}",
                shape.len(),
                start.len(),
                count.len()
            )));
        }
        for (axis, ((&s, &c), &n)) in start.iter().zip(count).zip(&shape).enumerate() {
            if s.checked_add(c).is_none_or(|end| end > n) {
                return Err(oob(format!(
                    "axis {axis}: start {s} + count {c} exceeds length {n}"
                )));
            }
        }
        Ok(shape)
    }

    /// Reads the hyperslab `start..start+count` of `var_name`.
    ///
    /// Each call seeks its own cursor; the header itself is never mutated, so
    /// one `NcFile` can serve concurrent readers over separate handles.
    pub fn read_slab<R: Read + Seek>(
        &self,
        source: &mut R,
        var_name: &str,
        start: &[usize],
        count: &[usize],
    ) -> Result<Slab, NcError> {
        let var = self
            .variable(var_name)
            .ok_or_else(|| NcError::NoSuchVariable(var_name.to_string()))?;
        if var.element_type == NcType::Char {
            return Err(NcError::TypeMismatch {
                var: var.name.clone(),
                detail: "char variables hold text, not numeric grids".into(),
            });
        }
        let shape = self.check_slab(var, start, count)?;
        let units = var.units().map(str::to_string);
        let total: usize = count.iter().product();
        if total == 0 {
            return Ok(Slab {
                shape: count.to_vec(),
                values: Vec::new(),
                missing: Vec::new(),
                units,
            });
        }

        let is_rec = self.is_record_var(var);
        let esize = var.element_type.size() as u64;
        let rank = shape.len();

        // Linear element strides within one record (or the whole variable).
        let mut strides = vec![1u64; rank];
        for axis in (0..rank.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * shape[axis + 1] as u64;
        }

        // Merge trailing axes that are read in full into one contiguous run,
        // never crossing the record axis.
        let floor = usize::from(is_rec);
        let mut run_axis = if is_rec && rank == 1 {
            1
        } else {
            rank.saturating_sub(1)
        };
        while run_axis < rank
            && run_axis > floor
            && start[run_axis] == 0
            && count[run_axis] == shape[run_axis]
        {
            run_axis -= 1;
        }
        let run_len: usize = count[run_axis.min(rank)..].iter().product();

        let mut values = Vec::with_capacity(total);
        let mut raw = vec![0u8; run_len * esize as usize];
        let mut idx: Vec<usize> = start[..run_axis.min(rank)].to_vec();
        loop {
            let mut elem: u64 = 0;
            let mut rec: u64 = 0;
            for axis in 0..rank {
                let i = if axis < run_axis {
                    idx[axis]
                } else {
                    start[axis]
                } as u64;
                if is_rec && axis == 0 {
                    rec = i;
                } else {
                    elem += i * strides[axis];
                }
            }
            let offset = if is_rec {
                var.byte_offset + rec * self.record_size + elem * esize
            } else {
                var.byte_offset + elem * esize
            };
            source.seek(SeekFrom::Start(offset))?;
            source
                .read_exact(&mut raw)
                .map_err(|e| NcError::from_io(e, &format!("data of `{}`", var.name)))?;
            decode_into(var.element_type, &raw, &mut values);

            // Advance the odometer over the axes before the run.
            let mut axis = run_axis;
            loop {
                if axis == 0 {
                    return Ok(finish(var, count, values, units));
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < start[axis] + count[axis] {
                    break;
                }
                idx[axis] = start[axis];
            }
        }
    }

    /// Reads a char variable as text, trimming trailing NULs.
    pub fn read_text<R: Read + Seek>(&self, source: &mut R, var_name: &str) -> Result<String, NcError> {
        let var = self
            .variable(var_name)
            .ok_or_else(|| NcError::NoSuchVariable(var_name.to_string()))?;
        if var.element_type != NcType::Char || self.is_record_var(var) {
            return Err(NcError::TypeMismatch {
                var: var.name.clone(),
                detail: "expected a fixed-size char variable".into(),
            });
        }
        let n: usize = self.shape(var).iter().product();
        let mut buf = vec![0u8; n];
        source.seek(SeekFrom::Start(var.byte_offset))?;
        source
            .read_exact(&mut buf)
            .map_err(|e| NcError::from_io(e, &format!("data of `{}`", var.name)))?;
        while buf.last() == Some(&0) {
            buf.pop();
        }
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }
}

fn finish(var: &NcVariable, count: &[usize], raw: Vec<f64>, units: Option<String>) -> Slab {
    let unpack = Unpack::for_var(var);
    let mut missing = Vec::with_capacity(raw.len());
    let values = raw
        .into_iter()
        .map(|r| match unpack.apply(r) {
            Some(v) => {
                missing.push(false);
                v
            }
            None => {
                missing.push(true);
                0.0
            }
        })
        .collect();
    Slab {
        shape: count.to_vec(),
        values,
        missing,
        units,
    }
}
