//! Binary tensor container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes    | field |
//! |----------|-------|
//! | 4        | magic `ITST` |
//! | 2        | format version (`u16`) |
//! | 1        | dtype: 0 = `f32`, 1 = `f64` |
//! | 1        | rank |
//! | 4 × rank | dims (`u32`) |
//! | rest     | row-major payload |

use itst::tensor::Tensor;
use itst::Scalar;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"ITST";
pub const VERSION: u16 = 1;

/// A decoded file of either element type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    /// The values as `f64`; widening from `f32` is exact.
    pub fn into_f64(self) -> Tensor<f64> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t,
        }
    }
}

pub fn encode<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + T::BYTES * t.numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::DTYPE_CODE);
    out.push(u8::try_from(t.rank()).expect("rank fits in u8"));
    for &d in t.shape() {
        out.extend_from_slice(&u32::try_from(d).expect("dim fits in u32").to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut out);
    }
    out
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Format(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<AnyTensor> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("not an ITST tensor file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported tensor file version {version}")));
    }
    let (dtype, rank) = (bytes[6], bytes[7] as usize);
    let header = 8 + 4 * rank;
    if bytes.len() < header {
        return Err(bad("truncated tensor header"));
    }
    let shape: Vec<usize> = bytes[8..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let numel = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let payload = &bytes[header..];
    match dtype {
        0 => Ok(AnyTensor::F32(read_payload(shape, numel, payload)?)),
        1 => Ok(AnyTensor::F64(read_payload(shape, numel, payload)?)),
        other => Err(bad(format!("unknown dtype code {other}"))),
    }
}

fn read_payload<T: Scalar>(
    shape: Vec<usize>,
    numel: Option<usize>,
    payload: &[u8],
) -> Result<Tensor<T>> {
    let expected = numel.and_then(|n| n.checked_mul(T::BYTES));
    if expected != Some(payload.len()) {
        return Err(bad(format!(
            "payload of {} bytes does not match shape {shape:?}",
            payload.len()
        )));
    }
    let data = payload.chunks_exact(T::BYTES).map(T::read_le).collect();
    Tensor::new(shape, data).map_err(|e| bad(e.to_string()))
}

pub fn read(path: &std::path::Path) -> Result<AnyTensor> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        CliError::Format(msg) => CliError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
