//! Binary parameter format, all little-endian:
//!
//! ```text
//! magic      4 bytes  "FMPR"
//! version    u32      1
//! eta        f64
//! batch      u64
//! hidden     u64
//! layers     u32
//! shape      (u64 rows, u64 cols) per layer
//! values     f64 per parameter
//! ```
//!
//! The encoded length is the per-transfer message size used for
//! communication accounting.

use super::{Hyper, LayerShape, ModelError, ModelParams};

const MAGIC: &[u8; 4] = b"FMPR";
const VERSION: u32 = 1;
const FIXED_HEADER: usize = 4 + 4 + 8 + 8 + 8 + 4;

pub fn serialized_len(params: &ModelParams) -> usize {
    FIXED_HEADER + 16 * params.shapes.len() + 8 * params.flat.len()
}

pub fn serialize(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(serialized_len(params));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&params.hyper.learning_rate.to_le_bytes());
    out.extend_from_slice(&(params.hyper.batch_size as u64).to_le_bytes());
    out.extend_from_slice(&(params.hyper.hidden_dim as u64).to_le_bytes());
    out.extend_from_slice(&(params.shapes.len() as u32).to_le_bytes());
    for s in &params.shapes {
        out.extend_from_slice(&(s.rows as u64).to_le_bytes());
        out.extend_from_slice(&(s.cols as u64).to_le_bytes());
    }
    for v in &params.flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        if self.bytes.len() < N {
            return Err(ModelError::Malformed("truncated".into()));
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<usize, ModelError> {
        self.take().map(u64::from_le_bytes).map(|v| v as usize)
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<ModelParams, ModelError> {
    let mut r = Reader { bytes };
    if &r.take::<4>()? != MAGIC {
        return Err(ModelError::Malformed("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::Malformed(format!(
            "unsupported version {version}"
        )));
    }
    let hyper = Hyper {
        learning_rate: r.f64()?,
        batch_size: r.u64()?,
        hidden_dim: r.u64()?,
    };
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 2 {
        return Err(ModelError::Malformed(format!("{layers} layers")));
    }
    let shapes = (0..layers)
        .map(|_| {
            Ok(LayerShape {
                rows: r.u64()?,
                cols: r.u64()?,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let expected: usize = shapes.iter().map(LayerShape::len).sum();
    if r.bytes.len() != 8 * expected {
        return Err(ModelError::Malformed(format!(
            "expected {expected} values, found {} bytes",
            r.bytes.len()
        )));
    }
    let flat = (0..expected)
        .map(|_| r.f64())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelParams {
        shapes,
        flat,
        hyper,
    })
}
