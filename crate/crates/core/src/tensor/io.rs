//! `TNSR` raw tensor container: magic `TNSR`, version `u32 = 1`, dtype `u8`
//! (0 = f32, 1 = f64), ndim `u32`, ndim x `u64` dims, then the data. All
//! fields little-endian.

use std::io::{Read, Write};

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u32 = 1;
/// Rejects headers claiming absurd sizes before allocating.
const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

pub fn encode_tnsr(shape: &[usize], data: &[f64], dtype: DType) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * shape.len() + dtype.width() * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype as u8);
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match dtype {
        DType::F64 => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        DType::F32 => data.iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    out
}

/// Parses a complete `TNSR` buffer into `(shape, data, stored dtype)`.
pub fn decode_tnsr(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>, DType)> {
    let mut cur = bytes;
    let (shape, data, dtype) = read_body(&mut cur)?;
    if !cur.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after tensor data", cur.len())));
    }
    Ok((shape, data, dtype))
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated TNSR stream: {e}")))?;
    Ok(buf)
}

fn read_body(r: &mut impl Read) -> Result<(Vec<usize>, Vec<f64>, DType)> {
    if &read_exact::<4>(r)? != MAGIC {
        return Err(Error::Format("bad magic, expected TNSR".into()));
    }
    let version = u32::from_le_bytes(read_exact(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported TNSR version {version}")));
    }
    let dtype = match read_exact::<1>(r)?[0] {
        0 => DType::F32,
        1 => DType::F64,
        other => return Err(Error::Format(format!("unknown dtype code {other}"))),
    };
    let ndim = u32::from_le_bytes(read_exact(r)?) as usize;
    if ndim > 16 {
        return Err(Error::Format(format!("implausible ndim {ndim}")));
    }
    let mut shape = Vec::with_capacity(ndim);
    let mut numel: u64 = 1;
    for _ in 0..ndim {
        let d = u64::from_le_bytes(read_exact(r)?);
        numel = numel
            .checked_mul(d)
            .filter(|&n| n <= MAX_ELEMENTS)
            .ok_or_else(|| Error::Format("tensor dimensions overflow".into()))?;
        shape.push(d as usize);
    }
    let mut data = Vec::with_capacity(numel as usize);
    for _ in 0..numel {
        data.push(match dtype {
            DType::F64 => f64::from_le_bytes(read_exact(r)?),
            DType::F32 => f32::from_le_bytes(read_exact(r)?) as f64,
        });
    }
    Ok((shape, data, dtype))
}

pub fn write_tnsr(w: &mut impl Write, t: &Tensor, dtype: DType) -> Result<()> {
    w.write_all(&encode_tnsr(t.shape(), &t.data(), dtype))?;
    Ok(())
}

/// Reads one tensor from a stream, leaving any following bytes unread.
pub fn read_tnsr(r: &mut impl Read) -> Result<Tensor> {
    let (shape, data, _) = read_body(r)?;
    Tensor::new(data, &shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let b = encode_tnsr(&[2, 3], &[0.0; 6], DType::F64);
        assert_eq!(&b[..4], b"TNSR");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(b[8], 1);
        assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[13..21].try_into().unwrap()), 2);
        assert_eq!(b.len(), 13 + 16 + 48);
    }

    #[test]
    fn rejects_malformed() {
        assert!(decode_tnsr(b"NOPE").is_err());
        let mut b = encode_tnsr(&[4], &[1.0; 4], DType::F64);
        b.pop();
        assert!(decode_tnsr(&b).is_err());
        let mut b = encode_tnsr(&[1], &[1.0], DType::F64);
        b[8] = 7;
        assert!(decode_tnsr(&b).is_err());
        let mut huge = encode_tnsr(&[1, 1], &[1.0], DType::F64);
        huge[13..21].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_tnsr(&huge).is_err());
    }

    proptest! {
        #[test]
        fn f64_round_trip_is_bit_exact(shape in prop::collection::vec(1usize..5, 0..4), seed in any::<u64>()) {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = (0..n as u64).map(|i| f64::from_bits(seed.wrapping_mul(i + 1) >> 2)).collect();
            let (s2, d2, dt) = decode_tnsr(&encode_tnsr(&shape, &data, DType::F64)).unwrap();
            prop_assert_eq!(s2, shape);
            prop_assert_eq!(dt, DType::F64);
            prop_assert!(data.iter().zip(&d2).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        #[test]
        fn f32_storage_is_stable(vals in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            let enc = encode_tnsr(&[vals.len()], &vals, DType::F32);
            let (_, dec, _) = decode_tnsr(&enc).unwrap();
            prop_assert_eq!(encode_tnsr(&[vals.len()], &dec, DType::F32), enc);
        }
    }
}
