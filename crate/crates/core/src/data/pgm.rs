//! 8-bit binary PGM (`P5`) encoding of `[1,H,W]` images in `[-1,1]`.

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

const MAX_PIXELS: usize = 1 << 28;

/// `round(127.5 * (v + 1))` with halves rounded away from zero, clamped.
pub fn to_byte(v: f64) -> u8 {
    (127.5 * (v + 1.0)).round().clamp(0.0, 255.0) as u8
}

pub fn from_byte(b: u8) -> f64 {
    b as f64 / 127.5 - 1.0
}

pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let &[1, h, w] = image.shape() else {
        return shape_err(format!("PGM encoding expects [1,H,W], got {:?}", image.shape()));
    };
    encode_pgm_raw(h, w, &image.data())
}

pub(crate) fn encode_pgm_raw(h: usize, w: usize, data: &[f64]) -> Result<Vec<u8>> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cannot encode non-finite pixels".into()));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(data.iter().map(|&v| to_byte(v)));
    Ok(out)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(format!("PGM: {}", msg.into()))
}

/// Parses `P5` with optional `#` comments in the header; maxval must be 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Tensor> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad(format!("magic `{}` is not P5", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad header number `{s}`")));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad(format!("maxval {maxval} unsupported")));
    }
    let n = w.checked_mul(h).filter(|&n| n > 0 && n <= MAX_PIXELS).ok_or_else(|| bad(format!("dimensions {w}x{h} out of range")))?;
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() {
        return Err(bad("missing raster"));
    }
    let raster = &bytes[pos + 1..];
    if raster.len() != n {
        return Err(bad(format!("raster has {} bytes, expected {n}", raster.len())));
    }
    Tensor::new(raster.iter().map(|&b| from_byte(b)).collect(), &[1, h, w])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(v: f64) -> Tensor {
        Tensor::full(&[1, 2, 3], v)
    }

    #[test]
    fn byte_map_examples() {
        let raster = |b: &[u8]| b[b.len() - 6..].to_vec();
        assert_eq!(raster(&encode_pgm(&img(-1.0)).unwrap()), vec![0; 6]);
        assert_eq!(raster(&encode_pgm(&img(1.0)).unwrap()), vec![255; 6]);
        assert_eq!(raster(&encode_pgm(&img(0.0)).unwrap()), vec![128; 6]);
        assert_eq!(to_byte(5.0), 255);
        assert_eq!(to_byte(-3.0), 0);
    }

    #[test]
    fn header_and_comments() {
        let bytes = encode_pgm(&img(0.5)).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        let mut commented = b"P5\n# made here\n3 2\n255\n".to_vec();
        commented.extend(&bytes[bytes.len() - 6..]);
        assert_eq!(decode_pgm(&commented).unwrap().to_vec(), decode_pgm(&bytes).unwrap().to_vec());
    }

    #[test]
    fn rejects_malformed() {
        assert!(decode_pgm(b"P2\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n99999999999 99999999999\n255\n").is_err());
        assert!(decode_pgm(b"P5\n1").is_err());
        assert!(encode_pgm(&Tensor::zeros(&[2, 2])).is_err());
        assert!(encode_pgm(&img(f64::NAN)).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_quantization(v in proptest::collection::vec(-1.0f64..=1.0, 12)) {
            let t = Tensor::new(v.clone(), &[1, 3, 4]).unwrap();
            let bytes = encode_pgm(&t).unwrap();
            let back = decode_pgm(&bytes).unwrap();
            for (a, b) in v.iter().zip(back.data().iter()) {
                prop_assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
            }
            prop_assert_eq!(encode_pgm(&back).unwrap(), bytes);
        }
    }
}
