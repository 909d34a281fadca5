//! `MSFTENS1` tensor files.
//!
//! Layout: 8-byte magic, 1-byte dtype (0 = f32 little-endian), 1-byte rank,
//! `rank` little-endian u32 dims, then the row-major payload.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, FormatErrorKind, Result};

pub const MAGIC: &[u8; 8] = b"MSFTENS1";
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub values: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, values: Vec<f32>) -> Result<Self> {
        check_shape(&dims, values.len())?;
        Ok(Self { dims, values })
    }

    /// Rows of a rank-2 tensor.
    pub fn rows(&self) -> Result<Vec<Vec<f32>>> {
        match self.dims.as_slice() {
            &[_, cols] => Ok(self.values.chunks(cols.max(1) as usize).map(<[f32]>::to_vec).collect()),
            dims => Err(Error::invalid(format!("expected a rank-2 tensor, got dims {dims:?}"))),
        }
    }
}

pub fn header_len(rank: usize) -> usize {
    MAGIC.len() + 2 + 4 * rank
}

fn check_shape(dims: &[u32], len: usize) -> Result<()> {
    if dims.len() > u8::MAX as usize {
        return Err(Error::invalid(format!("tensor rank {} exceeds 255", dims.len())));
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| Error::invalid("tensor dims overflow"))?;
    if count != len {
        return Err(Error::invalid(format!(
            "dims {dims:?} describe {count} values but {len} were given"
        )));
    }
    Ok(())
}

pub fn encode_tensor(dims: &[u32], values: &[f32]) -> Result<Vec<u8>> {
    check_shape(dims, values.len())?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("value {i} is not finite")));
    }
    let mut out = Vec::with_capacity(header_len(dims.len()) + 4 * values.len());
    out.extend_from_slice(MAGIC);
    out.push(DTYPE_F32);
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    use FormatErrorKind::*;
    let err = |kind, offset: usize, msg: String| Error::format(kind, offset as u64, msg);

    if bytes.len() < MAGIC.len() {
        return Err(err(Truncated, bytes.len(), "file ends inside the magic".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(err(
            BadMagic,
            0,
            format!(
                "expected {:?}, found {:?}",
                "MSFTENS1",
                String::from_utf8_lossy(&bytes[..8])
            ),
        ));
    }
    let (Some(&dtype), Some(&rank)) = (bytes.get(8), bytes.get(9)) else {
        return Err(err(Truncated, bytes.len(), "file ends inside the header".into()));
    };
    if dtype != DTYPE_F32 {
        return Err(err(UnsupportedDtype, 8, format!("dtype code {dtype}")));
    }
    let rank = rank as usize;
    let header = header_len(rank);
    if bytes.len() < header {
        return Err(err(Truncated, bytes.len(), format!("header needs {header} bytes")));
    }
    let dims: Vec<u32> = bytes[10..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| err(BadHeader, 10, format!("dims {dims:?} overflow")))?;
    let payload = &bytes[header..];
    let expected = count
        .checked_mul(4)
        .ok_or_else(|| err(BadHeader, 10, format!("dims {dims:?} overflow")))?;
    if payload.len() < expected {
        return Err(err(
            Truncated,
            bytes.len(),
            format!("payload has {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(err(
            TrailingBytes,
            header + expected,
            format!("{} bytes after the payload", payload.len() - expected),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for (i, c) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(err(NonFinite, header + 4 * i, format!("value {i} is {v}")));
        }
        values.push(v);
    }
    Ok(Tensor { dims, values })
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_tensor(path: &Path, dims: &[u32], values: &[f32]) -> Result<()> {
    let bytes = encode_tensor(dims, values)?;
    write_atomic(path, &bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes).map_err(|e| e.context(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_round_trip() {
        let bytes = encode_tensor(&[3], &[1.0, 2.5, -3.0]).unwrap();
        assert_eq!(bytes.len(), 10 + 4 + 12);
        let t = decode_tensor(&bytes).unwrap();
        assert_eq!(t.dims, vec![3]);
        assert_eq!(t.values, vec![1.0, 2.5, -3.0]);
    }

    #[test]
    fn rank_three_header_is_22_bytes() {
        let values = vec![0.5f32; 2 * 3 * 3];
        let bytes = encode_tensor(&[2, 3, 3], &values).unwrap();
        assert_eq!(header_len(3), 22);
        assert_eq!(bytes.len(), 22 + 4 * values.len());
        assert_eq!(&bytes[..10], b"MSFTENS1\x00\x03");
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
    }

    #[test]
    fn wrong_magic_rejected() {
        let mut bytes = encode_tensor(&[1], &[1.0]).unwrap();
        bytes[7] = b'2';
        match decode_tensor(&bytes) {
            Err(Error::Format { kind, offset, .. }) => {
                assert_eq!(kind, FormatErrorKind::BadMagic);
                assert_eq!(offset, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_and_garbage_rejected() {
        let bytes = encode_tensor(&[4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        for cut in [3, 9, 12, bytes.len() - 1] {
            assert!(matches!(
                decode_tensor(&bytes[..cut]),
                Err(Error::Format {
                    kind: FormatErrorKind::Truncated,
                    ..
                })
            ));
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            decode_tensor(&long),
            Err(Error::Format {
                kind: FormatErrorKind::TrailingBytes,
                ..
            })
        ));
        let mut nan = bytes;
        nan[14..18].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_tensor(&nan),
            Err(Error::Format {
                kind: FormatErrorKind::NonFinite,
                offset: 14,
                ..
            })
        ));
    }

    #[test]
    fn shape_mismatch_rejected_on_write() {
        assert!(encode_tensor(&[2, 2], &[1.0; 3]).is_err());
        assert!(encode_tensor(&[1], &[f32::INFINITY]).is_err());
    }
}
