//! Binary 8-bit PGM (P5) and PPM (P6).

use std::path::Path;

use crate::error::{Error, Result};
use crate::featmap::Image;

use super::tensor::write_atomic;

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::invalid("PNM header is truncated"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;

    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::invalid(format!("unsupported PNM magic {m:?}"))),
    };
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::invalid(format!("bad PNM {what} {s:?}")))
    };
    let width = parse(&fields[1], "width")?;
    let height = parse(&fields[2], "height")?;
    let maxval = parse(&fields[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::invalid(format!("only 8-bit PNM is supported, maxval {maxval}")));
    }
    let count = width * height * channels;
    let raster = bytes
        .get(pos..pos + count)
        .ok_or_else(|| Error::invalid(format!("PNM raster is truncated: need {count} bytes")))?;
    let scale = maxval as f32;
    let plane = width * height;
    let mut data = vec![0.0f32; count];
    for (p, px) in raster.chunks_exact(channels).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * plane + p] = (v as f32 / scale).min(1.0);
        }
    }
    Image::new(height, width, channels, data)
}

pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    let data = image.data();
    for p in 0..plane {
        for ch in 0..c {
            out.push((data[ch * plane + p] * 255.0).round() as u8);
        }
    }
    out
}

pub fn read_pnm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

pub fn write_pnm(path: &Path, image: &Image) -> Result<()> {
    write_atomic(path, &encode_pnm(image))
}
