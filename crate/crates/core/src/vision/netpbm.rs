//! Binary PPM (P6, 8-bit RGB) and PGM (P5, 16-bit big-endian depth in
//! millimetres, 65535 = no hit) files.

use std::path::Path;

use super::{DepthImage, RgbImage, DEPTH_MISS};
use crate::error::{Error, Result};

const PGM_MISS: u16 = 65535;

pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    let mut bytes = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    bytes.extend_from_slice(&image.data);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_pgm16_depth(path: &Path, depth: &DepthImage) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n65535\n", depth.width, depth.height).into_bytes();
    for &d in &depth.data {
        let mm = if d.is_finite() {
            (d * 1000.0).round().clamp(0.0, (PGM_MISS - 1) as f64) as u16
        } else {
            PGM_MISS
        };
        bytes.extend_from_slice(&mm.to_be_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn header(bytes: &[u8], magic: &str) -> Result<(u32, u32, u32, usize)> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Parse("truncated netpbm header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if fields[0] != magic {
        return Err(Error::Parse(format!("expected {magic}, found {}", fields[0])));
    }
    let num = |s: &str| s.parse::<u32>().map_err(|_| Error::Parse(format!("bad header field `{s}`")));
    Ok((num(&fields[1])?, num(&fields[2])?, num(&fields[3])?, i + 1))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, max, off) = header(&bytes, "P6")?;
    if max != 255 {
        return Err(Error::Parse("only 8-bit PPM is supported".into()));
    }
    let n = 3 * w as usize * h as usize;
    let data = bytes
        .get(off..off + n)
        .ok_or_else(|| Error::Parse("truncated PPM data".into()))?
        .to_vec();
    Ok(RgbImage {
        width: w,
        height: h,
        data,
    })
}

pub fn read_pgm16_depth(path: &Path) -> Result<DepthImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, max, off) = header(&bytes, "P5")?;
    if max != 65535 {
        return Err(Error::Parse("only 16-bit PGM is supported".into()));
    }
    let n = w as usize * h as usize;
    let raw = bytes
        .get(off..off + 2 * n)
        .ok_or_else(|| Error::Parse("truncated PGM data".into()))?;
    let data = raw
        .chunks_exact(2)
        .map(|c| match u16::from_be_bytes([c[0], c[1]]) {
            PGM_MISS => DEPTH_MISS,
            mm => mm as f64 / 1000.0,
        })
        .collect();
    Ok(DepthImage {
        width: w,
        height: h,
        data,
    })
}
