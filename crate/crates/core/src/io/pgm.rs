//! Binary 8-bit PGM (P5) images, used for indexed label masks.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub pixels: Vec<u8>,
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Result<(usize, usize)> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(start, "expected a number in the PGM header"));
    }
    let v = std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(start, "number out of range in the PGM header"))?;
    Ok((v, start))
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::format(0, "bad magic"));
    }
    let mut pos = 2;
    let (width, _) = token(bytes, &mut pos)?;
    let (height, _) = token(bytes, &mut pos)?;
    let (maxval, at) = token(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(Error::format(3, "image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(at, format!("unsupported maxval {maxval}; only 8-bit PGM is read")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(pos, "missing whitespace after the PGM header"));
    }
    pos += 1;
    let n = width * height;
    let data = &bytes[pos..];
    if data.len() < n {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {n} bytes, found {}", data.len()),
        ));
    }
    if data.len() > n {
        return Err(Error::format(pos + n, "trailing bytes after payload"));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: data.to_vec(),
    })
}

pub fn read_pgm_file(path: &Path) -> Result<GrayImage> {
    read_pgm(&std::fs::read(path)?)
}

pub fn write_pgm_file(path: &Path, img: &GrayImage) -> Result<()> {
    super::write_atomic(path, &write_pgm(img))
}
