//! `.lpm` label-probability maps:
//!
//! ```text
//! LPM1\n
//! <W> <H> <K>\n
//! <label names separated by spaces>\n
//! K row-major planes of little-endian f32
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{LabelProbMap, LabelSet};

const MAGIC: &[u8] = b"LPM1\n";

pub fn write_lpm(map: &LabelProbMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + map.planes().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(format!("{} {} {}\n", map.width(), map.height(), map.num_labels()).as_bytes());
    out.extend_from_slice(map.labels().names().join(" ").as_bytes());
    out.push(b'\n');
    for v in map.planes() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reads one `\n`-terminated header line starting at `*pos`.
fn header_line<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a str> {
    let start = *pos;
    let len = bytes[start..]
        .iter()
        .take(4096)
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::format(start, format!("unterminated {what} line")))?;
    *pos = start + len + 1;
    std::str::from_utf8(&bytes[start..start + len]).map_err(|_| Error::format(start, format!("{what} line is not UTF-8")))
}

pub fn read_lpm(bytes: &[u8]) -> Result<LabelProbMap> {
    if !bytes.starts_with(MAGIC) {
        return Err(Error::format(0, "bad magic"));
    }
    let mut pos = MAGIC.len();
    let dims_at = pos;
    let dims = header_line(bytes, &mut pos, "dimension")?;
    let fields: Vec<usize> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(dims_at, format!("bad dimension line {dims:?}")))?;
    let [w, h, k] = fields[..] else {
        return Err(Error::format(dims_at, format!("dimension line {dims:?} must be `W H K`")));
    };
    if w == 0 || h == 0 || k == 0 {
        return Err(Error::format(dims_at, "dimensions must be positive"));
    }
    let names_at = pos;
    let names: Vec<&str> = header_line(bytes, &mut pos, "label")?.split_whitespace().collect();
    if names.len() != k {
        return Err(Error::format(
            names_at,
            format!("header declares {k} labels but names {}", names.len()),
        ));
    }
    let labels = LabelSet::new(names.iter().copied()).map_err(|e| Error::format(names_at, e.to_string()))?;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(k))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(dims_at, "dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(pos + expected, "trailing bytes after payload"));
    }
    let planes: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(i) = planes.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::format(pos + 4 * i, format!("probability {} outside [0, 1]", planes[i])));
    }
    LabelProbMap::from_planes(w, h, labels, planes)
}

pub fn read_lpm_file(path: &Path) -> Result<LabelProbMap> {
    read_lpm(&std::fs::read(path)?)
}

pub fn write_lpm_file(path: &Path, map: &LabelProbMap) -> Result<()> {
    super::write_atomic(path, &write_lpm(map))
}
