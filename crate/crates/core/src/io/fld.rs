//! Field files: a short text header followed by raw little-endian binary64 values.
//!
//! ```text
//! QPATFLD 1
//! n=<int>
//! radius=<float>
//! encoding=binary64
//! <n*n f64 values, row-major, NaN on exterior nodes>
//! ```

use std::path::Path;
use std::sync::Arc;

use crate::error::{QpatError, Result};
use crate::field::Field;
use crate::grid::DiscGrid;

pub const MAGIC: &str = "QPATFLD 1";

pub fn encode(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = format!("{MAGIC}\nn={}\nradius={:?}\nencoding=binary64\n", g.n(), g.radius()).into_bytes();
    out.reserve(8 * g.len());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Field> {
    let mut pos = 0;
    let mut line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| QpatError::Format("truncated field header".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| QpatError::Format("field header is not UTF-8".into()))
    };
    if line()?.trim_end() != MAGIC {
        return Err(QpatError::Format(format!("missing '{MAGIC}' magic line")));
    }
    let n: usize = header_value(line()?, "n")?;
    let radius: f64 = header_value(line()?, "radius")?;
    let encoding: String = header_value(line()?, "encoding")?;
    if encoding != "binary64" {
        return Err(QpatError::Format(format!("unsupported encoding '{encoding}'")));
    }
    let grid = Arc::new(DiscGrid::new(n, radius).map_err(|e| QpatError::Format(e.to_string()))?);
    let body = &bytes[pos..];
    if body.len() != 8 * grid.len() {
        return Err(QpatError::Format(format!(
            "expected {} bytes of values, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    for (k, v) in values.iter().enumerate() {
        if grid.is_exterior(k) && !v.is_nan() {
            return Err(QpatError::Format(format!("exterior node {k} carries a value")));
        }
    }
    Field::from_values(&grid, values)
}

fn header_value<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| QpatError::Format(format!("expected '{key}=...' in field header, got '{line}'")))?;
    if k.trim() != key {
        return Err(QpatError::Format(format!("expected '{key}=...' in field header, got '{line}'")));
    }
    v.trim()
        .parse()
        .map_err(|_| QpatError::Format(format!("bad value for '{key}': '{}'", v.trim())))
}

pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    super::write_atomic(path, &encode(f))
}

pub fn read_field(path: &Path) -> Result<Field> {
    decode(&std::fs::read(path)?)
}
