//! Binary 8-bit portable graymaps (P5).

use std::path::Path;

use crate::error::{QpatError, Result};
use crate::field::Field;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    /// Row-major, top row first.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(QpatError::Format("truncated graymap header".into()));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token()? != "P5" {
            return Err(QpatError::Format("not a binary graymap (P5)".into()));
        }
        let mut number = |what: &str| -> Result<usize> {
            token()?
                .parse()
                .map_err(|_| QpatError::Format(format!("bad graymap {what}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if width == 0 || height == 0 {
            return Err(QpatError::Format("graymap has no pixels".into()));
        }
        if !(1..=255).contains(&maxval) {
            return Err(QpatError::Format(format!("only 8-bit graymaps are supported, maxval={maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let start = pos + 1;
        let end = start + width * height;
        if bytes.len() < end {
            return Err(QpatError::Format("graymap raster is truncated".into()));
        }
        Ok(GrayImage {
            width,
            height,
            maxval: maxval as u8,
            pixels: bytes[start..end].to_vec(),
        })
    }
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    GrayImage::decode(&std::fs::read(path)?)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    super::write_atomic(path, &img.encode())
}

/// One pixel per node, top row at `y = +R`; affine min-max scaling, missing values black.
pub fn field_to_image(f: &Field) -> GrayImage {
    let n = f.grid().n();
    let (lo, hi) = (f.min(), f.max());
    let span = hi - lo;
    let mut pixels = Vec::with_capacity(n * n);
    for row in 0..n {
        let j = n - 1 - row;
        for i in 0..n {
            let v = f.at(i, j);
            let p = if !v.is_finite() {
                0
            } else if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                255
            };
            pixels.push(p);
        }
    }
    GrayImage {
        width: n,
        height: n,
        maxval: 255,
        pixels,
    }
}
