//! Binary greyscale (P5) renderings of feature matrices.

use std::fs;
use std::path::Path;

use sonoforge_core::FeatureMatrix;

use crate::{Error, Result};

/// Min-max scaled to 0..=255, highest bin on the top row. A constant matrix
/// renders mid-grey.
pub fn encode_pgm(f: &FeatureMatrix) -> Vec<u8> {
    let v = f.values();
    let (rows, cols) = f.shape();
    let (lo, hi) = v.as_slice().iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for r in (0..rows).rev() {
        for &x in v.row(r) {
            let px = if hi > lo { ((x as f64 - lo as f64) / (hi as f64 - lo as f64) * 255.0).round() as u8 } else { 128 };
            out.push(px);
        }
    }
    out
}

pub fn render_pgm(f: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(f)).map_err(|e| Error::io(path, e))
}
