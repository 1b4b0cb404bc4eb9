//! FTR1 feature files.
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `FTR1`                   |
//! | 4      | 1    | kind code                      |
//! | 5      | 4    | rows (u32 LE)                  |
//! | 9      | 4    | cols (u32 LE)                  |
//! | 13     | 4    | sample rate in Hz (u32 LE)     |
//! | 17     | 4    | n_fft, 0 for constant-Q kinds  |
//! | 21     | 4    | hop (u32 LE)                   |
//! | 25     | 4·rows·cols | f32 LE values, row-major |

use std::fs;
use std::path::Path;

use sonoforge_core::{FeatureKind, FeatureMatrix, FeatureParams, Matrix};

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FTR1";
pub const HEADER_LEN: usize = 25;

pub fn encode_feature(f: &FeatureMatrix) -> Vec<u8> {
    let p = f.params();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * f.rows() * f.cols());
    out.extend_from_slice(MAGIC);
    out.push(f.kind().code());
    for v in [f.rows() as u32, f.cols() as u32, p.sample_rate_hz, p.n_fft, p.hop] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in f.values().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let truncated = |msg: String| Error::Truncated(path.to_path_buf(), msg);
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(Error::Format(path.to_path_buf(), "bad magic".into()));
        }
        return Err(truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(path.to_path_buf(), "bad magic".into()));
    }
    let kind = FeatureKind::from_code(bytes[4])
        .ok_or_else(|| Error::Format(path.to_path_buf(), format!("unknown kind code {}", bytes[4])))?;
    let word = |i: usize| u32::from_le_bytes(bytes[5 + 4 * i..9 + 4 * i].try_into().expect("4 bytes"));
    let (rows, cols) = (word(0) as usize, word(1) as usize);
    let params = FeatureParams { sample_rate_hz: word(2), n_fft: word(3), hop: word(4) };
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(4)).map(|n| n + HEADER_LEN);
    match expected {
        Some(len) if len == bytes.len() => {}
        Some(len) => return Err(truncated(format!("{} bytes, expected {len}", bytes.len()))),
        None => return Err(Error::Format(path.to_path_buf(), format!("impossible size {rows}x{cols}"))),
    }
    let values: Vec<f32> =
        bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(FeatureMatrix::new(kind, params, Matrix::from_vec(rows, cols, values)?)?)
}

pub fn save_feature(f: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_feature(f)).map_err(|e| Error::io(path, e))
}

pub fn load_feature(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature(&bytes, path)
}

/// `<stem>.<kind>.ftr`
pub fn feature_file_name(stem: &str, kind: FeatureKind) -> String {
    format!("{stem}.{}.ftr", kind.name())
}
