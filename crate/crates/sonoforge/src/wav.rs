//! RIFF/WAVE decoding (PCM16 and float32, mono or stereo) and encoding.

use std::fs;
use std::path::Path;

use sonoforge_core::AudioClip;

use crate::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, path)
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

/// Decodes a complete WAV file image. `path` only labels errors and the clip.
pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<AudioClip> {
    let format = |msg: &str| Error::Format(path.to_path_buf(), msg.into());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(format("missing RIFF/WAVE header"));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || body + 16 > bytes.len() {
                return Err(format("fmt chunk shorter than 16 bytes"));
            }
            fmt = Some((u16_at(bytes, body), u16_at(bytes, body + 2), u32_at(bytes, body + 4), u16_at(bytes, body + 14)));
        } else if id == b"data" {
            let (code, channels, rate, bits) = fmt.ok_or_else(|| format("data chunk before fmt chunk"))?;
            let sample = match (code, bits) {
                (FORMAT_PCM, 16) => SampleFormat::Pcm16,
                (FORMAT_FLOAT, 32) => SampleFormat::Float32,
                _ => {
                    return Err(Error::Unsupported(
                        path.to_path_buf(),
                        format!("format code {code} with {bits} bits per sample"),
                    ))
                }
            };
            if !(1..=2).contains(&channels) {
                return Err(Error::Unsupported(path.to_path_buf(), format!("{channels} channels")));
            }
            if rate == 0 {
                return Err(format("sample rate 0"));
            }
            let available = bytes.len() - body;
            if size > available {
                return Err(Error::Truncated(
                    path.to_path_buf(),
                    format!("data chunk declares {size} bytes, {available} present"),
                ));
            }
            let data = &bytes[body..body + size];
            let width = if sample == SampleFormat::Pcm16 { 2 } else { 4 };
            let frame = width * channels as usize;
            if !data.len().is_multiple_of(frame) {
                return Err(Error::Truncated(path.to_path_buf(), "partial sample frame".into()));
            }
            let value = |c: &[u8]| match sample {
                SampleFormat::Pcm16 => i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0,
                SampleFormat::Float32 => f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
            };
            let samples: Vec<f64> = data
                .chunks_exact(frame)
                .map(|f| {
                    if channels == 1 {
                        value(f)
                    } else {
                        (value(&f[..width]) + value(&f[width..])) / 2.0
                    }
                })
                .collect();
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            return Ok(AudioClip::new(samples, rate, name)?);
        }
        pos = body + size + (size & 1);
    }
    Err(format("no data chunk"))
}

/// Mono WAV image of `clip`. PCM16 clamps to [-1, 1) and rounds.
pub fn encode_wav(clip: &AudioClip, sample: SampleFormat) -> Vec<u8> {
    let (code, width) = match sample {
        SampleFormat::Pcm16 => (FORMAT_PCM, 2u32),
        SampleFormat::Float32 => (FORMAT_FLOAT, 4u32),
    };
    let n = clip.samples().len() as u32;
    let data_len = n * width;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&code.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz() * width).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&(8 * width as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in clip.samples() {
        match sample {
            SampleFormat::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, sample: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip, sample)).map_err(|e| Error::io(path, e))
}
