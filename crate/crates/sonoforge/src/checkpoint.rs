//! SFM1 model checkpoints.
//!
//! Layout: magic `SFM1`, a u32 LE manifest length, the UTF-8 manifest, then
//! every tensor as f32 LE values in manifest order. The manifest holds
//! `key = value` lines for the feature kind and network geometry followed
//! by one `tensor <name> <d0,d1,...>` line per tensor.

use std::fs;
use std::path::Path;

use sonoforge_core::nn::{Model, ModelSpec, Tensor};
use sonoforge_core::FeatureKind;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SFM1";

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn encode_checkpoint(model: &Model<f32>, kind: FeatureKind) -> Vec<u8> {
    let s = model.spec();
    let mut manifest = format!(
        "feature_kind = {kind}\ninput_height = {}\ninput_width = {}\nn_classes = {}\nconv_filters = {}\ndense_units = {}\ndropout_rate = {:?}\n",
        s.input_height,
        s.input_width,
        s.n_classes,
        join(&s.conv_filters),
        s.dense_units,
        s.dropout_rate
    );
    let state = model.state();
    for (name, t) in &state {
        manifest.push_str(&format!("tensor {name} {}\n", join(t.shape())));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for (_, t) in &state {
        for v in t.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<(Model<f32>, FeatureKind)> {
    let format = |msg: String| Error::Format(path.to_path_buf(), msg);
    let truncated = || Error::Truncated(path.to_path_buf(), "checkpoint ends early".into());
    if bytes.len() < 8 {
        return Err(truncated());
    }
    if &bytes[..4] != MAGIC {
        return Err(format("bad magic".into()));
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let manifest = bytes.get(8..8 + len).ok_or_else(truncated)?;
    let manifest = std::str::from_utf8(manifest).map_err(|_| format("manifest is not UTF-8".into()))?;
    let mut fields = std::collections::BTreeMap::new();
    let mut tensors = Vec::new();
    for line in manifest.lines() {
        if let Some(rest) = line.strip_prefix("tensor ") {
            let (name, dims) = rest.split_once(' ').ok_or_else(|| format(format!("bad tensor line '{line}'")))?;
            let shape = dims
                .split(',')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| format(format!("bad tensor shape '{dims}'")))?;
            tensors.push((name.to_string(), shape));
        } else if let Some((k, v)) = line.split_once('=') {
            fields.insert(k.trim().to_string(), v.trim().to_string());
        } else if !line.trim().is_empty() {
            return Err(format(format!("bad manifest line '{line}'")));
        }
    }
    let get = |k: &str| fields.get(k).cloned().ok_or_else(|| format(format!("manifest lacks {k}")));
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| format(format!("bad {k}"))) };
    let kind: FeatureKind = get("feature_kind")?.parse().map_err(|_| format("bad feature_kind".into()))?;
    let spec = ModelSpec {
        input_height: num("input_height")?,
        input_width: num("input_width")?,
        n_classes: num("n_classes")?,
        conv_filters: get("conv_filters")?
            .split(',')
            .map(|d| d.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format("bad conv_filters".into()))?,
        dense_units: num("dense_units")?,
        dropout_rate: get("dropout_rate")?.parse().map_err(|_| format("bad dropout_rate".into()))?,
    };
    let mut model = Model::<f32>::new(spec, 0)?;
    let mut pos = 8 + len;
    let mut state = Vec::with_capacity(tensors.len());
    for (name, shape) in tensors {
        let n: usize = shape.iter().product();
        let raw = bytes.get(pos..pos + 4 * n).ok_or_else(truncated)?;
        pos += 4 * n;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        state.push((name, Tensor::from_vec(&shape, data)?));
    }
    if pos != bytes.len() {
        return Err(format(format!("{} trailing bytes", bytes.len() - pos)));
    }
    model.load_state(state)?;
    Ok((model, kind))
}

pub fn save_checkpoint(model: &Model<f32>, kind: FeatureKind, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model, kind)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model<f32>, FeatureKind)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
