//! Dataset metadata CSV (`filename,fold,target,category,...`).

use std::path::Path;

use sonoforge_core::{DatasetEntry, DatasetIndex};

use crate::{Error, Result};

const REQUIRED: [&str; 4] = ["filename", "fold", "target", "category"];

/// Reads the metadata CSV; entry paths are `audio_dir/filename` and every
/// referenced file must exist.
pub fn load_index(csv_path: impl AsRef<Path>, audio_dir: impl AsRef<Path>) -> Result<DatasetIndex> {
    let csv_path = csv_path.as_ref();
    let audio_dir = audio_dir.as_ref();
    let schema = |msg: String| Error::Schema(csv_path.to_path_buf(), msg);
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(csv_path, io),
        other => schema(format!("{other:?}")),
    })?;
    let headers = reader.headers().map_err(|e| schema(e.to_string()))?.clone();
    let mut col = [0usize; 4];
    for (slot, name) in col.iter_mut().zip(REQUIRED) {
        *slot = headers.iter().position(|h| h.trim() == name).ok_or_else(|| schema(format!("missing column '{name}'")))?;
    }
    let mut entries = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema(e.to_string()))?;
        let line = row + 2;
        let field = |i: usize| record.get(col[i]).map(str::trim).unwrap_or("");
        let filename = field(0);
        let fold: u8 = field(1).parse().map_err(|_| schema(format!("line {line}: bad fold '{}'", field(1))))?;
        let label: usize = field(2).parse().map_err(|_| schema(format!("line {line}: bad target '{}'", field(2))))?;
        let path = audio_dir.join(filename);
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        entries.push(DatasetEntry { path: path.to_string_lossy().into_owned(), label, fold, category: field(3).to_string() });
    }
    Ok(DatasetIndex::new(entries)?)
}
