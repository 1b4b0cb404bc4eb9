//! Run report files and the cross-run comparison table.
//!
//! A report file (`<kind>.report.txt`) is the text produced by
//! [`RunReport::to_text`]:
//!
//! - line 1: `sonoforge-run-report 1`
//! - `[config]`: every training setting as `key = value`
//!   (`feature_kind`, `batch_size`, `initial_lr`, `lr_patience`,
//!   `lr_factor`, `min_lr`, `stop_patience`, `max_epochs`, `min_delta`,
//!   `train_frac`, `stratified`, `seed`)
//! - `[epochs]`: a header line, then one line per epoch with
//!   `epoch train_loss train_acc val_loss val_acc lr`, space separated;
//!   losses are mean cross-entropy, accuracies fractions in [0, 1], `lr`
//!   the rate used during that epoch
//! - `[summary]`: `n_train`, `n_val`, `epochs`, `stopped_early` and the
//!   final epoch's four metrics
//!
//! Reals are printed in shortest round-trip form, so parsing a report gives
//! back the exact values.

use std::fs;
use std::path::{Path, PathBuf};

use sonoforge_core::train::RunReport;
use sonoforge_core::FeatureKind;

use crate::{Error, Result};

pub const REPORT_SUFFIX: &str = ".report.txt";

pub fn report_file_name(kind: FeatureKind) -> String {
    format!("{kind}{REPORT_SUFFIX}")
}

pub fn save_report(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunReport::parse(&text).map_err(|e| Error::Format(path.to_path_buf(), e.to_string()))
}

/// Every report file directly inside `dir`, in name order.
pub fn find_reports(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(REPORT_SUFFIX)) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// One table row: accuracies in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub feature: String,
    pub train_acc_pct: f64,
    pub val_acc_pct: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub epochs: usize,
}

impl TableRow {
    pub fn from_report(r: &RunReport) -> Option<Self> {
        let last = r.last()?;
        Some(Self {
            feature: r.feature_kind().title().to_string(),
            train_acc_pct: 100.0 * last.train_acc,
            val_acc_pct: 100.0 * last.val_acc,
            train_loss: last.train_loss,
            val_loss: last.val_loss,
            epochs: r.epoch_count(),
        })
    }
}

const HEADER: [&str; 6] = ["Feature", "Train acc (%)", "Val acc (%)", "Train loss", "Val loss", "Epochs"];

/// Plain-text table sorted by validation accuracy, best first.
pub fn comparison_table(rows: &[TableRow]) -> String {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| b.val_acc_pct.total_cmp(&a.val_acc_pct));
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.feature.clone(),
                format!("{:.2}", r.train_acc_pct),
                format!("{:.2}", r.val_acc_pct),
                format!("{:.2}", r.train_loss),
                format!("{:.2}", r.val_loss),
                r.epochs.to_string(),
            ]
        })
        .collect();
    let mut width = HEADER.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: [&str; 6]| {
        let mut s = format!("{:<w$}", cols[0], w = width[0]);
        for (c, w) in cols.iter().zip(width).skip(1) {
            s.push_str(&format!(" | {c:>w$}"));
        }
        s.push('\n');
        s
    };
    let mut out = line(HEADER);
    out.push_str(&width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-"));
    out.push('\n');
    for row in &cells {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4], &row[5]]));
    }
    out
}
