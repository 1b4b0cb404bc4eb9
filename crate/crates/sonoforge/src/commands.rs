//! The subcommands, callable without the argument parser.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sonoforge_core::feature::{kind_names, FeatureExtractor};
use sonoforge_core::nn::{Model, ModelSpec};
use sonoforge_core::train::{self, evaluate as eval_set, split_dataset, LabeledSet, RunReport, Split};
use sonoforge_core::{DatasetIndex, FeatureKind};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::CliConfig;
use crate::ftr::{feature_file_name, load_feature, save_feature};
use crate::index::load_index;
use crate::pgm::render_pgm;
use crate::report::{find_reports, load_report, report_file_name, save_report, comparison_table, TableRow};
use crate::wav::load_wav;
use crate::{Error, Result};

pub const THREADS_ENV: &str = "SONOFORGE_THREADS";

const INIT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Worker count from `SONOFORGE_THREADS`, or rayon's default when unset.
pub fn worker_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn files_with_extension(input: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(Error::Usage(format!("input {} does not exist", input.display())));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(input).map_err(|e| Error::io(input, e))? {
        let path = entry.map_err(|e| Error::io(input, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Default)]
pub struct ExtractOutcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, Error)>,
}

/// One `<stem>.<kind>.ftr` per WAV in `input` (a file or a directory).
pub fn extract(kind: FeatureKind, input: &Path, out: &Path, cfg: &CliConfig) -> Result<ExtractOutcome> {
    let wavs = files_with_extension(input, "wav")?;
    if wavs.is_empty() {
        return Err(Error::Usage(format!("no .wav files under {}", input.display())));
    }
    let extractor = FeatureExtractor::new(cfg.feature_config())?;
    create_dir(out)?;
    let job = |wav: &PathBuf| -> Result<PathBuf> {
        let clip = load_wav(wav)?;
        let feature = extractor.extract(kind, &clip)?;
        let dest = out.join(feature_file_name(&stem_of(wav), kind));
        save_feature(&feature, &dest)?;
        Ok(dest)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Failed(format!("worker pool: {e}")))?;
    let results: Vec<Result<PathBuf>> = pool.install(|| wavs.par_iter().map(job).collect());
    let mut outcome = ExtractOutcome::default();
    for (wav, r) in wavs.into_iter().zip(results) {
        match r {
            Ok(p) => outcome.written.push(p),
            Err(e) => outcome.failures.push((wav, e)),
        }
    }
    Ok(outcome)
}

/// One `.pgm` per feature file in `input` (a file or a directory).
pub fn render(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let files = files_with_extension(input, "ftr")?;
    if files.is_empty() {
        return Err(Error::Usage(format!("no .ftr files under {}", input.display())));
    }
    create_dir(out)?;
    let mut written = Vec::new();
    for f in files {
        let feature = load_feature(&f)?;
        let dest = out.join(format!("{}.pgm", stem_of(&f)));
        render_pgm(&feature, &dest)?;
        written.push(dest);
    }
    Ok(written)
}

/// The configured index, restricted to `dataset.classes` when set.
pub fn dataset(cfg: &CliConfig) -> Result<DatasetIndex> {
    let (csv, audio) = cfg.dataset_paths()?;
    let index = load_index(csv, audio)?;
    match &cfg.dataset.classes {
        Some(labels) => Ok(index.filter_labels(labels)?),
        None => Ok(index),
    }
}

pub fn split(cfg: &CliConfig, seed: u64) -> Result<(DatasetIndex, Split)> {
    let index = dataset(cfg)?;
    let split = split_dataset(&index, cfg.training.train_frac, seed, cfg.training.stratified)?;
    Ok((index, split))
}

/// `train <file> <label>` and `validation <file> <label>` lines.
pub fn split_listing(index: &DatasetIndex, split: &Split) -> String {
    let mut out = String::new();
    for (tag, positions) in [("train", &split.train), ("validation", &split.validation)] {
        for &i in positions {
            let e = &index.entries()[i];
            let name = Path::new(&e.path).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            out.push_str(&format!("{tag} {name} {}\n", e.label));
        }
    }
    out
}

/// Loads the feature of every entry, failing before any training if a file
/// is missing or shapes disagree.
pub fn load_labeled(index: &DatasetIndex, positions: &[usize], kind: FeatureKind, dir: &Path) -> Result<LabeledSet> {
    let missing: Vec<PathBuf> = positions
        .iter()
        .map(|&i| dir.join(feature_file_name(index.entries()[i].stem(), kind)))
        .filter(|p| !p.is_file())
        .collect();
    if let Some(first) = missing.first() {
        return Err(Error::MissingFeatures(format!(
            "{} {kind} feature file(s) missing under {} (first: {}); run `sonoforge extract --feature {kind} --input <audio dir> --out {}` first",
            missing.len(),
            dir.display(),
            first.display(),
            dir.display()
        )));
    }
    let items = positions
        .iter()
        .map(|&i| {
            let e = &index.entries()[i];
            let f = load_feature(dir.join(feature_file_name(e.stem(), kind)))?;
            if f.kind() != kind {
                return Err(Error::Core(sonoforge_core::Error::Geometry(format!(
                    "{} holds {} features, expected {kind}",
                    e.stem(),
                    f.kind()
                ))));
            }
            Ok((e.stem().to_string(), f, e.label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledSet::new(items)?)
}

pub fn init_seed(seed: u64) -> u64 {
    seed ^ INIT_STREAM
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

/// split → train → evaluate; writes `<kind>.report.txt` and `<kind>.sfm` into `out`.
pub fn train(
    kind: FeatureKind,
    cfg: &CliConfig,
    seed: u64,
    features_dir: &Path,
    out: &Path,
    progress: impl FnMut(&train::EpochRecord),
) -> Result<TrainOutcome> {
    let config = cfg.train_config(kind, seed)?;
    let (index, split) = split(cfg, seed)?;
    let all: Vec<usize> = (0..index.len()).collect();
    let everything = load_labeled(&index, &all, kind, features_dir)?;
    let train_set = everything.subset(&split.train)?;
    let val_set = everything.subset(&split.validation)?;
    let (h, w) = train_set.shape();
    let mut model = Model::<f32>::new(ModelSpec::standard(h, w), init_seed(seed))?;
    let report = train::train_with_progress(&mut model, &train_set, &val_set, &config, progress)?;
    create_dir(out)?;
    let report_path = out.join(report_file_name(kind));
    let checkpoint_path = out.join(format!("{kind}.sfm"));
    save_report(&report, &report_path)?;
    save_checkpoint(&model, kind, &checkpoint_path)?;
    Ok(TrainOutcome { report, report_path, checkpoint_path })
}

/// Inference-mode loss and accuracy of a checkpoint on the validation part
/// of the seeded split, or on every clip with `all`.
pub fn evaluate(checkpoint: &Path, cfg: &CliConfig, seed: u64, features_dir: &Path, all: bool) -> Result<(f64, f64, usize)> {
    let (mut model, kind) = load_checkpoint(checkpoint)?;
    let (index, split) = split(cfg, seed)?;
    let positions = if all { (0..index.len()).collect() } else { split.validation };
    let set = load_labeled(&index, &positions, kind, features_dir)?;
    let (loss, acc) = eval_set(&mut model, &set, cfg.training.batch_size)?;
    Ok((loss, acc, set.len()))
}

/// Comparison table over every report in `runs`.
pub fn report(runs: &Path) -> Result<String> {
    if !runs.is_dir() {
        return Err(Error::Failed(format!("runs directory {} does not exist", runs.display())));
    }
    let files = find_reports(runs)?;
    if files.is_empty() {
        return Err(Error::Failed(format!("no run reports (*.report.txt) in {}", runs.display())));
    }
    let rows = files
        .iter()
        .map(|f| {
            let r = load_report(f)?;
            TableRow::from_report(&r).ok_or_else(|| Error::Format(f.clone(), "report has no epochs".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(comparison_table(&rows))
}

pub fn parse_kind(s: &str) -> std::result::Result<FeatureKind, String> {
    s.parse().map_err(|_| format!("unknown feature kind '{s}' (expected one of: {})", kind_names()))
}
