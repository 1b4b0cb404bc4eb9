//! TOML run configuration.
//!
//! ```toml
//! [dataset]
//! csv = "meta/esc50.csv"        # metadata with filename, fold, target, category
//! audio_dir = "audio"
//! classes = [0, 1, 2]           # optional label subset
//!
//! [dsp]
//! sample_rate = 22050
//! n_fft = 2048
//! hop = 512
//! clip_seconds = 5.0
//!
//! [features]
//! n_mels = 128
//! fmin_hz = 0.0
//! fmax_hz = 11025.0             # optional, Nyquist when absent
//! top_db = 80.0
//! n_mfcc = 40
//! cqt_fmin_hz = 32.703195662574764
//! cqt_bins = 84
//! cqt_bins_per_octave = 12
//! cens_smooth = 41
//! cens_downsample = 1
//! tempo_win = 384
//! tempo_ref_bpm = 60.0
//! tempo_bins = 64
//!
//! [training]
//! batch_size = 32
//! initial_lr = 0.001
//! lr_patience = 2
//! lr_factor = 0.5
//! min_lr = 0.00001
//! stop_patience = 6
//! max_epochs = 100
//! min_delta = 0.0001
//! train_frac = 0.8
//! stratified = false
//!
//! [output]
//! features_dir = "features"
//! runs_dir = "runs"
//! figures_dir = "figures"
//! ```
//!
//! Every key is optional and defaults to the value shown. Unknown keys are
//! rejected. Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sonoforge_core::chroma::CqtConfig;
use sonoforge_core::dsp::{StftConfig, WindowKind};
use sonoforge_core::mel::MelConfig;
use sonoforge_core::rhythm::TempogramConfig;
use sonoforge_core::train::TrainConfig;
use sonoforge_core::{FeatureConfig, FeatureKind};

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub csv: Option<PathBuf>,
    pub audio_dir: Option<PathBuf>,
    pub classes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspSection {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub clip_seconds: f64,
}

impl Default for DspSection {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self { sample_rate: f.sample_rate_hz, n_fft: f.mel.stft.n_fft, hop: f.mel.stft.hop, clip_seconds: f.clip_seconds }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: Option<f64>,
    pub top_db: f64,
    pub n_mfcc: usize,
    pub cqt_fmin_hz: f64,
    pub cqt_bins: usize,
    pub cqt_bins_per_octave: usize,
    pub cens_smooth: usize,
    pub cens_downsample: usize,
    pub tempo_win: usize,
    pub tempo_ref_bpm: f64,
    pub tempo_bins: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self {
            n_mels: f.mel.n_mels,
            fmin_hz: f.mel.fmin_hz,
            fmax_hz: f.mel.fmax_hz,
            top_db: f.mel.top_db,
            n_mfcc: f.n_mfcc,
            cqt_fmin_hz: f.cqt.fmin_hz,
            cqt_bins: f.cqt.n_bins,
            cqt_bins_per_octave: f.cqt.bins_per_octave,
            cens_smooth: f.cens_smooth,
            cens_downsample: f.cens_downsample,
            tempo_win: f.tempogram.win_len,
            tempo_ref_bpm: f.tempogram.ref_tempo_bpm,
            tempo_bins: f.tempogram.n_tempo_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub min_lr: f64,
    pub stop_patience: usize,
    pub max_epochs: usize,
    pub min_delta: f64,
    pub train_frac: f64,
    pub stratified: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            initial_lr: t.initial_lr,
            lr_patience: t.lr_patience,
            lr_factor: t.lr_factor,
            min_lr: t.min_lr,
            stop_patience: t.stop_patience,
            max_epochs: t.max_epochs,
            min_delta: t.min_delta,
            train_frac: t.train_frac,
            stratified: t.stratified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub features_dir: PathBuf,
    pub runs_dir: PathBuf,
    pub figures_dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { features_dir: "features".into(), runs_dir: "runs".into(), figures_dir: "figures".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub dataset: DatasetSection,
    pub dsp: DspSection,
    pub features: FeaturesSection,
    pub training: TrainingSection,
    pub output: OutputSection,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::Config(format!("config file {} does not exist", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset.csv, &mut cfg.dataset.audio_dir].into_iter().flatten() {
            rebase(base, p);
        }
        rebase(base, &mut cfg.output.features_dir);
        rebase(base, &mut cfg.output.runs_dir);
        rebase(base, &mut cfg.output.figures_dir);
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// The dataset CSV and audio directory, both checked to exist.
    pub fn dataset_paths(&self) -> Result<(&Path, &Path)> {
        let csv = self.dataset.csv.as_deref().ok_or_else(|| Error::Config("dataset.csv is not set".into()))?;
        let audio = self.dataset.audio_dir.as_deref().ok_or_else(|| Error::Config("dataset.audio_dir is not set".into()))?;
        if !csv.is_file() {
            return Err(Error::Config(format!("dataset.csv {} does not exist", csv.display())));
        }
        if !audio.is_dir() {
            return Err(Error::Config(format!("dataset.audio_dir {} is not a directory", audio.display())));
        }
        Ok((csv, audio))
    }

    pub fn feature_config(&self) -> FeatureConfig {
        let (d, f) = (&self.dsp, &self.features);
        let stft = StftConfig { n_fft: d.n_fft, hop: d.hop, window: WindowKind::Hann };
        FeatureConfig {
            sample_rate_hz: d.sample_rate,
            clip_seconds: d.clip_seconds,
            mel: MelConfig { stft, n_mels: f.n_mels, fmin_hz: f.fmin_hz, fmax_hz: f.fmax_hz, top_db: f.top_db },
            n_mfcc: f.n_mfcc,
            cqt: CqtConfig { fmin_hz: f.cqt_fmin_hz, n_bins: f.cqt_bins, bins_per_octave: f.cqt_bins_per_octave, hop: d.hop },
            cens_smooth: f.cens_smooth,
            cens_downsample: f.cens_downsample,
            tempogram: TempogramConfig { win_len: f.tempo_win, ref_tempo_bpm: f.tempo_ref_bpm, n_tempo_bins: f.tempo_bins },
        }
    }

    pub fn train_config(&self, kind: FeatureKind, seed: u64) -> Result<TrainConfig> {
        let t = &self.training;
        let cfg = TrainConfig {
            feature_kind: kind,
            batch_size: t.batch_size,
            initial_lr: t.initial_lr,
            lr_patience: t.lr_patience,
            lr_factor: t.lr_factor,
            min_lr: t.min_lr,
            stop_patience: t.stop_patience,
            max_epochs: t.max_epochs,
            min_delta: t.min_delta,
            train_frac: t.train_frac,
            stratified: t.stratified,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_library() {
        let cfg = CliConfig::parse("").unwrap();
        assert_eq!(cfg.feature_config(), FeatureConfig::default());
        let t = cfg.train_config(FeatureKind::Mel, 0).unwrap();
        assert_eq!(t, TrainConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(CliConfig::parse("[dsp]\nnfft = 1024\n"), Err(Error::Config(_))));
        assert!(matches!(CliConfig::parse("[extra]\n"), Err(Error::Config(_))));
    }

    #[test]
    fn sections_override() {
        let cfg = CliConfig::parse("[training]\nmax_epochs = 3\n[features]\nn_mels = 64\n").unwrap();
        assert_eq!(cfg.training.max_epochs, 3);
        assert_eq!(cfg.feature_config().mel.n_mels, 64);
    }
}
