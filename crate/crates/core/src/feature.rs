//! Tagged feature matrices and the single extraction entry point.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::audio::{resample, AudioClip};
use crate::chroma::{self, CqtConfig, CqtKernelBank, DEFAULT_CENS_SMOOTH};
use crate::matrix::Matrix;
use crate::mel::{MelConfig, MelExtractor, DEFAULT_N_MFCC};
use crate::rhythm::{self, TempogramConfig};
use crate::{Error, Result, CANONICAL_RATE_HZ, CLIP_SECONDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Mel,
    Mfcc,
    Tempogram,
    ChromaStft,
    ChromaCqt,
    ChromaCens,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Mel,
        FeatureKind::Mfcc,
        FeatureKind::Tempogram,
        FeatureKind::ChromaStft,
        FeatureKind::ChromaCqt,
        FeatureKind::ChromaCens,
    ];

    /// One-byte tag used by the feature file format.
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Mel => 1,
            FeatureKind::Mfcc => 2,
            FeatureKind::Tempogram => 3,
            FeatureKind::ChromaStft => 4,
            FeatureKind::ChromaCqt => 5,
            FeatureKind::ChromaCens => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    /// Command-line spelling.
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Mel => "mel",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Tempogram => "tempogram",
            FeatureKind::ChromaStft => "chroma-stft",
            FeatureKind::ChromaCqt => "chroma-cqt",
            FeatureKind::ChromaCens => "chroma-cens",
        }
    }

    /// Row label used in comparison tables.
    pub fn title(self) -> &'static str {
        match self {
            FeatureKind::Mel => "Mel-scaled spectrograms",
            FeatureKind::Mfcc => "MFCCs",
            FeatureKind::Tempogram => "Cyclic tempograms",
            FeatureKind::ChromaStft => "STFT chromagrams",
            FeatureKind::ChromaCqt => "CQT chromagrams",
            FeatureKind::ChromaCens => "CENS chromagrams",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature kind '{s}'")))
    }
}

/// Extraction parameters persisted alongside the values. `n_fft` is 0 for
/// the constant-Q kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeatureParams {
    pub sample_rate_hz: u32,
    pub n_fft: u32,
    pub hop: u32,
}

/// Feature bins by time frames, single precision, tagged with its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    kind: FeatureKind,
    params: FeatureParams,
    values: Matrix<f32>,
}

impl FeatureMatrix {
    pub fn new(kind: FeatureKind, params: FeatureParams, values: Matrix<f32>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Shape("feature matrix needs at least one row and one column".into()));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("{kind} feature contains non-finite values")));
        }
        Ok(Self { kind, params, values })
    }

    pub fn from_f64(kind: FeatureKind, params: FeatureParams, values: &Matrix) -> Result<Self> {
        Self::new(kind, params, values.map(|&v| v as f32))
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn params(&self) -> FeatureParams {
        self.params
    }

    pub fn values(&self) -> &Matrix<f32> {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }
}

/// Parameters of every extractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub clip_seconds: f64,
    pub mel: MelConfig,
    pub n_mfcc: usize,
    pub cqt: CqtConfig,
    pub cens_smooth: usize,
    /// 1 keeps CENS on the same frame grid as the other chroma kinds.
    pub cens_downsample: usize,
    pub tempogram: TempogramConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: CANONICAL_RATE_HZ,
            clip_seconds: CLIP_SECONDS as f64,
            mel: MelConfig::default(),
            n_mfcc: DEFAULT_N_MFCC,
            cqt: CqtConfig::default(),
            cens_smooth: DEFAULT_CENS_SMOOTH,
            cens_downsample: 1,
            tempogram: TempogramConfig::default(),
        }
    }
}

/// Filterbank and constant-Q atoms built once, shared by every clip.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    mel: MelExtractor,
    cqt: CqtKernelBank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        if !(config.clip_seconds > 0.0) {
            return Err(Error::Config("clip duration must be positive".into()));
        }
        let mel = MelExtractor::new(config.sample_rate_hz, config.mel)?;
        let mut cqt_config = config.cqt;
        cqt_config.hop = config.mel.stft.hop;
        let cqt = CqtKernelBank::new(config.sample_rate_hz, cqt_config)?;
        Ok(Self { config, mel, cqt })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn mel(&self) -> &MelExtractor {
        &self.mel
    }

    pub fn cqt(&self) -> &CqtKernelBank {
        &self.cqt
    }

    /// Resamples to the working rate and pads or truncates to the fixed duration.
    pub fn prepare(&self, clip: &AudioClip) -> Result<AudioClip> {
        let clip = resample(clip, self.config.sample_rate_hz)?;
        let len = libm::round(self.config.clip_seconds * self.config.sample_rate_hz as f64) as usize;
        clip.fit_length(len)
    }

    fn params(&self, uses_fft: bool) -> FeatureParams {
        FeatureParams {
            sample_rate_hz: self.config.sample_rate_hz,
            n_fft: if uses_fft { self.config.mel.stft.n_fft as u32 } else { 0 },
            hop: self.config.mel.stft.hop as u32,
        }
    }

    /// Full-precision feature values of an already prepared clip.
    pub fn extract_prepared(&self, kind: FeatureKind, clip: &AudioClip) -> Result<Matrix> {
        let c = &self.config;
        match kind {
            FeatureKind::Mel => self.mel.mel_db(clip),
            FeatureKind::Mfcc => self.mel.mfcc_db(clip, c.n_mfcc),
            FeatureKind::Tempogram => rhythm::cyclic_tempogram(clip, &self.mel, &c.tempogram),
            FeatureKind::ChromaStft => Ok(chroma::chroma_stft(clip, &c.mel.stft)?.into_values()),
            FeatureKind::ChromaCqt => Ok(self.cqt.chroma_profile(clip)?.max_normalized().into_values()),
            FeatureKind::ChromaCens => {
                let raw = self.cqt.chroma_profile(clip)?;
                Ok(chroma::cens(&raw, c.cens_smooth, c.cens_downsample)?.into_values())
            }
        }
    }

    pub fn extract(&self, kind: FeatureKind, clip: &AudioClip) -> Result<FeatureMatrix> {
        let prepared = self.prepare(clip)?;
        let values = self.extract_prepared(kind, &prepared)?;
        let uses_fft = !matches!(kind, FeatureKind::ChromaCqt | FeatureKind::ChromaCens);
        FeatureMatrix::from_f64(kind, self.params(uses_fft), &values)
    }

    /// Expected `(rows, cols)` for a kind under this configuration.
    pub fn output_shape(&self, kind: FeatureKind) -> Result<(usize, usize)> {
        let c = &self.config;
        let len = libm::round(c.clip_seconds * c.sample_rate_hz as f64) as usize;
        let frames = crate::dsp::n_frames(len, c.mel.stft.n_fft, c.mel.stft.hop, true)?;
        Ok(match kind {
            FeatureKind::Mel => (c.mel.n_mels, frames),
            FeatureKind::Mfcc => (c.n_mfcc, frames),
            FeatureKind::Tempogram => (c.tempogram.n_tempo_bins, frames),
            FeatureKind::ChromaStft => (12, frames),
            FeatureKind::ChromaCqt => (12, 1 + len / c.mel.stft.hop),
            FeatureKind::ChromaCens => (12, (1 + len / c.mel.stft.hop).div_ceil(c.cens_downsample)),
        })
    }
}

/// Comma-separated list of every kind name, for messages.
pub fn kind_names() -> String {
    FeatureKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
}
