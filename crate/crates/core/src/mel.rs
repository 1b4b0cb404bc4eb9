//! Mel filterbanks, mel spectrograms and MFCCs.
//!
//! The mel scale is linear below 1 kHz (`3f/200`) and logarithmic above,
//! continuous at 1 kHz = 15 mel, with 6.4 kHz landing on 42 mel.

use alloc::format;
use alloc::vec::Vec;

use crate::audio::AudioClip;
use crate::dsp::{self, StftConfig, DEFAULT_TOP_DB};
use crate::feature::{FeatureKind, FeatureMatrix, FeatureParams};
use crate::math::{self, PI};
use crate::matrix::{matmul, Matrix};
use crate::{Error, Result};

const LINEAR_EDGE_HZ: f64 = 1000.0;
const LINEAR_EDGE_MEL: f64 = 15.0;
const LOG_STEP: f64 = 27.0;

/// Default number of mel bands.
pub const DEFAULT_N_MELS: usize = 128;
/// Default number of cepstral coefficients kept.
pub const DEFAULT_N_MFCC: usize = 40;

fn log_ratio() -> f64 {
    math::ln(6.4)
}

pub fn hz_to_mel(hz: f64) -> Result<f64> {
    if !(hz >= 0.0) {
        return Err(Error::NegativeFrequency(hz));
    }
    Ok(if hz <= LINEAR_EDGE_HZ {
        3.0 * hz / 200.0
    } else {
        LINEAR_EDGE_MEL + LOG_STEP * math::ln(hz / LINEAR_EDGE_HZ) / log_ratio()
    })
}

pub fn mel_to_hz(mel: f64) -> Result<f64> {
    if !(mel >= 0.0) {
        return Err(Error::NegativeFrequency(mel));
    }
    Ok(if mel <= LINEAR_EDGE_MEL {
        200.0 * mel / 3.0
    } else {
        LINEAR_EDGE_HZ * math::exp((mel - LINEAR_EDGE_MEL) * log_ratio() / LOG_STEP)
    })
}

/// Triangular filters over FFT bins, one row per mel band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    weights: Matrix,
    breakpoints_hz: Vec<f64>,
    fmin_hz: f64,
    fmax_hz: f64,
}

impl MelFilterBank {
    /// Filter `i` rises from breakpoint `i` to `i+1` and falls to `i+2`;
    /// breakpoints are equally spaced in mel. Each row is scaled to unit area
    /// over Hz, so a flat spectrum yields equal band energies.
    pub fn new(sample_rate_hz: u32, n_fft: usize, n_mels: usize, fmin_hz: f64, fmax_hz: f64) -> Result<Self> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        if n_mels == 0 {
            return Err(Error::Size("n_mels must be positive".into()));
        }
        if n_fft < 2 {
            return Err(Error::Size(format!("n_fft {n_fft} too small")));
        }
        if !(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= nyquist) {
            return Err(Error::Range(format!(
                "need 0 <= fmin < fmax <= {nyquist} Hz, got {fmin_hz}..{fmax_hz}"
            )));
        }
        let lo = hz_to_mel(fmin_hz)?;
        let hi = hz_to_mel(fmax_hz)?;
        let step = (hi - lo) / (n_mels + 1) as f64;
        let breakpoints_hz = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + step * i as f64))
            .collect::<Result<Vec<_>>>()?;

        let n_bins = n_fft / 2 + 1;
        let bin_width = sample_rate_hz as f64 / n_fft as f64;
        let mut weights = Matrix::zeros(n_mels, n_bins);
        for i in 0..n_mels {
            let (left, center, right) = (breakpoints_hz[i], breakpoints_hz[i + 1], breakpoints_hz[i + 2]);
            let row = weights.row_mut(i);
            for (b, w) in row.iter_mut().enumerate() {
                let f = b as f64 * bin_width;
                let rising = (f - left) / (center - left);
                let falling = (right - f) / (right - center);
                *w = rising.min(falling).max(0.0);
            }
            let area: f64 = row.iter().sum::<f64>() * bin_width;
            if area <= 0.0 {
                return Err(Error::DegenerateFilterbank { row: i });
            }
            row.iter_mut().for_each(|w| *w /= area);
        }
        Ok(Self { weights, breakpoints_hz, fmin_hz, fmax_hz })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn n_mels(&self) -> usize {
        self.weights.rows()
    }

    pub fn fmin_hz(&self) -> f64 {
        self.fmin_hz
    }

    pub fn fmax_hz(&self) -> f64 {
        self.fmax_hz
    }

    /// The `n_mels + 2` band edges in Hz.
    pub fn breakpoints_hz(&self) -> &[f64] {
        &self.breakpoints_hz
    }

    /// Peak (center) frequency of each filter.
    pub fn center_hz(&self) -> &[f64] {
        &self.breakpoints_hz[1..self.breakpoints_hz.len() - 1]
    }

    /// `weights × power`, mapping `(n_fft/2+1) × frames` onto `n_mels × frames`.
    pub fn apply(&self, power: &Matrix) -> Result<Matrix> {
        matmul(&self.weights, power)
    }
}

/// Orthonormal DCT-II keeping the first `n_out` coefficients.
pub fn dct_ii(x: &[f64], n_out: usize) -> Result<Vec<f64>> {
    Ok(DctPlan::new(x.len(), n_out)?.apply(x))
}

/// Cosine table for repeated DCT-II of fixed size.
#[derive(Debug, Clone)]
pub struct DctPlan {
    n_in: usize,
    n_out: usize,
    basis: Vec<f64>,
}

impl DctPlan {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 || n_out > n_in {
            return Err(Error::Size(format!("DCT of {n_in} inputs cannot keep {n_out} outputs")));
        }
        let n = n_in as f64;
        let mut basis = Vec::with_capacity(n_in * n_out);
        for k in 0..n_out {
            let alpha = if k == 0 { math::sqrt(1.0 / n) } else { math::sqrt(2.0 / n) };
            basis.extend((0..n_in).map(|i| alpha * math::cos(PI * (i as f64 + 0.5) * k as f64 / n)));
        }
        Ok(Self { n_in, n_out, basis })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_in, "DCT input length");
        self.basis
            .chunks_exact(self.n_in)
            .map(|row| row.iter().zip(x).map(|(b, v)| b * v).sum())
            .collect()
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }
}

/// Mel spectrogram settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub stft: StftConfig,
    pub n_mels: usize,
    pub fmin_hz: f64,
    /// `None` means Nyquist.
    pub fmax_hz: Option<f64>,
    pub top_db: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            n_mels: DEFAULT_N_MELS,
            fmin_hz: 0.0,
            fmax_hz: None,
            top_db: DEFAULT_TOP_DB,
        }
    }
}

/// A filterbank built once for a sample rate, reused across clips.
#[derive(Debug, Clone)]
pub struct MelExtractor {
    config: MelConfig,
    sample_rate_hz: u32,
    bank: MelFilterBank,
}

impl MelExtractor {
    pub fn new(sample_rate_hz: u32, config: MelConfig) -> Result<Self> {
        let fmax = config.fmax_hz.unwrap_or(sample_rate_hz as f64 / 2.0);
        let bank = MelFilterBank::new(sample_rate_hz, config.stft.n_fft, config.n_mels, config.fmin_hz, fmax)?;
        Ok(Self { config, sample_rate_hz, bank })
    }

    pub fn bank(&self) -> &MelFilterBank {
        &self.bank
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::InvalidClip(format!(
                "clip at {} Hz given to a {} Hz extractor",
                clip.sample_rate_hz(),
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Mel power spectrogram, `n_mels × frames`.
    pub fn mel_power(&self, clip: &AudioClip) -> Result<Matrix> {
        self.check_rate(clip)?;
        let power = self.config.stft.power(clip.samples())?;
        self.bank.apply(&power.values)
    }

    /// Decibel mel spectrogram (reference 1.0, floored at `max − top_db`).
    pub fn mel_db(&self, clip: &AudioClip) -> Result<Matrix> {
        let mel = dsp::Spectrogram { values: self.mel_power(clip)?, scale: dsp::SpectrogramScale::Power };
        Ok(dsp::amplitude_to_db(&mel, 1.0, self.config.top_db)?.values)
    }

    /// Per-frame DCT-II of the decibel mel spectrogram.
    pub fn mfcc_db(&self, clip: &AudioClip, n_mfcc: usize) -> Result<Matrix> {
        if n_mfcc == 0 || n_mfcc > self.config.n_mels {
            return Err(Error::Size(format!("n_mfcc {n_mfcc} must be in 1..={}", self.config.n_mels)));
        }
        let mel = self.mel_db(clip)?;
        let plan = DctPlan::new(mel.rows(), n_mfcc)?;
        let mut out = Matrix::zeros(n_mfcc, mel.cols());
        for j in 0..mel.cols() {
            for (k, v) in plan.apply(&mel.column(j)).into_iter().enumerate() {
                out[(k, j)] = v;
            }
        }
        Ok(out)
    }

    fn params(&self) -> FeatureParams {
        FeatureParams {
            sample_rate_hz: self.sample_rate_hz,
            n_fft: self.config.stft.n_fft as u32,
            hop: self.config.stft.hop as u32,
        }
    }

    pub fn mel_spectrogram(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        FeatureMatrix::from_f64(FeatureKind::Mel, self.params(), &self.mel_db(clip)?)
    }

    pub fn mfcc(&self, clip: &AudioClip, n_mfcc: usize) -> Result<FeatureMatrix> {
        FeatureMatrix::from_f64(FeatureKind::Mfcc, self.params(), &self.mfcc_db(clip, n_mfcc)?)
    }
}

pub fn mel_spectrogram(clip: &AudioClip, config: &MelConfig) -> Result<FeatureMatrix> {
    MelExtractor::new(clip.sample_rate_hz(), *config)?.mel_spectrogram(clip)
}

pub fn mfcc(clip: &AudioClip, config: &MelConfig, n_mfcc: usize) -> Result<FeatureMatrix> {
    MelExtractor::new(clip.sample_rate_hz(), *config)?.mfcc(clip, n_mfcc)
}
