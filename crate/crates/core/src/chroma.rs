//! Pitch-class features: STFT chroma, constant-Q transform, CQT chroma and
//! CENS.

use alloc::format;
use alloc::vec::Vec;

use crate::audio::AudioClip;
use crate::dsp::{make_window, Complex64, StftConfig, WindowSpec, DEFAULT_HOP};
use crate::math::{self, PI};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Frequency of C0 under equal temperament with A4 = 440 Hz.
pub const C0_HZ: f64 = 16.351_597_831_287_414;
/// C1, the default lowest constant-Q bin.
pub const C1_HZ: f64 = 32.703_195_662_574_83;

pub const PITCH_CLASSES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// CENS quantization thresholds applied after L1 normalization.
pub const CENS_THRESHOLDS: [f64; 4] = [0.05, 0.1, 0.2, 0.4];
pub const DEFAULT_CENS_SMOOTH: usize = 41;
pub const DEFAULT_CENS_DOWNSAMPLE: usize = 10;

/// Nearest pitch class (0 = C) of a positive frequency.
pub fn pitch_class(freq_hz: f64) -> usize {
    let semitones = math::round(12.0 * math::log2(freq_hz / C0_HZ)) as i64;
    semitones.rem_euclid(12) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormState {
    Raw,
    /// Each frame divided by its maximum.
    Max,
    L1,
    Cens,
}

/// 12 rows (C, C#, …, B) by frames, nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchClassProfile {
    values: Matrix,
    norm_state: NormState,
}

impl PitchClassProfile {
    pub fn new(values: Matrix, norm_state: NormState) -> Result<Self> {
        if values.rows() != 12 {
            return Err(Error::Shape(format!("chroma needs 12 rows, got {}", values.rows())));
        }
        if values.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Shape("chroma values must be finite and nonnegative".into()));
        }
        Ok(Self { values, norm_state })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn norm_state(&self) -> NormState {
        self.norm_state
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    /// Per-frame argmax class; `None` for all-zero frames.
    pub fn dominant_classes(&self) -> Vec<Option<usize>> {
        (0..self.values.cols()).map(|j| argmax_column(&self.values, j)).collect()
    }

    /// Divides each frame by its maximum; zero frames stay zero.
    pub fn max_normalized(&self) -> Self {
        Self { values: normalize_columns(&self.values, |c| c.iter().copied().fold(0.0, f64::max)), norm_state: NormState::Max }
    }

    pub fn l1_normalized(&self) -> Self {
        Self { values: normalize_columns(&self.values, |c| c.iter().map(|v| v.abs()).sum()), norm_state: NormState::L1 }
    }
}

fn argmax_column(m: &Matrix, j: usize) -> Option<usize> {
    let mut best = None;
    let mut best_v = 0.0;
    for r in 0..m.rows() {
        if m[(r, j)] > best_v {
            best_v = m[(r, j)];
            best = Some(r);
        }
    }
    best
}

fn normalize_columns(m: &Matrix, norm: impl Fn(&[f64]) -> f64) -> Matrix {
    let mut out = m.clone();
    for j in 0..m.cols() {
        let col = m.column(j);
        let n = norm(&col);
        if n > 0.0 {
            for r in 0..m.rows() {
                out[(r, j)] = col[r] / n;
            }
        }
    }
    out
}

/// Raw STFT chroma: each power-spectrum bin above DC is added to its nearest
/// pitch class.
pub fn chroma_stft_profile(clip: &AudioClip, stft: &StftConfig) -> Result<PitchClassProfile> {
    let power = stft.power(clip.samples())?.values;
    let classes: Vec<usize> = (1..power.rows()).map(|b| pitch_class(stft.bin_hz(b, clip.sample_rate_hz()))).collect();
    let mut chroma = Matrix::zeros(12, power.cols());
    for (b, &class) in (1..power.rows()).zip(&classes) {
        let row = power.row(b);
        let out = chroma.row_mut(class);
        for (o, &p) in out.iter_mut().zip(row) {
            *o += p;
        }
    }
    PitchClassProfile::new(chroma, NormState::Raw)
}

/// Max-normalized STFT chroma.
pub fn chroma_stft(clip: &AudioClip, stft: &StftConfig) -> Result<PitchClassProfile> {
    Ok(chroma_stft_profile(clip, stft)?.max_normalized())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqtConfig {
    pub fmin_hz: f64,
    pub n_bins: usize,
    pub bins_per_octave: usize,
    pub hop: usize,
}

impl Default for CqtConfig {
    fn default() -> Self {
        Self { fmin_hz: C1_HZ, n_bins: 84, bins_per_octave: 12, hop: DEFAULT_HOP }
    }
}

impl CqtConfig {
    /// `1 / (2^(1/bins_per_octave) − 1)`.
    pub fn q_factor(&self) -> f64 {
        1.0 / (math::powf(2.0, 1.0 / self.bins_per_octave as f64) - 1.0)
    }
}

/// Hann-windowed complex exponential atom.
#[derive(Debug, Clone)]
struct Atom {
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Time-domain constant-Q atoms for one sample rate.
#[derive(Debug, Clone)]
pub struct CqtKernelBank {
    config: CqtConfig,
    center_freqs_hz: Vec<f64>,
    atoms: Vec<Atom>,
    sample_rate_hz: u32,
}

impl CqtKernelBank {
    pub fn new(sample_rate_hz: u32, config: CqtConfig) -> Result<Self> {
        if config.n_bins == 0 || config.bins_per_octave == 0 || config.hop == 0 {
            return Err(Error::Size("constant-Q bins, bins per octave and hop must be positive".into()));
        }
        if !(config.fmin_hz > 0.0) {
            return Err(Error::Range(format!("fmin {} Hz must be positive", config.fmin_hz)));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        let top = config.fmin_hz * math::powf(2.0, config.n_bins as f64 / config.bins_per_octave as f64);
        if top > nyquist {
            return Err(Error::Range(format!("{} bins from {} Hz reach {top:.1} Hz above Nyquist {nyquist}", config.n_bins, config.fmin_hz)));
        }
        let q = config.q_factor();
        let sr = sample_rate_hz as f64;
        let center_freqs_hz: Vec<f64> = (0..config.n_bins)
            .map(|k| config.fmin_hz * math::powf(2.0, k as f64 / config.bins_per_octave as f64))
            .collect();
        let atoms = center_freqs_hz
            .iter()
            .map(|&f| {
                let len = (math::ceil(q * sr / f) as usize).max(2);
                let window = make_window(WindowSpec::hann(len)?);
                let norm: f64 = window.iter().sum();
                let mid = (len / 2) as f64;
                let (re, im) = window
                    .iter()
                    .enumerate()
                    .map(|(n, w)| {
                        let phase = 2.0 * PI * f * (n as f64 - mid) / sr;
                        (w * math::cos(phase) / norm, w * math::sin(phase) / norm)
                    })
                    .unzip();
                Ok(Atom { re, im })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, center_freqs_hz, atoms, sample_rate_hz })
    }

    pub fn config(&self) -> &CqtConfig {
        &self.config
    }

    pub fn q_factor(&self) -> f64 {
        self.config.q_factor()
    }

    pub fn center_freqs_hz(&self) -> &[f64] {
        &self.center_freqs_hz
    }

    /// Bandwidth of bin `k`: `f_k / Q`.
    pub fn bandwidth_hz(&self, k: usize) -> f64 {
        self.center_freqs_hz[k] / self.q_factor()
    }

    pub fn atom_len(&self, k: usize) -> usize {
        self.atoms[k].re.len()
    }

    pub fn n_bins(&self) -> usize {
        self.atoms.len()
    }

    /// `X[k, j]`: inner product of atom `k` with the signal centered at `j·hop`
    /// (zero outside the clip).
    pub fn transform(&self, clip: &AudioClip) -> Result<Matrix<Complex64>> {
        if clip.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::InvalidClip(format!(
                "clip at {} Hz given to a {} Hz constant-Q bank",
                clip.sample_rate_hz(),
                self.sample_rate_hz
            )));
        }
        let x = clip.samples();
        let longest = self.atom_len(0);
        if longest > x.len() {
            return Err(Error::AtomLength { freq_hz: self.center_freqs_hz[0], atom_len: longest, signal_len: x.len() });
        }
        let hop = self.config.hop;
        let n_frames = 1 + x.len() / hop;
        let mut out = Matrix::zeros(self.n_bins(), n_frames);
        for (k, atom) in self.atoms.iter().enumerate() {
            let len = atom.re.len() as i64;
            for j in 0..n_frames {
                let start = (j * hop) as i64 - len / 2;
                let lo = (-start).max(0) as usize;
                let hi = ((x.len() as i64 - start).min(len)).max(0) as usize;
                let (mut re, mut im) = (0.0, 0.0);
                if lo < hi {
                    let seg = &x[(start + lo as i64) as usize..(start + hi as i64) as usize];
                    for ((s, a_re), a_im) in seg.iter().zip(&atom.re[lo..hi]).zip(&atom.im[lo..hi]) {
                        re += s * a_re;
                        im -= s * a_im;
                    }
                }
                out[(k, j)] = Complex64::new(re, im);
            }
        }
        Ok(out)
    }

    /// `|X|` folded across octaves onto 12 pitch classes.
    pub fn chroma_profile(&self, clip: &AudioClip) -> Result<PitchClassProfile> {
        let x = self.transform(clip)?;
        let mut chroma = Matrix::zeros(12, x.cols());
        for (k, &f) in self.center_freqs_hz.iter().enumerate() {
            let class = pitch_class(f);
            for j in 0..x.cols() {
                chroma[(class, j)] += x[(k, j)].norm();
            }
        }
        PitchClassProfile::new(chroma, NormState::Raw)
    }
}

pub fn cqt(clip: &AudioClip, config: CqtConfig) -> Result<Matrix<Complex64>> {
    CqtKernelBank::new(clip.sample_rate_hz(), config)?.transform(clip)
}

/// Max-normalized CQT chroma.
pub fn chroma_cqt(clip: &AudioClip, config: CqtConfig) -> Result<PitchClassProfile> {
    Ok(CqtKernelBank::new(clip.sample_rate_hz(), config)?.chroma_profile(clip)?.max_normalized())
}

/// Number of CENS thresholds a value exceeds, in `0..=4`.
pub fn cens_code(v: f64) -> u8 {
    CENS_THRESHOLDS.iter().filter(|&&t| v > t).count() as u8
}

/// CENS: L1 normalize, quantize, Hann-smooth along time, downsample, unit
/// Euclidean norm per frame.
pub fn cens(chroma: &PitchClassProfile, smooth_len: usize, downsample: usize) -> Result<PitchClassProfile> {
    if smooth_len == 0 || downsample == 0 {
        return Err(Error::Size("CENS smoothing length and downsampling factor must be positive".into()));
    }
    let l1 = chroma.l1_normalized();
    let quantized = l1.values.map(|&v| cens_code(v) as f64);

    // symmetric Hann with strictly positive taps
    let taps: Vec<f64> =
        (0..smooth_len).map(|n| 0.5 - 0.5 * math::cos(2.0 * PI * (n + 1) as f64 / (smooth_len + 1) as f64)).collect();
    let half = (smooth_len / 2) as i64;
    let n = quantized.cols();
    let mut smoothed = Matrix::zeros(12, n);
    for r in 0..12 {
        let row = quantized.row(r);
        for j in 0..n {
            let mut acc = 0.0;
            for (t, w) in taps.iter().enumerate() {
                let idx = j as i64 + t as i64 - half;
                if idx >= 0 && (idx as usize) < n {
                    acc += w * row[idx as usize];
                }
            }
            smoothed[(r, j)] = acc;
        }
    }

    let kept: Vec<usize> = (0..n).step_by(downsample).collect();
    let mut out = Matrix::zeros(12, kept.len());
    for (c, &j) in kept.iter().enumerate() {
        for r in 0..12 {
            out[(r, c)] = smoothed[(r, j)];
        }
    }
    let out = normalize_columns(&out, |c| math::sqrt(c.iter().map(|v| v * v).sum()));
    PitchClassProfile::new(out, NormState::Cens)
}
