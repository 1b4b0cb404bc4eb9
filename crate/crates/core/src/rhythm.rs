//! Onset novelty and cyclic tempograms.
//!
//! The novelty curve is the positive spectral flux of the decibel mel
//! spectrogram. Local periodicity comes from a Hann-windowed autocorrelation
//! of that curve around every frame; lags are mapped to tempi and all tempo
//! octaves above the reference are summed into one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::audio::AudioClip;
use crate::dsp::{make_window, WindowSpec};
use crate::math;
use crate::matrix::Matrix;
use crate::mel::MelExtractor;
use crate::{Error, Result};

pub const DEFAULT_TEMPO_WIN: usize = 384;
pub const DEFAULT_REF_TEMPO_BPM: f64 = 60.0;
pub const DEFAULT_TEMPO_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyCurve {
    values: Vec<f64>,
    frame_rate_hz: f64,
}

impl NoveltyCurve {
    pub fn new(values: Vec<f64>, frame_rate_hz: f64) -> Result<Self> {
        if !(frame_rate_hz > 0.0) {
            return Err(Error::Size("novelty frame rate must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Shape("novelty values must be finite and nonnegative".into()));
        }
        Ok(Self { values, frame_rate_hz })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Spectral flux `Σ_b max(0, D[b,j] − D[b,j−1])` of a decibel spectrogram;
/// the first frame is 0.
pub fn spectral_flux(db: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; db.cols()];
    for (j, o) in out.iter_mut().enumerate().skip(1) {
        *o = (0..db.rows()).map(|b| (db[(b, j)] - db[(b, j - 1)]).max(0.0)).sum();
    }
    out
}

pub fn onset_novelty(clip: &AudioClip, mel: &MelExtractor) -> Result<NoveltyCurve> {
    let db = mel.mel_db(clip)?;
    let frame_rate = clip.sample_rate_hz() as f64 / mel.config().stft.hop as f64;
    NoveltyCurve::new(spectral_flux(&db), frame_rate)
}

/// Local autocorrelation, `win_len` lags by frames. Each column is divided by
/// its lag-0 value; silent columns stay zero.
pub fn autocorrelation_tempogram(novelty: &NoveltyCurve, win_len: usize) -> Result<Matrix> {
    let n = novelty.len();
    if win_len == 0 || win_len > n {
        return Err(Error::Size(format!("tempogram window {win_len} must be in 1..={n}")));
    }
    let window = if win_len >= 2 { make_window(WindowSpec::hann(win_len)?) } else { vec![1.0] };
    let half = (win_len / 2) as i64;
    let x = novelty.values();
    let mut out = Matrix::zeros(win_len, n);
    let mut seg = vec![0.0; win_len];
    for j in 0..n {
        for (i, s) in seg.iter_mut().enumerate() {
            let idx = j as i64 + i as i64 - half;
            *s = if idx >= 0 && (idx as usize) < n { x[idx as usize] * window[i] } else { 0.0 };
        }
        let energy: f64 = seg.iter().map(|v| v * v).sum();
        if energy <= 0.0 {
            continue;
        }
        for lag in 0..win_len {
            let acc: f64 = seg[..win_len - lag].iter().zip(&seg[lag..]).map(|(a, b)| a * b).sum();
            out[(lag, j)] = acc / energy;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempogramConfig {
    pub win_len: usize,
    pub ref_tempo_bpm: f64,
    pub n_tempo_bins: usize,
}

impl Default for TempogramConfig {
    fn default() -> Self {
        Self { win_len: DEFAULT_TEMPO_WIN, ref_tempo_bpm: DEFAULT_REF_TEMPO_BPM, n_tempo_bins: DEFAULT_TEMPO_BINS }
    }
}

impl TempogramConfig {
    /// Tempo of the lower edge of bin `b` in the reference octave.
    pub fn bin_tempo_bpm(&self, b: usize) -> f64 {
        self.ref_tempo_bpm * math::powf(2.0, b as f64 / self.n_tempo_bins as f64)
    }

    /// Bin a tempo folds into: `round(n · frac(log2(tempo / ref))) mod n`.
    pub fn fold_bin(&self, tempo_bpm: f64) -> usize {
        let octave = math::log2(tempo_bpm / self.ref_tempo_bpm);
        let frac = octave - math::floor(octave);
        (math::round(frac * self.n_tempo_bins as f64) as usize) % self.n_tempo_bins
    }
}

/// Folds an autocorrelation tempogram onto one tempo octave `[ref, 2·ref)`.
///
/// Lag `l` has tempo `60·frame_rate/l`. For every grid tempo `ref·2^(o + b/n)`
/// within the lag range the column is linearly interpolated on the log-tempo
/// axis and summed over octaves `o = 0, 1, …`.
pub fn fold_cyclic(acf: &Matrix, frame_rate_hz: f64, config: &TempogramConfig) -> Result<Matrix> {
    if config.n_tempo_bins == 0 || !(config.ref_tempo_bpm > 0.0) {
        return Err(Error::Size("tempo bins and reference tempo must be positive".into()));
    }
    let max_lag = acf.rows() - 1;
    if max_lag < 2 {
        return Err(Error::Size(format!("autocorrelation needs at least 3 lags, got {}", acf.rows())));
    }
    let fastest = 60.0 * frame_rate_hz; // lag 1
    let slowest = fastest / max_lag as f64;

    // For each output bin, the (lower lag, weight on lower lag) pairs of each octave.
    let mut taps: Vec<Vec<(usize, f64)>> = Vec::with_capacity(config.n_tempo_bins);
    for b in 0..config.n_tempo_bins {
        let mut bin_taps = Vec::new();
        let mut tempo = config.bin_tempo_bpm(b);
        while tempo <= fastest {
            if tempo >= slowest {
                let lag = fastest / tempo;
                let lo = (math::floor(lag) as usize).clamp(1, max_lag - 1);
                let hi = lo + 1;
                // position between the two lags on the log-tempo axis
                let t = math::log2(lo as f64 / lag) / math::log2(lo as f64 / hi as f64);
                bin_taps.push((lo, 1.0 - t.clamp(0.0, 1.0)));
            }
            tempo *= 2.0;
        }
        taps.push(bin_taps);
    }

    let mut out = Matrix::zeros(config.n_tempo_bins, acf.cols());
    for j in 0..acf.cols() {
        for (b, bin_taps) in taps.iter().enumerate() {
            out[(b, j)] = bin_taps
                .iter()
                .map(|&(lo, w)| (w * acf[(lo, j)] + (1.0 - w) * acf[(lo + 1, j)]).max(0.0))
                .sum();
        }
    }
    Ok(out)
}

/// Cyclic tempogram of a clip, `n_tempo_bins × frames`. The autocorrelation
/// window is capped at the novelty length.
pub fn cyclic_tempogram(clip: &AudioClip, mel: &MelExtractor, config: &TempogramConfig) -> Result<Matrix> {
    let novelty = onset_novelty(clip, mel)?;
    let acf = autocorrelation_tempogram(&novelty, config.win_len.min(novelty.len()))?;
    fold_cyclic(&acf, novelty.frame_rate_hz(), config)
}
