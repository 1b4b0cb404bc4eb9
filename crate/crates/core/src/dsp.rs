//! Windowing, radix-2 FFT, STFT, power spectra and decibel scaling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use num_complex::Complex64;

use crate::math::{self, PI};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Default analysis frame length.
pub const DEFAULT_N_FFT: usize = 2048;
/// Default hop between frames.
pub const DEFAULT_HOP: usize = 512;
/// Power floor before taking logarithms.
pub const DB_FLOOR: f64 = 1e-10;
/// Default dynamic range kept by [`amplitude_to_db`].
pub const DEFAULT_TOP_DB: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Hamming,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    kind: WindowKind,
    length: usize,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, length: usize) -> Result<Self> {
        let min = if kind == WindowKind::Rectangular { 1 } else { 2 };
        if length < min {
            return Err(Error::Window(format!("{kind:?} window needs length >= {min}, got {length}")));
        }
        Ok(Self { kind, length })
    }

    pub fn hann(length: usize) -> Result<Self> {
        Self::new(WindowKind::Hann, length)
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }
}

/// Periodic window samples.
pub fn make_window(spec: WindowSpec) -> Vec<f64> {
    let n = spec.length as f64;
    (0..spec.length)
        .map(|i| {
            let phase = 2.0 * PI * i as f64 / n;
            match spec.kind {
                WindowKind::Hann => 0.5 - 0.5 * math::cos(phase),
                WindowKind::Hamming => 0.54 - 0.46 * math::cos(phase),
                WindowKind::Rectangular => 1.0,
            }
        })
        .collect()
}

/// Reflect-pads by `pad` on both sides (edge sample not repeated). Signals
/// shorter than the pad reflect repeatedly.
pub fn reflect_pad(samples: &[f64], pad: usize) -> Vec<f64> {
    let n = samples.len();
    if n == 1 {
        return vec![samples[0]; n + 2 * pad];
    }
    let period = 2 * (n - 1) as i64;
    (0..n + 2 * pad)
        .map(|i| {
            let mut k = (i as i64 - pad as i64).rem_euclid(period);
            if k >= n as i64 {
                k = period - k;
            }
            samples[k as usize]
        })
        .collect()
}

fn frame_count(padded_len: usize, frame_len: usize, hop: usize) -> Result<usize> {
    if hop == 0 {
        return Err(Error::Size("hop must be at least 1".into()));
    }
    if frame_len == 0 || frame_len > padded_len {
        return Err(Error::EmptyFrames { frame_len, padded_len });
    }
    Ok(1 + (padded_len - frame_len) / hop)
}

fn padded(samples: &[f64], frame_len: usize, center: bool) -> Vec<f64> {
    if center {
        reflect_pad(samples, frame_len / 2)
    } else {
        samples.to_vec()
    }
}

/// Number of frames [`frame_signal`] produces for a signal of `len` samples.
pub fn n_frames(len: usize, frame_len: usize, hop: usize, center: bool) -> Result<usize> {
    let padded_len = if center { len + 2 * (frame_len / 2) } else { len };
    frame_count(padded_len, frame_len, hop)
}

/// Splits a signal into overlapping frames, one frame per column.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize, center: bool) -> Result<Matrix> {
    if samples.is_empty() {
        return Err(Error::EmptyFrames { frame_len, padded_len: 0 });
    }
    let signal = padded(samples, frame_len, center);
    let n = frame_count(signal.len(), frame_len, hop)?;
    let mut out = Matrix::zeros(frame_len, n);
    for j in 0..n {
        for (i, &s) in signal[j * hop..j * hop + frame_len].iter().enumerate() {
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// Direct O(N²) DFT.
pub fn dft_naive(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    // e^{-2πi m/N} for every residue m; kn is reduced mod N before lookup
    let roots: Vec<Complex64> = (0..n)
        .map(|m| {
            let angle = -2.0 * PI * m as f64 / n as f64;
            Complex64::new(math::cos(angle), math::sin(angle))
        })
        .collect();
    (0..n)
        .map(|k| x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| acc + v * roots[(k * t) % n]))
        .collect()
}

/// Precomputed twiddles and bit-reversal permutation for one power-of-two size.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::FftSize(n));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(math::cos(a), math::sin(a))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform.
    pub fn process(&self, buf: &mut [Complex64]) -> Result<()> {
        if buf.len() != self.n {
            return Err(Error::Size(format!("buffer of {} for a {}-point plan", buf.len(), self.n)));
        }
        for i in 0..self.n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.n {
            let stride = self.n / (2 * half);
            for start in (0..self.n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
        Ok(())
    }
}

/// Radix-2 FFT of a power-of-two length input.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(x.len())?;
    let mut buf = x.to_vec();
    plan.process(&mut buf)?;
    Ok(buf)
}

/// Centered STFT; column `j` is the FFT of the `j`-th windowed frame, bins `0..=n_fft/2`.
pub fn stft(samples: &[f64], n_fft: usize, hop: usize, window: WindowSpec) -> Result<Matrix<Complex64>> {
    if window.len() != n_fft {
        return Err(Error::Window(format!("window length {} != n_fft {}", window.len(), n_fft)));
    }
    let plan = FftPlan::new(n_fft)?;
    if samples.is_empty() {
        return Err(Error::EmptyFrames { frame_len: n_fft, padded_len: 0 });
    }
    let signal = padded(samples, n_fft, true);
    let n = frame_count(signal.len(), n_fft, hop)?;
    let win = make_window(window);
    let n_bins = n_fft / 2 + 1;
    let mut out = Matrix::zeros(n_bins, n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for j in 0..n {
        let frame = &signal[j * hop..j * hop + n_fft];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&win) {
            *b = Complex64::new(s * w, 0.0);
        }
        plan.process(&mut buf)?;
        for (bin, v) in buf[..n_bins].iter().enumerate() {
            out[(bin, j)] = *v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrogramScale {
    Power,
    Decibel,
}

/// Real-valued spectrogram, bins by frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Matrix,
    pub scale: SpectrogramScale,
}

/// `|S|²` elementwise.
pub fn power_spectrogram(s: &Matrix<Complex64>) -> Spectrogram {
    Spectrogram { values: s.map(|c| c.re * c.re + c.im * c.im), scale: SpectrogramScale::Power }
}

/// `10·log10(max(P, 1e-10) / reference)`, then floored at `max − top_db`.
pub fn amplitude_to_db(p: &Spectrogram, reference: f64, top_db: f64) -> Result<Spectrogram> {
    if p.scale != SpectrogramScale::Power {
        return Err(Error::Size("amplitude_to_db expects a power spectrogram".into()));
    }
    if !(reference > 0.0) || !(top_db > 0.0) {
        return Err(Error::Size("reference and top_db must be positive".into()));
    }
    let mut values = p.values.map(|&v| 10.0 * math::log10(v.max(DB_FLOOR) / reference));
    let peak = values.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = peak - top_db;
    for v in values.as_mut_slice() {
        if *v < floor {
            *v = floor;
        }
    }
    Ok(Spectrogram { values, scale: SpectrogramScale::Decibel })
}

/// Shared STFT settings for the spectral extractors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { n_fft: DEFAULT_N_FFT, hop: DEFAULT_HOP, window: WindowKind::Hann }
    }
}

impl StftConfig {
    pub fn power(&self, samples: &[f64]) -> Result<Spectrogram> {
        let window = WindowSpec::new(self.window, self.n_fft)?;
        Ok(power_spectrogram(&stft(samples, self.n_fft, self.hop, window)?))
    }

    /// Center frequency of FFT bin `bin`.
    pub fn bin_hz(&self, bin: usize, sample_rate_hz: u32) -> f64 {
        bin as f64 * sample_rate_hz as f64 / self.n_fft as f64
    }
}
