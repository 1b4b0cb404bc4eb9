//! Canonical mono clips, dataset index types and band-limited resampling.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, PI};
use crate::{Error, Result, CANONICAL_RATE_HZ, CLIP_SECONDS, N_CLASSES};

/// A mono clip. Samples are nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    label: usize,
    fold: u8,
    source_name: String,
}

impl AudioClip {
    /// Builds an unlabelled clip (label 0, fold 1).
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, source_name: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidClip("no samples".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidClip(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate_hz, label: 0, fold: 1, source_name: source_name.into() })
    }

    pub fn with_label(mut self, label: usize, fold: u8) -> Result<Self> {
        if label >= N_CLASSES {
            return Err(Error::LabelRange { label, n_classes: N_CLASSES });
        }
        if !(1..=5).contains(&fold) {
            return Err(Error::InvalidClip(format!("fold {fold} outside 1..=5")));
        }
        self.label = label;
        self.fold = fold;
        Ok(self)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn fold(&self) -> u8 {
        self.fold
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        let samples = self.samples.iter().map(|s| s * gain).collect();
        let mut out = Self::new(samples, self.sample_rate_hz, self.source_name.clone())?;
        out.label = self.label;
        out.fold = self.fold;
        Ok(out)
    }

    fn with_samples(&self, samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
            label: self.label,
            fold: self.fold,
            source_name: self.source_name.clone(),
        }
    }

    /// Zero-pads at the end or truncates to exactly `len` samples.
    pub fn fit_length(&self, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidClip("target length must be positive".into()));
        }
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Ok(self.with_samples(samples, self.sample_rate_hz))
    }

    /// Resamples to the canonical rate and fixes the length to the canonical
    /// duration. Every extractor expects its input in this form.
    pub fn canonical(&self) -> Result<Self> {
        let clip = resample(self, CANONICAL_RATE_HZ)?;
        clip.fit_length((CANONICAL_RATE_HZ * CLIP_SECONDS) as usize)
    }

    pub fn is_canonical(&self) -> bool {
        self.sample_rate_hz == CANONICAL_RATE_HZ
            && self.samples.len() == (CANONICAL_RATE_HZ * CLIP_SECONDS) as usize
    }
}

/// One row of the corpus metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: String,
    pub label: usize,
    pub fold: u8,
    pub category: String,
}

impl DatasetEntry {
    /// File name without directories and without the final extension.
    pub fn stem(&self) -> &str {
        let name = self.path.rsplit(['/', '\\']).next().unwrap_or(&self.path);
        match name.rfind('.') {
            Some(i) if i > 0 => &name[..i],
            _ => name,
        }
    }
}

/// Validated list of labelled recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    entries: Vec<DatasetEntry>,
    class_names: BTreeMap<usize, String>,
}

impl DatasetIndex {
    /// Checks label ranges, folds and label/category consistency.
    pub fn new(entries: Vec<DatasetEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("index has no entries and zero classes".into()));
        }
        let mut class_names: BTreeMap<usize, String> = BTreeMap::new();
        for e in &entries {
            if e.label >= N_CLASSES {
                return Err(Error::LabelRange { label: e.label, n_classes: N_CLASSES });
            }
            if !(1..=5).contains(&e.fold) {
                return Err(Error::Validation(format!("{}: fold {} outside 1..=5", e.path, e.fold)));
            }
            match class_names.get(&e.label) {
                Some(name) if *name != e.category => {
                    return Err(Error::Validation(format!(
                        "label {} maps to both '{}' and '{}'",
                        e.label, name, e.category
                    )));
                }
                Some(_) => {}
                None => {
                    class_names.insert(e.label, e.category.clone());
                }
            }
        }
        Ok(Self { entries, class_names })
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_name(&self, label: usize) -> Option<&str> {
        self.class_names.get(&label).map(String::as_str)
    }

    pub fn class_names(&self) -> impl Iterator<Item = (usize, &str)> {
        self.class_names.iter().map(|(l, n)| (*l, n.as_str()))
    }

    /// Full-corpus check: exactly 50 labels forming the range 0..49.
    pub fn validate_full_corpus(&self) -> Result<()> {
        let contiguous = self.class_names.keys().copied().eq(0..N_CLASSES);
        if !contiguous {
            return Err(Error::Validation(format!(
                "expected labels 0..{} but found {} distinct labels",
                N_CLASSES - 1,
                self.class_names.len()
            )));
        }
        Ok(())
    }

    /// Keeps only entries whose label is in `labels`.
    pub fn filter_labels(&self, labels: &[usize]) -> Result<Self> {
        Self::new(self.entries.iter().filter(|e| labels.contains(&e.label)).cloned().collect())
    }
}

const ZERO_CROSSINGS: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct SincKernel {
    cutoff: f64,
    half_width: f64,
    i0_beta: f64,
}

impl SincKernel {
    fn new(cutoff: f64) -> Self {
        Self { cutoff, half_width: ZERO_CROSSINGS / cutoff, i0_beta: bessel_i0(KAISER_BETA) }
    }

    /// Kaiser-windowed low-pass sinc, `x` in input samples.
    fn eval(&self, x: f64) -> f64 {
        let r = x / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let arg = PI * self.cutoff * x;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { math::sin(arg) / arg };
        let window = bessel_i0(KAISER_BETA * math::sqrt(1.0 - r * r)) / self.i0_beta;
        self.cutoff * sinc * window
    }
}

/// Band-limited windowed-sinc resampling with a polyphase tap table.
///
/// Output length is `round(len * target / source)`. Equal rates return the
/// clip unchanged.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip> {
    if target_rate_hz == 0 {
        return Err(Error::InvalidClip("target sample rate must be positive".into()));
    }
    let source = clip.sample_rate_hz as u64;
    let target = target_rate_hz as u64;
    if source == target {
        return Ok(clip.clone());
    }
    let g = gcd(source, target);
    let up = target / g;
    let down = source / g;
    let input = &clip.samples;
    let n_in = input.len();
    let n_out = math::round(n_in as f64 * target as f64 / source as f64) as usize;
    if n_out == 0 {
        return Err(Error::InvalidClip("resampled clip would be empty".into()));
    }

    let kernel = SincKernel::new((up as f64 / down as f64).min(1.0));
    let reach = math::ceil(kernel.half_width) as i64;
    let n_taps = (2 * reach) as usize;

    // Output sample m sits at input position m * down / up = base + phase / up.
    let table: Option<Vec<f64>> = (up <= MAX_TABLE_PHASES).then(|| {
        let mut t = vec![0.0; up as usize * n_taps];
        for phase in 0..up as usize {
            let frac = phase as f64 / up as f64;
            for (j, tap) in t[phase * n_taps..(phase + 1) * n_taps].iter_mut().enumerate() {
                let offset = j as i64 - reach + 1;
                *tap = kernel.eval(offset as f64 - frac);
            }
        }
        t
    });

    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as u64 {
        let pos = m * down;
        let base = (pos / up) as i64;
        let phase = (pos % up) as usize;
        let frac = phase as f64 / up as f64;
        let mut acc = 0.0;
        for j in 0..n_taps {
            let idx = base + j as i64 - reach + 1;
            if idx < 0 || idx >= n_in as i64 {
                continue;
            }
            let w = match &table {
                Some(t) => t[phase * n_taps + j],
                None => kernel.eval((j as i64 - reach + 1) as f64 - frac),
            };
            acc += w * input[idx as usize];
        }
        out.push(acc);
    }
    Ok(clip.with_samples(out, target_rate_hz))
}
