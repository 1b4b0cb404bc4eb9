//! Oracle checks shared by the integration tests and the acceptance runner.
#![allow(dead_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonoforge_core::chroma::{self, CqtConfig, CqtKernelBank};
use sonoforge_core::dsp::{dft_naive, fft, Complex64, StftConfig};
use sonoforge_core::mel::{MelConfig, MelExtractor, MelFilterBank};
use sonoforge_core::nn::{
    conv2d, conv2d_backward, dense, dense_backward, maxpool2, maxpool2_backward, softmax_xent, BatchNormFreq, Mode,
    Tensor,
};
use sonoforge_core::rhythm::{cyclic_tempogram, TempogramConfig};
use sonoforge_core::AudioClip;

pub type Check = Result<String, String>;

pub const SR: u32 = 22_050;
pub const CLIP_LEN: usize = 110_250;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn clip(samples: Vec<f64>) -> AudioClip {
    AudioClip::new(samples, SR, "synthetic").unwrap()
}

pub fn tone(freqs: &[f64], amp: f64) -> AudioClip {
    clip((0..CLIP_LEN).map(|i| freqs.iter().map(|f| amp * (2.0 * PI * f * i as f64 / SR as f64).sin()).sum()).collect())
}

/// Single-sample clicks every `60/bpm` seconds.
pub fn click_train(bpm: f64) -> AudioClip {
    let period = 60.0 / bpm * SR as f64;
    let mut s = vec![0.0; CLIP_LEN];
    let mut t = period / 2.0;
    while (t as usize) < CLIP_LEN {
        s[t as usize] = 1.0;
        t += period;
    }
    clip(s)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn column_argmax(m: &sonoforge_core::Matrix, col: usize) -> usize {
    argmax(&m.column(col))
}

/// `fft` against `dft_naive` on `trials` random vectors for every power of
/// two in 64..=4096. Returns the worst `|Δ| / (1 + |X|)`.
pub fn fft_oracle(trials: usize) -> Check {
    let mut r = rng(0xF0F0);
    let mut worst = 0.0f64;
    for log in 6..=12 {
        let n = 1usize << log;
        for _ in 0..trials {
            let x: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
            let fast = fft(&x).map_err(|e| e.to_string())?;
            let slow = dft_naive(&x);
            for (a, b) in fast.iter().zip(&slow) {
                worst = worst.max((a - b).norm() / (1.0 + b.norm()));
            }
        }
    }
    if worst < 1e-9 {
        Ok(format!("worst relative error {worst:.2e}"))
    } else {
        Err(format!("worst relative error {worst:.2e} >= 1e-9"))
    }
}

const H: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Compares `analytic` with the central difference of `loss` over every
/// entry of `input`.
fn fd_compare(input: &Tensor<f64>, analytic: &Tensor<f64>, mut loss: impl FnMut(&Tensor<f64>) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..input.len() {
        let mut plus = input.clone();
        plus.as_mut_slice()[i] += H;
        let mut minus = input.clone();
        minus.as_mut_slice()[i] -= H;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * H);
        worst = worst.max(rel_err(analytic.as_slice()[i], numeric));
    }
    worst
}

pub fn grad_conv(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, h, w) = (2, r.random_range(3..6), r.random_range(3..6));
    let (cin, cout) = (r.random_range(1..4), r.random_range(1..4));
    let x = random_tensor(&mut r, &[n, h, w, cin]);
    let k = random_tensor(&mut r, &[3, 3, cin, cout]);
    let b = random_tensor(&mut r, &[cout]);
    let g = random_tensor(&mut r, &[n, h, w, cout]);
    let (dx, dk, db) = conv2d_backward(&x, &k, &g).unwrap();
    let ex = fd_compare(&x, &dx, |x| dot(&conv2d(x, &k, &b).unwrap(), &g));
    let ek = fd_compare(&k, &dk, |k| dot(&conv2d(&x, k, &b).unwrap(), &g));
    let eb = fd_compare(&b, &db, |b| dot(&conv2d(&x, &k, b).unwrap(), &g));
    ex.max(ek).max(eb)
}

pub fn grad_pool(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, h, w, c) = (2, r.random_range(2..7), r.random_range(2..7), r.random_range(1..3));
    // distinct values spaced well beyond the step so no window has a near tie
    let len = n * h * w * c;
    let mut values: Vec<f64> = (0..len).map(|i| i as f64 * 0.01).collect();
    for i in (1..len).rev() {
        values.swap(i, r.random_range(0..=i));
    }
    let x = Tensor::from_vec(&[n, h, w, c], values).unwrap();
    let (y, idx) = maxpool2(&x).unwrap();
    let g = random_tensor(&mut r, y.shape());
    let dx = maxpool2_backward(&g, &idx, x.shape()).unwrap();
    fd_compare(&x, &dx, |x| dot(&maxpool2(x).unwrap().0, &g))
}

pub fn grad_dense(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, d, u) = (r.random_range(1..5), r.random_range(1..8), r.random_range(1..6));
    let x = random_tensor(&mut r, &[n, d]);
    let wt = random_tensor(&mut r, &[d, u]);
    let b = random_tensor(&mut r, &[u]);
    let g = random_tensor(&mut r, &[n, u]);
    let (dx, dw, db) = dense_backward(&x, &wt, &g).unwrap();
    let ex = fd_compare(&x, &dx, |x| dot(&dense(x, &wt, &b).unwrap(), &g));
    let ew = fd_compare(&wt, &dw, |w| dot(&dense(&x, w, &b).unwrap(), &g));
    let eb = fd_compare(&b, &db, |b| dot(&dense(&x, &wt, b).unwrap(), &g));
    ex.max(ew).max(eb)
}

pub fn grad_batchnorm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, h, w) = (r.random_range(2..4), r.random_range(1..5), r.random_range(2..6));
    let x = random_tensor(&mut r, &[n, h, w, 1]);
    let gamma = random_tensor(&mut r, &[h]);
    let beta = random_tensor(&mut r, &[h]);
    let g = random_tensor(&mut r, &[n, h, w, 1]);
    let layer = |gamma: &Tensor<f64>, beta: &Tensor<f64>| {
        let mut bn = BatchNormFreq::new(h, "bn");
        bn.gamma.value = gamma.clone();
        bn.beta.value = beta.clone();
        bn
    };
    let train = Mode::Train { dropout_seed: 0 };
    let mut bn = layer(&gamma, &beta);
    bn.forward(x.clone(), train).unwrap();
    let dx = bn.backward(g.clone()).unwrap();
    let (dgamma, dbeta) = (bn.gamma.grad.clone(), bn.beta.grad.clone());
    let ex = fd_compare(&x, &dx, |x| dot(&layer(&gamma, &beta).forward(x.clone(), train).unwrap(), &g));
    let eg = fd_compare(&gamma, &dgamma, |gm| dot(&layer(gm, &beta).forward(x.clone(), train).unwrap(), &g));
    let eb = fd_compare(&beta, &dbeta, |bt| dot(&layer(&gamma, bt).forward(x.clone(), train).unwrap(), &g));
    ex.max(eg).max(eb)
}

pub fn grad_softmax_xent(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.random_range(1..6);
    let logits = Tensor::from_vec(&[n, 50], (0..n * 50).map(|_| r.random_range(-3.0..3.0)).collect()).unwrap();
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..50)).collect();
    let (_, grad) = softmax_xent(&logits, &labels).unwrap();
    fd_compare(&logits, &grad, |z| softmax_xent(z, &labels).unwrap().0)
}

/// Every layer over `seeds`. Returns the worst relative error per layer.
pub fn gradient_suite(seeds: std::ops::Range<u64>) -> Check {
    let layers: [(&str, fn(u64) -> f64); 5] = [
        ("conv", grad_conv),
        ("pool", grad_pool),
        ("dense", grad_dense),
        ("batchnorm", grad_batchnorm),
        ("softmax-xent", grad_softmax_xent),
    ];
    let mut parts = Vec::new();
    let mut failed = false;
    for (name, check) in layers {
        let worst = seeds.clone().map(check).fold(0.0f64, f64::max);
        failed |= !(worst < 1e-4);
        parts.push(format!("{name} {worst:.1e}"));
    }
    let msg = parts.join(", ");
    if failed { Err(msg) } else { Ok(msg) }
}

fn require(cond: bool, what: &str, failures: &mut Vec<String>) {
    if !cond {
        failures.push(what.to_string());
    }
}

/// Interior frames of a 216-frame analysis, away from edge padding and the
/// longest constant-Q atoms.
pub fn interior() -> std::ops::Range<usize> {
    12..204
}


pub fn check_chroma_stft_a440() -> bool {
    let p = chroma::chroma_stft(&tone(&[440.0], 0.5), &StftConfig::default()).unwrap();
    interior().all(|j| column_argmax(p.values(), j) == 9)
}

pub fn check_chroma_cqt_a440() -> bool {
    let p = chroma::chroma_cqt(&tone(&[440.0], 0.5), CqtConfig::default()).unwrap();
    interior().all(|j| column_argmax(p.values(), j) == 9)
}

pub fn check_cqt_c4_bin() -> bool {
    let c4 = 440.0 * 2f64.powf(-9.0 / 12.0);
    let x = chroma::cqt(&tone(&[c4], 0.5), CqtConfig::default()).unwrap();
    let mag = x.map(|z| z.norm());
    interior().all(|j| column_argmax(&mag, j) == 36)
}

/// Nonzero CENS frames have unit norm; returns the worst deviation.
pub fn cens_norm_deviation() -> f64 {
    let mut r = rng(41);
    let noise = clip((0..CLIP_LEN).map(|_| r.random_range(-0.3..0.3)).collect());
    let bank = CqtKernelBank::new(SR, CqtConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for c in [noise, tone(&[261.6, 392.0], 0.3)] {
        let raw = bank.chroma_profile(&c).unwrap();
        let cens = chroma::cens(&raw, 41, 1).unwrap();
        let v = cens.values();
        for j in 0..v.cols() {
            let norm = v.column(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                worst = worst.max((norm - 1.0).abs());
            }
        }
    }
    worst
}

fn oracle_hz_to_mel(f: f64) -> f64 {
    if f < 1000.0 { 3.0 * f / 200.0 } else { 15.0 + 27.0 * (f / 1000.0).ln() / 6.4f64.ln() }
}

/// Row properties of the default 128-band filterbank. Returns the failures.
pub fn mel_filterbank_failures() -> Vec<String> {
    let mut failures = Vec::new();
    let bank = MelFilterBank::new(SR, 2048, 128, 0.0, 11_025.0).unwrap();
    let w = bank.weights();
    require(w.shape() == (128, 1025), "shape 128x1025", &mut failures);
    let mut supports = Vec::new();
    for i in 0..w.rows() {
        let row = w.row(i);
        require(row.iter().all(|&v| v >= 0.0), "nonnegative", &mut failures);
        let nz: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
        if nz.is_empty() {
            failures.push(format!("row {i} is all zero"));
            continue;
        }
        let (first, last) = (nz[0], *nz.last().unwrap());
        require(nz.len() == last - first + 1, "contiguous support", &mut failures);
        let peak = argmax(row);
        require(
            row[first..=peak].windows(2).all(|p| p[0] <= p[1]) && row[peak..=last].windows(2).all(|p| p[0] >= p[1]),
            "unimodal",
            &mut failures,
        );
        if last > first + 1 {
            require(first < peak && peak < last, "peak strictly inside support", &mut failures);
        }
        supports.push((first, last));
    }
    for p in supports.windows(2) {
        require(p[1].0 <= p[0].1, "adjacent filters overlap", &mut failures);
    }
    let mels: Vec<f64> = bank.breakpoints_hz().iter().map(|&f| oracle_hz_to_mel(f)).collect();
    let step = (mels[mels.len() - 1] - mels[0]) / (mels.len() - 1) as f64;
    let dev = mels.iter().enumerate().map(|(i, m)| (m - mels[0] - i as f64 * step).abs()).fold(0.0, f64::max);
    require(dev < 1e-9, "breakpoints equally spaced in mel", &mut failures);
    failures.dedup();
    failures
}

/// Most frequent column argmax over interior frames.
pub fn dominant_tempo_bin(bpm: f64) -> usize {
    let mel = MelExtractor::new(SR, MelConfig::default()).unwrap();
    let cfg = TempogramConfig::default();
    let t = cyclic_tempogram(&click_train(bpm), &mel, &cfg).unwrap();
    let mut votes = vec![0usize; t.rows()];
    for j in 40..t.cols() - 40 {
        votes[column_argmax(&t, j)] += 1;
    }
    (0..votes.len()).max_by_key(|&b| (votes[b], std::cmp::Reverse(b))).unwrap()
}

pub fn cyclic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Pitch-class, CQT-bin, CENS, filterbank and tempogram checks.
pub fn feature_suite() -> Check {
    let mut failures = Vec::new();
    require(check_chroma_stft_a440(), "chroma-stft 440 Hz -> A", &mut failures);
    require(check_chroma_cqt_a440(), "chroma-cqt 440 Hz -> A", &mut failures);
    require(check_cqt_c4_bin(), "CQT C4 -> bin 36", &mut failures);
    let cens_dev = cens_norm_deviation();
    require(cens_dev < 1e-9, "CENS unit-norm frames", &mut failures);
    failures.extend(mel_filterbank_failures().into_iter().map(|f| format!("mel filterbank: {f}")));
    let n_bins = TempogramConfig::default().n_tempo_bins;
    let (b60, b120) = (dominant_tempo_bin(60.0), dominant_tempo_bin(120.0));
    require(cyclic_distance(b60, b120, n_bins) <= 1, "tempogram 60/120 BPM same bin", &mut failures);
    require(cyclic_distance(b120, 0, n_bins) <= 1, "tempogram 120 BPM -> bin 0", &mut failures);
    if failures.is_empty() {
        Ok(format!("pitch classes, CQT bin 36, CENS norm dev {cens_dev:.1e}, filterbank rows, tempo bins {b60}/{b120}"))
    } else {
        Err(failures.join("; "))
    }
}

/// Hand-walked plateau and early-stopping sequences.
pub fn callback_suite() -> Check {
    use sonoforge_core::train::{early_stopping, reduce_lr_on_plateau, EarlyStopping, ReduceLrOnPlateau};
    let mut failures = Vec::new();
    require(reduce_lr_on_plateau(&[3.0, 3.0, 3.0], 1e-3, 2, 0.5, 1e-5) == 5e-4, "[3,3,3] halves lr at epoch 3", &mut failures);
    require(reduce_lr_on_plateau(&[3.0, 3.0], 1e-3, 2, 0.5, 1e-5) == 1e-3, "[3,3] keeps lr", &mut failures);
    let decreasing: Vec<f64> = (0..50).map(|i| 10.0 - i as f64 * 0.1).collect();
    require(
        (1..=decreasing.len()).all(|k| {
            reduce_lr_on_plateau(&decreasing[..k], 1e-3, 2, 0.5, 1e-5) == 1e-3 && !early_stopping(&decreasing[..k], 6)
        }),
        "decreasing losses never change lr or stop",
        &mut failures,
    );
    require(reduce_lr_on_plateau(&[1.0, 1.0, 1.0], 1e-5, 2, 0.5, 1e-5) == 1e-5, "lr clamps at min_lr", &mut failures);

    let flat = [5.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0];
    let stops: Vec<usize> = (1..=flat.len()).filter(|&k| early_stopping(&flat[..k], 6)).collect();
    require(stops == [8], "[5,4,4,4,4,4,4,4] stops at epoch 8", &mut failures);
    let walk = [3.0, 2.0, 3.0, 3.0, 3.0, 2.5, 2.4, 2.3];
    let stops: Vec<usize> = (1..=walk.len()).filter(|&k| early_stopping(&walk[..k], 6)).collect();
    require(stops == [8], "[3,2,3,3,3,2.5,2.4,2.3] stops at epoch 8", &mut failures);

    // the stateful callbacks walk the same sequence epoch by epoch
    let (mut plateau, mut stop) = (ReduceLrOnPlateau::new(2, 0.5, 1e-5, 1e-4), EarlyStopping::new(6, 1e-4));
    let mut lr = 1e-3;
    let mut lrs = Vec::new();
    let mut stopped_at = None;
    for (epoch, &v) in walk.iter().enumerate() {
        lrs.push(lr);
        lr = plateau.step(v, lr);
        if stop.step(v) && stopped_at.is_none() {
            stopped_at = Some(epoch + 1);
        }
    }
    lrs.push(lr);
    require(lrs == [1e-3, 1e-3, 1e-3, 1e-3, 5e-4, 5e-4, 2.5e-4, 2.5e-4, 1.25e-4], "walk lr schedule", &mut failures);
    require(stopped_at == Some(8), "walk stops at epoch 8", &mut failures);
    if failures.is_empty() {
        Ok("halving after two flat epochs, stop after six, min_lr clamp".into())
    } else {
        Err(failures.join("; "))
    }
}
