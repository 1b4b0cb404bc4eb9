mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use sonoforge_core::audio::{resample, DatasetEntry};
use sonoforge_core::chroma::{self, cens_code, CqtConfig};
use sonoforge_core::dsp::{
    amplitude_to_db, fft, n_frames, power_spectrogram, stft, Complex64, Spectrogram, SpectrogramScale, StftConfig,
    WindowSpec,
};
use sonoforge_core::mel::{MelConfig, MelExtractor};
use sonoforge_core::nn::{dropout, maxpool2, softmax, Mode, Model, ModelSpec, Tensor};
use sonoforge_core::rhythm::{cyclic_tempogram, TempogramConfig};
use sonoforge_core::train::{split_dataset, ReduceLrOnPlateau};
use sonoforge_core::{AudioClip, DatasetIndex, Matrix};

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #[test]
    fn parseval(log in 1usize..11, seed in any::<u64>()) {
        let n = 1usize << log;
        let mut r = common::rng(seed);
        let x: Vec<Complex64> = (0..n).map(|_| {
            use rand::Rng;
            Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
        }).collect();
        let y = fft(&x).unwrap();
        let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        prop_assert!((ex - ey).abs() <= 1e-9 * ex.max(1e-300));
    }

    #[test]
    fn stft_is_linear(x in signal(3000), a in -4.0f64..4.0) {
        let w = WindowSpec::hann(256).unwrap();
        let s = stft(&x, 256, 64, w).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
        let t = stft(&scaled, 256, 64, w).unwrap();
        for (p, q) in s.as_slice().iter().zip(t.as_slice()) {
            prop_assert!((p * a - q).norm() <= 1e-12 * (1.0 + q.norm()));
        }
    }

    #[test]
    fn power_is_squared_modulus(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 12)) {
        let m = Matrix::from_vec(3, 4, v.iter().map(|&(re, im)| Complex64::new(re, im)).collect()).unwrap();
        let p = power_spectrogram(&m);
        for (z, &(re, im)) in p.values.as_slice().iter().zip(&v) {
            prop_assert!((z - (re * re + im * im)).abs() <= 1e-12 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn db_range_bounded(v in prop::collection::vec(0.0f64..1e6, 1..200), top in 1.0f64..120.0) {
        let n = v.len();
        let p = Spectrogram { values: Matrix::from_vec(1, n, v).unwrap(), scale: SpectrogramScale::Power };
        let d = amplitude_to_db(&p, 1.0, top).unwrap();
        let (lo, hi) = d.values.as_slice().iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        prop_assert!(hi - lo <= top + 1e-9);
    }

    #[test]
    fn frame_count_formula(len in 1usize..50_000, log in 6usize..12, hop in 1usize..1024) {
        let n_fft = 1 << log;
        prop_assert_eq!(n_frames(len, n_fft, hop, true).unwrap(), 1 + len / hop);
    }

    #[test]
    fn cens_quantizer_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cens_code(lo) <= cens_code(hi));
    }

    #[test]
    fn softmax_rows_sum_to_one(v in prop::collection::vec(-500.0f64..500.0, 150)) {
        let p = softmax(&Tensor::from_vec(&[3, 50], v).unwrap()).unwrap();
        for row in p.as_slice().chunks(50) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn dropout_infer_identity_and_train_scaling(v in prop::collection::vec(-5.0f64..5.0, 1..300), seed in any::<u64>()) {
        let x = Tensor::from_vec(&[v.len()], v.clone()).unwrap();
        prop_assert_eq!(&dropout(&x, 0.5, Mode::Infer).unwrap().0, &x);
        prop_assert_eq!(&dropout(&x, 0.0, Mode::Train { dropout_seed: seed }).unwrap().0, &x);
        let (y, _) = dropout(&x, 0.5, Mode::Train { dropout_seed: seed }).unwrap();
        for (a, b) in y.as_slice().iter().zip(&v) {
            prop_assert!(*a == 0.0 || *a == 2.0 * b);
        }
    }

    #[test]
    fn pooling_uses_ceiling(h in 1usize..40, w in 1usize..40) {
        let (y, _) = maxpool2(&Tensor::<f32>::zeros(&[1, h, w, 2])).unwrap();
        prop_assert_eq!(y.shape(), &[1, h.div_ceil(2), w.div_ceil(2), 2]);
    }

    #[test]
    fn split_partitions(n in 1usize..400, seed in any::<u64>(), stratified in any::<bool>()) {
        let entries = (0..n).map(|i| DatasetEntry {
            path: format!("{i}.wav"), label: i % 7, fold: 1, category: format!("c{}", i % 7),
        }).collect();
        let idx = DatasetIndex::new(entries).unwrap();
        let s = split_dataset(&idx, 0.8, seed, stratified).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        if !stratified {
            prop_assert_eq!(s.train.len(), (0.8 * n as f64).round() as usize);
        }
        prop_assert_eq!(s, split_dataset(&idx, 0.8, seed, stratified).unwrap());
    }

    #[test]
    fn lr_schedule_monotone(losses in prop::collection::vec(0.0f64..5.0, 1..80)) {
        let mut cb = ReduceLrOnPlateau::new(2, 0.5, 1e-5, 1e-4);
        let mut lr = 1e-3;
        for v in losses {
            let next = cb.step(v, lr);
            prop_assert!(next <= lr && next >= 1e-5);
            lr = next;
        }
    }

    #[test]
    fn resample_length(n in 1usize..5000, from in 1000u32..50_000, to in 1000u32..50_000) {
        let c = AudioClip::new(vec![0.1; n], from, "x").unwrap();
        let expected = (n as f64 * to as f64 / from as f64).round() as usize;
        match resample(&c, to) {
            Ok(y) => prop_assert_eq!(y.samples().len(), expected),
            Err(_) => prop_assert_eq!(expected, 0),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn chroma_argmax_amplitude_invariant(f in 100.0f64..2000.0, gain in 0.01f64..3.0) {
        let a = common::tone(&[f], 0.3);
        let b = a.scaled(gain).unwrap();
        let cfg = StftConfig::default();
        let (pa, pb) = (chroma::chroma_stft(&a, &cfg).unwrap(), chroma::chroma_stft(&b, &cfg).unwrap());
        let (qa, qb) = (chroma::chroma_cqt(&a, CqtConfig::default()).unwrap(), chroma::chroma_cqt(&b, CqtConfig::default()).unwrap());
        for j in common::interior() {
            prop_assert_eq!(common::argmax(&pa.values().column(j)), common::argmax(&pb.values().column(j)));
            prop_assert_eq!(common::argmax(&qa.values().column(j)), common::argmax(&qb.values().column(j)));
        }
        for v in pa.values().as_slice().iter().chain(qa.values().as_slice()) {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn cqt_octave_equivalence(semitone in 0i32..36) {
        let f = 65.406 * 2f64.powf(semitone as f64 / 12.0);
        let dom = |freq: f64| {
            let p = chroma::chroma_cqt(&common::tone(&[freq], 0.4), CqtConfig::default()).unwrap();
            common::argmax(&p.values().column(108))
        };
        prop_assert_eq!(dom(f), dom(2.0 * f));
    }

    #[test]
    fn tempogram_argmax_amplitude_invariant(bpm in 50.0f64..200.0, gain in 0.05f64..4.0) {
        let mel = MelExtractor::new(common::SR, MelConfig::default()).unwrap();
        let cfg = TempogramConfig::default();
        let a = common::click_train(bpm);
        let ta = cyclic_tempogram(&a, &mel, &cfg).unwrap();
        let tb = cyclic_tempogram(&a.scaled(gain).unwrap(), &mel, &cfg).unwrap();
        prop_assert!(ta.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
        for j in 0..ta.cols() {
            prop_assert_eq!(common::argmax(&ta.column(j)), common::argmax(&tb.column(j)));
        }
    }

    #[test]
    fn tempo_octave_equivalence(period in 6usize..22) {
        use sonoforge_core::rhythm::{autocorrelation_tempogram, fold_cyclic, NoveltyCurve};
        let cfg = TempogramConfig::default();
        let dom = |p: usize| {
            let nov = NoveltyCurve::new((0..216).map(|i| if i % p == 0 { 1.0 } else { 0.0 }).collect(), 43.0).unwrap();
            let t = fold_cyclic(&autocorrelation_tempogram(&nov, 216).unwrap(), 43.0, &cfg).unwrap();
            common::argmax(&t.column(108))
        };
        let (a, b) = (dom(2 * period), dom(period));
        prop_assert!(common::cyclic_distance(a, b, cfg.n_tempo_bins) <= 1, "{} vs {}", a, b);
    }

    #[test]
    fn mel_time_shift_equivariance(k in 1usize..20, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = common::rng(seed);
        let x: Vec<f64> = (0..common::CLIP_LEN).map(|_| r.random_range(-0.5..0.5)).collect();
        let shift = k * 512;
        let shifted: Vec<f64> = (0..x.len()).map(|i| x[(i + x.len() - shift) % x.len()]).collect();
        let mel = MelExtractor::new(common::SR, MelConfig::default()).unwrap();
        let (a, b) = (mel.mel_power(&common::clip(x)).unwrap(), mel.mel_power(&common::clip(shifted)).unwrap());
        for j in 4..a.cols() - 4 - k {
            for i in 0..a.rows() {
                prop_assert!((a[(i, j)] - b[(i, j + k)]).abs() <= 1e-9 * (1.0 + a[(i, j)].abs()));
            }
        }
    }

    #[test]
    fn model_stays_finite(scale in prop::sample::select(vec![0.0f32, 1e-6, 1.0, 1e4])) {
        let spec = ModelSpec { conv_filters: vec![4, 4, 4, 4], dense_units: 8, ..ModelSpec::standard(12, 40) };
        let mut m = Model::<f32>::new(spec, 2).unwrap();
        let x = Tensor::filled(&[2, 12, 40, 1], scale);
        for mode in [Mode::Train { dropout_seed: 1 }, Mode::Infer] {
            prop_assert!(m.forward(x.clone(), mode).unwrap().all_finite());
        }
    }
}

#[test]
fn sine_helper_is_a_sine() {
    let c = common::tone(&[1000.0], 1.0);
    assert!((c.samples()[5] - (2.0 * PI * 1000.0 * 5.0 / 22_050.0).sin()).abs() < 1e-15);
}
