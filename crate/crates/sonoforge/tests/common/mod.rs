//! Synthetic corpus in the dataset layout: `meta/esc50.csv` plus `audio/`.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sonoforge::wav::{write_wav, SampleFormat};
use sonoforge_core::AudioClip;

pub const SR: u32 = 22_050;
pub const LEN: usize = 110_250;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sonoforge"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env("SONOFORGE_THREADS", "1").output().expect("spawn sonoforge")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Clip `k` of class `label`: a harmonic tone with a class-specific pitch and
/// pulse rate, slightly detuned per take.
pub fn class_clip(label: usize, take: usize) -> AudioClip {
    let f0 = 110.0 * 2f64.powf(label as f64 * 5.0 / 12.0) * (1.0 + 0.003 * take as f64);
    let pulse = 1.0 + label as f64 * 0.75;
    let samples = (0..LEN)
        .map(|n| {
            let t = n as f64 / SR as f64;
            let env = 0.55 + 0.45 * (2.0 * PI * pulse * t).cos();
            let tone: f64 = (1..=3).map(|h| (2.0 * PI * f0 * h as f64 * t).sin() / h as f64).sum();
            0.25 * env * tone
        })
        .collect();
    AudioClip::new(samples, SR, format!("{label}-{take}")).unwrap()
}

pub struct Corpus {
    pub root: PathBuf,
    pub csv: PathBuf,
    pub audio: PathBuf,
    pub n_classes: usize,
    pub per_class: usize,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.n_classes * self.per_class
    }

    /// Writes a TOML config next to the corpus with the given `[training]` body.
    pub fn config(&self, name: &str, training: &str) -> PathBuf {
        let path = self.root.join(name);
        let text = format!(
            "[dataset]\ncsv = \"meta/esc50.csv\"\naudio_dir = \"audio\"\n\n[training]\n{training}\n\n[output]\nfeatures_dir = \"features\"\nruns_dir = \"runs\"\n"
        );
        fs::write(&path, text).unwrap();
        path
    }
}

pub fn write_corpus(root: &Path, n_classes: usize, per_class: usize) -> Corpus {
    let audio = root.join("audio");
    let meta = root.join("meta");
    fs::create_dir_all(&audio).unwrap();
    fs::create_dir_all(&meta).unwrap();
    let mut csv = String::from("filename,fold,target,category,esc10,src_file,take\n");
    for label in 0..n_classes {
        for take in 0..per_class {
            let name = format!("{}-{label}{take}-A-{label}.wav", take % 5 + 1);
            write_wav(audio.join(&name), &class_clip(label, take), SampleFormat::Pcm16).unwrap();
            writeln!(csv, "{name},{},{label},class{label},False,{label}{take},A", take % 5 + 1).unwrap();
        }
    }
    let csv_path = meta.join("esc50.csv");
    fs::write(&csv_path, csv).unwrap();
    Corpus { root: root.to_path_buf(), csv: csv_path, audio, n_classes, per_class }
}

/// Minimal binary PGM reader written from the format description:
/// magic, whitespace-separated width, height and maxval, one whitespace byte,
/// then `width · height` bytes.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), String> {
    let mut pos = 0;
    let mut token = || -> Result<String, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("not a P5 file".into());
    }
    let w: usize = token()?.parse().map_err(|_| "bad width")?;
    let h: usize = token()?.parse().map_err(|_| "bad height")?;
    let max: usize = token()?.parse().map_err(|_| "bad maxval")?;
    if max == 0 || max > 255 {
        return Err(format!("maxval {max} out of range"));
    }
    let data = &bytes[pos + 1..];
    if data.len() != w * h {
        return Err(format!("{} pixel bytes, expected {}", data.len(), w * h));
    }
    Ok((w, h, data.to_vec()))
}

pub type Check = Result<String, String>;

fn random_feature(rng: &mut rand_chacha::ChaCha8Rng) -> sonoforge_core::FeatureMatrix {
    use rand::Rng;
    use sonoforge_core::{FeatureKind, FeatureMatrix, FeatureParams, Matrix};
    let kind = FeatureKind::ALL[rng.random_range(0..6)];
    let (rows, cols) = (rng.random_range(1..130), rng.random_range(1..240));
    let values = (0..rows * cols).map(|_| rng.random_range(-1e4f32..1e4)).collect();
    let params = FeatureParams { sample_rate_hz: rng.random(), n_fft: rng.random(), hop: rng.random() };
    FeatureMatrix::new(kind, params, Matrix::from_vec(rows, cols, values).unwrap()).unwrap()
}

/// FTR1 files of 100 random matrices decode to bit-identical values.
pub fn ftr_round_trip(dir: &Path) -> Check {
    use rand::SeedableRng;
    use sonoforge::ftr::{load_feature, save_feature, HEADER_LEN};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    for i in 0..100 {
        let f = random_feature(&mut rng);
        let path = dir.join(format!("r{i}.ftr"));
        save_feature(&f, &path).map_err(|e| e.to_string())?;
        let size = fs::metadata(&path).unwrap().len() as usize;
        if size != HEADER_LEN + 4 * f.rows() * f.cols() {
            return Err(format!("matrix {i}: file is {size} bytes"));
        }
        let g = load_feature(&path).map_err(|e| e.to_string())?;
        let bits = |m: &sonoforge_core::FeatureMatrix| m.values().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if g.kind() != f.kind() || g.params() != f.params() || g.shape() != f.shape() || bits(&g) != bits(&f) {
            return Err(format!("matrix {i} changed in a round trip"));
        }
    }
    Ok("100 random matrices bit-exact".into())
}

/// A checkpoint restores every tensor bit for bit and the same predictions.
pub fn checkpoint_round_trip(dir: &Path) -> Check {
    use sonoforge::checkpoint::{load_checkpoint, save_checkpoint};
    use sonoforge_core::nn::{Mode, Model, ModelSpec, Tensor};
    use sonoforge_core::FeatureKind;
    let spec = ModelSpec { conv_filters: vec![3, 4, 5, 6], dense_units: 7, ..ModelSpec::standard(12, 30) };
    let mut model = Model::<f32>::new(spec, 11).map_err(|e| e.to_string())?;
    let x = Tensor::from_vec(&[3, 12, 30, 1], (0..3 * 12 * 30).map(|i| ((i * 37) % 101) as f32 / 50.0 - 1.0).collect()).unwrap();
    model.forward(x.clone(), Mode::Train { dropout_seed: 5 }).map_err(|e| e.to_string())?;
    let path = dir.join("m.sfm");
    save_checkpoint(&model, FeatureKind::ChromaCens, &path).map_err(|e| e.to_string())?;
    let (mut back, kind) = load_checkpoint(&path).map_err(|e| e.to_string())?;
    if kind != FeatureKind::ChromaCens || back.spec() != model.spec() {
        return Err("kind or architecture changed".into());
    }
    let flat = |m: &Model<f32>| {
        m.state().into_iter().map(|(n, t)| (n, t.shape().to_vec(), t.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>())).collect::<Vec<_>>()
    };
    if flat(&model) != flat(&back) {
        return Err("tensor state differs".into());
    }
    let a = model.forward(x.clone(), Mode::Infer).map_err(|e| e.to_string())?;
    let b = back.forward(x, Mode::Infer).map_err(|e| e.to_string())?;
    if a.as_slice().iter().map(|v| v.to_bits()).ne(b.as_slice().iter().map(|v| v.to_bits())) {
        return Err("restored model predicts differently".into());
    }
    Ok(format!("{} tensors bit-exact, identical logits", flat(&model).len()))
}

/// Rendered PGMs pass the independent parser with the expected geometry.
pub fn pgm_parses(dir: &Path) -> Check {
    use rand::SeedableRng;
    use sonoforge::pgm::render_pgm;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for i in 0..20 {
        let f = random_feature(&mut rng);
        let path = dir.join(format!("p{i}.pgm"));
        render_pgm(&f, &path).map_err(|e| e.to_string())?;
        let (w, h, px) = parse_pgm(&fs::read(&path).unwrap())?;
        if (h, w) != f.shape() {
            return Err(format!("image {i} is {w}x{h}, matrix is {:?}", f.shape()));
        }
        if f.rows() * f.cols() > 1 && !(px.contains(&0) && px.contains(&255)) {
            return Err(format!("image {i} does not span the grey range"));
        }
    }
    Ok("20 images parsed".into())
}
