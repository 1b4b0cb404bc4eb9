//! Train/validation split, plateau callbacks, the training loop and its report.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{adam_step, softmax_xent, AdamConfig, AdamState, Mode, Model, Tensor};
use crate::{DatasetIndex, Error, FeatureKind, FeatureMatrix, Result};

/// A validation loss counts as an improvement only if it beats the best so
/// far by more than this (absolute).
pub const MIN_DELTA: f64 = 1e-4;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub feature_kind: FeatureKind,
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
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            feature_kind: FeatureKind::Mel,
            batch_size: 32,
            initial_lr: 1e-3,
            lr_patience: 2,
            lr_factor: 0.5,
            min_lr: 1e-5,
            stop_patience: 6,
            max_epochs: 100,
            min_delta: MIN_DELTA,
            train_frac: 0.8,
            stratified: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return fail(format!("initial_lr {} must be positive", self.initial_lr));
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.initial_lr) {
            return fail(format!("min_lr {} must be in (0, initial_lr]", self.min_lr));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return fail(format!("lr_factor {} must be in (0, 1)", self.lr_factor));
        }
        if self.lr_patience == 0 || self.lr_patience >= self.stop_patience {
            return fail(format!(
                "need 0 < lr_patience ({}) < stop_patience ({})",
                self.lr_patience, self.stop_patience
            ));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return fail(format!("min_delta {} must be non-negative", self.min_delta));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return fail(format!("train_frac {} must be in (0, 1)", self.train_frac));
        }
        Ok(())
    }
}

/// Positions into the index entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Seeded uniform shuffle, then the first `round(train_frac · N)` entries
/// train and the rest validate. With `stratified`, each class is shuffled
/// and cut separately.
pub fn split_dataset(index: &DatasetIndex, train_frac: f64, seed: u64, stratified: bool) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!("train_frac {train_frac} must be in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut = |n: usize| libm::round(train_frac * n as f64) as usize;
    if !stratified {
        let mut order: Vec<usize> = (0..index.len()).collect();
        order.shuffle(&mut rng);
        let validation = order.split_off(cut(order.len()));
        return Ok(Split { train: order, validation });
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in index.entries().iter().enumerate() {
        by_class.entry(e.label).or_default().push(i);
    }
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for mut members in by_class.into_values() {
        members.shuffle(&mut rng);
        let rest = members.split_off(cut(members.len()));
        train.extend(members);
        validation.extend(rest);
    }
    train.shuffle(&mut rng);
    validation.shuffle(&mut rng);
    Ok(Split { train, validation })
}

/// Best-so-far tracker shared by both callbacks.
#[derive(Debug, Clone, Copy)]
struct Plateau {
    best: f64,
    wait: usize,
    min_delta: f64,
}

impl Plateau {
    fn new(min_delta: f64) -> Self {
        Self { best: f64::INFINITY, wait: 0, min_delta }
    }

    fn observe(&mut self, loss: f64) {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.wait = 0;
        } else {
            self.wait += 1;
        }
    }
}

/// Multiplies the learning rate by `factor` (clamped at `min_lr`) after
/// `patience` epochs without improvement, then restarts the count.
#[derive(Debug, Clone, Copy)]
pub struct ReduceLrOnPlateau {
    patience: usize,
    factor: f64,
    min_lr: f64,
    state: Plateau,
}

impl ReduceLrOnPlateau {
    pub fn new(patience: usize, factor: f64, min_lr: f64, min_delta: f64) -> Self {
        Self { patience, factor, min_lr, state: Plateau::new(min_delta) }
    }

    /// Feeds one epoch's validation loss; returns the learning rate for the next epoch.
    pub fn step(&mut self, val_loss: f64, lr: f64) -> f64 {
        self.state.observe(val_loss);
        if self.state.wait >= self.patience {
            self.state.wait = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}

/// Signals a stop once `patience` epochs pass without improvement.
#[derive(Debug, Clone, Copy)]
pub struct EarlyStopping {
    patience: usize,
    state: Plateau,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self { patience, state: Plateau::new(min_delta) }
    }

    pub fn step(&mut self, val_loss: f64) -> bool {
        self.state.observe(val_loss);
        self.state.wait >= self.patience
    }
}

/// Learning rate after the last epoch of `history`, given the rate in
/// force during that epoch.
pub fn reduce_lr_on_plateau(history: &[f64], current_lr: f64, patience: usize, factor: f64, min_lr: f64) -> f64 {
    let mut cb = ReduceLrOnPlateau::new(patience, factor, min_lr, MIN_DELTA);
    let mut lr = current_lr;
    for &v in history {
        lr = cb.step(v, current_lr);
    }
    lr
}

/// Whether training stops after the last epoch of `history`.
pub fn early_stopping(history: &[f64], patience: usize) -> bool {
    let mut cb = EarlyStopping::new(patience, MIN_DELTA);
    history.iter().fold(false, |_, &v| cb.step(v))
}

/// Features of one kind and shape with their labels.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    ids: Vec<String>,
    features: Vec<FeatureMatrix>,
    labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(items: Vec<(String, FeatureMatrix, usize)>) -> Result<Self> {
        let Some((_, first, _)) = items.first() else {
            return Err(Error::Validation("labeled set is empty".into()));
        };
        let (kind, shape) = (first.kind(), first.shape());
        for (id, f, _) in &items {
            if f.kind() != kind || f.shape() != shape {
                return Err(Error::Geometry(format!(
                    "{id}: {} {}x{} differs from {kind} {}x{}",
                    f.kind(),
                    f.rows(),
                    f.cols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        let mut set = Self { ids: Vec::new(), features: Vec::new(), labels: Vec::new() };
        for (id, f, label) in items {
            set.ids.push(id);
            set.features.push(f);
            set.labels.push(label);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn kind(&self) -> FeatureKind {
        self.features[0].kind()
    }

    /// `(rows, cols)` of every feature.
    pub fn shape(&self) -> (usize, usize) {
        self.features[0].shape()
    }

    /// The items at `positions`, in that order.
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        let items = positions
            .iter()
            .map(|&p| (self.ids[p].clone(), self.features[p].clone(), self.labels[p]))
            .collect();
        Self::new(items)
    }

    /// NHWC batch `[n, rows, cols, 1]` and its labels.
    pub fn batch(&self, positions: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let (h, w) = self.shape();
        let mut data = Vec::with_capacity(positions.len() * h * w);
        for &p in positions {
            data.extend_from_slice(self.features[p].values().as_slice());
        }
        let x = Tensor::from_vec(&[positions.len(), h, w, 1], data).expect("shape product matches");
        (x, positions.iter().map(|&p| self.labels[p]).collect())
    }
}

/// Anything producing logits from NHWC feature batches.
pub trait Classifier {
    /// `(rows, cols)` of accepted features.
    fn input_shape(&self) -> (usize, usize);
    fn logits(&mut self, batch: Tensor<f32>) -> Result<Tensor<f32>>;
}

impl Classifier for Model<f32> {
    fn input_shape(&self) -> (usize, usize) {
        (self.spec().input_height, self.spec().input_width)
    }

    fn logits(&mut self, batch: Tensor<f32>) -> Result<Tensor<f32>> {
        self.forward(batch, Mode::Infer)
    }
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn count_correct(logits: &Tensor<f32>, labels: &[usize]) -> usize {
    let c = logits.shape()[1];
    logits.as_slice().chunks_exact(c).zip(labels).filter(|(row, &l)| argmax(row) == l).count()
}

/// Mean inference-mode cross-entropy and accuracy over `set`.
pub fn evaluate<C: Classifier + ?Sized>(model: &mut C, set: &LabeledSet, batch_size: usize) -> Result<(f64, f64)> {
    if set.shape() != model.input_shape() {
        let (h, w) = model.input_shape();
        return Err(Error::Geometry(format!(
            "features are {}x{} but the model expects {h}x{w}",
            set.shape().0,
            set.shape().1
        )));
    }
    let positions: Vec<usize> = (0..set.len()).collect();
    let (mut loss_sum, mut correct) = (0.0, 0);
    for chunk in positions.chunks(batch_size.max(1)) {
        let (x, y) = set.batch(chunk);
        let logits = model.logits(x)?;
        let (loss, _) = softmax_xent(&logits, &y)?;
        loss_sum += loss as f64 * chunk.len() as f64;
        correct += count_correct(&logits, &y);
    }
    let n = set.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Learning rate in force during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: TrainConfig,
    pub n_train: usize,
    pub n_val: usize,
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
}

const REPORT_MAGIC: &str = "sonoforge-run-report 1";

impl RunReport {
    pub fn feature_kind(&self) -> FeatureKind {
        self.config.feature_kind
    }

    pub fn epoch_count(&self) -> usize {
        self.epochs.len()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// Re-derives the callbacks from the recorded validation losses and
    /// checks that the epoch count, stop flag and learning rates agree.
    pub fn check_consistency(&self) -> Result<()> {
        let c = &self.config;
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.epochs.is_empty() || self.epochs.len() > c.max_epochs {
            return bad(format!("{} epochs recorded with max_epochs {}", self.epochs.len(), c.max_epochs));
        }
        let mut plateau = ReduceLrOnPlateau::new(c.lr_patience, c.lr_factor, c.min_lr, c.min_delta);
        let mut stopper = EarlyStopping::new(c.stop_patience, c.min_delta);
        let mut lr = c.initial_lr;
        for (i, e) in self.epochs.iter().enumerate() {
            if e.epoch != i + 1 {
                return bad(format!("epoch {} recorded at position {}", e.epoch, i + 1));
            }
            for acc in [e.train_acc, e.val_acc] {
                if !(0.0..=1.0).contains(&acc) {
                    return bad(format!("epoch {}: accuracy {acc} outside [0, 1]", e.epoch));
                }
            }
            if e.lr != lr {
                return bad(format!("epoch {}: lr {} but the schedule gives {lr}", e.epoch, e.lr));
            }
            lr = plateau.step(e.val_loss, lr);
            let stop = stopper.step(e.val_loss);
            let last = i + 1 == self.epochs.len();
            if stop != (last && self.stopped_early) {
                return bad(format!("epoch {}: early-stop rule disagrees with the record", e.epoch));
            }
        }
        Ok(())
    }

    /// Line-oriented text form. Numbers use the shortest representation that
    /// parses back to the same value.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_MAGIC}");
        let _ = writeln!(s, "[config]");
        let _ = writeln!(s, "feature_kind = {}", c.feature_kind);
        let _ = writeln!(s, "batch_size = {}", c.batch_size);
        let _ = writeln!(s, "initial_lr = {:?}", c.initial_lr);
        let _ = writeln!(s, "lr_patience = {}", c.lr_patience);
        let _ = writeln!(s, "lr_factor = {:?}", c.lr_factor);
        let _ = writeln!(s, "min_lr = {:?}", c.min_lr);
        let _ = writeln!(s, "stop_patience = {}", c.stop_patience);
        let _ = writeln!(s, "max_epochs = {}", c.max_epochs);
        let _ = writeln!(s, "min_delta = {:?}", c.min_delta);
        let _ = writeln!(s, "train_frac = {:?}", c.train_frac);
        let _ = writeln!(s, "stratified = {}", c.stratified);
        let _ = writeln!(s, "seed = {}", c.seed);
        let _ = writeln!(s, "[epochs]");
        let _ = writeln!(s, "epoch train_loss train_acc val_loss val_acc lr");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{} {:?} {:?} {:?} {:?} {:?}",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc, e.lr
            );
        }
        let _ = writeln!(s, "[summary]");
        let _ = writeln!(s, "n_train = {}", self.n_train);
        let _ = writeln!(s, "n_val = {}", self.n_val);
        let _ = writeln!(s, "epochs = {}", self.epochs.len());
        let _ = writeln!(s, "stopped_early = {}", self.stopped_early);
        if let Some(e) = self.last() {
            let _ = writeln!(s, "train_loss = {:?}", e.train_loss);
            let _ = writeln!(s, "train_acc = {:?}", e.train_acc);
            let _ = writeln!(s, "val_loss = {:?}", e.val_loss);
            let _ = writeln!(s, "val_acc = {:?}", e.val_acc);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Validation(format!("run report line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, REPORT_MAGIC)) => {}
            _ => return Err(bad(1, "missing report header")),
        }
        let mut section = "";
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut epochs = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = match line {
                    "[config]" => "config",
                    "[epochs]" => "epochs",
                    "[summary]" => "summary",
                    _ => return Err(bad(n, "unknown section")),
                };
                continue;
            }
            match section {
                "epochs" => {
                    if line.starts_with("epoch ") {
                        continue;
                    }
                    let f: Vec<&str> = line.split_whitespace().collect();
                    if f.len() != 6 {
                        return Err(bad(n, "expected 6 fields"));
                    }
                    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "bad number"));
                    epochs.push(EpochRecord {
                        epoch: f[0].parse().map_err(|_| bad(n, "bad epoch"))?,
                        train_loss: num(f[1])?,
                        train_acc: num(f[2])?,
                        val_loss: num(f[3])?,
                        val_acc: num(f[4])?,
                        lr: num(f[5])?,
                    });
                }
                "config" | "summary" => {
                    let (k, v) = line.split_once('=').ok_or_else(|| bad(n, "expected key = value"))?;
                    kv.insert(format!("{section}.{}", k.trim()), (n, v.trim().to_string()));
                }
                _ => return Err(bad(n, "content before first section")),
            }
        }
        fn get<T: core::str::FromStr>(kv: &BTreeMap<String, (usize, String)>, key: &str) -> Result<T> {
            let (n, v) = kv.get(key).ok_or_else(|| Error::Validation(format!("run report: missing {key}")))?;
            v.parse().map_err(|_| Error::Validation(format!("run report line {n}: bad value for {key}")))
        }
        let config = TrainConfig {
            feature_kind: get(&kv, "config.feature_kind")?,
            batch_size: get(&kv, "config.batch_size")?,
            initial_lr: get(&kv, "config.initial_lr")?,
            lr_patience: get(&kv, "config.lr_patience")?,
            lr_factor: get(&kv, "config.lr_factor")?,
            min_lr: get(&kv, "config.min_lr")?,
            stop_patience: get(&kv, "config.stop_patience")?,
            max_epochs: get(&kv, "config.max_epochs")?,
            min_delta: get(&kv, "config.min_delta")?,
            train_frac: get(&kv, "config.train_frac")?,
            stratified: get(&kv, "config.stratified")?,
            seed: get(&kv, "config.seed")?,
        };
        let report = RunReport {
            config,
            n_train: get(&kv, "summary.n_train")?,
            n_val: get(&kv, "summary.n_val")?,
            stopped_early: get(&kv, "summary.stopped_early")?,
            epochs,
        };
        let count: usize = get(&kv, "summary.epochs")?;
        if count != report.epochs.len() {
            return Err(Error::Validation(format!(
                "run report: summary says {count} epochs, {} recorded",
                report.epochs.len()
            )));
        }
        Ok(report)
    }
}

/// Trains with Adam on seeded mini-batches, evaluating on `val` after each
/// epoch. Learning-rate reduction runs before the early-stop check.
pub fn train(model: &mut Model<f32>, train_set: &LabeledSet, val: &LabeledSet, config: &TrainConfig) -> Result<RunReport> {
    train_with_progress(model, train_set, val, config, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with_progress(
    model: &mut Model<f32>,
    train_set: &LabeledSet,
    val: &LabeledSet,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<RunReport> {
    config.validate()?;
    if train_set.kind() != val.kind() || train_set.shape() != val.shape() {
        return Err(Error::Geometry("training and validation features differ in kind or shape".into()));
    }
    if train_set.kind() != config.feature_kind {
        return Err(Error::Config(format!(
            "configured for {} but features are {}",
            config.feature_kind,
            train_set.kind()
        )));
    }
    if train_set.shape() != model.input_shape() {
        let (h, w) = model.input_shape();
        return Err(Error::Geometry(format!(
            "features are {}x{} but the model expects {h}x{w}",
            train_set.shape().0,
            train_set.shape().1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut adam = AdamState::new(AdamConfig { lr: config.initial_lr, ..AdamConfig::default() });
    let mut plateau = ReduceLrOnPlateau::new(config.lr_patience, config.lr_factor, config.min_lr, config.min_delta);
    let mut stopper = EarlyStopping::new(config.stop_patience, config.min_delta);
    let mut lr = config.initial_lr;
    let mut report =
        RunReport { config: config.clone(), n_train: train_set.len(), n_val: val.len(), epochs: Vec::new(), stopped_early: false };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        adam.config.lr = lr;
        let (mut loss_sum, mut correct) = (0.0, 0);
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = train_set.batch(chunk);
            model.zero_grad();
            let logits = model.forward(x, Mode::Train { dropout_seed: rng.next_u64() })?;
            let (loss, grad) = softmax_xent(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step: step + 1 });
            }
            loss_sum += loss as f64 * chunk.len() as f64;
            correct += count_correct(&logits, &y);
            model.backward(grad)?;
            adam_step(&mut model.params_mut(), &mut adam)?;
        }
        let (val_loss, val_acc) = evaluate(model, val, config.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step: 0 });
        }
        let n = train_set.len() as f64;
        let record = EpochRecord { epoch, train_loss: loss_sum / n, train_acc: correct as f64 / n, val_loss, val_acc, lr };
        report.epochs.push(record);
        progress(&record);
        lr = plateau.step(val_loss, lr);
        if stopper.step(val_loss) {
            report.stopped_early = true;
            break;
        }
    }
    Ok(report)
}
