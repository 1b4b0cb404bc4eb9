use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{BatchNormFreq, Conv2d, Dense, Dropout, MaxPool2};
use super::tensor::{Param, Real, Tensor};
use super::Mode;
use crate::{Error, Result, N_CLASSES};

/// Network geometry. [`ModelSpec::standard`] is the fixed classifier:
/// frequency batch norm, four conv/pool stages, flatten, dense+dropout,
/// softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input_height: usize,
    pub input_width: usize,
    pub n_classes: usize,
    pub conv_filters: Vec<usize>,
    pub dense_units: usize,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    BatchNormFreq { height: usize },
    Conv3x3Relu { in_channels: usize, filters: usize },
    MaxPool2,
    Flatten,
    Dense { inputs: usize, units: usize, relu: bool },
    Dropout { rate: f64 },
}

impl LayerKind {
    /// One manifest line.
    pub fn describe(&self) -> String {
        match *self {
            LayerKind::BatchNormFreq { height } => format!("batchnorm_freq height={height}"),
            LayerKind::Conv3x3Relu { in_channels, filters } => {
                format!("conv2d kernel=3x3 in={in_channels} filters={filters} padding=same activation=relu")
            }
            LayerKind::MaxPool2 => "maxpool2d window=2x2 stride=2".into(),
            LayerKind::Flatten => "flatten".into(),
            LayerKind::Dense { inputs, units, relu } => {
                format!("dense in={inputs} units={units} activation={}", if relu { "relu" } else { "softmax" })
            }
            LayerKind::Dropout { rate } => format!("dropout rate={rate}"),
        }
    }
}

impl ModelSpec {
    pub fn standard(input_height: usize, input_width: usize) -> Self {
        Self {
            input_height,
            input_width,
            n_classes: N_CLASSES,
            conv_filters: vec![64, 128, 256, 256],
            dense_units: 256,
            dropout_rate: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_height == 0 || self.input_width == 0 {
            return Err(Error::Geometry(format!("input {}x{} has an empty axis", self.input_height, self.input_width)));
        }
        if self.n_classes < 2 || self.dense_units == 0 || self.conv_filters.contains(&0) {
            return Err(Error::Geometry("class, unit and filter counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Geometry(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    /// `(height, width, channels)` after the last pooling stage.
    pub fn pooled_map(&self) -> (usize, usize, usize) {
        let (mut h, mut w) = (self.input_height, self.input_width);
        for _ in &self.conv_filters {
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
        (h, w, self.conv_filters.last().copied().unwrap_or(1))
    }

    pub fn flat_size(&self) -> usize {
        let (h, w, c) = self.pooled_map();
        h * w * c
    }

    /// Ordered layer list.
    pub fn layers(&self) -> Vec<LayerKind> {
        let mut out = vec![LayerKind::BatchNormFreq { height: self.input_height }];
        let mut cin = 1;
        for &f in &self.conv_filters {
            out.push(LayerKind::Conv3x3Relu { in_channels: cin, filters: f });
            out.push(LayerKind::MaxPool2);
            cin = f;
        }
        out.push(LayerKind::Flatten);
        out.push(LayerKind::Dense { inputs: self.flat_size(), units: self.dense_units, relu: true });
        out.push(LayerKind::Dropout { rate: self.dropout_rate });
        out.push(LayerKind::Dense { inputs: self.dense_units, units: self.n_classes, relu: false });
        out
    }

    /// Trainable parameter count in closed form.
    pub fn param_count(&self) -> usize {
        let mut total = 2 * self.input_height;
        let mut cin = 1;
        for &f in &self.conv_filters {
            total += 9 * cin * f + f;
            cin = f;
        }
        total + (self.flat_size() + 1) * self.dense_units + (self.dense_units + 1) * self.n_classes
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    BatchNorm(BatchNormFreq<T>),
    Conv(Conv2d<T>),
    Pool(MaxPool2),
    Flatten(Vec<usize>),
    Dense(Dense<T>),
    Dropout(Dropout<T>),
}

/// The classifier with its parameters and per-layer backward caches.
#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ModelSpec,
    layers: Vec<Layer<T>>,
}

fn glorot<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of_f64((2.0 * rng.random::<f64>() - 1.0) * limit)).collect();
    Tensor::from_vec(shape, data).expect("shape product matches")
}

impl<T: Real> Model<T> {
    /// Glorot-uniform weights, zero biases, unit batch-norm scale.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let (mut conv_i, mut pool_i, mut dense_i) = (0, 0, 0);
        for kind in spec.layers() {
            layers.push(match kind {
                LayerKind::BatchNormFreq { height } => Layer::BatchNorm(BatchNormFreq::new(height, "bn")),
                LayerKind::Conv3x3Relu { in_channels, filters } => {
                    conv_i += 1;
                    let k = glorot(&mut rng, &[3, 3, in_channels, filters], 9 * in_channels, 9 * filters);
                    Layer::Conv(Conv2d::new(k, &format!("conv{conv_i}"))?)
                }
                LayerKind::MaxPool2 => {
                    pool_i += 1;
                    Layer::Pool(MaxPool2::default())
                }
                LayerKind::Flatten => Layer::Flatten(Vec::new()),
                LayerKind::Dense { inputs, units, relu } => {
                    dense_i += 1;
                    let w = glorot(&mut rng, &[inputs, units], inputs, units);
                    Layer::Dense(Dense::new(w, relu, &format!("dense{dense_i}"))?)
                }
                LayerKind::Dropout { rate } => Layer::Dropout(Dropout::new(rate)?),
            });
        }
        debug_assert_eq!(pool_i, spec.conv_filters.len());
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Sets every trainable parameter to zero (running statistics untouched).
    pub fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.value.fill(T::zero());
        }
    }

    pub fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, h, w, c) = x.dims4()?;
        if (h, w, c) != (self.spec.input_height, self.spec.input_width, 1) {
            return Err(Error::Geometry(format!(
                "input {h}x{w}x{c} does not match model input {}x{}x1",
                self.spec.input_height, self.spec.input_width
            )));
        }
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        let mut x = x;
        for layer in &mut self.layers {
            x = match layer {
                Layer::BatchNorm(l) => l.forward(x, mode)?,
                Layer::Conv(l) => l.forward(x, mode)?,
                Layer::Pool(l) => l.forward(x, mode)?,
                Layer::Flatten(shape) => {
                    *shape = x.shape().to_vec();
                    let n = shape[0];
                    let d = x.len() / n;
                    x.reshape(&[n, d])?
                }
                Layer::Dense(l) => l.forward(x, mode)?,
                Layer::Dropout(l) => l.forward(x, mode)?,
            };
        }
        Ok(x)
    }

    /// Backpropagates `grad_logits` through the last training-mode forward,
    /// accumulating into every parameter gradient. Returns the input gradient.
    pub fn backward(&mut self, grad_logits: Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad_logits;
        for layer in self.layers.iter_mut().rev() {
            g = match layer {
                Layer::BatchNorm(l) => l.backward(g)?,
                Layer::Conv(l) => l.backward(g)?,
                Layer::Pool(l) => l.backward(g)?,
                Layer::Flatten(shape) => g.reshape(shape)?,
                Layer::Dense(l) => l.backward(g)?,
                Layer::Dropout(l) => l.backward(g)?,
            };
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Trainable parameters in declaration order.
    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::BatchNorm(l) => out.extend([&mut l.gamma, &mut l.beta]),
                Layer::Conv(l) => out.extend([&mut l.kernel, &mut l.bias]),
                Layer::Dense(l) => out.extend([&mut l.weight, &mut l.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::BatchNorm(l) => out.extend([&l.gamma, &l.beta]),
                Layer::Conv(l) => out.extend([&l.kernel, &l.bias]),
                Layer::Dense(l) => out.extend([&l.weight, &l.bias]),
                _ => {}
            }
        }
        out
    }

    /// Every persisted tensor (parameters plus batch-norm running
    /// statistics) with its name, in declaration order.
    pub fn state(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::BatchNorm(l) => {
                    out.push((l.gamma.name.clone(), &l.gamma.value));
                    out.push((l.beta.name.clone(), &l.beta.value));
                    out.push(("bn.running_mean".into(), &l.running_mean));
                    out.push(("bn.running_var".into(), &l.running_var));
                }
                Layer::Conv(l) => {
                    out.push((l.kernel.name.clone(), &l.kernel.value));
                    out.push((l.bias.name.clone(), &l.bias.value));
                }
                Layer::Dense(l) => {
                    out.push((l.weight.name.clone(), &l.weight.value));
                    out.push((l.bias.name.clone(), &l.bias.value));
                }
                _ => {}
            }
        }
        out
    }

    /// Replaces every persisted tensor; names and shapes must match [`Model::state`].
    pub fn load_state(&mut self, tensors: Vec<(String, Tensor<T>)>) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = self.state().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        if expected.len() != tensors.len() {
            return Err(Error::Shape(format!("model has {} tensors, got {}", expected.len(), tensors.len())));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&tensors) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::Shape(format!("expected {name} {shape:?}, got {got_name} {:?}", t.shape())));
            }
        }
        let mut it = tensors.into_iter().map(|(_, t)| t);
        let mut next = || it.next().expect("length checked");
        for layer in &mut self.layers {
            match layer {
                Layer::BatchNorm(l) => {
                    l.gamma.value = next();
                    l.beta.value = next();
                    l.running_mean = next();
                    l.running_var = next();
                }
                Layer::Conv(l) => {
                    l.kernel.value = next();
                    l.bias.value = next();
                }
                Layer::Dense(l) => {
                    l.weight.value = next();
                    l.bias.value = next();
                }
                _ => {}
            }
        }
        Ok(())
    }
}
