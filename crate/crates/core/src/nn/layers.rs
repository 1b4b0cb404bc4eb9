use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{gemm, Param, Real, Tensor};
use super::Mode;
use crate::{Error, Result};

/// Batch-norm variance epsilon.
pub const BN_EPS: f64 = 1e-3;
/// Weight of the old running average per update.
pub const BN_MOMENTUM: f64 = 0.99;

// ---------------------------------------------------------------- conv 3x3

/// Writes the 3×3 zero-padded patches of one `H×W×Cin` image as rows of
/// `cols` (`H·W` × `9·Cin`, column order ky, kx, cin).
fn im2col<T: Real>(img: &[T], h: usize, w: usize, cin: usize, cols: &mut [T]) {
    let row_len = 9 * cin;
    for y in 0..h {
        for x in 0..w {
            let row = &mut cols[(y * w + x) * row_len..(y * w + x + 1) * row_len];
            for ky in 0..3 {
                let iy = y as isize + ky as isize - 1;
                for kx in 0..3 {
                    let ix = x as isize + kx as isize - 1;
                    let dst = &mut row[(ky * 3 + kx) * cin..(ky * 3 + kx + 1) * cin];
                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                        dst.fill(T::zero());
                    } else {
                        let src = (iy as usize * w + ix as usize) * cin;
                        dst.copy_from_slice(&img[src..src + cin]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch rows back onto the image.
fn col2im<T: Real>(cols: &[T], h: usize, w: usize, cin: usize, img: &mut [T]) {
    let row_len = 9 * cin;
    for y in 0..h {
        for x in 0..w {
            let row = &cols[(y * w + x) * row_len..(y * w + x + 1) * row_len];
            for ky in 0..3 {
                let iy = y as isize + ky as isize - 1;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = x as isize + kx as isize - 1;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = (iy as usize * w + ix as usize) * cin;
                    let src = &row[(ky * 3 + kx) * cin..(ky * 3 + kx + 1) * cin];
                    for (d, s) in img[dst..dst + cin].iter_mut().zip(src) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

fn conv_dims<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>) -> Result<(usize, usize, usize, usize, usize)> {
    let (n, h, w, cin) = x.dims4()?;
    match *kernel.shape() {
        [3, 3, kc, cout] if kc == cin => Ok((n, h, w, cin, cout)),
        _ => Err(Error::Shape(format!("kernel {:?} does not fit input {:?}", kernel.shape(), x.shape()))),
    }
}

/// 3×3 "same" cross-correlation, stride 1, zero padding 1. No activation.
pub fn conv2d<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, w, cin, cout) = conv_dims(x, kernel)?;
    if bias.len() != cout {
        return Err(Error::Shape(format!("bias of {} for {cout} filters", bias.len())));
    }
    let mut out = Tensor::zeros(&[n, h, w, cout]);
    let mut cols = vec![T::zero(); h * w * 9 * cin];
    let in_stride = h * w * cin;
    let out_stride = h * w * cout;
    for s in 0..n {
        im2col(&x.as_slice()[s * in_stride..(s + 1) * in_stride], h, w, cin, &mut cols);
        let y = &mut out.as_mut_slice()[s * out_stride..(s + 1) * out_stride];
        for row in y.chunks_exact_mut(cout) {
            row.copy_from_slice(bias.as_slice());
        }
        gemm(h * w, 9 * cin, cout, &cols, false, kernel.as_slice(), false, y, true);
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, h, w, cin, cout) = conv_dims(x, kernel)?;
    if grad_out.shape() != [n, h, w, cout] {
        return Err(Error::Shape(format!("output gradient {:?} for input {:?}", grad_out.shape(), x.shape())));
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut dk = Tensor::zeros(kernel.shape());
    let mut db = Tensor::zeros(&[cout]);
    let mut cols = vec![T::zero(); h * w * 9 * cin];
    let mut dcols = vec![T::zero(); h * w * 9 * cin];
    let in_stride = h * w * cin;
    let out_stride = h * w * cout;
    for s in 0..n {
        let dy = &grad_out.as_slice()[s * out_stride..(s + 1) * out_stride];
        for row in dy.chunks_exact(cout) {
            for (b, g) in db.as_mut_slice().iter_mut().zip(row) {
                *b += *g;
            }
        }
        im2col(&x.as_slice()[s * in_stride..(s + 1) * in_stride], h, w, cin, &mut cols);
        gemm(9 * cin, h * w, cout, &cols, true, dy, false, dk.as_mut_slice(), true);
        gemm(h * w, cout, 9 * cin, dy, false, kernel.as_slice(), true, &mut dcols, false);
        col2im(&dcols, h, w, cin, &mut dx.as_mut_slice()[s * in_stride..(s + 1) * in_stride]);
    }
    Ok((dx, dk, db))
}

pub fn relu_inplace<T: Real>(x: &mut Tensor<T>) {
    for v in x.as_mut_slice() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes `grad` wherever the ReLU output was not positive.
pub fn relu_backward_inplace<T: Real>(grad: &mut Tensor<T>, output: &Tensor<T>) {
    for (g, y) in grad.as_mut_slice().iter_mut().zip(output.as_slice()) {
        if *y <= T::zero() {
            *g = T::zero();
        }
    }
}

// ---------------------------------------------------------------- pooling

/// 2×2 max pooling, stride 2, partial windows at odd edges. Returns the
/// pooled tensor and the flat input index chosen for every output cell
/// (first maximum in row-major window order).
pub fn maxpool2<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let (n, h, w, c) = x.dims4()?;
    if h == 0 || w == 0 {
        return Err(Error::Geometry(format!("cannot pool a {h}x{w} map")));
    }
    if x.len() > u32::MAX as usize {
        return Err(Error::Shape("tensor too large to pool".into()));
    }
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Tensor::zeros(&[n, oh, ow, c]);
    let mut idx = vec![0u32; n * oh * ow * c];
    let xs = x.as_slice();
    let ys = out.as_mut_slice();
    for s in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = usize::MAX;
                    for iy in 2 * oy..(2 * oy + 2).min(h) {
                        for ix in 2 * ox..(2 * ox + 2).min(w) {
                            let i = ((s * h + iy) * w + ix) * c + ch;
                            if best == usize::MAX || xs[i] > xs[best] {
                                best = i;
                            }
                        }
                    }
                    let o = ((s * oh + oy) * ow + ox) * c + ch;
                    ys[o] = xs[best];
                    idx[o] = best as u32;
                }
            }
        }
    }
    Ok((out, idx))
}

/// Routes each output gradient to the input cell recorded by [`maxpool2`].
pub fn maxpool2_backward<T: Real>(grad_out: &Tensor<T>, indices: &[u32], input_shape: &[usize]) -> Result<Tensor<T>> {
    if grad_out.len() != indices.len() {
        return Err(Error::Shape("pooling gradient does not match recorded indices".into()));
    }
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.as_mut_slice();
    for (g, &i) in grad_out.as_slice().iter().zip(indices) {
        d[i as usize] += *g;
    }
    Ok(dx)
}

// ---------------------------------------------------------------- dense

/// `y = x·W + b`.
pub fn dense<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, d) = x.dims2()?;
    let (wd, u) = weight.dims2()?;
    if wd != d || bias.len() != u {
        return Err(Error::Shape(format!(
            "dense {:?} x {:?} + {:?}",
            x.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    let mut y = Tensor::zeros(&[n, u]);
    for row in y.as_mut_slice().chunks_exact_mut(u) {
        row.copy_from_slice(bias.as_slice());
    }
    gemm(n, d, u, x.as_slice(), false, weight.as_slice(), false, y.as_mut_slice(), true);
    Ok(y)
}

/// Gradients of [`dense`] with respect to input, weight and bias.
pub fn dense_backward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, d) = x.dims2()?;
    let (_, u) = weight.dims2()?;
    if grad_out.shape() != [n, u] {
        return Err(Error::Shape(format!("dense gradient {:?}, expected [{n}, {u}]", grad_out.shape())));
    }
    let mut dx = Tensor::zeros(&[n, d]);
    let mut dw = Tensor::zeros(&[d, u]);
    let mut db = Tensor::zeros(&[u]);
    gemm(n, u, d, grad_out.as_slice(), false, weight.as_slice(), true, dx.as_mut_slice(), false);
    gemm(d, n, u, x.as_slice(), true, grad_out.as_slice(), false, dw.as_mut_slice(), false);
    for row in grad_out.as_slice().chunks_exact(u) {
        for (b, g) in db.as_mut_slice().iter_mut().zip(row) {
            *b += *g;
        }
    }
    Ok((dx, dw, db))
}

// ---------------------------------------------------------------- dropout

/// Inverted dropout. Returns the output and, in training mode, the per-element
/// multiplier (0 or `1/(1−rate)`).
pub fn dropout<T: Real>(x: &Tensor<T>, rate: f64, mode: Mode) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    match mode {
        Mode::Infer => Ok((x.clone(), None)),
        Mode::Train { dropout_seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
            let keep = T::of_f64(1.0 / (1.0 - rate));
            let mask: Vec<T> =
                (0..x.len()).map(|_| if rng.random::<f64>() >= rate { keep } else { T::zero() }).collect();
            let mut y = x.clone();
            for (v, m) in y.as_mut_slice().iter_mut().zip(&mask) {
                *v *= *m;
            }
            Ok((y, Some(mask)))
        }
    }
}

// ---------------------------------------------------------------- layers

/// Batch normalization over the frequency axis: one mean/variance per input
/// row `h`, pooled over batch, time and channels.
#[derive(Debug, Clone)]
pub struct BatchNormFreq<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    cache: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Real> BatchNormFreq<T> {
    pub fn new(height: usize, prefix: &str) -> Self {
        Self {
            gamma: Param::new(format!("{prefix}.gamma"), Tensor::filled(&[height], T::one())),
            beta: Param::new(format!("{prefix}.beta"), Tensor::zeros(&[height])),
            running_mean: Tensor::zeros(&[height]),
            running_var: Tensor::filled(&[height], T::one()),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, h, w, c) = x.dims4()?;
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if h != self.gamma.value.len() {
            return Err(Error::Shape(format!("batch norm over {} rows given height {h}", self.gamma.value.len())));
        }
        let count = T::of_f64((n * w * c) as f64);
        let eps = T::of_f64(BN_EPS);
        let row_len = w * c;
        let (mean, var) = match mode {
            Mode::Train { .. } => {
                let mut mean = vec![T::zero(); h];
                let mut var = vec![T::zero(); h];
                for (i, chunk) in x.as_slice().chunks_exact(row_len).enumerate() {
                    mean[i % h] += chunk.iter().fold(T::zero(), |a, &v| a + v);
                }
                mean.iter_mut().for_each(|m| *m /= count);
                for (i, chunk) in x.as_slice().chunks_exact(row_len).enumerate() {
                    let m = mean[i % h];
                    var[i % h] += chunk.iter().fold(T::zero(), |a, &v| a + (v - m) * (v - m));
                }
                var.iter_mut().for_each(|v| *v /= count);
                let momentum = T::of_f64(BN_MOMENTUM);
                let rest = T::one() - momentum;
                for i in 0..h {
                    let rm = &mut self.running_mean.as_mut_slice()[i];
                    *rm = momentum * *rm + rest * mean[i];
                    let rv = &mut self.running_var.as_mut_slice()[i];
                    *rv = momentum * *rv + rest * var[i];
                }
                (mean, var)
            }
            Mode::Infer => (self.running_mean.as_slice().to_vec(), self.running_var.as_slice().to_vec()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut y = x;
        let mut xhat = vec![T::zero(); y.len()];
        for (i, (chunk, hat)) in y.as_mut_slice().chunks_exact_mut(row_len).zip(xhat.chunks_exact_mut(row_len)).enumerate() {
            let r = i % h;
            let (g, b) = (self.gamma.value.as_slice()[r], self.beta.value.as_slice()[r]);
            for (v, xh) in chunk.iter_mut().zip(hat.iter_mut()) {
                *xh = (*v - mean[r]) * inv_std[r];
                *v = g * *xh + b;
            }
        }
        self.cache = matches!(mode, Mode::Train { .. }).then_some((xhat, inv_std));
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: Tensor<T>) -> Result<Tensor<T>> {
        let (xhat, inv_std) = self.cache.take().ok_or_else(|| Error::Shape("batch norm backward without a training forward".into()))?;
        let (n, h, w, c) = grad_out.dims4()?;
        let row_len = w * c;
        let count = T::of_f64((n * w * c) as f64);
        let mut dgamma = vec![T::zero(); h];
        let mut dbeta = vec![T::zero(); h];
        for (i, (g, xh)) in grad_out.as_slice().chunks_exact(row_len).zip(xhat.chunks_exact(row_len)).enumerate() {
            for (gv, xv) in g.iter().zip(xh) {
                dgamma[i % h] += *gv * *xv;
                dbeta[i % h] += *gv;
            }
        }
        let mut dx = grad_out;
        for (i, (g, xh)) in dx.as_mut_slice().chunks_exact_mut(row_len).zip(xhat.chunks_exact(row_len)).enumerate() {
            let r = i % h;
            let scale = self.gamma.value.as_slice()[r] * inv_std[r] / count;
            for (gv, xv) in g.iter_mut().zip(xh) {
                *gv = scale * (count * *gv - dbeta[r] - *xv * dgamma[r]);
            }
        }
        for i in 0..h {
            self.gamma.grad.as_mut_slice()[i] += dgamma[i];
            self.beta.grad.as_mut_slice()[i] += dbeta[i];
        }
        Ok(dx)
    }
}

/// 3×3 same-padded convolution followed by ReLU.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub kernel: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
    output: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(kernel: Tensor<T>, prefix: &str) -> Result<Self> {
        let cout = match *kernel.shape() {
            [3, 3, _, cout] => cout,
            _ => return Err(Error::Shape(format!("conv kernel must be [3, 3, cin, cout], got {:?}", kernel.shape()))),
        };
        Ok(Self {
            kernel: Param::new(format!("{prefix}.kernel"), kernel),
            bias: Param::new(format!("{prefix}.bias"), Tensor::zeros(&[cout])),
            input: None,
            output: None,
        })
    }

    pub fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut y = conv2d(&x, &self.kernel.value, &self.bias.value)?;
        relu_inplace(&mut y);
        if matches!(mode, Mode::Train { .. }) {
            self.input = Some(x);
            self.output = Some(y.clone());
        }
        Ok(y)
    }

    pub fn backward(&mut self, mut grad_out: Tensor<T>) -> Result<Tensor<T>> {
        let (x, y) = self.input.take().zip(self.output.take()).ok_or_else(|| Error::Shape("conv backward without a training forward".into()))?;
        relu_backward_inplace(&mut grad_out, &y);
        drop(y);
        let (dx, dk, db) = conv2d_backward(&x, &self.kernel.value, &grad_out)?;
        accumulate(&mut self.kernel.grad, &dk);
        accumulate(&mut self.bias.grad, &db);
        Ok(dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    indices: Vec<u32>,
    input_shape: Vec<usize>,
}

impl MaxPool2 {
    pub fn forward<T: Real>(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (y, idx) = maxpool2(&x)?;
        if matches!(mode, Mode::Train { .. }) {
            self.indices = idx;
            self.input_shape = x.shape().to_vec();
        }
        Ok(y)
    }

    pub fn backward<T: Real>(&mut self, grad_out: Tensor<T>) -> Result<Tensor<T>> {
        let dx = maxpool2_backward(&grad_out, &self.indices, &self.input_shape)?;
        self.indices = Vec::new();
        Ok(dx)
    }
}

/// Fully connected layer, optionally followed by ReLU.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub relu: bool,
    input: Option<Tensor<T>>,
    output: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    pub fn new(weight: Tensor<T>, relu: bool, prefix: &str) -> Result<Self> {
        let (_, units) = weight.dims2()?;
        Ok(Self {
            weight: Param::new(format!("{prefix}.weight"), weight),
            bias: Param::new(format!("{prefix}.bias"), Tensor::zeros(&[units])),
            relu,
            input: None,
            output: None,
        })
    }

    pub fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut y = dense(&x, &self.weight.value, &self.bias.value)?;
        if self.relu {
            relu_inplace(&mut y);
        }
        if matches!(mode, Mode::Train { .. }) {
            self.input = Some(x);
            self.output = self.relu.then(|| y.clone());
        }
        Ok(y)
    }

    pub fn backward(&mut self, mut grad_out: Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| Error::Shape("dense backward without a training forward".into()))?;
        if let Some(y) = self.output.take() {
            relu_backward_inplace(&mut grad_out, &y);
        }
        let (dx, dw, db) = dense_backward(&x, &self.weight.value, &grad_out)?;
        accumulate(&mut self.weight.grad, &dw);
        accumulate(&mut self.bias.grad, &db);
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub rate: f64,
    mask: Option<Vec<T>>,
}

impl<T: Real> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (y, mask) = dropout(&x, self.rate, mode)?;
        self.mask = mask;
        Ok(y)
    }

    pub fn backward(&mut self, mut grad_out: Tensor<T>) -> Result<Tensor<T>> {
        if let Some(mask) = self.mask.take() {
            for (g, m) in grad_out.as_mut_slice().iter_mut().zip(&mask) {
                *g *= *m;
            }
        }
        Ok(grad_out)
    }
}

fn accumulate<T: Real>(dst: &mut Tensor<T>, src: &Tensor<T>) {
    for (d, s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
        *d += *s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::from_vec(&[1, 4, 5, 1], (0..20).map(|v| v as f64).collect()).unwrap();
        let mut k = Tensor::zeros(&[3, 3, 1, 1]);
        k.as_mut_slice()[4] = 1.0;
        assert_eq!(conv2d(&x, &k, &Tensor::zeros(&[1])).unwrap(), x);
    }

    #[test]
    fn ones_kernel_counts_overlap() {
        let x = Tensor::filled(&[1, 5, 5, 1], 1.0);
        let y = conv2d(&x, &Tensor::filled(&[3, 3, 1, 1], 1.0), &Tensor::zeros(&[1])).unwrap();
        let v = y.as_slice();
        assert_eq!(v[0], 4.0);
        assert_eq!(v[4], 4.0);
        assert_eq!(v[20], 4.0);
        assert_eq!(v[24], 4.0);
        assert_eq!(v[2], 6.0);
        for yy in 1..4 {
            for xx in 1..4 {
                assert_eq!(v[yy * 5 + xx], 9.0);
            }
        }
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor::<f64>::zeros(&[1, 4, 4, 2]);
        assert!(conv2d(&x, &Tensor::zeros(&[3, 3, 3, 1]), &Tensor::zeros(&[1])).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[3, 3, 2, 4]), &Tensor::zeros(&[3])).is_err());
        assert!(conv2d(&Tensor::<f64>::zeros(&[4, 4]), &Tensor::zeros(&[3, 3, 1, 1]), &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn pool_basics() {
        let (y, _) = maxpool2(&t(&[1, 2, 2, 1], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.as_slice(), &[4.0]);
        let mut shape = [1usize, 12, 7, 1];
        let mut chain = vec![12];
        for _ in 0..4 {
            let (y, _) = maxpool2(&Tensor::<f64>::zeros(&shape)).unwrap();
            shape = y.dims4().map(|(n, h, w, c)| [n, h, w, c]).unwrap();
            chain.push(shape[1]);
        }
        assert_eq!(chain, vec![12, 6, 3, 2, 1]);
    }

    #[test]
    fn pool_constant_routes_to_first_cell() {
        let x = Tensor::<f64>::filled(&[1, 3, 3, 1], 2.0);
        let (y, idx) = maxpool2(&x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 2.0));
        assert_eq!(idx, vec![0, 2, 6, 8]);
        let dx = maxpool2_backward(&Tensor::filled(&[1, 2, 2, 1], 1.0), &idx, x.shape()).unwrap();
        assert_eq!(dx.as_slice(), &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn dense_identity_and_bias() {
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.as_mut_slice()[i * 4] = 1.0;
        }
        assert_eq!(dense(&x, &eye, &Tensor::zeros(&[3])).unwrap(), x);
        let b = t(&[3], &[0.5, -1.0, 2.0]);
        let y = dense(&Tensor::zeros(&[2, 3]), &eye, &b).unwrap();
        assert_eq!(y.as_slice(), &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
        assert!(dense(&x, &Tensor::zeros(&[2, 3]), &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn dropout_modes() {
        let x = Tensor::from_vec(&[10_000], (0..10_000).map(|i| 1.0 + i as f64).collect()).unwrap();
        assert_eq!(dropout(&x, 0.5, Mode::Infer).unwrap().0, x);
        assert_eq!(dropout(&x, 0.0, Mode::Train { dropout_seed: 3 }).unwrap().0, x);
        let (y, _) = dropout(&x, 0.5, Mode::Train { dropout_seed: 42 }).unwrap();
        let mut survivors = 0;
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            if *b != 0.0 {
                survivors += 1;
                assert_eq!(*b, 2.0 * a);
            }
        }
        let frac = survivors as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&frac), "{frac}");
        assert!(dropout(&x, 1.0, Mode::Infer).is_err());
    }

    #[test]
    fn batchnorm_examples() {
        let mut bn = BatchNormFreq::<f64>::new(1, "bn");
        let y = bn.forward(t(&[1, 1, 2, 1], &[1.0, 3.0]), Mode::Train { dropout_seed: 0 }).unwrap();
        assert!((y.as_slice()[0] + 1.0).abs() < 1e-3 && (y.as_slice()[1] - 1.0).abs() < 1e-3);

        let mut bn = BatchNormFreq::<f64>::new(2, "bn");
        let x = t(&[2, 2, 2, 1], &[1.0, -1.0, 4.0, 4.0, -1.0, 1.0, 4.0, 4.0]);
        let y = bn.forward(x.clone(), Mode::Train { dropout_seed: 0 }).unwrap();
        // row 0 is already standardized; row 1 is constant
        for (i, (a, b)) in x.as_slice().iter().zip(y.as_slice()).enumerate() {
            if (i / 2) % 2 == 0 {
                assert!((a - b).abs() < 1e-3);
            } else {
                assert!(b.abs() < 1e-12);
            }
        }
        assert_eq!(bn.forward(Tensor::zeros(&[0, 2, 2, 1]), Mode::Infer), Err(Error::EmptyBatch));
    }

    #[test]
    fn batchnorm_running_stats() {
        let mut bn = BatchNormFreq::<f64>::new(1, "bn");
        bn.forward(t(&[1, 1, 2, 1], &[1.0, 3.0]), Mode::Train { dropout_seed: 0 }).unwrap();
        assert!((bn.running_mean.as_slice()[0] - 0.02).abs() < 1e-12);
        assert!((bn.running_var.as_slice()[0] - 1.0).abs() < 1e-12);
        let y = bn.forward(t(&[1, 1, 1, 1], &[0.02]), Mode::Infer).unwrap();
        assert!(y.as_slice()[0].abs() < 1e-12);
    }
}
