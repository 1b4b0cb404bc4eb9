use alloc::format;

use super::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, c) = logits.dims2()?;
    let mut out = logits.clone();
    for row in out.as_mut_slice().chunks_exact_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

/// Sparse categorical cross-entropy averaged over the batch, and its
/// gradient with respect to the logits, `(softmax − onehot) / N`.
pub fn softmax_xent<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, c) = logits.dims2()?;
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::LabelRange { label, n_classes: c });
    }
    let mut grad = logits.clone();
    let mut total = 0.0f64;
    let inv_n = T::of_f64(1.0 / n as f64);
    for (row, &label) in grad.as_mut_slice().chunks_exact_mut(c).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum = row.iter().fold(T::zero(), |a, &v| a + (v - max).exp());
        let log_sum = sum.ln();
        total += (log_sum - (row[label] - max)).as_f64();
        for (j, v) in row.iter_mut().enumerate() {
            let p = (*v - max - log_sum).exp();
            let target = if j == label { T::one() } else { T::zero() };
            *v = (p - target) * inv_n;
        }
    }
    Ok((T::of_f64(total / n as f64), grad))
}
