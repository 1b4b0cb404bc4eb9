use alloc::format;
use alloc::vec::Vec;

use super::tensor::{Param, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }
}

/// Moment estimates for every parameter, in parameter order.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, first: Vec::new(), second: Vec::new() }
    }
}

/// One bias-corrected Adam update of `params` from their accumulated
/// gradients. Moments are allocated lazily on the first step.
pub fn adam_step<T: Real>(params: &mut [&mut Param<T>], state: &mut AdamState<T>) -> Result<()> {
    if state.first.is_empty() {
        state.first = params.iter().map(|p| alloc::vec![T::zero(); p.value.len()]).collect();
        state.second = state.first.clone();
    }
    if state.first.len() != params.len() || params.iter().zip(&state.first).any(|(p, m)| p.value.len() != m.len()) {
        return Err(Error::Shape(format!("Adam state for {} tensors given {}", state.first.len(), params.len())));
    }
    state.t += 1;
    let c = state.config;
    let (b1, b2) = (T::of_f64(c.beta1), T::of_f64(c.beta2));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let t = state.t as i32;
    let correction1 = T::of_f64(1.0 - libm::pow(c.beta1, t as f64));
    let correction2 = T::of_f64(1.0 - libm::pow(c.beta2, t as f64));
    let lr = T::of_f64(c.lr);
    let eps = T::of_f64(c.eps);
    for ((p, m), v) in params.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        let grads = p.grad.as_slice().to_vec();
        for (((theta, g), mi), vi) in p.value.as_mut_slice().iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + one_b1 * g;
            *vi = b2 * *vi + one_b2 * g * g;
            let m_hat = *mi / correction1;
            let v_hat = *vi / correction2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
