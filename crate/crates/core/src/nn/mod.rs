//! Dense tensors, the layers of the classifier, the loss and Adam.
//!
//! Activations use NHWC layout. Everything is generic over [`Real`] so the
//! same code trains in `f32` and is gradient-checked in `f64`.

mod adam;
mod layers;
mod loss;
mod model;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{
    conv2d, conv2d_backward, dense, dense_backward, dropout, maxpool2, maxpool2_backward, relu_backward_inplace,
    relu_inplace, BatchNormFreq, Conv2d, Dense, Dropout, MaxPool2, BN_EPS, BN_MOMENTUM,
};
pub use loss::{softmax, softmax_xent};
pub use model::{Layer, LayerKind, Model, ModelSpec};
pub use tensor::{Param, Real, Tensor};

/// Forward-pass mode. Training uses batch statistics and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { dropout_seed: u64 },
    Infer,
}
