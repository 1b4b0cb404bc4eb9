//! Spectral and rhythm features for environmental audio, and a small
//! convolutional network trained on them.
//!
//! The crate is `no_std` + `alloc`. Everything here is pure computation on
//! in-memory buffers; file formats, WAV/CSV decoding and the command line live
//! in the `sonoforge` crate.
//!
//! Layout:
//! - [`audio`]: canonical mono clips, dataset index types, resampling.
//! - [`dsp`]: windows, FFT, STFT, power and decibel spectrograms.
//! - [`mel`]: mel filterbanks, mel spectrograms, DCT-II and MFCCs.
//! - [`chroma`]: STFT chroma, constant-Q transform, CQT chroma and CENS.
//! - [`rhythm`]: spectral-flux novelty and cyclic tempograms.
//! - [`feature`]: the tagged [`FeatureMatrix`] and a single extraction entry point.
//! - [`nn`]: tensors, layers, loss, Adam and the fixed CNN.
//! - [`train`]: split, callbacks, the training loop and run reports.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod audio;
pub mod chroma;
pub mod dsp;
mod error;
pub mod feature;
mod math;
pub mod matrix;
pub mod mel;
pub mod nn;
pub mod rhythm;
pub mod train;

pub use audio::{AudioClip, DatasetEntry, DatasetIndex};
pub use error::{Error, Result};
pub use feature::{FeatureConfig, FeatureKind, FeatureMatrix, FeatureParams};
pub use matrix::Matrix;

/// Canonical working sample rate of every extractor.
pub const CANONICAL_RATE_HZ: u32 = 22_050;

/// Canonical clip duration in seconds.
pub const CLIP_SECONDS: u32 = 5;

/// Number of classes in the corpus.
pub const N_CLASSES: usize = 50;
