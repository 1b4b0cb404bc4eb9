//! File formats, dataset ingestion and the `sonoforge` command line on top
//! of [`sonoforge_core`].
//!
//! - [`wav`]: RIFF/WAVE PCM16 and float32 decoding and encoding.
//! - [`index`]: dataset metadata CSV.
//! - [`ftr`]: FTR1 feature files.
//! - [`pgm`]: greyscale renderings.
//! - [`checkpoint`]: SFM1 model checkpoints.
//! - [`report`]: run report files and the comparison table.
//! - [`config`]: TOML run configuration.
//! - [`commands`]: the subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;
mod error;
pub mod ftr;
pub mod index;
pub mod pgm;
pub mod report;
pub mod wav;

pub use error::{Error, Result};
