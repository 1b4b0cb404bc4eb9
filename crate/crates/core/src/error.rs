use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("dataset validation failed: {0}")]
    Validation(String),
    #[error("label {label} outside 0..{n_classes}")]
    LabelRange { label: usize, n_classes: usize },
    #[error("frame length {frame_len} exceeds padded signal length {padded_len}")]
    EmptyFrames { frame_len: usize, padded_len: usize },
    #[error("FFT length {0} is not a power of two")]
    FftSize(usize),
    #[error("invalid window: {0}")]
    Window(String),
    #[error("negative frequency {0} Hz")]
    NegativeFrequency(f64),
    #[error("degenerate mel filterbank: filter {row} has no support")]
    DegenerateFilterbank { row: usize },
    #[error("invalid size: {0}")]
    Size(String),
    #[error("constant-Q atom for {freq_hz:.3} Hz needs {atom_len} samples but the signal has {signal_len}")]
    AtomLength { freq_hz: f64, atom_len: usize, signal_len: usize },
    #[error("frequency range error: {0}")]
    Range(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
