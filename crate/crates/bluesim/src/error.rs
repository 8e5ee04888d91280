//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the estimation, allocation, and codebook machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// Two inputs that must describe the same network disagree on length.
    #[error("dimension mismatch: expected {expected} sensors, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Every sensor is silent (`a_i * g_i * h_i == 0` for all i), so the
    /// estimator normalizer vanishes and no estimate exists.
    #[error("all sensors silent: estimator normalizer is zero")]
    AllSilent,

    /// `rho(n)` was asked to include a sensor with a zero composite SNR,
    /// which would divide by zero.
    #[error("rho: delta[{index}] is zero within the first {n} sorted sensors")]
    ZeroDelta { n: usize, index: usize },

    /// Codebook training needs at least `2^L` samples to pick distinct
    /// initial codewords.
    #[error("insufficient training data: {samples} samples for {codewords} codewords")]
    InsufficientTrainingData { samples: usize, codewords: usize },

    /// A quantization cell has no samples, so it has no centroid; the
    /// trainer reacts by reseeding the cell's codeword.
    #[error("empty quantization cell")]
    EmptyCell,

    /// Configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A persisted file did not match the expected format.
    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    /// Underlying filesystem failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 runtime/numeric, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::Io(_) => 3,
            Error::Parse { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
