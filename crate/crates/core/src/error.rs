use std::path::PathBuf;

use thiserror::Error;

use crate::training::TrainHistory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("negative entry {value} at ({row}, {col}) in a matrix required to be nonnegative")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error(
        "power iteration did not converge after {iterations} iterations (last estimate {estimate})"
    )]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is singular to tolerance (pivot {pivot:e} in column {column})")]
    Singular { pivot: f64, column: usize },

    #[error("subnet fails the weight-magnitude certificate (spectral radius of |W| = {rho})")]
    NotCertified { rho: f64 },

    #[error("contraction metric verification failed (max symmetric eigenvalue {max_eig:e})")]
    MetricVerification { max_eig: f64 },

    #[error("subnet spec {spec_index}: no certified sample in {attempts} attempts (last rho {last_rho})")]
    AttemptsExhausted {
        spec_index: usize,
        attempts: usize,
        last_rho: f64,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trainable weight nonzero outside its mask at ({row}, {col})")]
    MaskViolation { row: usize, col: usize },

    #[error("metric entry {index} is not positive ({value})")]
    NonPositiveMetric { index: usize, value: f64 },

    #[error(
        "slope bound g_psi is zero: coupling is linear, use the negative-feedback path instead"
    )]
    UnboundedSlope,

    #[error("state left the finite range at step {step}")]
    StateOverflow { step: usize },

    #[error("initial states are identical")]
    IdenticalInitialStates,

    #[error("{path}: {message} (offset {offset})")]
    Format {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence {
        epoch: usize,
        reason: String,
        history: Box<TrainHistory>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
