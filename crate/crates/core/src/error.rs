//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("orbital index {index} out of range for {n_spatial} spatial orbitals")]
    IndexOutOfRange { index: usize, n_spatial: usize },

    #[error("duplicate orbital index {0} in occupation list")]
    DuplicateIndex(usize),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("spin channels wider than 64 spatial orbitals are unsupported (got {0})")]
    BasisTooWide(usize),

    #[error("bitstring has length {got}, expected {expected} spin orbitals")]
    BitstringLength { got: usize, expected: usize },

    #[error("invalid character {0:?} in bitstring (expected '0' or '1')")]
    BitstringChar(char),

    #[error("determinants belong to different particle sectors")]
    SectorMismatch,

    #[error("symmetry space dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: u128, cap: u128 },

    #[error("fcidump parse error at line {line}: {msg}")]
    FcidumpParse { line: usize, msg: String },

    #[error("open-shell references are unsupported (n_alpha != n_beta)")]
    OpenShell,

    #[error(
        "degenerate denominator for excitation ({i},{j}) -> ({a},{b}): |delta| = {delta:.3e}"
    )]
    DegenerateDenominator { i: usize, j: usize, a: usize, b: usize, delta: f64 },

    #[error("tensor symmetry violated: {0}")]
    SymmetryViolation(String),

    #[error("empty configuration set")]
    EmptyConfigurationSet,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no configuration above the coefficient threshold; training set is empty")]
    EmptyTrainingSet,

    #[error("noise probability {0} outside [0, 1]")]
    InvalidNoise(f64),

    #[error("counts parse error at line {line}: {msg}")]
    CountsParse { line: usize, msg: String },

    #[error("empty dominant set after coefficient filtering")]
    EmptyDominantSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
