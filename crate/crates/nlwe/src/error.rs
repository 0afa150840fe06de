use thiserror::Error;

/// Errors surfaced by the library. The CLI maps variants onto its exit-code
/// contract (usage/validation/parse -> 3, I/O -> 2, hypothesis violation -> 4).
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-side misuse: mismatched dimensions, invalid arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input violates a mathematical precondition (e.g. non-Hermitian matrix).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input document.
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed input failing a physical invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The realization's statistics do not match the reference, so the
    /// self-testing theorem makes no claim about it.
    #[error("hypothesis violation: statistics deviate from reference by {deviation:.3e} at (x={x},y={y},z={z},a={a},b1={b1},b2={b2},c={c})")]
    HypothesisViolation {
        deviation: f64,
        x: usize,
        y: usize,
        z: usize,
        a: usize,
        b1: usize,
        b2: usize,
        c: usize,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
