use thiserror::Error;

/// Errors raised by the geometry, kernel, factorization and proxy routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coincident points: row {row}, column {col}")]
    CoincidentPoints { row: usize, col: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid shell geometry: r1={r1}, r2={r2} (need 0 < r1 < r2)")]
    InvalidGeometry { r1: f64, r2: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("design certification failed at (l={l}, m={m}): defect {defect:.3e} exceeds {tol:.1e}")]
    DesignCertification { l: usize, m: i64, defect: f64, tol: f64 },

    #[error("design generation did not converge after {iters} iterations (best residual {residual:.3e})")]
    DesignNotConverged { iters: usize, residual: f64 },

    #[error("no design of degree >= {degree} available: {reason}")]
    MissingDesign { degree: usize, reason: String },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
