//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RoughVolError {
    #[error("Invalid Hurst parameter: {0} (must be in (0, 0.5])")]
    InvalidHurst(f64),

    #[error("Invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("Kernel domain error: r = {0} (kernel is singular at 0 and undefined for r < 0)")]
    KernelDomain(f64),

    #[error(
        "Covariance matrix is not PSD within tolerance: eigenvalue {min_eig:e} \
         below threshold {threshold:e}"
    )]
    NotPsd { min_eig: f64, threshold: f64 },

    #[error("Quadrature did not converge: error estimate {est:e} exceeds {tol:e}")]
    QuadratureNonConvergence { est: f64, tol: f64 },

    #[error("Stride {stride} does not divide step count {n}")]
    BadStride { stride: usize, n: usize },

    #[error(
        "Memory budget exceeded: a single path block needs {need_mb} MB, \
         budget is {budget_mb} MB"
    )]
    BudgetExceeded { need_mb: usize, budget_mb: usize },

    #[error("Invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Rate fit for {group}: only {usable} usable points after dropping \
             CI-straddling rows (need at least 2)")]
    TooFewFitPoints { group: String, usable: usize },

    #[error("Negative variance path encountered (v = {0})")]
    NegativeVariance(f64),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("Parse error in {path} line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, RoughVolError>;

impl RoughVolError {
    /// CLI exit-code class: 1 for configuration/validation problems,
    /// 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RoughVolError::InvalidHurst(_)
            | RoughVolError::InvalidGrid(_)
            | RoughVolError::BadStride { .. }
            | RoughVolError::InvalidConfig(_) => 1,
            _ => 2,
        }
    }
}
