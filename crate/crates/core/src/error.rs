use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid phenotype: {0}")]
    InvalidPhenotype(String),
    #[error("covariate matrix is rank deficient at column {column} ({name})")]
    SingularDesign { column: usize, name: String },
    #[error("phenotype has zero residual variance under the null model")]
    DegenerateVariance,
    #[error("IRLS did not converge within {iterations} iterations (last max |delta| = {last_delta:e})")]
    Convergence {
        iterations: usize,
        last_delta: f64,
        /// max |Δα| per iteration
        trace: Vec<f64>,
    },
    #[error("binomial fit is separated: fitted mean {value:e} for sample {sample}")]
    Separation { sample: usize, value: f64 },
    #[error("invalid genotype data: {0}")]
    InvalidGenotype(String),
    #[error("no variants left after filtering")]
    NoVariants,
    #[error("invalid bandwidth {bandwidth}: {reason}")]
    InvalidBandwidth { bandwidth: usize, reason: &'static str },
    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate window: zero variance")]
    DegenerateWindow,
    #[error("no valid window to scan")]
    NoValidWindow,
    #[error("banded Cholesky failed at row {row}: matrix not positive definite")]
    NotPositiveDefinite { row: usize },
    #[error("invalid threshold configuration: {0}")]
    InvalidThreshold(String),
}

impl Error {
    /// Stable machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidPhenotype(_) => "invalid-phenotype",
            Error::SingularDesign { .. } => "singular-design",
            Error::DegenerateVariance => "degenerate-variance",
            Error::Convergence { .. } => "convergence",
            Error::Separation { .. } => "separation",
            Error::InvalidGenotype(_) => "invalid-genotype",
            Error::NoVariants => "no-variants",
            Error::InvalidBandwidth { .. } => "invalid-bandwidth",
            Error::InvalidConfig(_) => "invalid-config",
            Error::DegenerateWindow => "degenerate-window",
            Error::NoValidWindow => "no-valid-window",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::InvalidThreshold(_) => "invalid-threshold",
        }
    }
}
