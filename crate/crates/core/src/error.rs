use alloc::string::String;

/// Errors raised by the mechanisms, samplers and solvers in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A factorization or eigensolver did not succeed.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A system that must be positive definite was not.
    #[error("matrix is not positive definite (smallest pivot {min_pivot:e})")]
    Singular { min_pivot: f64 },
    /// A data-dependent calibration step produced an unusable parameter.
    #[error("calibration failure: {0}")]
    Calibration(String),
    /// A branch that the algorithm's own guards exclude was reached.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
