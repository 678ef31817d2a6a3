use thiserror::Error;

use crate::regularize::PrecisionEstimate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample has {0} values; at least 2 are required")]
    EmptyOrTooShort(usize),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("symmetric eigendecomposition failed")]
    EigenFailure,

    #[error("robust scale of direction {0} is zero")]
    DegenerateDirection(usize),

    #[error("only {survivors} rows survived reweighting; at least {required} are required")]
    TooFewSurvivors { survivors: usize, required: usize },

    #[error("graphical lasso did not converge after {} sweeps (KKT residual {:.3e})", .estimate.outer_iters, .estimate.kkt_residual)]
    NotConverged { estimate: Box<PrecisionEstimate> },

    #[error("matrix is not positive definite")]
    NotPd,

    #[error("PRIAL baseline loss must be positive, got {0}")]
    ZeroBaseline(f64),

    #[error("contamination count {count} exceeds number of rows {n}")]
    CountExceedsN { count: usize, n: usize },

    #[error("Cholesky factorization failed")]
    FactorizationFailure,

    #[error("could not draw a positive definite scattered matrix after {0} attempts")]
    RetriesExhausted(usize),
}

impl Error {
    /// Whether the failure stems from the caller's input rather than from
    /// the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyOrTooShort(_)
                | Error::NonFinite(_)
                | Error::LengthMismatch(..)
                | Error::InvalidInput(_)
                | Error::CountExceedsN { .. }
        )
    }
}
