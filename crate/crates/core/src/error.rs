use thiserror::Error;

/// Errors raised by geometry construction, analysis and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("degenerate ground state (gap {gap:.3e})")]
    DegenerateState { gap: f64 },

    #[error("zero-mode space is not spanned by projectors (idempotency defect {0:.3e})")]
    NonProjector(f64),

    #[error("Weyl fit failed: {0}")]
    Fit(String),

    #[error("ground state degenerate on the integration sphere (min gap {min_gap:.3e})")]
    DegenerateOnSphere { min_gap: f64 },

    #[error("Chern integration grid too coarse (flux {raw:.6}, residual {residual:.3e}, largest plaquette phase {max_plaquette:.3})")]
    GridTooCoarse {
        raw: f64,
        residual: f64,
        max_plaquette: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than by the inputs' shape or syntax.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateState { .. }
                | Error::NonProjector(_)
                | Error::Fit(_)
                | Error::DegenerateOnSphere { .. }
                | Error::GridTooCoarse { .. }
                | Error::Numeric(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
