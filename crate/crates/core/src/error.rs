use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n too small: need n >= {min}, got {n}")]
    TooFewNodes { n: u32, min: u32 },

    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("outside validity domain: {0}")]
    OutsideValidity(String),

    #[error("numerically unstable, use integrate_conditional (n = {n} > {max})")]
    NumericallyUnstable { n: u32, max: u32 },

    #[error("no threshold: {0}")]
    NoThreshold(String),

    #[error("degenerate shadowing distribution (sigma1 = 0) has no density")]
    DegenerateDistribution,

    #[error("quadrature did not converge: estimated error {error:.3e} > tolerance {tolerance:.3e}")]
    NonConvergence { error: f64, tolerance: f64 },

    #[error("no sign change in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("empty grid")]
    EmptyGrid,

    #[error("unknown figure `{0}`")]
    UnknownFigure(String),

    #[error("config: {0}")]
    Config(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical kernels rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::NoSignChange { .. } | Error::NumericallyUnstable { .. }
        )
    }
}
