use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid stencil: {0}")]
    Stencil(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("energy shell is empty for window [{lo}, {hi}]")]
    EmptyShell { lo: f64, hi: f64 },
    #[error("window [{lo}, {hi}] contains a critical value (min |v| = {min_v:.3e})")]
    CriticalValue { lo: f64, hi: f64, min_v: f64 },
    #[error("momentum grid under-resolves symbol: tail mass {tail:.3e}")]
    Resolution { tail: f64 },
    #[error("{what} did not converge after {iters} iterations (last estimate {last:.6e}, residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        last: f64,
        residual: f64,
    },
    #[error("limiting absorption did not settle before eps = {eps_floor:.3e} (last change {last_change:.3e}); use a larger box")]
    LapNoConvergence { eps_floor: f64, last_change: f64 },
    #[error("solver breakdown: {0}")]
    Breakdown(String),
    #[error("box too small: {0}")]
    BoxTooSmall(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("ladder invariant violated: {0}")]
    Ladder(String),
    #[error("operator is not hermitian (drift {0:.3e})")]
    NotHermitian(f64),
    #[error("time grid leaves the reflection window: t = {t} > {limit}")]
    ReflectionWindow { t: f64, limit: f64 },
    #[error("fit needs at least {need} finite positive points, got {got}")]
    Fit { need: usize, got: usize },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Schema-level problems map to exit code 2, numerical ones to 3.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Invalid(_) | Error::Stencil(_) | Error::Hypothesis(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
