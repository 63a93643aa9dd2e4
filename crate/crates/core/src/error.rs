use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown coefficient catalog id `{0}`")]
    UnknownCoefficient(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ellipticity violated: {0}")]
    EllipticityViolated(String),

    #[error("mesh resolution {n} below the minimum of {min}")]
    ResolutionTooSmall { n: usize, min: usize },

    #[error("oscillation unresolved: mesh size h = {h:.3e} exceeds eps/2 = {half_eps:.3e}")]
    OscillationUnresolved { h: f64, half_eps: f64 },

    #[error("non-finite coefficient sample at y = {0:?}")]
    NonFiniteCoefficient([f64; 2]),

    #[error("incompatible Neumann data: per-component load residual {residual:?}")]
    IncompatibleData { residual: Vec<f64> },

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("field and mesh do not match")]
    MeshMismatch,

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("source node {node} lies too close to the boundary (delta = {delta:.3e}, need {min:.3e})")]
    SourceTooClose { node: usize, delta: f64, min: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("norm kind `{0}` is incompatible with the given input")]
    IncompatibleNorm(String),

    #[error("only {found} admissible point pairs, need at least {needed}")]
    TooFewPairs { found: usize, needed: usize },

    #[error("undefined ratio: denominator {0:.3e}")]
    UndefinedRatio(f64),

    #[error("rate fit needs positive values, got {0}")]
    NonPositiveValue(f64),

    #[error("rate fit needs at least {needed} points, got {found}")]
    TooFewPoints { found: usize, needed: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("corrector file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
