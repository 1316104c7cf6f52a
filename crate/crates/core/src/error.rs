use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation not available for this noise model: {0}")]
    UnsupportedNoise(String),

    #[error("point-mass noise has no density")]
    NoDensity,

    #[error("dataset has no responses y")]
    MissingResponses,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("characteristic function underflow at model m = {m}; model too large for this noise")]
    CharFnUnderflow { m: usize },

    #[error("overflow evaluating {what} at model m = {m}; model too large for this noise")]
    Overflow { what: &'static str, m: usize },

    #[error("quadrature failed in {what}: residual {residual:e} exceeds tolerance")]
    Quadrature { what: &'static str, residual: f64 },

    #[error("tail integral did not converge")]
    DivergentTail,

    #[error("grids are misaligned")]
    MisalignedGrids,

    #[error("model collection is empty")]
    EmptyModelCollection,

    #[error("all candidate models failed; first error: {0}")]
    AllModelsFailed(String),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("{failed} of {total} replications failed (limit 5%); first error: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("unsupported scenario combination: {0}")]
    UnsupportedScenario(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
