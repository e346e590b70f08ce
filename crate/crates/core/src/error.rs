use thiserror::Error;

/// Errors raised by model construction, estimation and sampling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet needs at least two distinct symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("duplicate alphabet symbol {0:?}")]
    DuplicateSymbol(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("symbol index {index} out of range for alphabet of size {size}")]
    SymbolOutOfRange { index: usize, size: usize },

    #[error("invalid lag set: {0}")]
    InvalidLags(String),
    #[error("lag set must not be empty")]
    EmptyLags,

    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid probability values: {0}")]
    InvalidProbability(String),
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("conflicting model parameters: {0}")]
    Conflict(String),

    #[error("transition table would have {rows} rows, budget is {budget}")]
    RowBudget { rows: u128, budget: u64 },
    #[error("context over {lags} lags with alphabet size {alphabet} does not fit a 64-bit code")]
    ContextOverflow { lags: usize, alphabet: usize },

    #[error("order {d} must satisfy 1 <= d < n = {n}")]
    InvalidOrder { d: usize, n: usize },
    #[error("lag {lag} exceeds order {d}")]
    LagExceedsOrder { lag: usize, d: usize },
    #[error("lag {0} is already in the conditioning set")]
    LagInSet(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("context has no observations")]
    UnseenContext,

    #[error("perfect sampling requires λ₀ > 0")]
    NoIndependentPart,
    #[error("perfect sampling exceeded the cap of {0} resolution steps")]
    StepCap(u64),

    #[error("{candidates} candidate sets exceed the budget of {budget}")]
    CandidateBudget { candidates: u128, budget: u64 },

    #[error("model assigns zero probability to the observed transition at time {0}")]
    ZeroLikelihood(usize),

    #[error("json: {0}")]
    Json(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
