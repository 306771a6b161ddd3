use thiserror::Error;

/// Errors raised by instance validation, the LP layer, the pseudo-distribution
/// engine and the solver pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    AsymmetricInput { i: usize, j: usize, a: f64, b: f64 },
    #[error("negative entry {value} at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal entry {value} at index {i}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("entry {value} at ({i}, {j}) outside [0, 1]")]
    WeightOutOfRange { i: usize, j: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("p must be an even integer >= 2, got {0}")]
    OddP(u32),
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("bad grid range [{lo}, {hi}] with step {step}")]
    BadRange { lo: f64, hi: f64, step: f64 },
    #[error("LP solver failed: {0}")]
    NumericalFailure(String),
    #[error("cut oracle still separating after {0} rounds")]
    CutLimitReached(usize),
    #[error("support of size {size} exceeds degree {degree}")]
    DegreeExceeded { size: usize, degree: usize },
    #[error("fixing of variable {0} is not a point of its alphabet")]
    FixingNotOnGrid(usize),
    #[error("no stored table covers support {0:?}")]
    MissingTable(Vec<usize>),
    #[error("conditioning on an event of probability {0:e}")]
    ZeroProbabilityEvent(f64),
    #[error("degree exhausted: cannot condition a degree-{0} pseudo-distribution")]
    DegreeExhausted(usize),
    #[error("seed size {size} too large (limit {limit})")]
    SizeTooLarge { size: usize, limit: usize },
    #[error("every anchored relaxation was infeasible")]
    AllAnchorsInfeasible,
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("weight matrix is not regular; offending rows {rows:?}")]
    NotRegular { rows: Vec<usize> },
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("degree {degree} too low; need at least {needed}")]
    DegreeTooLow { degree: usize, needed: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AsymmetricInput { .. } => "asymmetric_input",
            Error::NegativeEntry { .. } => "negative_entry",
            Error::NonzeroDiagonal { .. } => "nonzero_diagonal",
            Error::NonFinite { .. } => "non_finite",
            Error::WeightOutOfRange { .. } => "weight_out_of_range",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::OddP(_) => "odd_p",
            Error::BadEpsilon(_) => "bad_epsilon",
            Error::BadRange { .. } => "bad_range",
            Error::NumericalFailure(_) => "numerical_failure",
            Error::CutLimitReached(_) => "cut_limit_reached",
            Error::DegreeExceeded { .. } => "degree_exceeded",
            Error::FixingNotOnGrid(_) => "fixing_not_on_grid",
            Error::MissingTable(_) => "missing_table",
            Error::ZeroProbabilityEvent(_) => "zero_probability_event",
            Error::DegreeExhausted(_) => "degree_exhausted",
            Error::SizeTooLarge { .. } => "size_too_large",
            Error::AllAnchorsInfeasible => "all_anchors_infeasible",
            Error::Infeasible => "infeasible",
            Error::Unbounded => "unbounded",
            Error::NotRegular { .. } => "not_regular",
            Error::TooLarge(_) => "too_large",
            Error::DegreeTooLow { .. } => "degree_too_low",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }

    /// Errors caused by the invocation itself (bad parameters or input
    /// files) rather than by the solvers.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::AsymmetricInput { .. }
                | Error::NegativeEntry { .. }
                | Error::NonzeroDiagonal { .. }
                | Error::NonFinite { .. }
                | Error::WeightOutOfRange { .. }
                | Error::DimensionMismatch { .. }
                | Error::OddP(_)
                | Error::BadEpsilon(_)
                | Error::BadRange { .. }
                | Error::SizeTooLarge { .. }
                | Error::NotRegular { .. }
                | Error::DegreeTooLow { .. }
                | Error::InvalidParameter(_)
                | Error::Io(_)
                | Error::Parse(_)
        )
    }
}
