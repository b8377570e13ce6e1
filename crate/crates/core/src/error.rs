use thiserror::Error;

pub type Result<T> = std::result::Result<T, MracError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MracError {
    #[error("polynomial {what} must have leading coefficient 1, found {found}")]
    NonMonic { what: &'static str, found: f64 },

    #[error("polynomial needs at least one coefficient")]
    EmptyPolynomial,

    #[error("degenerate polynomial: leading (z^0) coefficient is zero")]
    Degenerate,

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error("invalid reference model: {0}")]
    InvalidReference(String),

    #[error("inadmissible parameter set: {0}")]
    InadmissibleSet(String),

    #[error("minimum-phase assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("insufficient history: need {need} samples, have {have}")]
    InsufficientHistory { need: usize, have: usize },

    #[error("corrupted controller state: {0}")]
    CorruptedState(String),

    #[error("numeric abort at t = {t}: {what}")]
    NumericAbort { t: i64, what: String },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("trace: {0}")]
    Trace(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl MracError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        MracError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
