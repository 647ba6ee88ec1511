use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("division by zero")]
    DivisionByZero,

    #[error("mod by zero")]
    ModByZero,

    #[error("policy evaluated to NaN for server {server}")]
    NotANumber { server: usize },

    #[error("design parameter `{0}` is not defined")]
    UndefinedParam(String),

    #[error("policy evaluation failed at request {request_index}: {source}")]
    PolicyAborted {
        request_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no samples after warm-up")]
    EmptySample,

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("empty measurement window [{from}, {to}]")]
    ZeroWindow { from: f64, to: f64 },

    #[error("expected a positive value, got {0}")]
    NonPositive(f64),

    #[error("unstable queue: utilisation {rho} >= 1")]
    Unstable { rho: f64 },

    #[error("inconsistent trace: {0}")]
    InconsistentTrace(String),

    #[error("empty design dimension `{0}`")]
    EmptyDimension(&'static str),

    #[error("internal logic error: {0}")]
    Logic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::UnknownIdentifier { .. } => "unknown_identifier",
            Error::DivisionByZero => "division_by_zero",
            Error::ModByZero => "mod_by_zero",
            Error::NotANumber { .. } => "not_a_number",
            Error::UndefinedParam(_) => "undefined_param",
            Error::PolicyAborted { .. } => "policy_aborted",
            Error::Config(_) => "config",
            Error::EmptySample => "empty_sample",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::ZeroWindow { .. } => "zero_window",
            Error::NonPositive(_) => "non_positive",
            Error::Unstable { .. } => "unstable",
            Error::InconsistentTrace(_) => "inconsistent_trace",
            Error::EmptyDimension(_) => "empty_dimension",
            Error::Logic(_) => "logic",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
