use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution or model parameter lies outside its domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A predictive distribution would have non-positive variance.
    #[error("degenerate predictive variance {variance}{}", replicate.map(|k| format!(" (replicate {k})")).unwrap_or_default())]
    DegenerateVariance {
        variance: f64,
        replicate: Option<usize>,
    },

    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// All ensemble means are identical, so the slope is not identifiable.
    #[error("degenerate design: ensemble means have zero spread")]
    DegenerateDesign,

    /// Argument outside the domain of a function (e.g. a probability not in (0, 1)).
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The score is not defined for this forecast (e.g. CRPS of a t with nu <= 1).
    #[error("score undefined: {0}")]
    UndefinedScore(String),

    /// Forecast density is zero at the observation, so Ignorance is infinite.
    #[error("infinite ignorance: zero forecast density at y = {y}")]
    ZeroDensity { y: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("bootstrap failed: replicate {replicate} exhausted {attempts} draws without a usable resample")]
    BootstrapFailure { replicate: usize, attempts: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no successful folds to aggregate ({failures} failed)")]
    EmptyResult { failures: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end: 2 for input
    /// problems, 3 for numeric or convergence problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::InsufficientData { .. }
            | Error::Domain(_)
            | Error::ParameterDomain(_) => 2,
            Error::DegenerateVariance { .. }
            | Error::DegenerateDesign
            | Error::UndefinedScore(_)
            | Error::ZeroDensity { .. }
            | Error::Numeric(_)
            | Error::BootstrapFailure { .. }
            | Error::EmptyResult { .. } => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
