use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Broad classification used by front-ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
    Budget,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),

    #[error("basis group (interaction {interaction}, degree {degree}) is empty")]
    EmptyGroup { interaction: usize, degree: usize },

    #[error("response has no covariance with the predictor block")]
    NoCovariance,

    #[error("latent score has zero norm")]
    DegenerateScore,

    #[error("leverage of sample {index} is {leverage} (saturated); too many components for N")]
    SaturatedLeverage { index: usize, leverage: f64 },

    #[error("ill-conditioned matrix ({what}): condition number {condition:e}")]
    Conditioning { what: &'static str, condition: f64 },

    #[error("root finding failed for {what}: bracket [{lo}, {hi}] does not contain a sign change")]
    RootBracket { what: &'static str, lo: f64, hi: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("no variable has a total index above threshold {threshold}; lower the screening threshold")]
    NothingRetained { threshold: f64 },

    #[error("memory budget exceeded: {required} bytes needed, limit {limit} bytes")]
    Budget { required: u128, limit: u128 },

    #[error("model definition error: {0}")]
    ModelDefinition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Input(_)
            | Error::DimensionMismatch { .. }
            | Error::EmptyGroup { .. }
            | Error::NothingRetained { .. }
            | Error::ModelDefinition(_)
            | Error::Io(_)
            | Error::Format(_) => ErrorKind::Input,
            Error::Budget { .. } => ErrorKind::Budget,
            _ => ErrorKind::Numeric,
        }
    }

    pub(crate) fn input(msg: impl fmt::Display) -> Self {
        Error::Input(msg.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Format(e.to_string())
    }
}
