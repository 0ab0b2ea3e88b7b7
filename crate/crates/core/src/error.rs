use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit codes shared by the CLI and the C ABI status values.
pub mod exit_code {
    pub const PASS: i32 = 0;
    pub const VERDICT_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} = {value} is outside the tabulated range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("covariance is not admissible: {0}")]
    Admissibility(String),

    #[error("capacity exceeded: {requested} path values requested, cap is {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("invalid covariance query: {0}")]
    InvalidQuery(String),

    #[error("map is not a bijection: {0}")]
    Bijectivity(String),

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    #[error("{quarantined} of {total} samples quarantined (limit 0.1%)")]
    Quarantine { quarantined: usize, total: usize },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => exit_code::USAGE,
            Error::Config { .. }
            | Error::Domain(_)
            | Error::OutOfRange { .. }
            | Error::Admissibility(_)
            | Error::Capacity { .. }
            | Error::InvalidQuery(_)
            | Error::Bijectivity(_)
            | Error::Json(_) => exit_code::CONFIG,
            Error::SingularConfiguration(_)
            | Error::Numerical(_)
            | Error::DegenerateEstimate(_)
            | Error::Quarantine { .. }
            | Error::Io(_) => exit_code::NUMERICAL,
        }
    }
}
