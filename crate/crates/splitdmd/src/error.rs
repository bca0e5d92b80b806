use thiserror::Error;

/// Error type shared by all decomposition and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or grid dimensions are inconsistent.
    #[error("shape error: {0}")]
    Shape(String),

    /// A requested rank exceeds what the data supports.
    #[error("rank error: requested rank {requested}, achievable rank {achievable}")]
    Rank { requested: usize, achievable: usize },

    /// A time subinterval contains no snapshot columns.
    #[error("empty subinterval [{t_a}, {t_b}]: no snapshot columns")]
    EmptyInterval { t_a: f64, t_b: f64 },

    /// A split-line index is out of the valid interior range.
    #[error("index error: {0}")]
    Index(String),

    /// Time integration produced a non-finite value.
    #[error("integration blew up at t = {time}: non-finite solution value")]
    Integration { time: f64 },

    /// The spatial grid cannot resolve the solution.
    #[error("resolution error at t = {time}: {detail}")]
    Resolution { time: f64, detail: String },

    /// A configuration is internally inconsistent or infeasible.
    #[error("config error: {0}")]
    Config(String),

    /// The optimizer could not be started from the given initial guess.
    #[error("init error: {0}")]
    Init(String),

    /// Reading or writing a serialized artifact failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A serialized artifact could not be parsed.
    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
