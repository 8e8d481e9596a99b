use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("dimension {n} exceeds the brute-force cap of {cap}; use is_tp_fast")]
    Capacity { n: usize, cap: usize },

    #[error("state {state:?} lies outside the domain")]
    Domain { state: Vec<f64> },

    #[error("integration diverged after t = {last_valid_time}")]
    Diverged { last_valid_time: f64 },

    #[error("trajectory left the invariant box at t = {time}: x[{coord}] = {value}")]
    InvarianceViolation { time: f64, coord: usize, value: f64 },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable tag of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::IndexOutOfRange(_) => "index_out_of_range",
            Error::Capacity { .. } => "capacity",
            Error::Domain { .. } => "domain",
            Error::Diverged { .. } => "diverged",
            Error::InvarianceViolation { .. } => "invariance_violation",
        }
    }

    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Diverged { .. } | Error::InvarianceViolation { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
