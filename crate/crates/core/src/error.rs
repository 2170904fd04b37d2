use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    Resource {
        what: String,
        needed: usize,
        cap: usize,
    },

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("terms {first} and {second} do not commute")]
    Commutation { first: usize, second: usize },

    #[error("term {0} is not a projector")]
    NonProjector(usize),

    #[error("model is frustrated: no state is annihilated by every term")]
    Frustrated,

    #[error("gap fell below floor {floor} at s = {s} (measured {gap})")]
    GapCollapse { s: f64, gap: f64, floor: f64 },

    #[error("{what} audit failed: {}", failed.join("; "))]
    Audit { what: String, failed: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
        }
    }
}
