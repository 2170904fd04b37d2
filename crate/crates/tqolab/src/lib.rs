//! Scenario runner for the `tqolab-core` experiments.
//!
//! A scenario file names one experiment kind plus its model, perturbation
//! and solver settings. [`run`] executes it and writes `manifest.json`,
//! `results.csv`, `bands.json`, `scoreboard.json` and `summary.txt`.

pub mod cache;
pub mod experiments;
pub mod output;
pub mod scenario;
pub mod suite;

use std::fmt;

pub use experiments::{run, RunOptions, RunOutcome};
pub use scenario::{Kind, Scenario};

/// Environment variable naming the spectrum cache directory.
pub const CACHE_ENV: &str = "TQOLAB_CACHE_DIR";

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Core(tqolab_core::Error),
    Output(String),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "config error: {m}"),
            AppError::Core(e) => write!(f, "{e}"),
            AppError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<tqolab_core::Error> for AppError {
    fn from(e: tqolab_core::Error) -> Self {
        AppError::Core(e)
    }
}

impl AppError {
    /// 1 validation, 2 numerical, 3 resource.
    pub fn exit_code(&self) -> i32 {
        use tqolab_core::Error as E;
        match self {
            AppError::Config(_) | AppError::Output(_) => 1,
            AppError::Core(e) => match e {
                E::Resource { .. } => 3,
                E::Numerical { .. } | E::GapCollapse { .. } | E::Audit { .. } => 2,
                _ => 1,
            },
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            1 => "validation",
            2 => "numerical",
            _ => "resource",
        }
    }
}
