//! Command-line driver for the SPAG experiments: configuration, the five
//! subcommands and their JSON reports.

use thiserror::Error;

pub mod commands;
pub mod config;

pub use commands::{
    cmd_bounds, cmd_make_synthetic, cmd_run, cmd_tune_mu, cmd_verify_concentration, BoundsOutput,
    ConcentrationReport, RunSummary, SyntheticReport, TuneReport,
};
pub use config::{ConcentrationConfig, KvConfig, RunConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] spag::Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &str, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }

    /// 3 for numerical failures, 2 for everything caused by the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(spag::Error::Numerical(_) | spag::Error::Diverged { .. }) => {
                EXIT_NUMERICAL
            }
            _ => EXIT_USAGE,
        }
    }
}
