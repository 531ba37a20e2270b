//! Config-driven runs of TT propagation and GRAPE optimisation, with
//! plot-ready text artifacts.

pub mod artifacts;
pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Mode, PulseInit};
pub use run::{run_experiment, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}{}: {message}", path.as_ref().map(|p| format!("{}:", p.display())).unwrap_or_default(), line.map(|l| format!("line {l}")).unwrap_or_else(|| "config".into()))]
    Parse { path: Option<PathBuf>, line: Option<usize>, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed pulse file {}: {message}", path.display())]
    PulseFile { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] ttgrape_core::Error),
}

impl CliError {
    pub(crate) fn in_file(self, file: &Path) -> Self {
        match self {
            CliError::Parse { path: None, line, message } => {
                CliError::Parse { path: Some(file.to_owned()), line, message }
            }
            e => e,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_owned(), source }
    }
}
