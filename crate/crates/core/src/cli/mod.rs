//! Batch driver: configuration, experiment orchestration, deterministic
//! CSV/JSON output and gnuplot script emission.
//!
//! Exit codes: 0 success with all checks passing, 1 usage or configuration
//! error, 2 numerical abort, 3 a built-in consistency check failed.

mod args;
mod config;
mod plot;
mod report;
mod run;

use thiserror::Error;

use crate::error::Error;

pub use args::{main_with_args, Cli, Command, CommonArgs};
pub use config::{
    parse_config, parse_config_for, ConstantsConfig, EstimationConfig, Experiment, ExperimentConfig,
    GridConfig, InitialConfig, MicroscopeConfig, ModelConfig, OutputConfig, OutputFormat, PhaseSpec,
    QuantumConfig, TimeConfig, TimePlan,
};
pub use plot::emit_plot_script;
pub use report::{Cell, Check, Generator, Quantity, RunReport, Table};
pub use run::{run, write_outputs, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{module}: {source}")]
    Engine {
        module: &'static str,
        #[source]
        source: Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Engine { source, .. } => match source {
                e if e.is_numerical() => EXIT_NUMERICAL,
                Error::NodeDetected { .. } | Error::SupportTooNarrow { .. } | Error::Unresolved(_) => {
                    EXIT_NUMERICAL
                }
                _ => EXIT_CONFIG,
            },
        }
    }

    /// Individual problem messages.
    pub fn problems(&self) -> Vec<String> {
        match self {
            CliError::Config(p) => p.clone(),
            other => vec![other.to_string()],
        }
    }

    pub(crate) fn engine(module: &'static str) -> impl FnOnce(Error) -> CliError {
        move |source| CliError::Engine { module, source }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
