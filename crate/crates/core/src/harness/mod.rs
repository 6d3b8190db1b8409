//! Experiment harness: configuration, experiment drivers and output.
//!
//! [`execute`] runs a validated [`ExperimentConfig`] and returns an
//! [`Output`] that [`emit`](emit::emit) writes as CSV or JSON. Results depend
//! only on the config and its master seed; parallel work is merged in index
//! order, so the thread count never changes the output.

pub mod commands;
pub mod config;
pub mod emit;
pub mod identify;
pub mod regret;
pub mod stats;
pub mod sweep;

use serde::Serialize;
use thiserror::Error;

pub use config::{ExperimentConfig, Format, Kind, Params};
pub use emit::{emit, render, Report};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid or inconsistent configuration; the message starts with the
    /// offending field.
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl HarnessError {
    /// Process exit code: 2 for configuration and IO problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Output {
    Dare(commands::DareResult),
    Synthesize(commands::SynthesizeResult),
    Evaluate(commands::EvaluateResult),
    Bound(commands::BoundResult),
    Sweep(sweep::SweepResult),
    Identify(identify::IdentifyResult),
    Adaptive(regret::AdaptiveResult),
}

impl Report for Output {
    fn csv_header(&self) -> Vec<&'static str> {
        match self {
            Output::Dare(r) => r.csv_header(),
            Output::Synthesize(r) => r.csv_header(),
            Output::Evaluate(r) => r.csv_header(),
            Output::Bound(r) => r.csv_header(),
            Output::Sweep(r) => r.csv_header(),
            Output::Identify(r) => r.csv_header(),
            Output::Adaptive(r) => r.csv_header(),
        }
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        match self {
            Output::Dare(r) => r.csv_rows(),
            Output::Synthesize(r) => r.csv_rows(),
            Output::Evaluate(r) => r.csv_rows(),
            Output::Bound(r) => r.csv_rows(),
            Output::Sweep(r) => r.csv_rows(),
            Output::Identify(r) => r.csv_rows(),
            Output::Adaptive(r) => r.csv_rows(),
        }
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Output, HarnessError> {
    Ok(match cfg.kind() {
        Kind::Dare => Output::Dare(commands::run_dare(cfg)?),
        Kind::Synthesize => Output::Synthesize(commands::run_synthesize(cfg)?),
        Kind::Evaluate => Output::Evaluate(commands::run_evaluate(cfg)?),
        Kind::Bound => Output::Bound(commands::run_bound(cfg)?),
        Kind::Sweep => Output::Sweep(sweep::run_sweep(cfg)?),
        Kind::Identify => Output::Identify(identify::run_identify(cfg)?),
        Kind::Adaptive => Output::Adaptive(regret::run_adaptive_experiment(cfg)?),
    })
}
