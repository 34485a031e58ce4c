//! Experiment harness for the spoofing simulations: TOML configs, seeded
//! parallel trials, JSON reports with aggregates, verdicts and CSV export.

pub mod config;
pub mod experiments;
pub mod report;
pub mod samples;
pub mod stats;

pub use config::{Experiment, ExperimentConfig, Tolerances};
pub use experiments::run_experiment;
pub use report::{verdict, ExperimentReport, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] spoofsim_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("incomplete report: {0}")]
    IncompleteReport(String),
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harness.md")]
mod book_harness {}
