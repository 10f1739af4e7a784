//! Experiment harness for the radlab classifier.
//!
//! Module map:
//! - [`config`] — experiment configuration (TOML), validation, hashing
//! - [`data`] — dataset synthesis, train/test split, SIG1/FRM1 files
//! - [`checkpoint`] — single-file checkpoints (manifest + binary sections)
//! - [`train`] — training loops for every model variant
//! - [`eval`] — checkpoint-based evaluation to scored predictions
//! - [`report`] — CSV/report bundle generation
//!
//! Everything downstream of a parsed config is a deterministic function of
//! (config, seed): reruns produce byte-identical reports.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod eval;
pub mod report;
pub mod train;

use thiserror::Error;

/// Harness-level failures, partitioned by exit code.
#[derive(Debug, Error)]
pub enum LabError {
    /// Exit code 1: the configuration cannot be parsed or fails validation.
    #[error("config error: {0}")]
    Config(String),
    /// Exit code 2: datasets or artifact files are missing, malformed, or
    /// cannot be produced.
    #[error("data error: {0}")]
    Data(String),
    /// Exit code 3: training or evaluation failed numerically (divergence,
    /// total conflict, unreachable coverage, capacity exhaustion).
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 1,
            LabError::Data(_) => 2,
            LabError::Numeric(_) => 3,
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Data(e.to_string())
    }
}

impl From<radlab_core::signal::SignalError> for LabError {
    fn from(e: radlab_core::signal::SignalError) -> Self {
        LabError::Data(e.to_string())
    }
}

impl From<radlab_core::preprocess::PreprocessError> for LabError {
    fn from(e: radlab_core::preprocess::PreprocessError) -> Self {
        LabError::Data(e.to_string())
    }
}

impl From<radlab_core::lps::LpsError> for LabError {
    fn from(e: radlab_core::lps::LpsError) -> Self {
        LabError::Numeric(e.to_string())
    }
}

impl From<radlab_core::evidential::EvidentialError> for LabError {
    fn from(e: radlab_core::evidential::EvidentialError) -> Self {
        LabError::Numeric(e.to_string())
    }
}

impl From<radlab_core::selpred::SelPredError> for LabError {
    fn from(e: radlab_core::selpred::SelPredError) -> Self {
        LabError::Numeric(e.to_string())
    }
}
