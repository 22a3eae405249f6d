use std::path::PathBuf;

use apf_core::synthbench::SynthError;
use apf_core::{FormulationError, ScoreError};
use apf_gateway::GatewayError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0} already exists; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("record {id}: {detail}")]
    Record { id: String, detail: String },
    #[error("record {id}: exported output does not parse back to its formulation: {detail}")]
    RoundTrip { id: String, detail: String },
    #[error("{requested} augmented samples requested but only {available} distinct combinations exist")]
    AugmentBudget { requested: usize, available: u128 },
}

impl PipelineError {
    pub fn record(id: impl Into<String>, detail: impl std::fmt::Display) -> Self {
        PipelineError::Record {
            id: id.into(),
            detail: detail.to_string(),
        }
    }
}
