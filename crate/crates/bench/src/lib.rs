//! Benchmark harness: corpus ingest, scenario matrix, enhancement, scoring,
//! aggregation and report files.

pub mod aggregate;
pub mod config;
pub mod corpus;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};

use sebench_core::audio::AudioError;
use sebench_core::enhancers::EnhanceError;
use sebench_core::metrics::MetricError;
use sebench_core::mixer::MixError;
use sebench_core::segan::SeganError;
use thiserror::Error;

pub use aggregate::{aggregate, aggregate_by_noise, AggregateRow, AggregateSummary, NoiseAggregateRow};
pub use config::BenchConfig;
pub use pipeline::{run_benchmark, ErrorEntry, RunOutput};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Enhance(#[from] EnhanceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Segan(#[from] SeganError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
