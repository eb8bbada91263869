//! Homophily estimation by asking a chat model whether sampled edge
//! endpoints share a category, with majority voting over repeated queries.

pub mod client;
pub mod prompt;
pub mod usage;
pub mod verdict;
pub mod vote;

pub use client::{ChatClient, ClientError, HttpClient, MockClient, QueryContext, API_KEY_ENV, DEFAULT_ENDPOINT};
pub use prompt::{build_prompt, ChatRequest, ChatResponse, PromptOptions, PromptStrategy, PromptVariant};
pub use usage::{accumulate_usage, CostRates, Usage};
pub use verdict::{parse_verdict, Verdict};
pub use vote::{
    estimate_homophily, majority, run_estimator, vote_edge, EdgeRecord, EdgeVote, EstimatorConfig, FailedEdge,
    HomophilyReport,
};

use thiserror::Error;

use crate::dataset::DatasetError;

#[derive(Debug, Error)]
pub enum HomophilyError {
    #[error("prompt error: {0}")]
    Prompt(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no edge votes to aggregate")]
    EmptyVotes,
    #[error("every query for edge ({u}, {v}) failed: {reason}")]
    EdgeFailed { u: usize, v: usize, reason: String },
    #[error("report error: {0}")]
    Report(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
