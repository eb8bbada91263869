use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::client::{ChatClient, QueryContext};
use super::prompt::{build_prompt, ChatResponse, PromptOptions, PromptStrategy, PromptVariant};
use super::usage::{accumulate_usage, CostRates, Usage};
use super::verdict::{parse_verdict, Verdict};
use super::HomophilyError;
use crate::dataset::{sample_edges, Dataset, NodeText, DEFAULT_SAMPLE_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeVote {
    pub u: usize,
    pub v: usize,
    pub responses: Vec<Verdict>,
    /// Number of "same" answers.
    pub r: usize,
    /// 1 when the edge is judged homophilic.
    pub y: u8,
}

/// Applies the majority rule. Unparseable answers count as not-same.
pub fn majority(responses: &[Verdict], strategy: &PromptStrategy) -> (usize, u8) {
    let r = responses.iter().filter(|&&v| v == Verdict::Same).count();
    (r, u8::from(r >= strategy.threshold()))
}

/// Queries one edge `strategy.votes` times. Queries that fail after retries
/// count as not-same; the edge fails only when every query fails.
pub fn vote_edge(
    client: &dyn ChatClient,
    edge: (usize, usize),
    texts: (&NodeText, &NodeText),
    categories: &[String],
    strategy: &PromptStrategy,
    opts: &PromptOptions,
) -> Result<(EdgeVote, Vec<ChatResponse>), HomophilyError> {
    strategy.validate()?;
    let req = build_prompt((edge.0, texts.0), (edge.1, texts.1), categories, strategy, opts)?;
    let mut responses = Vec::with_capacity(strategy.votes);
    let mut verdicts = Vec::with_capacity(strategy.votes);
    let mut last_err = None;
    for query_index in 0..strategy.votes {
        match client.complete(&req, &QueryContext { edge, query_index }) {
            Ok(resp) => {
                verdicts.push(parse_verdict(&resp.text));
                responses.push(resp);
            }
            Err(e) => {
                verdicts.push(Verdict::Unparseable);
                last_err = Some(e);
            }
        }
    }
    if responses.is_empty() {
        return Err(HomophilyError::EdgeFailed {
            u: edge.0,
            v: edge.1,
            reason: last_err.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    let (r, y) = majority(&verdicts, strategy);
    Ok((
        EdgeVote {
            u: edge.0,
            v: edge.1,
            responses: verdicts,
            r,
            y,
        },
        responses,
    ))
}

/// Share of voted edges judged homophilic.
pub fn estimate_homophily(votes: &[EdgeVote]) -> Result<f64, HomophilyError> {
    if votes.is_empty() {
        return Err(HomophilyError::EmptyVotes);
    }
    let same = votes.iter().filter(|v| v.y == 1).count();
    Ok((same as f64 / votes.len() as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub r: usize,
    pub y: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedEdge {
    pub u: usize,
    pub v: usize,
    pub error: String,
}

/// Contents of `homophily.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    /// `None` when no edge could be voted.
    pub h_hat: Option<f64>,
    /// Edges that entered the estimate.
    pub sample_size: usize,
    pub votes_per_edge: usize,
    pub strategy: Option<PromptVariant>,
    pub source: String,
    pub per_edge: Vec<EdgeRecord>,
    pub usage: Usage,
    #[serde(default)]
    pub usage_missing: usize,
    #[serde(default)]
    pub failed_edges: Vec<FailedEdge>,
    #[serde(default)]
    pub skipped_edges: Vec<(usize, usize)>,
}

impl HomophilyReport {
    /// A report for an estimate that did not come from voting.
    pub fn fixed(h_hat: f64, source: impl Into<String>) -> Self {
        Self {
            h_hat: Some(h_hat.clamp(0.0, 1.0)),
            sample_size: 0,
            votes_per_edge: 0,
            strategy: None,
            source: source.into(),
            per_edge: Vec::new(),
            usage: Usage::default(),
            usage_missing: 0,
            failed_edges: Vec::new(),
            skipped_edges: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.h_hat.is_some() && self.failed_edges.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<(), HomophilyError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| HomophilyError::Report(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| HomophilyError::Report(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, HomophilyError> {
        let text =
            fs::read_to_string(path).map_err(|e| HomophilyError::Report(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HomophilyError::Report(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub sample_size: usize,
    pub seed: u64,
    pub strategy: PromptStrategy,
    pub prompt: PromptOptions,
    pub rates: CostRates,
    /// Edges queried concurrently.
    pub parallelism: usize,
    pub source: String,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
            strategy: PromptStrategy::default(),
            prompt: PromptOptions::default(),
            rates: CostRates::default(),
            parallelism: 4,
            source: "llm".into(),
        }
    }
}

fn has_text(t: &NodeText) -> bool {
    !(t.title.trim().is_empty() && t.text.trim().is_empty())
}

/// Samples edges, queries `client` for each and aggregates the votes.
/// Failed and skipped edges are reported rather than aborting the run.
pub fn run_estimator(
    ds: &Dataset,
    client: &dyn ChatClient,
    cfg: &EstimatorConfig,
) -> Result<HomophilyReport, HomophilyError> {
    cfg.strategy.validate()?;
    let sample = sample_edges(&ds.graph, cfg.sample_size, cfg.seed)?;
    let categories = ds.category_names();

    let placeholder: Vec<NodeText>;
    let texts: &[NodeText] = match &ds.texts {
        Some(t) => t,
        None if client.needs_text() => {
            return Err(HomophilyError::Config(format!("dataset `{}` has no node texts", ds.name)));
        }
        None => {
            placeholder = (0..ds.num_nodes())
                .map(|i| NodeText {
                    title: format!("Node {i}"),
                    text: String::new(),
                })
                .collect();
            &placeholder
        }
    };

    let (queryable, skipped): (Vec<_>, Vec<_>) = sample
        .edges
        .iter()
        .copied()
        .partition(|&(u, v)| has_text(&texts[u]) && has_text(&texts[v]));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build()
        .map_err(|e| HomophilyError::Config(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| {
        queryable
            .par_iter()
            .map(|&(u, v)| {
                vote_edge(client, (u, v), (&texts[u], &texts[v]), &categories, &cfg.strategy, &cfg.prompt)
            })
            .collect()
    });

    let mut votes = Vec::new();
    let mut responses = Vec::new();
    let mut failed_edges = Vec::new();
    for (edge, outcome) in queryable.iter().zip(outcomes) {
        match outcome {
            Ok((vote, rs)) => {
                votes.push(vote);
                responses.extend(rs);
            }
            Err(HomophilyError::EdgeFailed { u, v, reason }) => failed_edges.push(FailedEdge { u, v, error: reason }),
            Err(e) => failed_edges.push(FailedEdge {
                u: edge.0,
                v: edge.1,
                error: e.to_string(),
            }),
        }
    }
    let usage = accumulate_usage(&responses, &cfg.rates);
    if usage.has_missing() {
        log::warn!("{} responses carried no token usage; counted as zero", usage.missing);
    }
    Ok(HomophilyReport {
        h_hat: estimate_homophily(&votes).ok(),
        sample_size: votes.len(),
        votes_per_edge: cfg.strategy.votes,
        strategy: Some(cfg.strategy.variant),
        source: cfg.source.clone(),
        per_edge: votes
            .iter()
            .map(|v| EdgeRecord {
                u: v.u,
                v: v.v,
                r: v.r,
                y: v.y,
            })
            .collect(),
        usage_missing: usage.missing,
        usage,
        failed_edges,
        skipped_edges: skipped,
    })
}
