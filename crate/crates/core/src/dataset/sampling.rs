use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::graph::Graph;

/// Number of edges queried per dataset by default.
pub const DEFAULT_SAMPLE_SIZE: usize = 100;

/// Edges drawn uniformly without replacement from a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSample {
    pub edges: Vec<(usize, usize)>,
    pub seed: u64,
    pub sample_size: usize,
}

/// Draws `m` distinct undirected edges (clamped to `|E|`).
pub fn sample_edges(g: &Graph, m: usize, seed: u64) -> Result<EdgeSample, DatasetError> {
    if g.num_edges() == 0 {
        return Err(DatasetError::EmptyGraph);
    }
    if m == 0 {
        return Err(DatasetError::Parameter("sample size must be at least 1".into()));
    }
    let m = m.min(g.num_edges());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = rand::seq::index::sample(&mut rng, g.num_edges(), m)
        .into_iter()
        .map(|i| g.edges()[i])
        .collect();
    Ok(EdgeSample {
        edges,
        seed,
        sample_size: m,
    })
}
