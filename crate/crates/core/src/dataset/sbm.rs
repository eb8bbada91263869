use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, DatasetError, NodeText, SplitFractions, Splits};
use crate::graph::Graph;

/// Stochastic block model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub n: usize,
    pub num_classes: usize,
    /// Edge probability within a block.
    pub p_in: f64,
    /// Edge probability across blocks. May exceed `p_in` for heterophilic graphs.
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian feature noise.
    pub noise: f64,
    pub seed: u64,
    pub split: SplitFractions,
}

// Separate streams so changing one stage never perturbs another.
const EDGE_STREAM: u64 = 1;
const FEATURE_STREAM: u64 = 2;
const SPLIT_STREAM: u64 = 3;

/// Samples an SBM dataset. Node `i` belongs to block `i mod C`, features are
/// the one-hot block centroid plus isotropic Gaussian noise, and every node
/// gets a short synthetic text naming its block topic.
pub fn gen_sbm(cfg: &SbmConfig) -> Result<Dataset, DatasetError> {
    let c = cfg.num_classes;
    if c == 0 || c > cfg.n {
        return Err(DatasetError::Parameter(format!(
            "need 1 <= classes <= n, got classes = {c}, n = {}",
            cfg.n
        )));
    }
    for (name, p) in [("p_in", cfg.p_in), ("p_out", cfg.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(DatasetError::Parameter(format!("{name} = {p} is not a probability")));
        }
    }
    if cfg.feature_dim < c {
        return Err(DatasetError::Parameter(format!(
            "feature_dim = {} cannot hold a one-hot centroid for {c} classes",
            cfg.feature_dim
        )));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(DatasetError::Parameter(format!("noise = {} must be >= 0", cfg.noise)));
    }

    let n = cfg.n;
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(EDGE_STREAM);
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    let graph = Graph::new(n, &pairs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(FEATURE_STREAM);
    let normal = Normal::new(0.0, cfg.noise).expect("noise validated above");
    let mut features = Array2::zeros((n, cfg.feature_dim));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        for x in row.iter_mut() {
            *x = normal.sample(&mut rng);
        }
        row[labels[i]] += 1.0;
        // Stored as f32 on disk; keep in-memory values exactly representable.
        row.mapv_inplace(|x| x as f32 as f64);
    }

    let categories: Vec<String> = (0..c).map(|k| format!("topic_{k}")).collect();
    let texts = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| NodeText {
            title: format!("Document {i}"),
            text: format!("A short synthetic document about {}.", categories[l]),
        })
        .collect();

    let split_seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ SPLIT_STREAM;
    let splits = Splits::random(n, cfg.split, split_seed)?;

    Ok(Dataset {
        name: format!("sbm-n{n}-c{c}-s{}", cfg.seed),
        graph,
        features,
        labels,
        num_classes: c,
        categories,
        texts: Some(texts),
        splits,
    })
}

/// Expected edge homophily of a balanced SBM.
pub fn expected_sbm_homophily(n: usize, num_classes: usize, p_in: f64, p_out: f64) -> f64 {
    let block = n as f64 / num_classes as f64;
    let intra = p_in * (block - 1.0);
    let inter = p_out * n as f64 * (num_classes as f64 - 1.0) / num_classes as f64;
    intra / (intra + inter)
}

/// Erdős–Rényi `G(n, p)`.
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    Graph::new(n, &pairs).expect("indices are in range")
}
