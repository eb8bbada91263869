//! Node-classification datasets: graph, features, labels, optional node
//! texts and transductive splits, plus on-disk bundles and generators.

mod bundle;
mod sampling;
mod sbm;

pub use bundle::{load_bundle, save_bundle, BundleMeta, FEATURE_DTYPE};
pub use sampling::{sample_edges, EdgeSample, DEFAULT_SAMPLE_SIZE};
pub use sbm::{expected_sbm_homophily, gen_sbm, gnp, SbmConfig};

use std::collections::HashSet;
use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Parse { file: PathBuf, message: String },
    #[error("{file}: shape mismatch: {message}")]
    Shape { file: PathBuf, message: String },
    #[error("{file}: label {label} at node {node} is not below num_classes = {num_classes}")]
    LabelOutOfRange {
        file: PathBuf,
        node: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("invalid splits: {0}")]
    Splits(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("graph has no edges to sample")]
    EmptyGraph,
    #[error("no edge has both endpoints in the training split")]
    UndefinedHomophily,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Title and body of a node's text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeText {
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/val fractions; the remainder goes to test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl SplitFractions {
    /// 60/20/20, used for most benchmarks.
    pub const STANDARD: Self = Self {
        train: 0.6,
        val: 0.2,
    };
    /// 20/10/70, the sparse-label regime.
    pub const SPARSE: Self = Self {
        train: 0.2,
        val: 0.1,
    };

    pub fn validate(&self) -> Result<(), DatasetError> {
        let ok = (0.0..=1.0).contains(&self.train)
            && (0.0..=1.0).contains(&self.val)
            && self.train + self.val <= 1.0 + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(DatasetError::Parameter(format!(
                "split fractions train={} val={} must be in [0,1] and sum to at most 1",
                self.train, self.val
            )))
        }
    }
}

/// Seed used when a bundle ships without `splits.json`.
pub const DEFAULT_SPLIT_SEED: u64 = 0;

impl Splits {
    /// Seeded shuffle of `0..n` cut at the given fractions.
    pub fn random(n: usize, fractions: SplitFractions, seed: u64) -> Result<Self, DatasetError> {
        fractions.validate()?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (fractions.train * n as f64).round() as usize;
        let n_val = ((fractions.val * n as f64).round() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Ok(Self {
            train: idx,
            val,
            test,
        })
    }

    pub fn validate(&self, n: usize) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in part {
                if i >= n {
                    return Err(DatasetError::Splits(format!(
                        "{name} index {i} out of range for n = {n}"
                    )));
                }
                if !seen.insert(i) {
                    return Err(DatasetError::Splits(format!("index {i} appears twice")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    /// `n × d` node features.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub categories: Vec<String>,
    pub texts: Option<Vec<NodeText>>,
    pub splits: Splits,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let n = self.num_nodes();
        let here = PathBuf::from("<dataset>");
        if self.features.nrows() != n {
            return Err(DatasetError::Shape {
                file: here,
                message: format!("{} feature rows for {n} nodes", self.features.nrows()),
            });
        }
        if self.labels.len() != n {
            return Err(DatasetError::Shape {
                file: here,
                message: format!("{} labels for {n} nodes", self.labels.len()),
            });
        }
        if let Some((node, &label)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= self.num_classes)
        {
            return Err(DatasetError::LabelOutOfRange {
                file: here,
                node,
                label,
                num_classes: self.num_classes,
            });
        }
        if !self.categories.is_empty() && self.categories.len() != self.num_classes {
            return Err(DatasetError::Shape {
                file: here,
                message: format!(
                    "{} category names for {} classes",
                    self.categories.len(),
                    self.num_classes
                ),
            });
        }
        if let Some(texts) = &self.texts {
            if texts.len() != n {
                return Err(DatasetError::Shape {
                    file: here,
                    message: format!("{} text records for {n} nodes", texts.len()),
                });
            }
        }
        self.splits.validate(n)
    }

    /// Category names, falling back to `class_<i>` when none are stored.
    pub fn category_names(&self) -> Vec<String> {
        if self.categories.is_empty() {
            (0..self.num_classes).map(|c| format!("class_{c}")).collect()
        } else {
            self.categories.clone()
        }
    }
}

/// Edge homophily restricted to edges whose endpoints are both training nodes.
pub fn train_label_homophily(ds: &Dataset) -> Result<f64, DatasetError> {
    let mut in_train = vec![false; ds.num_nodes()];
    for &i in &ds.splits.train {
        in_train[i] = true;
    }
    let (mut same, mut total) = (0usize, 0usize);
    for &(u, v) in ds.graph.edges() {
        if in_train[u] && in_train[v] {
            total += 1;
            if ds.labels[u] == ds.labels[v] {
                same += 1;
            }
        }
    }
    if total == 0 {
        return Err(DatasetError::UndefinedHomophily);
    }
    Ok(same as f64 / total as f64)
}
