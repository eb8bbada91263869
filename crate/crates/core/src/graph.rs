//! Undirected graph in CSR form plus the normalized operators
//! `Â = D^{-1/2} A D^{-1/2}` and `L̂ = I - Â` that every filter consumes.
//!
//! Zero-degree nodes get `D^{-1/2}_{ii} = 0`, so their rows and columns of `Â`
//! vanish and `L̂` acts as the identity on them. No self-loops are added.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    NodeOutOfRange { u: usize, v: usize, n: usize },
    #[error("dimension mismatch: expected {expected} rows, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("homophily is undefined on a graph with no edges")]
    UndefinedHomophily,
    #[error("labels cover {got} nodes but the graph has {n}")]
    LabelLength { n: usize, got: usize },
    #[error("dense eigendecomposition refused for n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },
}

/// Immutable simple undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    degrees: Vec<usize>,
    inv_sqrt_deg: Vec<f64>,
}

impl Graph {
    /// Builds a graph from an arbitrary pair list. Pairs are symmetrized and
    /// deduplicated, self-loops are dropped and each CSR row is sorted.
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut edges = Vec::with_capacity(pairs.len());
        for &(u, v) in pairs {
            if u >= n || v >= n {
                return Err(GraphError::NodeOutOfRange { u, v, n });
            }
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut degrees = vec![0usize; n];
        for &(u, v) in &edges {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for &d in &degrees {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut targets = vec![0usize; 2 * edges.len()];
        for &(u, v) in &edges {
            targets[cursor[u]] = v;
            cursor[u] += 1;
            targets[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        let inv_sqrt_deg = degrees
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
            .collect();

        Ok(Self {
            n,
            edges,
            offsets,
            targets,
            degrees,
            inv_sqrt_deg,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges, each stored once as `(min, max)` in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn csr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn csr_targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// `Â x` for a single signal.
    pub fn norm_adj_matvec(&self, x: &[f64]) -> Result<Vec<f64>, GraphError> {
        self.check_len(x.len())?;
        Ok((0..self.n)
            .map(|i| {
                let s: f64 = self
                    .neighbors(i)
                    .iter()
                    .map(|&j| self.inv_sqrt_deg[j] * x[j])
                    .sum();
                self.inv_sqrt_deg[i] * s
            })
            .collect())
    }

    /// `L̂ x = x - Â x`.
    pub fn norm_lap_matvec(&self, x: &[f64]) -> Result<Vec<f64>, GraphError> {
        let ax = self.norm_adj_matvec(x)?;
        Ok(x.iter().zip(ax).map(|(xi, ai)| xi - ai).collect())
    }

    /// `Â X` applied to every column of an `n × d` matrix.
    pub fn norm_adj_matmul(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, GraphError> {
        self.check_len(x.nrows())?;
        let mut out = Array2::zeros(x.raw_dim());
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let di = self.inv_sqrt_deg[i];
            if di == 0.0 {
                continue;
            }
            for &j in self.neighbors(i) {
                row.scaled_add(di * self.inv_sqrt_deg[j], &x.row(j));
            }
        }
        Ok(out)
    }

    /// `L̂ X` applied to every column.
    pub fn norm_lap_matmul(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, GraphError> {
        let ax = self.norm_adj_matmul(x)?;
        Ok(&x - &ax)
    }

    /// Dense `Â`, for oracles and small-graph diagnostics.
    pub fn dense_norm_adj(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            let w = self.inv_sqrt_deg[u] * self.inv_sqrt_deg[v];
            a[[u, v]] = w;
            a[[v, u]] = w;
        }
        a
    }

    /// Dense `L̂`.
    pub fn dense_norm_lap(&self) -> Array2<f64> {
        let mut l = -self.dense_norm_adj();
        for i in 0..self.n {
            l[[i, i]] += 1.0;
        }
        l
    }

    fn check_len(&self, got: usize) -> Result<(), GraphError> {
        if got != self.n {
            return Err(GraphError::Dimension {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph, labels: &[usize]) -> Result<f64, GraphError> {
    if labels.len() != g.num_nodes() {
        return Err(GraphError::LabelLength {
            n: g.num_nodes(),
            got: labels.len(),
        });
    }
    if g.num_edges() == 0 {
        return Err(GraphError::UndefinedHomophily);
    }
    let same = g
        .edges()
        .iter()
        .filter(|&&(u, v)| labels[u] == labels[v])
        .count();
    Ok(same as f64 / g.num_edges() as f64)
}

/// Largest graph accepted by [`dense_eigendecomposition`].
pub const DENSE_EIGEN_LIMIT: usize = 500;

/// Eigenpairs of the dense normalized Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    /// `U diag(h(λ)) Uᵀ X`.
    pub fn apply(&self, response: impl Fn(f64) -> f64, x: ArrayView2<f64>) -> Array2<f64> {
        let u = &self.eigenvectors;
        let mut coeffs = u.t().dot(&x);
        for (mut row, &lam) in coeffs.rows_mut().into_iter().zip(&self.eigenvalues) {
            row *= response(lam);
        }
        u.dot(&coeffs)
    }

    /// `U diag(h(λ)) Uᵀ x` for a single column.
    pub fn apply_vec(&self, response: impl Fn(f64) -> f64, x: ArrayView1<f64>) -> Vec<f64> {
        let x2 = x.to_owned().insert_axis(ndarray::Axis(1));
        self.apply(response, x2.view()).column(0).to_vec()
    }
}

pub fn dense_eigendecomposition(g: &Graph) -> Result<SpectralDecomposition, GraphError> {
    let n = g.num_nodes();
    if n > DENSE_EIGEN_LIMIT {
        return Err(GraphError::TooLarge {
            n,
            limit: DENSE_EIGEN_LIMIT,
        });
    }
    let l = g.dense_norm_lap();
    let m = DMatrix::from_fn(n, n, |i, j| l[[i, j]]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
