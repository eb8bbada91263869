//! Heterophily-aware basis vectors.
//!
//! Given an estimated homophily `ĥ`, every pair of basis vectors meets at the
//! angle `θ = π/2 · (1 - ĥ)`, i.e. the Gram matrix is `(1 - c) I + c 11ᵀ` with
//! `c = cos θ`. The vectors are grown one at a time: propagate the previous
//! vector through `Â`, strip its component in the span built so far to get a
//! fresh unit direction `f`, then rotate towards the running sum `s` of earlier
//! vectors:
//!
//! ```text
//! u_k = a s + b f,   a = c / (1 + (k-1) c),   b = sqrt(1 - c² k / (1 + (k-1) c))
//! ```
//!
//! which is the unique nonnegative pair giving `u_k · u_i = c` for `i < k` and
//! `‖u_k‖ = 1`.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{Graph, GraphError};

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(
        "cannot place {vectors} vectors at cosine {cosine} in dimension {dim}; \
         the order must be below the node count"
    )]
    RankDeficient {
        vectors: usize,
        dim: usize,
        cosine: f64,
    },
}

/// Residual norm below which the propagated direction is considered to lie in
/// the current span.
pub const SPAN_COLLAPSE_TOL: f64 = 1e-10;

const FALLBACK_SEED: u64 = 0x00C0_FFEE_BA5E;
const FALLBACK_ATTEMPTS: usize = 8;

/// `cos(π/2 · (1 - ĥ))`, with `ĥ` clamped to `[0, 1]`.
pub fn target_cosine(h_hat: f64) -> f64 {
    let h = if h_hat.is_nan() { 0.0 } else { h_hat.clamp(0.0, 1.0) };
    (FRAC_PI_2 * (1.0 - h)).cos()
}

/// Mixing coefficients `(a, b)` for the `k`-th vector, `k >= 1`.
pub fn rotation_coefficients(c: f64, k: usize) -> (f64, f64) {
    let denom = 1.0 + (k as f64 - 1.0) * c;
    let a = c / denom;
    let radicand = 1.0 - c * c * k as f64 / denom;
    debug_assert!(radicand > -1e-12, "negative radicand {radicand}");
    (a, radicand.max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterophilyBasis {
    /// `u_0 ..= u_K`, each of length `n`.
    pub vectors: Vec<Vec<f64>>,
    pub cosine: f64,
    pub h_hat: f64,
    pub order: usize,
    /// Set when the input signal was zero; all vectors are then zero.
    pub degenerate: bool,
}

impl HeterophilyBasis {
    pub fn gram(&self) -> Array2<f64> {
        let m = self.vectors.len();
        Array2::from_shape_fn((m, m), |(i, j)| dot(&self.vectors[i], &self.vectors[j]))
    }
}

pub fn build_basis(
    g: &Graph,
    x: &[f64],
    order: usize,
    h_hat: f64,
) -> Result<HeterophilyBasis, BasisError> {
    let n = g.num_nodes();
    if x.len() != n {
        return Err(GraphError::Dimension {
            expected: n,
            got: x.len(),
        }
        .into());
    }
    let h_hat = if h_hat.is_nan() { 0.0 } else { h_hat.clamp(0.0, 1.0) };
    let c = target_cosine(h_hat);

    let norm = dot(x, x).sqrt();
    if norm == 0.0 {
        return Ok(HeterophilyBasis {
            vectors: vec![vec![0.0; n]; order + 1],
            cosine: c,
            h_hat,
            order,
            degenerate: true,
        });
    }

    let u0: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let mut running_sum = u0.clone();
    let mut frame = vec![u0.clone()];
    let mut vectors = vec![u0];

    for k in 1..=order {
        let (a, b) = rotation_coefficients(c, k);
        let propagated = g.norm_adj_matvec(&vectors[k - 1])?;
        let fresh = match residual_direction(&propagated, &frame, SPAN_COLLAPSE_TOL) {
            Some(f) => Some(f),
            None => fallback_direction(n, k, &frame),
        };
        let u = match fresh {
            Some(f) => {
                let u = running_sum
                    .iter()
                    .zip(&f)
                    .map(|(s, fi)| a * s + b * fi)
                    .collect();
                frame.push(f);
                u
            }
            // With b = 0 (ĥ = 1) no new direction is needed.
            None if b == 0.0 => running_sum.iter().map(|s| a * s).collect(),
            None => {
                return Err(BasisError::RankDeficient {
                    vectors: order + 1,
                    dim: n,
                    cosine: c,
                })
            }
        };
        for (s, ui) in running_sum.iter_mut().zip(&u) {
            *s += ui;
        }
        vectors.push(u);
    }

    Ok(HeterophilyBasis {
        vectors,
        cosine: c,
        h_hat,
        order,
        degenerate: false,
    })
}

/// Per-column bases for an `n × d` signal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrices {
    /// `K + 1` matrices of shape `n × d`; column `l` of entry `k` is `u_k` of column `l`.
    pub matrices: Vec<Array2<f64>>,
    pub cosine: f64,
    pub h_hat: f64,
    pub degenerate_columns: Vec<usize>,
}

impl BasisMatrices {
    pub fn order(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.ncols())
    }
}

pub fn build_basis_matrix(
    g: &Graph,
    x: ArrayView2<f64>,
    order: usize,
    h_hat: f64,
) -> Result<BasisMatrices, BasisError> {
    let (n, d) = x.dim();
    let columns: Vec<HeterophilyBasis> = (0..d)
        .into_par_iter()
        .map(|l| build_basis(g, &x.column(l).to_vec(), order, h_hat))
        .collect::<Result<_, _>>()?;

    let mut matrices = vec![Array2::zeros((n, d)); order + 1];
    let mut degenerate_columns = Vec::new();
    for (l, basis) in columns.iter().enumerate() {
        if basis.degenerate {
            degenerate_columns.push(l);
        }
        for (k, v) in basis.vectors.iter().enumerate() {
            for (i, &val) in v.iter().enumerate() {
                matrices[k][[i, l]] = val;
            }
        }
    }
    let c = target_cosine(h_hat);
    Ok(BasisMatrices {
        matrices,
        cosine: c,
        h_hat: if h_hat.is_nan() { 0.0 } else { h_hat.clamp(0.0, 1.0) },
        degenerate_columns,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit vector along `v` minus its projection on the orthonormal `frame`,
/// using two Gram-Schmidt passes. `None` if the residual is below `tol`.
fn residual_direction(v: &[f64], frame: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in frame {
            let p = dot(&r, q);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= p * qi;
            }
        }
    }
    let norm = dot(&r, &r).sqrt();
    if norm < tol || !norm.is_finite() {
        return None;
    }
    r.iter_mut().for_each(|x| *x /= norm);
    Some(r)
}

fn fallback_direction(n: usize, k: usize, frame: &[Vec<f64>]) -> Option<Vec<f64>> {
    if frame.len() >= n {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(FALLBACK_SEED);
    rng.set_stream(k as u64);
    for _ in 0..FALLBACK_ATTEMPTS {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // A random vector keeps a residual of order its own norm unless the
        // frame already spans the space.
        let scale = dot(&v, &v).sqrt();
        if let Some(f) = residual_direction(&v, frame, 1e-6 * scale) {
            return Some(f);
        }
    }
    None
}
