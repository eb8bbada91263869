//! Polynomial spectral filters (GPR-GNN, BernNet, JacobiConv, ChebNetII) and
//! their heterophily-basis variants.
//!
//! Every backbone is a weighted sum of `K + 1` propagated signals. With the
//! basis enabled each propagated term is blended with the matching basis
//! vector as `β · term_k + (1 - β) · u_k`; `β = 1` recovers the original filter.
//! Evaluation only uses sparse matvecs; the dense eigendecomposition is kept
//! for oracles.

pub mod poly;
mod terms;

pub use poly::chebyshev_nodes;
pub use terms::FilterTerms;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::BasisMatrices;
use crate::graph::{Graph, GraphError};

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("filter response is only defined for the pure polynomial part (disable the basis)")]
    ResponseWithBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backbone {
    Gpr,
    Bern,
    Jacobi,
    Cheb2,
}

impl Backbone {
    pub const ALL: [Backbone; 4] = [Backbone::Gpr, Backbone::Bern, Backbone::Jacobi, Backbone::Cheb2];

    pub fn name(self) -> &'static str {
        match self {
            Backbone::Gpr => "gprgnn",
            Backbone::Bern => "bernnet",
            Backbone::Jacobi => "jacobiconv",
            Backbone::Cheb2 => "chebnetii",
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backbone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gpr" | "gprgnn" | "gpr-gnn" => Ok(Backbone::Gpr),
            "bern" | "bernnet" => Ok(Backbone::Bern),
            "jacobi" | "jacobiconv" => Ok(Backbone::Jacobi),
            "cheb2" | "chebnetii" | "chebnet2" => Ok(Backbone::Cheb2),
            other => Err(format!(
                "unknown backbone {other:?} (expected gprgnn, bernnet, jacobiconv or chebnetii)"
            )),
        }
    }
}

impl Serialize for Backbone {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Backbone {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Learnable filter coefficients plus the fixed hyperparameters around them.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    pub backbone: Backbone,
    pub order: usize,
    /// `(K + 1) × channels`. One channel for every backbone but JacobiConv,
    /// which has one per output column. For BernNet these are the raw values;
    /// the effective coefficients are their squares.
    pub coeffs: Array2<f64>,
    pub jacobi_a: f64,
    pub jacobi_b: f64,
    pub beta: f64,
    pub plus: bool,
}

pub const DEFAULT_JACOBI_A: f64 = 1.0;
pub const DEFAULT_JACOBI_B: f64 = 1.0;

impl FilterParams {
    /// Coefficients at their standard starting point: decaying PPR-like
    /// weights for GPR-GNN, all-ones effective weights for BernNet and
    /// ChebNetII (the identity filter) and a pass-through first order for
    /// JacobiConv.
    pub fn new(backbone: Backbone, order: usize, channels: usize) -> Self {
        let channels = if backbone == Backbone::Jacobi { channels } else { 1 };
        let coeffs = match backbone {
            Backbone::Gpr => Array2::from_shape_fn((order + 1, 1), |(k, _)| 0.1 * 0.9f64.powi(k as i32)),
            Backbone::Bern | Backbone::Cheb2 => Array2::ones((order + 1, 1)),
            Backbone::Jacobi => {
                Array2::from_shape_fn((order + 1, channels), |(k, _)| if k == 0 { 1.0 } else { 0.0 })
            }
        };
        Self {
            backbone,
            order,
            coeffs,
            jacobi_a: DEFAULT_JACOBI_A,
            jacobi_b: DEFAULT_JACOBI_B,
            beta: 1.0,
            plus: false,
        }
    }

    pub fn with_coeffs(mut self, coeffs: Array2<f64>) -> Self {
        self.coeffs = coeffs;
        self
    }

    pub fn with_plus(mut self, beta: f64) -> Self {
        self.plus = true;
        self.beta = beta;
        self
    }

    pub fn channels(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Coefficients as they enter the filter (squared for BernNet).
    pub fn effective_coeffs(&self) -> Array2<f64> {
        match self.backbone {
            Backbone::Bern => self.coeffs.mapv(|t| t * t),
            _ => self.coeffs.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.coeffs.nrows() != self.order + 1 {
            return Err(FilterError::Config(format!(
                "{} coefficient rows for order {}",
                self.coeffs.nrows(),
                self.order
            )));
        }
        if self.backbone != Backbone::Jacobi && self.coeffs.ncols() != 1 {
            return Err(FilterError::Config(format!(
                "{} takes a single coefficient channel",
                self.backbone
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(FilterError::Config(format!("beta = {} outside [0, 1]", self.beta)));
        }
        if self.backbone == Backbone::Jacobi && !(self.jacobi_a > -1.0 && self.jacobi_b > -1.0) {
            return Err(FilterError::Config(format!(
                "Jacobi parameters a = {}, b = {} must exceed -1",
                self.jacobi_a, self.jacobi_b
            )));
        }
        Ok(())
    }
}

/// Filters `x` (`n × d`). JacobiConv additionally needs `w` (`d × d_out`); the
/// basis is required exactly when `params.plus` is set.
pub fn forward(
    g: &Graph,
    x: ArrayView2<f64>,
    params: &FilterParams,
    w: Option<&Array2<f64>>,
    basis: Option<&BasisMatrices>,
) -> Result<Array2<f64>, FilterError> {
    let terms = FilterTerms::precompute(g, x, params, basis)?;
    terms.combine(params, w)
}

fn expect_backbone(params: &FilterParams, want: Backbone) -> Result<(), FilterError> {
    if params.backbone != want {
        return Err(FilterError::Config(format!(
            "expected {want} parameters, got {}",
            params.backbone
        )));
    }
    Ok(())
}

/// `Σ γ_k (β Â^k X + (1 - β) U_k)`.
pub fn gpr_forward(
    g: &Graph,
    x: ArrayView2<f64>,
    params: &FilterParams,
    basis: Option<&BasisMatrices>,
) -> Result<Array2<f64>, FilterError> {
    expect_backbone(params, Backbone::Gpr)?;
    forward(g, x, params, None, basis)
}

/// `Σ θ_k [β C(K,k)/2^K (2I - L̂)^{K-k} L̂^k X + (1 - β) U_k]` with `θ_k >= 0`.
pub fn bern_forward(
    g: &Graph,
    x: ArrayView2<f64>,
    params: &FilterParams,
    basis: Option<&BasisMatrices>,
) -> Result<Array2<f64>, FilterError> {
    expect_backbone(params, Backbone::Bern)?;
    forward(g, x, params, None, basis)
}

/// Column `l`: `Σ α_kl [β P_k^{a,b}(Â) (XW)_{:l} + (1 - β) (U_k W)_{:l}]`.
pub fn jacobi_forward(
    g: &Graph,
    x: ArrayView2<f64>,
    w: &Array2<f64>,
    params: &FilterParams,
    basis: Option<&BasisMatrices>,
) -> Result<Array2<f64>, FilterError> {
    expect_backbone(params, Backbone::Jacobi)?;
    forward(g, x, params, Some(w), basis)
}

/// `Σ_k [β w_k T_k(L̂ - I) X + (1 - β) 2/(K+1) U_k]` with
/// `w_k = 2/(K+1) Σ_j γ_j T_k(x_j)`, halved at `k = 0`.
pub fn cheb2_forward(
    g: &Graph,
    x: ArrayView2<f64>,
    params: &FilterParams,
    basis: Option<&BasisMatrices>,
) -> Result<Array2<f64>, FilterError> {
    expect_backbone(params, Backbone::Cheb2)?;
    forward(g, x, params, None, basis)
}

/// ChebNetII weights `w_k` for `k = 0..=K` from the node values `γ_j`.
pub fn cheb2_weights(gamma: &[f64]) -> Vec<f64> {
    let order = gamma.len() - 1;
    let m = terms::cheb2_mixing(order);
    (0..=order)
        .map(|k| (0..=order).map(|j| m[[k, j]] * gamma[j]).sum())
        .collect()
}

/// Scalar response `h(λ)` at each eigenvalue `λ ∈ [0, 2]`, one column per
/// coefficient channel.
pub fn filter_response(params: &FilterParams, lambdas: &[f64]) -> Result<Array2<f64>, FilterError> {
    if params.plus {
        return Err(FilterError::ResponseWithBasis);
    }
    params.validate()?;
    let order = params.order;
    let coeffs = params.effective_coeffs();
    let channels = coeffs.ncols();
    let mut out = Array2::zeros((lambdas.len(), channels));

    for (row, &lam) in lambdas.iter().enumerate() {
        let basis_values: Vec<f64> = match params.backbone {
            Backbone::Gpr => (0..=order).map(|k| (1.0 - lam).powi(k as i32)).collect(),
            Backbone::Bern => (0..=order).map(|k| poly::bernstein_basis(order, k, lam)).collect(),
            Backbone::Jacobi => poly::jacobi_p(order, params.jacobi_a, params.jacobi_b, 1.0 - lam),
            Backbone::Cheb2 => {
                let w = cheb2_weights(&coeffs.column(0).to_vec());
                let t = poly::chebyshev_t(order, lam - 1.0);
                t.iter().zip(&w).map(|(tk, wk)| tk * wk).collect()
            }
        };
        for l in 0..channels {
            out[[row, l]] = match params.backbone {
                Backbone::Cheb2 => basis_values.iter().sum(),
                _ => (0..=order).map(|k| coeffs[[k, l]] * basis_values[k]).sum(),
            };
        }
    }
    Ok(out)
}
