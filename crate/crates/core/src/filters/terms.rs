use ndarray::{Array2, ArrayView2, Axis};

use super::poly::{bernstein_weight, chebyshev_nodes, chebyshev_t, jacobi_first, jacobi_step};
use super::{Backbone, FilterError, FilterParams};
use crate::basis::BasisMatrices;
use crate::graph::Graph;

/// Propagated (and basis-blended) signals of a filter, computed once per
/// graph and input. Every backbone's output is linear in its coefficients
/// over these terms, so training only needs [`FilterTerms::combine`] and
/// [`FilterTerms::backward`].
///
/// Rows are independent: selecting rows before combining gives the same
/// values as combining and then selecting.
#[derive(Debug, Clone)]
pub struct FilterTerms {
    backbone: Backbone,
    order: usize,
    /// `K + 1` matrices of shape `rows × d`.
    terms: Vec<Array2<f64>>,
    /// Coefficient-independent part (ChebNetII basis blend only).
    offset: Option<Array2<f64>>,
}

/// `M[k, j] = s_k T_k(x_j)` with `s_k = 2/(K+1)`, halved at `k = 0`.
pub(crate) fn cheb2_mixing(order: usize) -> Array2<f64> {
    let nodes = chebyshev_nodes(order);
    let scale = 2.0 / (order + 1) as f64;
    let mut m = Array2::zeros((order + 1, order + 1));
    for (j, &xj) in nodes.iter().enumerate() {
        for (k, tk) in chebyshev_t(order, xj).into_iter().enumerate() {
            let s = if k == 0 { 0.5 * scale } else { scale };
            m[[k, j]] = s * tk;
        }
    }
    m
}

fn check_basis(
    params: &FilterParams,
    basis: Option<&BasisMatrices>,
    n: usize,
    d: usize,
) -> Result<Option<Vec<Array2<f64>>>, FilterError> {
    if !params.plus {
        return Ok(None);
    }
    let basis = basis.ok_or_else(|| {
        FilterError::Config("the heterophily basis is enabled but no basis was supplied".into())
    })?;
    if basis.order() != params.order {
        return Err(FilterError::Config(format!(
            "basis has order {} but the filter has order {}",
            basis.order(),
            params.order
        )));
    }
    if basis.matrices[0].dim() != (n, d) {
        return Err(FilterError::Config(format!(
            "basis matrices are {:?}, signal is {n}x{d}",
            basis.matrices[0].dim()
        )));
    }
    Ok(Some(basis.matrices.clone()))
}

impl FilterTerms {
    pub fn precompute(
        g: &Graph,
        x: ArrayView2<f64>,
        params: &FilterParams,
        basis: Option<&BasisMatrices>,
    ) -> Result<Self, FilterError> {
        params.validate()?;
        let (n, d) = x.dim();
        if n != g.num_nodes() {
            return Err(FilterError::Dimension(format!(
                "signal has {n} rows, graph has {} nodes",
                g.num_nodes()
            )));
        }
        let basis = check_basis(params, basis, n, d)?;
        let order = params.order;

        let mut raw = match params.backbone {
            Backbone::Gpr => {
                let mut out = vec![x.to_owned()];
                for k in 1..=order {
                    let next = g.norm_adj_matmul(out[k - 1].view())?;
                    out.push(next);
                }
                out
            }
            Backbone::Bern => {
                let mut lap_powers = vec![x.to_owned()];
                for k in 1..=order {
                    let next = g.norm_lap_matmul(lap_powers[k - 1].view())?;
                    lap_powers.push(next);
                }
                let mut out = Vec::with_capacity(order + 1);
                for (k, mut t) in lap_powers.into_iter().enumerate() {
                    for _ in 0..(order - k) {
                        // (2I - L̂) t
                        let lt = g.norm_lap_matmul(t.view())?;
                        t = &t * 2.0 - &lt;
                    }
                    t *= bernstein_weight(order, k);
                    out.push(t);
                }
                out
            }
            Backbone::Jacobi => {
                let (a, b) = (params.jacobi_a, params.jacobi_b);
                let mut out = vec![x.to_owned()];
                if order >= 1 {
                    let (lin, shift) = jacobi_first(a, b);
                    let ax = g.norm_adj_matmul(x)?;
                    out.push(&ax * lin + &x * shift);
                }
                for k in 2..=order {
                    let st = jacobi_step(k, a, b);
                    let ap = g.norm_adj_matmul(out[k - 1].view())?;
                    let next = &ap * st.lin + &out[k - 1] * st.shift - &out[k - 2] * st.back;
                    out.push(next);
                }
                out
            }
            Backbone::Cheb2 => {
                // T_k(L̂ - I) with L̂ - I = -Â.
                let mut out = vec![x.to_owned()];
                if order >= 1 {
                    out.push(-g.norm_adj_matmul(x)?);
                }
                for k in 2..=order {
                    let shifted = -g.norm_adj_matmul(out[k - 1].view())?;
                    let next = &shifted * 2.0 - &out[k - 2];
                    out.push(next);
                }
                out
            }
        };

        let mut offset = None;
        if let Some(u) = basis {
            let beta = params.beta;
            match params.backbone {
                Backbone::Cheb2 => {
                    let scale = (1.0 - beta) * 2.0 / (order + 1) as f64;
                    let mut off = Array2::zeros((n, d));
                    for uk in &u {
                        off.scaled_add(scale, uk);
                    }
                    for t in raw.iter_mut() {
                        *t *= beta;
                    }
                    offset = Some(off);
                }
                _ => {
                    for (t, uk) in raw.iter_mut().zip(&u) {
                        *t *= beta;
                        t.scaled_add(1.0 - beta, uk);
                    }
                }
            }
        }

        Ok(Self {
            backbone: params.backbone,
            order,
            terms: raw,
            offset,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rows(&self) -> usize {
        self.terms[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.terms[0].ncols()
    }

    pub fn terms(&self) -> &[Array2<f64>] {
        &self.terms
    }

    /// Restriction to the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            backbone: self.backbone,
            order: self.order,
            terms: self.terms.iter().map(|t| t.select(Axis(0), rows)).collect(),
            offset: self.offset.as_ref().map(|o| o.select(Axis(0), rows)),
        }
    }

    fn check(&self, params: &FilterParams, w: Option<&Array2<f64>>) -> Result<(), FilterError> {
        if params.backbone != self.backbone || params.order != self.order {
            return Err(FilterError::Config(format!(
                "terms were built for {} order {}, got {} order {}",
                self.backbone, self.order, params.backbone, params.order
            )));
        }
        params.validate()?;
        if self.backbone == Backbone::Jacobi {
            let w = w.ok_or_else(|| FilterError::Config("JacobiConv needs a weight matrix".into()))?;
            if w.nrows() != self.input_dim() {
                return Err(FilterError::Dimension(format!(
                    "weight has {} rows, signal has {} columns",
                    w.nrows(),
                    self.input_dim()
                )));
            }
            if params.channels() != w.ncols() {
                return Err(FilterError::Dimension(format!(
                    "{} coefficient channels for {} output columns",
                    params.channels(),
                    w.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Filter output for the given coefficients.
    pub fn combine(&self, params: &FilterParams, w: Option<&Array2<f64>>) -> Result<Array2<f64>, FilterError> {
        self.check(params, w)?;
        let coeffs = &params.coeffs;
        let out = match self.backbone {
            Backbone::Gpr | Backbone::Bern => {
                let eff = params.effective_coeffs();
                let mut z = Array2::zeros(self.terms[0].raw_dim());
                for (k, t) in self.terms.iter().enumerate() {
                    z.scaled_add(eff[[k, 0]], t);
                }
                z
            }
            Backbone::Cheb2 => {
                let gamma = coeffs.column(0).to_vec();
                let weights = super::cheb2_weights(&gamma);
                let mut z = match &self.offset {
                    Some(o) => o.clone(),
                    None => Array2::zeros(self.terms[0].raw_dim()),
                };
                for (wk, t) in weights.iter().zip(&self.terms) {
                    z.scaled_add(*wk, t);
                }
                z
            }
            Backbone::Jacobi => {
                let w = w.expect("checked");
                let mut z = Array2::zeros((self.rows(), w.ncols()));
                for (k, t) in self.terms.iter().enumerate() {
                    let mut h = t.dot(w);
                    h *= &coeffs.row(k);
                    z += &h;
                }
                z
            }
        };
        Ok(out)
    }

    /// Gradients of a scalar loss with respect to the raw coefficients and
    /// (for JacobiConv) the weight matrix, given `dL/dZ`.
    pub fn backward(
        &self,
        params: &FilterParams,
        w: Option<&Array2<f64>>,
        grad_out: &Array2<f64>,
    ) -> Result<(Array2<f64>, Option<Array2<f64>>), FilterError> {
        self.check(params, w)?;
        let inner = |t: &Array2<f64>| -> f64 { (t * grad_out).sum() };
        let order = self.order;
        match self.backbone {
            Backbone::Gpr => {
                let g = Array2::from_shape_fn((order + 1, 1), |(k, _)| inner(&self.terms[k]));
                Ok((g, None))
            }
            Backbone::Bern => {
                let g = Array2::from_shape_fn((order + 1, 1), |(k, _)| {
                    2.0 * params.coeffs[[k, 0]] * inner(&self.terms[k])
                });
                Ok((g, None))
            }
            Backbone::Cheb2 => {
                let m = cheb2_mixing(order);
                let per_term: Vec<f64> = self.terms.iter().map(inner).collect();
                let g = Array2::from_shape_fn((order + 1, 1), |(j, _)| {
                    (0..=order).map(|k| m[[k, j]] * per_term[k]).sum()
                });
                Ok((g, None))
            }
            Backbone::Jacobi => {
                let w = w.expect("checked");
                let mut g_alpha = Array2::zeros(params.coeffs.raw_dim());
                let mut g_w = Array2::zeros(w.raw_dim());
                for (k, t) in self.terms.iter().enumerate() {
                    let h = t.dot(w);
                    let col_sums = (&h * grad_out).sum_axis(Axis(0));
                    g_alpha.row_mut(k).assign(&col_sums);
                    let scaled = grad_out * &params.coeffs.row(k);
                    g_w += &t.t().dot(&scaled);
                }
                Ok((g_alpha, Some(g_w)))
            }
        }
    }
}
