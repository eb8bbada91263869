//! Scalar polynomial families behind the filters.

use std::f64::consts::PI;

/// Roots of `T_{K+1}`: `x_j = cos((j + 1/2) π / (K + 1))` for `j = 0..=K`.
pub fn chebyshev_nodes(order: usize) -> Vec<f64> {
    let m = (order + 1) as f64;
    (0..=order)
        .map(|j| ((j as f64 + 0.5) * PI / m).cos())
        .collect()
}

/// `T_0(x) ..= T_K(x)` via `T_k = 2x T_{k-1} - T_{k-2}`.
pub fn chebyshev_t(order: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(order + 1);
    t.push(1.0);
    if order >= 1 {
        t.push(x);
    }
    for k in 2..=order {
        t.push(2.0 * x * t[k - 1] - t[k - 2]);
    }
    t
}

/// Three-term recurrence coefficients for Jacobi polynomials, `k >= 2`:
/// `P_k = (lin · x + shift) P_{k-1} - back · P_{k-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiStep {
    pub lin: f64,
    pub shift: f64,
    pub back: f64,
}

pub fn jacobi_step(k: usize, a: f64, b: f64) -> JacobiStep {
    let k = k as f64;
    let s = 2.0 * k + a + b;
    let common = (s - 1.0) / (2.0 * k * (k + a + b) * (s - 2.0));
    JacobiStep {
        lin: common * s * (s - 2.0),
        shift: common * (a * a - b * b),
        back: (k + a - 1.0) * (k + b - 1.0) * s / (k * (k + a + b) * (s - 2.0)),
    }
}

/// `P_1^{a,b}(x) = (a - b)/2 + ((a + b)/2 + 1) x`, as `(lin, shift)`.
pub fn jacobi_first(a: f64, b: f64) -> (f64, f64) {
    (0.5 * a + 0.5 * b + 1.0, 0.5 * a - 0.5 * b)
}

/// `P_0^{a,b}(x) ..= P_K^{a,b}(x)`.
pub fn jacobi_p(order: usize, a: f64, b: f64, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(order + 1);
    p.push(1.0);
    if order >= 1 {
        let (lin, shift) = jacobi_first(a, b);
        p.push(lin * x + shift);
    }
    for k in 2..=order {
        let st = jacobi_step(k, a, b);
        p.push((st.lin * x + st.shift) * p[k - 1] - st.back * p[k - 2]);
    }
    p
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(K, k) / 2^K`, the Bernstein normalization.
pub fn bernstein_weight(order: usize, k: usize) -> f64 {
    binomial(order, k) / 2f64.powi(order as i32)
}

/// `C(K,k)/2^K · (2 - λ)^{K-k} λ^k`.
pub fn bernstein_basis(order: usize, k: usize, lambda: f64) -> f64 {
    bernstein_weight(order, k) * (2.0 - lambda).powi((order - k) as i32) * lambda.powi(k as i32)
}
