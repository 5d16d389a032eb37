//! Hyperbolic contour, its equal-weight quadrature and the solver tolerance budget.
//!
//! The contour is `z(xi) = 1 - cosh(xi) + i sinh(xi)`, the left branch of a
//! hyperbola through the origin. With step `k = ln(q)/q` and nodes
//! `xi_j = j k`, `-q <= j <= q`, the inverse Laplace transform of `w` is
//! approximated by
//!
//! ```text
//! U(t) = k/(2 pi i) * sum_j exp(z_j t) w(z_j) z'(xi_j)
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureNode {
    pub j: i64,
    pub xi: f64,
    pub z: C64,
    /// `z'(xi_j)`
    pub dz: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourQuadrature {
    q: usize,
    k: f64,
    nodes: Vec<QuadratureNode>,
}

pub fn contour_point(xi: f64) -> C64 {
    C64::new(1.0 - xi.cosh(), xi.sinh())
}

pub fn contour_derivative(xi: f64) -> C64 {
    C64::new(-xi.sinh(), xi.cosh())
}

/// Builds the `2q + 1` point rule with step `ln(q)/q`.
pub fn build_quadrature(q: usize) -> Result<ContourQuadrature> {
    if q == 0 {
        return Err(Error::InvalidArgument("quadrature needs q >= 1".into()));
    }
    // ln(1) = 0 would collapse all nodes onto the origin
    let k = if q == 1 { 1.0 } else { (q as f64).ln() / q as f64 };
    let qi = q as i64;
    let nodes = (-qi..=qi)
        .map(|j| {
            let xi = j as f64 * k;
            QuadratureNode {
                j,
                xi,
                z: contour_point(xi),
                dz: contour_derivative(xi),
            }
        })
        .collect();
    Ok(ContourQuadrature { q, k, nodes })
}

impl ContourQuadrature {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn step(&self) -> f64 {
        self.k
    }

    /// All nodes, ordered by `j` from `-q` to `q`.
    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }

    /// Nodes with `j >= 0`; enough for problems with real data.
    pub fn upper_nodes(&self) -> &[QuadratureNode] {
        &self.nodes[self.q..]
    }

    pub fn node(&self, j: i64) -> Option<&QuadratureNode> {
        let idx = j + self.q as i64;
        if idx < 0 {
            return None;
        }
        self.nodes.get(idx as usize)
    }

    fn node_unchecked(&self, j: i64) -> &QuadratureNode {
        &self.nodes[(j + self.q as i64) as usize]
    }
}

/// How the nodal samples cover the contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSymmetry {
    /// Samples are given for every `-q <= j <= q`; the complex sum is returned.
    Full,
    /// Samples for `j >= 0` only, with `w(conj z) = conj w(z)`. The missing
    /// half is synthesized and the (real) result is returned with zero
    /// imaginary part after checking the residue is negligible.
    RealData,
}

/// Evaluates the quadrature sum at time `t > 0` from nodal solutions `w(z_j)`.
pub fn inverse_transform(
    samples: &BTreeMap<i64, Vec<C64>>,
    quad: &ContourQuadrature,
    t: f64,
    symmetry: SampleSymmetry,
) -> Result<Vec<C64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let q = quad.q as i64;
    let lo = match symmetry {
        SampleSymmetry::Full => -q,
        SampleSymmetry::RealData => 0,
    };
    let first = samples.get(&lo).ok_or(Error::MissingSample(lo))?;
    let n = first.len();
    let mut acc = vec![C64::new(0.0, 0.0); n];
    for j in lo..=q {
        let w = samples.get(&j).ok_or(Error::MissingSample(j))?;
        crate::error::check_len(n, w.len())?;
        let node = quad.node_unchecked(j);
        let c = (node.z * t).exp() * node.dz;
        match symmetry {
            SampleSymmetry::RealData if j > 0 => {
                // term_j + term_{-j} = term_j - conj(term_j)
                for (a, wi) in acc.iter_mut().zip(w) {
                    let term = c * wi;
                    *a += C64::new(0.0, 2.0 * term.im);
                }
            }
            _ => {
                for (a, wi) in acc.iter_mut().zip(w) {
                    *a += c * wi;
                }
            }
        }
    }
    let scale = C64::new(0.0, -quad.k / (2.0 * PI));
    let mut u: Vec<C64> = acc.into_iter().map(|a| a * scale).collect();
    if symmetry == SampleSymmetry::RealData {
        let re_norm = u.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
        let im_norm = u.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
        if im_norm > 1e-8 * re_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "samples are not real-data symmetric: imaginary residue {im_norm:e} vs {re_norm:e}"
            )));
        }
        for v in &mut u {
            v.im = 0.0;
        }
    }
    Ok(u)
}

/// Quadrature approximation of the inverse transform of a scalar function.
pub fn inverse_transform_scalar<F: Fn(C64) -> C64>(w: F, quad: &ContourQuadrature, t: f64) -> Result<C64> {
    let samples: BTreeMap<i64, Vec<C64>> = quad.nodes.iter().map(|n| (n.j, vec![w(n.z)])).collect();
    Ok(inverse_transform(&samples, quad, t, SampleSymmetry::Full)?[0])
}

/// Right-hand side of `E(t) <= k/(2 pi) sum_j eps_j exp(x_j t) |z'_j|`.
///
/// `errors` is indexed by `j + q`.
pub fn solver_error_bound(errors: &[f64], quad: &ContourQuadrature, t: f64) -> Result<f64> {
    crate::error::check_len(quad.nodes.len(), errors.len())?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let mut sum = 0.0;
    for (e, node) in errors.iter().zip(&quad.nodes) {
        if !(*e >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "negative solver error {e} at j = {}",
                node.j
            )));
        }
        sum += e * (node.z.re * t).exp() * node.dz.norm();
    }
    Ok(quad.k / (2.0 * PI) * sum)
}

/// Per-node solver tolerances whose total contribution to `U(t)` is below `delta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceBudget {
    pub delta: f64,
    pub t: f64,
    q: usize,
    eps: Vec<f64>,
}

impl ToleranceBudget {
    pub fn eps(&self, j: i64) -> f64 {
        self.eps[(j + self.q as i64) as usize]
    }

    /// Tolerances indexed by `j + q`.
    pub fn all(&self) -> &[f64] {
        &self.eps
    }
}

/// `eps_j = delta exp(-x_j t) / ((q + 1) k |z'_j|)`.
pub fn tolerance_budget(delta: f64, t: f64, quad: &ContourQuadrature) -> Result<ToleranceBudget> {
    if !(delta > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance budget needs delta > 0 and t > 0 (got {delta}, {t})"
        )));
    }
    let denom = (quad.q as f64 + 1.0) * quad.k;
    let eps = quad
        .nodes
        .iter()
        .map(|n| delta * (-n.z.re * t).exp() / (denom * n.dz.norm()))
        .collect();
    Ok(ToleranceBudget {
        delta,
        t,
        q: quad.q,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_and_origin() {
        let quad = build_quadrature(20).unwrap();
        assert!((quad.step() - 0.149787).abs() < 1e-6);
        assert_eq!(quad.node(0).unwrap().z, C64::new(0.0, 0.0));
        assert!(build_quadrature(0).is_err());
    }

    #[test]
    fn node_positions_match_reference_rows() {
        let quad = build_quadrature(20).unwrap();
        let z2 = quad.node(2).unwrap().z;
        assert!((z2.re + 0.05).abs() < 5e-3 && (z2.im - 0.30).abs() < 5e-3, "{z2}");
        let z20 = quad.node(20).unwrap().z;
        assert!((z20.re + 9.02).abs() < 5e-3 && (z20.im - 9.97).abs() < 5e-3, "{z20}");
    }

    #[test]
    fn conjugate_symmetry_of_nodes() {
        let quad = build_quadrature(17).unwrap();
        for j in 0..=17 {
            let a = quad.node(j).unwrap();
            let b = quad.node(-j).unwrap();
            assert!((b.z - a.z.conj()).norm() < 1e-14);
            assert!((b.dz + a.dz.conj()).norm() < 1e-14);
            if j > 0 {
                assert!(a.z.re < 0.0);
            }
        }
    }

    #[test]
    fn scalar_heat_kernels() {
        let quad = build_quadrature(20).unwrap();
        let u = inverse_transform_scalar(|z| 1.0 / (z + 1.0), &quad, 1.0).unwrap();
        assert!((u.re - (-1f64).exp()).abs() < 1e-4);
        let u = inverse_transform_scalar(|z| 1.0 / (z + 1.0) + 2.0 / ((z + 1.0) * (z + 1.0)), &quad, 1.0).unwrap();
        assert!((u.re - 1.103638).abs() < 1e-4, "{u}");
    }

    #[test]
    fn kernel_error_shrinks_with_q() {
        for lam in [1.0f64, 5.0, 20.0] {
            for t in [0.5, 1.0, 2.0] {
                let exact: f64 = (-lam * t).exp();
                let err = |q| {
                    let quad = build_quadrature(q).unwrap();
                    let u = inverse_transform_scalar(|z| 1.0 / (z + lam), &quad, t).unwrap();
                    (u - exact).norm()
                };
                let (e10, e20, e30) = (err(10), err(20), err(30));
                assert!(e20 <= 5e-4, "lambda {lam} t {t}: {e20}");
                assert!(e10 > e20 && e20 > e30, "lambda {lam} t {t}: {e10} {e20} {e30}");
            }
        }
    }

    #[test]
    fn real_data_shortcut_matches_full_sum() {
        let quad = build_quadrature(12).unwrap();
        let w = |z: C64| vec![1.0 / (z + 3.0), z / ((z + 1.0) * (z + 2.0))];
        let full: BTreeMap<_, _> = quad.nodes().iter().map(|n| (n.j, w(n.z))).collect();
        let half: BTreeMap<_, _> = quad.upper_nodes().iter().map(|n| (n.j, w(n.z))).collect();
        let a = inverse_transform(&full, &quad, 0.7, SampleSymmetry::Full).unwrap();
        let b = inverse_transform(&half, &quad, 0.7, SampleSymmetry::RealData).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-13);
        }
        assert!(matches!(
            inverse_transform(&half, &quad, 0.7, SampleSymmetry::Full),
            Err(Error::MissingSample(-12))
        ));
        assert!(inverse_transform(&half, &quad, 0.0, SampleSymmetry::RealData).is_err());
    }

    #[test]
    fn zero_samples_give_zero() {
        let quad = build_quadrature(5).unwrap();
        let s: BTreeMap<_, _> = quad.nodes().iter().map(|n| (n.j, vec![C64::new(0.0, 0.0); 3])).collect();
        let u = inverse_transform(&s, &quad, 1.0, SampleSymmetry::Full).unwrap();
        assert!(u.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_term_bound() {
        let quad = build_quadrature(20).unwrap();
        let mut e = vec![0.0; 41];
        assert_eq!(solver_error_bound(&e, &quad, 1.0).unwrap(), 0.0);
        e[20] = 1.0;
        let b = solver_error_bound(&e, &quad, 1.0).unwrap();
        assert!((b - 0.023839).abs() < 1e-6, "{b}");
        e[3] = -1.0;
        assert!(solver_error_bound(&e, &quad, 1.0).is_err());
    }

    #[test]
    fn budget_matches_reference_tolerances() {
        let quad = build_quadrature(20).unwrap();
        let b = tolerance_budget(1e-5, 1.0, &quad).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y;
        assert!(rel(b.eps(0), 3.18e-6) < 5e-3);
        assert!(rel(b.eps(10), 3.86e-6) < 5e-3);
        assert!(rel(b.eps(20), 1.87e-3) < 5e-3);
        let bound = solver_error_bound(b.all(), &quad, 1.0).unwrap();
        assert!((bound - 1e-5 * 41.0 / (2.0 * PI * 21.0)).abs() < 1e-18);
        assert!(bound <= 1e-5);
    }

    #[test]
    fn budget_is_not_monotone_for_small_j() {
        // exp(-x_j t) grows with j but |z'_j| grows faster at first, so the
        // sequence decreases up to j = 6 and only increases after it.
        let quad = build_quadrature(20).unwrap();
        let b = tolerance_budget(1e-5, 1.0, &quad).unwrap();
        for j in 0..6 {
            assert!(b.eps(j + 1) < b.eps(j), "j = {j}");
        }
        for j in 6..20 {
            assert!(b.eps(j + 1) > b.eps(j), "j = {j}");
        }
    }

    proptest! {
        #[test]
        fn budget_symmetric_and_within_delta(q in 1usize..60, delta in 1e-10f64..1.0, t in 0.05f64..5.0) {
            let quad = build_quadrature(q).unwrap();
            let b = tolerance_budget(delta, t, &quad).unwrap();
            for j in 0..=q as i64 {
                prop_assert!(b.eps(j) > 0.0);
                prop_assert!((b.eps(j) - b.eps(-j)).abs() <= 1e-15 * b.eps(j));
            }
            prop_assert!(solver_error_bound(b.all(), &quad, t).unwrap() <= delta);
        }
    }
}
