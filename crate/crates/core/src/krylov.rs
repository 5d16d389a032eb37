//! Conjugate gradients for `(z I + A) w = g` with `A` self-adjoint and `z` complex.
//!
//! The iterates are Galerkin approximations in Krylov spaces; the search
//! directions obey a three-term recurrence even though `(A_z v, w)` is not an
//! inner product. The general preconditioned variant needs all previous
//! directions and solves a small triangular system for the coefficients.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::numerics::{axpy, dotc, RealOperator, C64};
use crate::precond::{InvPreconditioner, Preconditioner};
use crate::system::{distance_to_spectrum, Discretization, IterationReport, Monitor, ShiftedSystem, StopCriterion, StoppingRule};

/// Residuals are recomputed from scratch this often.
pub const RESIDUAL_REPLACEMENT: usize = 50;
/// Default restart length of the general preconditioned method.
pub const DEFAULT_RESTART: usize = 50;

/// Chebyshev error bound `|||e_n||| <= sec(φ/2) / |T_n(s)| |||e_0|||`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebyshevPrediction {
    pub s: C64,
    pub eta: C64,
    /// `|η|`, the asymptotic per-step factor.
    pub factor: f64,
    /// `arg z` of the shift the bound refers to.
    pub phi: f64,
    /// `sec(φ/2) / |T_n(s)|` for `n = 0..=n_max`.
    pub bounds: Vec<f64>,
}

impl ChebyshevPrediction {
    pub fn bound(&self, n: usize) -> f64 {
        let sec = 1.0 / (0.5 * self.phi).cos();
        sec * chebyshev_reciprocal(self.eta, n)
    }
}

/// `1/|T_n(s)| = 2|η|^n / |1 + η^{2n}|` for the root `|η| < 1` of `η + 1/η = 2s`.
pub fn chebyshev_reciprocal(eta: C64, n: usize) -> f64 {
    let en = eta.powu(n as u32);
    2.0 * en.norm() / (1.0 + en * en).norm()
}

/// `η = -(√(λN+z) - √(λ1+z)) / (√(λN+z) + √(λ1+z))` with principal square roots.
pub fn eta(lambda1: f64, lambda_n: f64, z: C64) -> C64 {
    let a = (z + lambda_n).sqrt();
    let b = (z + lambda1).sqrt();
    -(a - b) / (a + b)
}

pub fn chebyshev_prediction(lambda1: f64, lambda_n: f64, z: C64, n_max: usize) -> Result<ChebyshevPrediction> {
    if !(lambda1 < lambda_n) || !lambda1.is_finite() || !lambda_n.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need lambda1 < lambdaN, got [{lambda1}, {lambda_n}]; a single eigenvalue converges in one step"
        )));
    }
    if !z.is_finite() || (z.im == 0.0 && z.re + lambda1 <= 0.0) {
        return Err(Error::InvalidArgument(format!("shift {z} touches the spectrum")));
    }
    let s = -(lambda1 + lambda_n + 2.0 * z) / (lambda_n - lambda1);
    let eta = eta(lambda1, lambda_n, z);
    let mut pred = ChebyshevPrediction {
        s,
        eta,
        factor: eta.norm(),
        phi: z.arg(),
        bounds: Vec::new(),
    };
    pred.bounds = (0..=n_max).map(|n| pred.bound(n)).collect();
    Ok(pred)
}

/// The transformed problem `(z̃ + B) w = z̃ B g` with `B = (μ + A)^{-1}`:
/// spectrum `[1/(μ+λN), 1/(μ+λ1)]` and shift `z̃ = 1/(z - μ)`.
pub fn transformed_interval(lambda1: f64, lambda_n: f64, z: C64, mu: f64) -> Result<(f64, f64, C64)> {
    if !(mu > -lambda1) {
        return Err(Error::InvalidArgument(format!("mu = {mu} must exceed -lambda1")));
    }
    let zhat = z - mu;
    if zhat.norm() == 0.0 {
        return Err(Error::InvalidArgument("z = mu: the preconditioned system is trivial".into()));
    }
    Ok((1.0 / (mu + lambda_n), 1.0 / (mu + lambda1), 1.0 / zhat))
}

pub fn chebyshev_prediction_inv(
    lambda1: f64,
    lambda_n: f64,
    z: C64,
    mu: f64,
    n_max: usize,
) -> Result<ChebyshevPrediction> {
    let (l1, ln, zt) = transformed_interval(lambda1, lambda_n, z, mu)?;
    chebyshev_prediction(l1, ln, zt, n_max)
}

/// `μ` minimizing `|η̃|`: with `q = |z+λ1|/|z+λN|`, `μ = -λ1 + q(λN-λ1)/(1-q)`.
/// Returns `(μ, |η̃|)`.
pub fn optimal_mu_cg(lambda1: f64, lambda_n: f64, z: C64) -> Result<(f64, f64)> {
    if !(lambda1 > 0.0 && lambda_n > lambda1) {
        return Err(Error::InvalidArgument(format!("need 0 < lambda1 < lambdaN, got [{lambda1}, {lambda_n}]")));
    }
    let q = (z + lambda1).norm() / (z + lambda_n).norm();
    if !(q < 1.0) {
        return Err(Error::InvalidArgument(format!("need |z + lambdaN| > |z + lambda1| at z = {z}")));
    }
    let mu = -lambda1 + q / (1.0 - q) * (lambda_n - lambda1);
    if (z - mu).norm() <= 1e-14 * (1.0 + z.norm()) {
        return Ok((mu, 0.0));
    }
    let (l1, ln, zt) = transformed_interval(lambda1, lambda_n, z, mu)?;
    Ok((mu, eta(l1, ln, zt).norm()))
}

/// `σ I + H` with `H` self-adjoint in the inner product `<G u, v>`.
trait ShiftedOperator {
    fn sigma(&self) -> C64;
    fn gram(&self, v: &[C64]) -> Vec<C64>;
    /// `(H v, G H v)`.
    fn apply_h(&self, v: &[C64]) -> (Vec<C64>, Vec<C64>);
}

/// `z I + M^{-1} S` in the M-inner product.
struct BasicOperator<'a, 's> {
    system: &'s ShiftedSystem<'a>,
}

impl ShiftedOperator for BasicOperator<'_, '_> {
    fn sigma(&self) -> C64 {
        self.system.z
    }
    fn gram(&self, v: &[C64]) -> Vec<C64> {
        self.system.disc.mass().mul_complex(v)
    }
    fn apply_h(&self, v: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let sv = self.system.disc.stiffness().mul_complex(v);
        (self.system.mass_solve(&sv), sv)
    }
}

/// Energy norm of the transformed INV system:
/// `(|z̃| ‖v‖^2 + <(μM + S)^{-1} M v, M v>)^(1/2)`.
pub fn inv_triple_norm(disc: &Discretization, precond: &InvPreconditioner, ztilde: C64, v: &[C64]) -> f64 {
    let mv = disc.mass().mul_complex(v);
    let bv = precond.apply(&mv);
    (ztilde.norm() * dotc(&mv, v).re + dotc(&bv, &mv).re).max(0.0).sqrt()
}

/// `z̃ I + (μM + S)^{-1} M` in the M-inner product.
struct InvOperator<'a, 's, 'p> {
    system: &'s ShiftedSystem<'a>,
    precond: &'p InvPreconditioner,
    ztilde: C64,
}

impl ShiftedOperator for InvOperator<'_, '_, '_> {
    fn sigma(&self) -> C64 {
        self.ztilde
    }
    fn gram(&self, v: &[C64]) -> Vec<C64> {
        self.system.disc.mass().mul_complex(v)
    }
    fn apply_h(&self, v: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let hv = self.precond.apply(&self.gram(v));
        let ghv = self.gram(&hv);
        (hv, ghv)
    }
}

fn lin2(a: C64, x: &[C64], y: &[C64]) -> Vec<C64> {
    // a x + y
    x.iter().zip(y).map(|(u, v)| a * u + v).collect()
}

/// Three-term CG on `(σ + H) w = f`; `gf = G f`.
fn three_term(
    op: &dyn ShiftedOperator,
    f: &[C64],
    gf: &[C64],
    system: &ShiftedSystem,
    w0: &[C64],
    stop: &StoppingRule,
    amplification: f64,
) -> Result<IterationReport> {
    let sigma = op.sigma();
    let residual = |w: &[C64]| {
        let (hw, ghw) = op.apply_h(w);
        let gw = op.gram(w);
        let r: Vec<C64> = f.iter().zip(w.iter().zip(&hw)).map(|(fi, (wi, hi))| fi - sigma * wi - hi).collect();
        let gr: Vec<C64> = gf.iter().zip(gw.iter().zip(&ghw)).map(|(fi, (wi, hi))| fi - sigma * wi - hi).collect();
        (r, gr)
    };
    let mut monitor = Monitor::new(stop, amplification);
    let mut w = w0.to_vec();
    let (mut r, mut gr) = residual(&w);
    let mut rr = dotc(&gr, &r).re;
    if let Some(t) = &mut monitor.trace {
        t.residuals.push(r.clone());
    }
    if monitor.record(system.disc, &w, rr.max(0.0).sqrt()) || rr == 0.0 {
        return Ok(monitor.finish(w, 0, true));
    }
    let mut p = r.clone();
    let mut gp = gr.clone();
    for it in 1..=stop.max_iter {
        let (hp, ghp) = op.apply_h(&p);
        let ap = lin2(sigma, &p, &hp);
        let gap = lin2(sigma, &gp, &ghp);
        let pap = dotc(&gap, &p);
        if pap.norm() == 0.0 {
            return Err(Error::Breakdown { iteration: it });
        }
        let alpha = C64::new(rr, 0.0) / pap;
        axpy(alpha, &p, &mut w);
        if it % RESIDUAL_REPLACEMENT == 0 {
            (r, gr) = residual(&w);
        } else {
            axpy(-alpha, &ap, &mut r);
            axpy(-alpha, &gap, &mut gr);
        }
        let rr_next = dotc(&gr, &r).re;
        // β = -(r_{n+1}, A p_n) / (A p_n, p_n)
        let beta = -dotc(&r, &gap) / pap;
        if let Some(t) = &mut monitor.trace {
            t.residuals.push(r.clone());
            t.directions.push(p.clone());
            t.alphas.push(alpha);
            t.betas.push(beta);
        }
        let done = monitor.record(system.disc, &w, rr_next.max(0.0).sqrt());
        if done || rr_next == 0.0 {
            return Ok(monitor.finish(w, it, true));
        }
        if !crate::system::real_parts_finite(&w) {
            return Err(Error::NonFinite { x: it as f64 });
        }
        rr = rr_next;
        p = lin2(beta, &p, &r);
        gp = lin2(beta, &gp, &gr);
    }
    Ok(monitor.finish(w, stop.max_iter, false))
}

fn residual_amplification(stop: &StoppingRule, z: C64) -> f64 {
    match &stop.criterion {
        StopCriterion::Residual { lambda1, lambda_n, .. } => 1.0 / distance_to_spectrum(z, *lambda1, *lambda_n),
        StopCriterion::Error { .. } => f64::INFINITY,
    }
}

/// Unpreconditioned CG for `(zM + S) w = g`, i.e. `(z + A) w = M^{-1} g` in the M-inner product.
///
/// One mass solve per iteration realizes `A p`; all inner products use `M` and `S` directly.
pub fn cg_shifted(system: &ShiftedSystem, w0: &[C64], stop: &StoppingRule) -> Result<IterationReport> {
    check_len(system.dim(), w0.len())?;
    stop.check_dims(system.dim())?;
    let f = system.mass_solve(system.rhs);
    let op = BasicOperator { system };
    three_term(&op, &f, system.rhs, system, w0, stop, residual_amplification(stop, system.z))
}

/// CG for `(z̃ + B) w = z̃ B g` with `B = (μ + A)^{-1}` and `z̃ = 1/(z - μ)`.
///
/// Residual norms in the report are those of the transformed equation. At
/// `z = μ` the preconditioned operator is the identity and `w = B g` is
/// returned after one step.
pub fn cg_inv_precond(
    system: &ShiftedSystem,
    precond: &InvPreconditioner,
    w0: &[C64],
    stop: &StoppingRule,
) -> Result<IterationReport> {
    let n = system.dim();
    check_len(n, w0.len())?;
    check_len(n, precond.dim())?;
    stop.check_dims(n)?;
    let zhat = system.z - precond.mu();
    let bg = precond.apply(system.rhs);
    if zhat.norm() <= 1e-14 * (1.0 + system.z.norm()) {
        let mut monitor = Monitor::new(stop, f64::INFINITY);
        let r0 = system.matrix_residual(w0);
        monitor.record(system.disc, w0, system.residual_norm(&r0));
        monitor.record(system.disc, &bg, 0.0);
        return Ok(monitor.finish(bg, 1, true));
    }
    let ztilde = 1.0 / zhat;
    let f: Vec<C64> = bg.iter().map(|v| ztilde * v).collect();
    let gf = system.disc.mass().mul_complex(&f);
    let amplification = match &stop.criterion {
        StopCriterion::Residual { lambda1, lambda_n, .. } => {
            let (l1, ln, zt) = transformed_interval(*lambda1, *lambda_n, system.z, precond.mu())?;
            1.0 / distance_to_spectrum(zt, l1, ln)
        }
        StopCriterion::Error { .. } => f64::INFINITY,
    };
    let op = InvOperator {
        system,
        precond,
        ztilde,
    };
    three_term(&op, &f, &gf, system, w0, stop, amplification)
}

/// CG for `(zM + S) w = g` preconditioned by a symmetric positive-definite `𝓑`.
///
/// Works with `M r_n` and `r̃_n = 𝓑 M r_n`; the direction coefficients come
/// from a lower-triangular system over all directions of the current cycle.
/// The cycle restarts every `restart` directions. The residual norm in the
/// report costs one extra mass solve per step.
pub fn cg_general_precond(
    system: &ShiftedSystem,
    precond: &dyn Preconditioner,
    w0: &[C64],
    stop: &StoppingRule,
    restart: usize,
) -> Result<IterationReport> {
    let n = system.dim();
    check_len(n, w0.len())?;
    check_len(n, precond.dim())?;
    stop.check_dims(n)?;
    if restart == 0 {
        return Err(Error::InvalidArgument("restart length must be at least 1".into()));
    }
    let mut monitor = Monitor::new(stop, residual_amplification(stop, system.z));
    let mut w = w0.to_vec();
    let mut mr = system.matrix_residual(&w);
    if monitor.record(system.disc, &w, system.residual_norm(&mr)) {
        return Ok(monitor.finish(w, 0, true));
    }
    let mut rt = precond.apply(&mr);
    if let Some(t) = &mut monitor.trace {
        t.residuals.push(rt.clone());
    }
    // current cycle: directions, their images, and <A p_k, p_j> for k <= j
    let mut dirs: Vec<Vec<C64>> = vec![rt.clone()];
    let mut adirs: Vec<Vec<C64>> = vec![system.matrix_apply(&rt)];
    let mut gram: Vec<Vec<C64>> = vec![vec![dotc(&adirs[0], &dirs[0])]];
    for it in 1..=stop.max_iter {
        let j = dirs.len() - 1;
        let pap = gram[j][j];
        let mr_rt = dotc(&mr, &rt);
        if pap.norm() == 0.0 {
            if mr_rt.norm() == 0.0 {
                return Ok(monitor.finish(w, it - 1, true));
            }
            return Err(Error::Breakdown { iteration: it });
        }
        let alpha = mr_rt / pap;
        axpy(alpha, &dirs[j], &mut w);
        if it % RESIDUAL_REPLACEMENT == 0 {
            mr = system.matrix_residual(&w);
        } else {
            axpy(-alpha, &adirs[j], &mut mr);
        }
        rt = precond.apply(&mr);
        if let Some(t) = &mut monitor.trace {
            t.residuals.push(rt.clone());
            t.directions.push(dirs[j].clone());
            t.alphas.push(alpha);
        }
        if monitor.record(system.disc, &w, system.residual_norm(&mr)) {
            return Ok(monitor.finish(w, it, true));
        }
        if !crate::system::real_parts_finite(&w) {
            return Err(Error::NonFinite { x: it as f64 });
        }
        let art = system.matrix_apply(&rt);
        let next = if dirs.len() >= restart {
            dirs.clear();
            adirs.clear();
            gram.clear();
            rt.clone()
        } else {
            // forward substitution: sum_{k<=j} <A p_k, p_j> β_k = -<A r̃, p_j>
            let mut beta: Vec<C64> = Vec::with_capacity(dirs.len());
            for (jj, pj) in dirs.iter().enumerate() {
                let mut rhs = -dotc(&art, pj);
                for (k, b) in beta.iter().enumerate() {
                    rhs -= gram[jj][k] * b;
                }
                let diag = gram[jj][jj];
                if diag.norm() == 0.0 {
                    return Err(Error::Breakdown { iteration: it });
                }
                beta.push(rhs / diag);
            }
            if let Some(t) = &mut monitor.trace {
                t.betas.push(*beta.last().expect("nonempty cycle"));
            }
            let mut p = rt.clone();
            for (b, pk) in beta.iter().zip(&dirs) {
                axpy(*b, pk, &mut p);
            }
            p
        };
        let ap = system.matrix_apply(&next);
        let row: Vec<C64> = adirs
            .iter()
            .map(|ak| dotc(ak, &next))
            .chain(std::iter::once(dotc(&ap, &next)))
            .collect();
        dirs.push(next);
        adirs.push(ap);
        gram.push(row);
    }
    Ok(monitor.finish(w, stop.max_iter, false))
}
