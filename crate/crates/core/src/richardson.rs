//! Richardson iteration with a complex acceleration parameter.
//!
//! The planners compute `α` and the predicted per-step error reduction; the
//! loop in [`run_richardson`] applies `w += α B r` with `B = M^{-1}` or a
//! preconditioner.

use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use crate::error::{check_len, Error, Result};
use crate::numerics::{axpy, minimize_scalar, ScalarMinimizerConfig, C64};
use crate::precond::Preconditioner;
use crate::system::{distance_to_spectrum, IterationReport, Monitor, ShiftedSystem, StoppingRule};

/// Optimal `α` for the segment `[a, b]`: minimizes `max |1 - α s|` over `s` on the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentAlpha {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    pub f1: f64,
    pub f2: f64,
    pub s_min: f64,
    pub alpha: C64,
    pub reduction: f64,
    /// Endpoints are real multiples of each other, so the real formula was used.
    pub collinear: bool,
}

/// Closed-form optimal acceleration parameter for a segment not containing 0.
///
/// With `c = (a+b)/2` and `d = i(b-a)`, the optimum is `α = 1/(c + s d)` where
/// `s` minimizes `|1 - α a|^2` as a real rational function of `s`.
pub fn optimal_alpha_segment(a: C64, b: C64) -> Result<SegmentAlpha> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("segment endpoints must be finite: {a}, {b}")));
    }
    if (a - b).norm() <= 1e-15 * a.norm().max(b.norm()) {
        return Err(Error::InvalidArgument(format!(
            "segment endpoints coincide ({a}); use alpha = 1/a"
        )));
    }
    let c = 0.5 * (a + b);
    let d = C64::i() * (b - a);
    let ad = (a * d.conj()).re;
    if ad.abs() <= 1e-14 * a.norm() * d.norm() {
        if (a + b).norm() == 0.0 {
            return Err(Error::InvalidArgument("segment passes through the origin".into()));
        }
        let alpha = 2.0 / (a + b);
        return Ok(SegmentAlpha {
            a,
            b,
            c,
            d,
            f1: f64::NAN,
            f2: f64::NAN,
            s_min: 0.0,
            alpha,
            reduction: (b - a).norm() / (b + a).norm(),
            collinear: true,
        });
    }
    let f1 = (2.0 * (a * c.conj()).re - a.norm_sqr()) / (2.0 * ad);
    let f2 = (2.0 * f1 * (c * d.conj()).re - c.norm_sqr()) / d.norm_sqr();
    let s_min = -f1 + ad.signum() * (f1 * f1 - f2).max(0.0).sqrt();
    let alpha = 1.0 / (c + s_min * d);
    Ok(SegmentAlpha {
        a,
        b,
        c,
        d,
        f1,
        f2,
        s_min,
        alpha,
        reduction: (1.0 - alpha * a).norm(),
        collinear: false,
    })
}

/// `|1 - α a|^2` as a function of `s` where `α = 1/(c + s d)`.
pub fn segment_objective(seg: &SegmentAlpha, s: f64) -> f64 {
    (1.0 - seg.a / (seg.c + s * seg.d)).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RichardsonVariant {
    Basic,
    InvPrecond,
    GeneralPrecond,
    GeneralPrecondBreve,
}

/// How the image of `[λ1, λN]` under `G(λ) = (z+λ)/(μ+λ)` is enclosed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvSegment {
    /// Segment `[G(λ1), G(λN)]`.
    Finite,
    /// Segment `[G(λ1), 1]`, the limit `λN → ∞`. It contains the finite
    /// segment, so its reduction factor is also a valid bound.
    Unbounded,
}

/// Spectral data entering the general-preconditioner planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralParams {
    pub m: f64,
    pub big_m: f64,
    pub lambda: f64,
    pub lambda_breve: Option<f64>,
    pub gamma: Option<f64>,
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RichardsonPlan {
    pub variant: RichardsonVariant,
    pub alpha: C64,
    /// Predicted per-step reduction of the error norm.
    pub factor: f64,
    pub mu: Option<f64>,
    pub general: Option<GeneralParams>,
}

impl RichardsonPlan {
    pub fn rho(&self) -> f64 {
        self.alpha.norm()
    }
    /// `φ = -arg α`.
    pub fn phi(&self) -> f64 {
        -self.alpha.arg()
    }
}

fn check_interval(lambda1: f64, lambda_n: f64) -> Result<()> {
    if !(lambda1 > 0.0 && lambda_n >= lambda1 && lambda_n.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < lambda1 <= lambdaN, got [{lambda1}, {lambda_n}]"
        )));
    }
    Ok(())
}

fn check_shift(z: C64) -> Result<()> {
    if !z.is_finite() || (z.im == 0.0 && z.re < 0.0) {
        return Err(Error::InvalidArgument(format!("shift {z} must satisfy |arg z| < pi")));
    }
    Ok(())
}

fn segment_or_point(a: C64, b: C64) -> Result<(C64, f64)> {
    if (a - b).norm() <= 1e-13 * a.norm().max(b.norm()) {
        if a.norm() == 0.0 {
            return Err(Error::InvalidArgument("operator spectrum contains 0".into()));
        }
        return Ok((1.0 / a, 0.0));
    }
    let seg = optimal_alpha_segment(a, b)?;
    Ok((seg.alpha, seg.reduction))
}

/// Unpreconditioned iteration: optimal `α` for the spectrum `z + [λ1, λN]` of `A_z`.
pub fn plan_basic(lambda1: f64, lambda_n: f64, z: C64) -> Result<RichardsonPlan> {
    check_interval(lambda1, lambda_n)?;
    check_shift(z)?;
    let (alpha, factor) = segment_or_point(z + lambda1, z + lambda_n)?;
    Ok(RichardsonPlan {
        variant: RichardsonVariant::Basic,
        alpha,
        factor,
        mu: None,
        general: None,
    })
}

/// `G(λ, μ) = (z + λ)/(μ + λ)`, the eigenvalues of `(μ + A)^{-1} A_z`.
pub fn inv_symbol(z: C64, lambda: f64, mu: f64) -> C64 {
    (z + lambda) / (mu + lambda)
}

/// Preconditioner `(μ + A)^{-1}`: optimal `α` for the image of `[λ1, λN]` under `G(·, μ)`.
pub fn plan_inv_precond(lambda1: f64, lambda_n: f64, z: C64, mu: f64, segment: InvSegment) -> Result<RichardsonPlan> {
    check_interval(lambda1, lambda_n)?;
    check_shift(z)?;
    if !(mu > -lambda1) {
        return Err(Error::InvalidArgument(format!("mu = {mu} must exceed -lambda1 = {}", -lambda1)));
    }
    let a = inv_symbol(z, lambda1, mu);
    let b = match segment {
        InvSegment::Finite => inv_symbol(z, lambda_n, mu),
        InvSegment::Unbounded => C64::new(1.0, 0.0),
    };
    let (alpha, factor) = segment_or_point(a, b)?;
    Ok(RichardsonPlan {
        variant: RichardsonVariant::InvPrecond,
        alpha,
        factor,
        mu: Some(mu),
        general: None,
    })
}

/// The `μ` minimizing the reduction factor of [`plan_inv_precond`].
///
/// For real `z > -λ1` the preconditioner is exact at `μ = z`.
pub fn optimize_mu_richardson(lambda1: f64, lambda_n: f64, z: C64, segment: InvSegment) -> Result<f64> {
    check_interval(lambda1, lambda_n)?;
    check_shift(z)?;
    if z.im == 0.0 && z.re > -lambda1 {
        return Ok(z.re);
    }
    let lo = -lambda1 + 1e-9 * lambda1.max(1.0);
    let hi = 10.0 * (z.norm() + lambda1);
    let objective = |mu: f64| {
        plan_inv_precond(lambda1, lambda_n, z, mu, segment)
            .map(|p| p.factor)
            .unwrap_or(f64::INFINITY)
    };
    let min = minimize_scalar(objective, ScalarMinimizerConfig::new(lo, hi))?;
    if !min.min.is_finite() {
        return Err(Error::InvalidArgument(format!("no admissible mu for z = {z}")));
    }
    Ok(min.argmin)
}

/// General symmetric preconditioner with spectral bounds
/// `m (B^{-1} v, v) <= ((μ + A) v, v) <= M (B^{-1} v, v)`.
///
/// `zhat = z - μ`, `lambda = |zhat| ‖B‖`. When `gamma` is given the sharper
/// variant using `Λ - 2γ/|zhat|` is returned.
pub fn plan_general_precond(
    m: f64,
    big_m: f64,
    lambda: f64,
    zhat: C64,
    gamma: Option<f64>,
) -> Result<RichardsonPlan> {
    if !(m > 0.0 && big_m >= m && big_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < m <= M, got m = {m}, M = {big_m}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("need Lambda >= 0, got {lambda}")));
    }
    if let Some(g) = gamma {
        if !(g >= 0.0) {
            return Err(Error::InvalidArgument(format!("need gamma >= 0, got {g}")));
        }
    }
    let variant = if gamma.is_some() {
        RichardsonVariant::GeneralPrecondBreve
    } else {
        RichardsonVariant::GeneralPrecond
    };
    let radius = zhat.norm();
    if radius <= 1e-14 {
        return Ok(RichardsonPlan {
            variant,
            alpha: C64::new(1.0 / big_m, 0.0),
            factor: (1.0 - m / big_m).max(0.0).sqrt(),
            mu: None,
            general: Some(GeneralParams {
                m,
                big_m,
                lambda,
                lambda_breve: None,
                gamma,
                zeta: 0.0,
            }),
        });
    }
    // Work in the upper half-plane and conjugate back.
    let flip = zhat.im < 0.0;
    let zeta = if flip { zhat.conj() } else { zhat }.arg();
    let lo = zeta - FRAC_PI_2 + 1e-9;
    let hi = FRAC_PI_2 - 1e-9;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "empty angle interval for arg(z - mu) = {zeta}"
        )));
    }
    let lambda_breve = gamma.map(|g| lambda - 2.0 * g / radius);
    let nu = |phi: f64| {
        let cz = (zeta - phi).cos();
        let cp = phi.cos();
        let denom = match lambda_breve {
            None => big_m * cz + lambda * cp,
            Some(lb) => (big_m * cz).max(lb * cp),
        };
        m * cp * cp * cz / denom
    };
    let best = minimize_scalar(|phi| -nu(phi), ScalarMinimizerConfig::new(lo, hi))?;
    let phi = best.argmin;
    let nu_max = nu(phi);
    let rho = nu_max / (m * phi.cos());
    let mut alpha = C64::from_polar(rho, -phi);
    if flip {
        alpha = alpha.conj();
    }
    Ok(RichardsonPlan {
        variant,
        alpha,
        factor: (1.0 - nu_max).max(0.0).sqrt(),
        mu: None,
        general: Some(GeneralParams {
            m,
            big_m,
            lambda,
            lambda_breve,
            gamma,
            zeta,
        }),
    })
}

/// Runs `w_{n+1} = w_n + α B (g - A_z w_n)` where `B` is `M^{-1}` for the
/// basic plan and the preconditioner otherwise.
///
/// The residual criterion uses `‖A_z^{-1}‖ <= 1/dist(-z, [λ1, λN])`.
pub fn run_richardson(
    system: &ShiftedSystem,
    plan: &RichardsonPlan,
    precond: Option<&dyn Preconditioner>,
    w0: &[C64],
    stop: &StoppingRule,
) -> Result<IterationReport> {
    let n = system.dim();
    check_len(n, w0.len())?;
    stop.check_dims(n)?;
    match (plan.variant, precond) {
        (RichardsonVariant::Basic, None) => {}
        (RichardsonVariant::Basic, Some(_)) => {
            return Err(Error::InvalidArgument("basic plan given a preconditioner".into()))
        }
        (_, None) => {
            return Err(Error::InvalidArgument("preconditioned plan needs a preconditioner".into()))
        }
        (_, Some(b)) => check_len(n, b.dim())?,
    }
    let amplification = match &stop.criterion {
        crate::system::StopCriterion::Residual { lambda1, lambda_n, .. } => {
            1.0 / distance_to_spectrum(system.z, *lambda1, *lambda_n)
        }
        _ => f64::INFINITY,
    };
    let mut monitor = Monitor::new(stop, amplification);
    let mut w = w0.to_vec();
    let mut mr = system.matrix_residual(&w);
    let mut minv_r = system.mass_solve(&mr);
    let norm = |mr: &[C64], minv_r: &[C64]| crate::numerics::dotc(mr, minv_r).re.max(0.0).sqrt();
    if monitor.record(system.disc, &w, norm(&mr, &minv_r)) {
        return Ok(monitor.finish(w, 0, true));
    }
    for it in 1..=stop.max_iter {
        let step = match precond {
            None => minv_r.clone(),
            Some(b) => b.apply(&mr),
        };
        axpy(plan.alpha, &step, &mut w);
        mr = system.matrix_residual(&w);
        minv_r = system.mass_solve(&mr);
        if let Some(t) = &mut monitor.trace {
            t.residuals.push(minv_r.clone());
            t.directions.push(step);
            t.alphas.push(plan.alpha);
        }
        let done = monitor.record(system.disc, &w, norm(&mr, &minv_r));
        if done {
            return Ok(monitor.finish(w, it, true));
        }
        if monitor.diverging() || !crate::system::real_parts_finite(&w) {
            log::warn!("Richardson iteration diverging at step {it} for z = {}", system.z);
            return Ok(monitor.finish(w, it, false));
        }
    }
    Ok(monitor.finish(w, stop.max_iter, false))
}
