//! Row builders for the quadrature, Richardson, CG and iteration-count tables.
//!
//! The Richardson and CG parameter tables depend only on `λ1`, `λN` and the
//! quadrature, so they can be produced for any interval without a mesh.

use rayon::prelude::*;
use serde::Serialize;

use super::{Method, MuChoice, Problem, SolverSpec, StopMode};
use crate::contour::{build_quadrature, tolerance_budget};
use crate::error::{Error, Result};
use crate::krylov::{
    chebyshev_prediction, chebyshev_prediction_inv, eta, inv_triple_norm, optimal_mu_cg, transformed_interval,
    DEFAULT_RESTART,
};
use crate::numerics::C64;
use crate::precond::{make_inv, PrecondKind, PreconditionerCache};
use crate::richardson::{optimize_mu_richardson, plan_basic, plan_general_precond, plan_inv_precond, InvSegment};
use crate::spectral::spectral_bounds;
use crate::system::StoppingRule;

type EnergyNorm<'a> = Box<dyn Fn(&[C64]) -> f64 + 'a>;

/// The off-contour point appended to the parameter tables.
pub const EXTRA_POINT: C64 = C64::new(-20.0, 20.0);

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureRow {
    pub j: i64,
    pub xi: f64,
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
    pub eps_j: f64,
}

/// Nodes `j = 0..=q` with the tolerance budget for `delta` at time `t`.
pub fn quadrature_table(q: usize, delta: f64, t: f64) -> Result<Vec<QuadratureRow>> {
    let quad = build_quadrature(q)?;
    let budget = tolerance_budget(delta, t, &quad)?;
    Ok(quad
        .upper_nodes()
        .iter()
        .map(|n| QuadratureRow {
            j: n.j,
            xi: n.xi,
            x: n.z.re,
            y: n.z.im,
            dx: n.dz.re,
            dy: n.dz.im,
            eps_j: budget.eps(n.j),
        })
        .collect())
}

/// Contour points `z_0, ..., z_q` (every `stride`-th) followed by [`EXTRA_POINT`].
/// The extra point has no index.
fn table_points(q: usize, stride: usize) -> Result<Vec<(Option<i64>, C64)>> {
    let quad = build_quadrature(q)?;
    let mut pts: Vec<(Option<i64>, C64)> = quad
        .upper_nodes()
        .iter()
        .filter(|n| (n.j as usize).is_multiple_of(stride.max(1)))
        .map(|n| (Some(n.j), n.z))
        .collect();
    pts.push((None, EXTRA_POINT));
    Ok(pts)
}

/// Basic and INV-preconditioned Richardson parameters.
#[derive(Debug, Clone, Serialize)]
pub struct RichardsonRow {
    pub j: Option<i64>,
    pub x: f64,
    pub y: f64,
    pub rho_z: f64,
    pub phi_z: f64,
    pub eps_z: f64,
    pub rho_inv: f64,
    pub phi_inv: f64,
    pub mu_z: f64,
    pub eps_tilde_z: f64,
}

/// `segment` selects the image of the spectrum used for the INV columns;
/// the reference tables use [`InvSegment::Unbounded`].
pub fn richardson_table(
    lambda1: f64,
    lambda_n: f64,
    q: usize,
    stride: usize,
    segment: InvSegment,
) -> Result<Vec<RichardsonRow>> {
    table_points(q, stride)?
        .into_iter()
        .map(|(j, z)| {
            let basic = plan_basic(lambda1, lambda_n, z)?;
            let mu = optimize_mu_richardson(lambda1, lambda_n, z, segment)?;
            let inv = plan_inv_precond(lambda1, lambda_n, z, mu, segment)?;
            Ok(RichardsonRow {
                j,
                x: z.re,
                y: z.im,
                rho_z: basic.rho(),
                phi_z: basic.phi(),
                eps_z: basic.factor,
                rho_inv: inv.rho(),
                phi_inv: inv.phi(),
                mu_z: mu,
                eps_tilde_z: inv.factor,
            })
        })
        .collect()
}

/// Parameters from the general preconditioner theory applied to INV, plus
/// optional columns for a mesh-dependent preconditioner.
#[derive(Debug, Clone, Serialize)]
pub struct GeneralRichardsonRow {
    pub j: Option<i64>,
    pub mu_z: f64,
    pub rho_hat: f64,
    pub phi_hat: f64,
    pub eps_hat: f64,
    pub rho_breve: f64,
    pub phi_breve: f64,
    pub eps_breve: f64,
    pub precond_rho: Option<f64>,
    pub precond_phi: Option<f64>,
    pub precond_eps: Option<f64>,
}

/// `μ` is the Richardson-optimal value for [`InvSegment::Unbounded`].
/// With `precond`, the same `μ` is used to build that preconditioner on
/// `problem` and its `m`, `M`, `‖B‖` feed the plain (hat) parameters.
pub fn general_richardson_table(
    lambda1: f64,
    lambda_n: f64,
    q: usize,
    stride: usize,
    precond: Option<(&Problem, PrecondKind)>,
) -> Result<Vec<GeneralRichardsonRow>> {
    let pts: Vec<(i64, C64)> = table_points(q, stride)?
        .into_iter()
        .filter_map(|(j, z)| j.map(|j| (j, z)))
        .collect();
    let cache = PreconditionerCache::new();
    pts.into_par_iter()
        .map(|(j, z)| {
            let mu = optimize_mu_richardson(lambda1, lambda_n, z, InvSegment::Unbounded)?;
            let zhat = z - mu;
            let norm_b = 1.0 / (lambda1 + mu);
            let lambda = zhat.norm() * norm_b;
            let hat = plan_general_precond(1.0, 1.0, lambda, zhat, None)?;
            let breve = plan_general_precond(1.0, 1.0, lambda, zhat, Some((-zhat.re).max(0.0)))?;
            let mut row = GeneralRichardsonRow {
                j: Some(j),
                mu_z: mu,
                rho_hat: hat.rho(),
                phi_hat: hat.phi(),
                eps_hat: hat.factor,
                rho_breve: breve.rho(),
                phi_breve: breve.phi(),
                eps_breve: breve.factor,
                precond_rho: None,
                precond_phi: None,
                precond_eps: None,
            };
            if let Some((problem, kind)) = precond {
                let p = cache.get_or_build(&problem.disc, kind, mu)?;
                let meta = spectral_bounds(p.as_ref(), &problem.disc, 1e-8)?;
                let plan = plan_general_precond(meta.m, meta.big_m, zhat.norm() * meta.norm_b, zhat, None)?;
                row.precond_rho = Some(plan.rho());
                row.precond_phi = Some(plan.phi());
                row.precond_eps = Some(plan.factor);
            }
            Ok(row)
        })
        .collect()
}

/// CG reduction factors: basic, INV at the optimal `μ`, and INV at `μ = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct CgRow {
    pub j: Option<i64>,
    pub x: f64,
    pub y: f64,
    pub eta_z: f64,
    pub eta_tilde_z: f64,
    pub mu_z: f64,
    pub eta_tilde_mu0: f64,
    pub mu0: f64,
}

pub fn cg_table(lambda1: f64, lambda_n: f64, q: usize, stride: usize) -> Result<Vec<CgRow>> {
    table_points(q, stride)?
        .into_iter()
        .map(|(j, z)| {
            let (mu, eta_opt) = optimal_mu_cg(lambda1, lambda_n, z)?;
            let eta_mu0 = if z.norm() == 0.0 {
                0.0
            } else {
                let (l1, ln, zt) = transformed_interval(lambda1, lambda_n, z, 0.0)?;
                eta(l1, ln, zt).norm()
            };
            Ok(CgRow {
                j,
                x: z.re,
                y: z.im,
                eta_z: eta(lambda1, lambda_n, z).norm(),
                eta_tilde_z: eta_opt,
                mu_z: mu,
                eta_tilde_mu0: eta_mu0,
                mu0: 0.0,
            })
        })
        .collect()
}

/// Iteration counts per quadrature point; `None` marks a solve that did not converge.
#[derive(Debug, Clone, Serialize)]
pub struct IterationsRow {
    pub j: i64,
    pub richardson_inv: Option<usize>,
    pub cg: Option<usize>,
    pub cg_inv: Option<usize>,
    pub cg_ic0: Option<usize>,
    pub cg_sgs: Option<usize>,
    pub norm_w: f64,
    pub eps_j: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IterationsOptions {
    pub delta: f64,
    pub t: f64,
    pub stop_mode: StopMode,
    pub sgs_steps: usize,
    pub max_iter: usize,
    pub warm_start: bool,
}

impl Default for IterationsOptions {
    fn default() -> Self {
        Self {
            delta: 1e-5,
            t: 1.0,
            stop_mode: StopMode::TrueError,
            sgs_steps: 1,
            max_iter: 5000,
            warm_start: true,
        }
    }
}

/// Runs every solver over `j = 0..=q`, each as its own warm-started chain.
pub fn iterations_table(problem: &Problem, opts: &IterationsOptions) -> Result<Vec<IterationsRow>> {
    let budget = tolerance_budget(opts.delta, opts.t, &problem.quad)?;
    let q = problem.quad.q() as i64;
    let refs = problem.direct_all()?;
    let solvers = [
        (Method::Richardson, Some(PrecondKind::Inv)),
        (Method::Cg, None),
        (Method::Cg, Some(PrecondKind::Inv)),
        (Method::Cg, Some(PrecondKind::Ic0)),
        (Method::Cg, Some(PrecondKind::Sgs(opts.sgs_steps))),
    ];
    let n = problem.disc.dim();
    let counts: Vec<Vec<Option<usize>>> = solvers
        .par_iter()
        .map(|&(method, precond)| {
            let spec = SolverSpec {
                method,
                precond,
                mu: MuChoice::Auto,
                restart: DEFAULT_RESTART,
                max_iter: opts.max_iter,
            };
            let cache = PreconditionerCache::new();
            let mut w0 = vec![C64::new(0.0, 0.0); n];
            let mut out = Vec::with_capacity(q as usize + 1);
            for j in 0..=q {
                let tol = budget.eps(j);
                let stop = match opts.stop_mode {
                    StopMode::TrueError => StoppingRule::error(refs[j as usize].clone(), tol),
                    StopMode::Residual => StoppingRule::residual(tol, problem.lambda1, problem.lambda_n),
                }
                .with_max_iter(opts.max_iter);
                let (report, _) = super::solve_point(problem, &spec, j, &w0, &stop, &cache)?;
                out.push(report.converged.then_some(report.iterations));
                if opts.warm_start {
                    w0 = report.solution;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..=q)
        .map(|j| {
            let i = j as usize;
            IterationsRow {
                j,
                richardson_inv: counts[0][i],
                cg: counts[1][i],
                cg_inv: counts[2][i],
                cg_ic0: counts[3][i],
                cg_sgs: counts[4][i],
                norm_w: problem.disc.norm(&refs[i]),
                eps_j: budget.eps(j),
            }
        })
        .collect())
}

/// One CG step: residual and error norms, the energy-norm error and its bound.
#[derive(Debug, Clone, Serialize)]
pub struct HistoryRow {
    pub n: usize,
    pub residual: f64,
    pub error: f64,
    pub energy_error: f64,
    pub bound: f64,
}

/// CG convergence history at `z_j`, run until the error falls below
/// `rel_tol · ‖w‖` or `max_iter` steps.
///
/// With `inv`, the INV-preconditioned method at the CG-optimal `μ` is used
/// and the energy norm and bound refer to the transformed system.
/// The flag reports whether the tolerance was reached.
pub fn cg_history(
    problem: &Problem,
    j: i64,
    inv: bool,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<HistoryRow>, bool)> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let z = problem.z(j)?;
    let reference = problem.direct(j)?;
    let tol = rel_tol * problem.disc.norm(&reference);
    let stop = StoppingRule::error(reference.clone(), tol)
        .with_max_iter(max_iter)
        .with_trace();
    let (l1, ln) = (problem.lambda1, problem.lambda_n);
    let g = problem.load(j)?;
    let system = crate::system::ShiftedSystem::new(&problem.disc, z, &g)?;
    let zero = vec![C64::new(0.0, 0.0); problem.disc.dim()];
    let (report, energy, prediction) = if inv {
        let (mu, _) = optimal_mu_cg(l1, ln, z)?;
        let p = make_inv(&problem.disc, mu)?;
        let report = crate::krylov::cg_inv_precond(&system, &p, &zero, &stop)?;
        let zt = 1.0 / (z - mu);
        let energy: EnergyNorm = Box::new(move |v| inv_triple_norm(&problem.disc, &p, zt, v));
        let pred = chebyshev_prediction_inv(l1, ln, z, mu, report.iterations)?;
        (report, energy, pred)
    } else {
        let report = crate::krylov::cg_shifted(&system, &zero, &stop)?;
        let energy: EnergyNorm = Box::new(move |v| problem.disc.triple_norm(z, v));
        let pred = chebyshev_prediction(l1, ln, z, report.iterations)?;
        (report, energy, pred)
    };
    let trace = report.trace.as_ref().ok_or_else(|| Error::InvalidArgument("no trace recorded".into()))?;
    let energies: Vec<f64> = trace
        .iterates
        .iter()
        .map(|w| {
            let e: Vec<C64> = w.iter().zip(&reference).map(|(a, b)| a - b).collect();
            energy(&e)
        })
        .collect();
    let e0 = energies.first().copied().unwrap_or(0.0);
    let rows = energies
        .iter()
        .enumerate()
        .map(|(n, &en)| HistoryRow {
            n,
            residual: report.residual_norms[n],
            error: report.error_norms[n],
            energy_error: en,
            bound: prediction.bound(n) * e0,
        })
        .collect();
    Ok((rows, report.converged))
}
