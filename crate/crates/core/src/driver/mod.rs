//! End-to-end solution of the model heat problem and the table builders.

mod tables;

pub use tables::*;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::contour::{build_quadrature, inverse_transform, tolerance_budget, ContourQuadrature, SampleSymmetry};
use crate::error::{Error, Result};
use crate::fem::{exact_nodal_solution, generate_trapezium_mesh, read_mesh, FemSpace, ModelProblem, DEFAULT_DIFFUSIVITY};
use crate::krylov::{cg_general_precond, cg_inv_precond, cg_shifted, optimal_mu_cg};
use crate::numerics::C64;
use crate::precond::{make_inv, PrecondKind, Preconditioner, PreconditionerCache};
use crate::richardson::{
    optimize_mu_richardson, plan_basic, plan_general_precond, plan_inv_precond, run_richardson, InvSegment,
};
use crate::spectral::{spectral_bounds, stiffness_bounds};
use crate::system::{Discretization, IterationReport, ShiftedSystem, StoppingRule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MeshSource {
    /// Structured trapezium mesh with `m` intervals per unit length.
    Generated(usize),
    Files { node: PathBuf, ele: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Richardson,
    Cg,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "richardson" => Ok(Self::Richardson),
            "cg" => Ok(Self::Cg),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method {s:?} (expected direct, richardson or cg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MuChoice {
    /// Optimal value for the method: the Richardson reduction factor or the CG rate.
    Auto,
    Fixed(f64),
}

impl FromStr for MuChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .map(Self::Fixed)
            .map_err(|_| Error::InvalidArgument(format!("mu must be 'auto' or a number, got {s:?}")))
    }
}

/// How each quadrature-point solve decides it is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMode {
    /// `‖w_n - w‖ <= ε_j` against a direct solution.
    TrueError,
    /// Residual bound guaranteeing `‖w_n - w‖ <= ε_j`.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub q: usize,
    pub times: Vec<f64>,
    pub mesh: MeshSource,
    pub diffusivity: f64,
    pub method: Method,
    pub precond: Option<PrecondKind>,
    pub mu: MuChoice,
    pub delta: f64,
    pub warm_start: bool,
    pub lumped: bool,
    /// `(λ1, λN)` used instead of estimating them on the mesh.
    pub lambda_override: Option<(f64, f64)>,
    pub stop_mode: StopMode,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            q: 20,
            times: vec![1.0],
            mesh: MeshSource::Generated(40),
            diffusivity: DEFAULT_DIFFUSIVITY,
            method: Method::Cg,
            precond: Some(PrecondKind::Inv),
            mu: MuChoice::Auto,
            delta: 1e-5,
            warm_start: true,
            lumped: false,
            lambda_override: None,
            stop_mode: StopMode::Residual,
            restart: crate::krylov::DEFAULT_RESTART,
            max_iter: 5000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.q == 0 {
            return bad("q must be at least 1".into());
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad(format!("times must be positive, got {:?}", self.times));
        }
        if let MeshSource::Generated(m) = self.mesh {
            if m < 2 {
                return bad(format!("mesh needs m >= 2, got {m}"));
            }
        }
        if !(self.diffusivity > 0.0) {
            return bad(format!("diffusivity must be positive, got {}", self.diffusivity));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.method == Method::Direct && self.precond.is_some() {
            return bad("the direct method takes no preconditioner".into());
        }
        if let Some((l1, ln)) = self.lambda_override {
            if !(l1 > 0.0 && ln > l1) {
                return bad(format!("need 0 < lambda1 < lambdaN, got [{l1}, {ln}]"));
            }
        }
        if let MuChoice::Fixed(mu) = self.mu {
            if !mu.is_finite() {
                return bad("mu must be finite".into());
            }
        }
        if self.restart == 0 || self.max_iter == 0 {
            return bad("restart and max_iter must be at least 1".into());
        }
        Ok(())
    }

    /// Smallest requested time; its tolerance budget is the strictest.
    pub fn budget_time(&self) -> f64 {
        self.times.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Everything fixed by the mesh and `q`.
pub struct Problem {
    pub space: FemSpace,
    pub disc: Discretization,
    pub model: ModelProblem,
    pub quad: ContourQuadrature,
    pub lambda1: f64,
    pub lambda_n: f64,
}

impl Problem {
    pub fn new(space: FemSpace, q: usize, lumped: bool, lambda_override: Option<(f64, f64)>) -> Result<Self> {
        let disc = Discretization::from_space(&space, lumped)?;
        let (lambda1, lambda_n) = match lambda_override {
            Some(l) => l,
            None => {
                let (lo, hi) = stiffness_bounds(&disc, 1e-10)?;
                (lo.value, hi.value)
            }
        };
        let model = ModelProblem::new(&space);
        Ok(Self {
            space,
            disc,
            model,
            quad: build_quadrature(q)?,
            lambda1,
            lambda_n,
        })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mesh = match &cfg.mesh {
            MeshSource::Generated(m) => generate_trapezium_mesh(*m)?,
            MeshSource::Files { node, ele } => read_mesh(node, ele)?,
        };
        let space = FemSpace::assemble(mesh, cfg.diffusivity)?;
        Self::new(space, cfg.q, cfg.lumped, cfg.lambda_override)
    }

    pub fn z(&self, j: i64) -> Result<C64> {
        self.quad
            .node(j)
            .map(|n| n.z)
            .ok_or_else(|| Error::InvalidArgument(format!("no quadrature node j = {j}")))
    }

    pub fn load(&self, j: i64) -> Result<Vec<C64>> {
        self.model.load_vector(self.z(j)?)
    }

    pub fn direct(&self, j: i64) -> Result<Vec<C64>> {
        self.disc.direct_solve(self.z(j)?, &self.load(j)?)
    }

    /// Direct solutions for `j = 0..=q`, computed in parallel.
    pub fn direct_all(&self) -> Result<Vec<Vec<C64>>> {
        (0..=self.quad.q() as i64).into_par_iter().map(|j| self.direct(j)).collect()
    }
}

/// A solver choice at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSpec {
    pub method: Method,
    pub precond: Option<PrecondKind>,
    pub mu: MuChoice,
    pub restart: usize,
    pub max_iter: usize,
}

impl SolverSpec {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            method: cfg.method,
            precond: cfg.precond,
            mu: cfg.mu,
            restart: cfg.restart,
            max_iter: cfg.max_iter,
        }
    }
}

/// Outcome of one quadrature-point solve.
#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub j: i64,
    pub z: C64,
    pub mu: Option<f64>,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub norm_w: f64,
    pub residual_norms: Vec<f64>,
    pub error_norms: Vec<f64>,
    pub seconds: f64,
}

fn choose_mu(problem: &Problem, spec: &SolverSpec, z: C64) -> Result<f64> {
    match spec.mu {
        MuChoice::Fixed(mu) => Ok(mu),
        MuChoice::Auto => match spec.method {
            Method::Cg => match optimal_mu_cg(problem.lambda1, problem.lambda_n, z) {
                Ok((mu, _)) => Ok(mu),
                // far out on the contour the condition fails; fall back to the limit value
                Err(_) => Ok(((z + problem.lambda1).norm() - problem.lambda1).max(0.0)),
            },
            _ => optimize_mu_richardson(problem.lambda1, problem.lambda_n, z, InvSegment::Finite),
        },
    }
}

/// Solves `(z_j M + S) w = g(z_j)` with the given solver.
pub fn solve_point(
    problem: &Problem,
    spec: &SolverSpec,
    j: i64,
    w0: &[C64],
    stop: &StoppingRule,
    cache: &PreconditionerCache,
) -> Result<(IterationReport, Option<f64>)> {
    let z = problem.z(j)?;
    let g = problem.load(j)?;
    let system = ShiftedSystem::new(&problem.disc, z, &g)?;
    let (l1, ln) = (problem.lambda1, problem.lambda_n);
    if spec.method == Method::Direct {
        let w = problem.disc.direct_solve(z, &g)?;
        let report = IterationReport {
            solution: w,
            iterations: 0,
            converged: true,
            residual_norms: vec![],
            error_norms: vec![],
            trace: None,
        };
        return Ok((report, None));
    }
    let Some(kind) = spec.precond else {
        let report = match spec.method {
            Method::Cg => cg_shifted(&system, w0, stop)?,
            _ => run_richardson(&system, &plan_basic(l1, ln, z)?, None, w0, stop)?,
        };
        return Ok((report, None));
    };
    let mu = choose_mu(problem, spec, z)?;
    let report = match (spec.method, kind) {
        (Method::Cg, PrecondKind::Inv) => {
            let p = make_inv(&problem.disc, mu)?;
            cg_inv_precond(&system, &p, w0, stop)?
        }
        (Method::Cg, _) => {
            let p = cache.get_or_build(&problem.disc, kind, mu)?;
            cg_general_precond(&system, p.as_ref(), w0, stop, spec.restart)?
        }
        (_, PrecondKind::Inv) => {
            let p = make_inv(&problem.disc, mu)?;
            let plan = plan_inv_precond(l1, ln, z, mu, InvSegment::Finite)?;
            run_richardson(&system, &plan, Some(&p as &dyn Preconditioner), w0, stop)?
        }
        (_, _) => {
            let p = cache.get_or_build(&problem.disc, kind, mu)?;
            let meta = match p.metadata() {
                Some(m) => m,
                None => spectral_bounds(p.as_ref(), &problem.disc, 1e-8)?,
            };
            let zhat = z - mu;
            let plan = plan_general_precond(meta.m, meta.big_m, zhat.norm() * meta.norm_b, zhat, None)?;
            run_richardson(&system, &plan, Some(p.as_ref()), w0, stop)?
        }
    };
    Ok((report, Some(mu)))
}

/// Error of `U(t)` against the interpolated exact solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeError {
    pub t: f64,
    pub error: f64,
    pub norm_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicSolution {
    pub times: Vec<f64>,
    /// `U(t)` at the interior vertices for each requested time.
    pub values: Vec<Vec<f64>>,
    pub points: Vec<PointReport>,
    pub errors: Vec<TimeError>,
    pub lambda1: f64,
    pub lambda_n: f64,
    pub dim: usize,
    pub all_converged: bool,
}

pub fn solve_parabolic(cfg: &RunConfig) -> Result<ParabolicSolution> {
    let problem = Problem::from_config(cfg)?;
    solve_problem(&problem, cfg)
}

/// Solves at `j = 0..=q` (the rest follows by conjugation) and evaluates `U(t)`.
pub fn solve_problem(problem: &Problem, cfg: &RunConfig) -> Result<ParabolicSolution> {
    cfg.validate()?;
    let budget = tolerance_budget(cfg.delta, cfg.budget_time(), &problem.quad)?;
    let spec = SolverSpec::from_config(cfg);
    let cache = PreconditionerCache::new();
    let q = problem.quad.q() as i64;
    let n = problem.disc.dim();
    let one = |j: i64, w0: &[C64]| -> Result<(Vec<C64>, PointReport)> {
        let start = Instant::now();
        let tol = budget.eps(j);
        let z = problem.z(j)?;
        let stop = match cfg.stop_mode {
            StopMode::TrueError => StoppingRule::error(problem.direct(j)?, tol),
            StopMode::Residual => StoppingRule::residual(tol, problem.lambda1, problem.lambda_n),
        }
        .with_max_iter(cfg.max_iter);
        let (report, mu) = solve_point(problem, &spec, j, w0, &stop, &cache)?;
        if !report.converged {
            log::warn!("no convergence at j = {j} after {} iterations", report.iterations);
        }
        let norm_w = problem.disc.norm(&report.solution);
        let info = PointReport {
            j,
            z,
            mu,
            tolerance: tol,
            iterations: report.iterations,
            converged: report.converged,
            norm_w,
            residual_norms: report.residual_norms,
            error_norms: report.error_norms,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok((report.solution, info))
    };
    let results: Vec<(Vec<C64>, PointReport)> = if cfg.warm_start && cfg.method != Method::Direct {
        let mut out = Vec::with_capacity(q as usize + 1);
        let mut w0 = vec![C64::new(0.0, 0.0); n];
        for j in 0..=q {
            let (w, info) = one(j, &w0)?;
            w0.clone_from(&w);
            out.push((w, info));
        }
        out
    } else {
        let zero = vec![C64::new(0.0, 0.0); n];
        (0..=q).into_par_iter().map(|j| one(j, &zero)).collect::<Result<_>>()?
    };
    let mut samples = BTreeMap::new();
    let mut points = Vec::with_capacity(results.len());
    for (w, info) in results {
        samples.insert(info.j, w);
        points.push(info);
    }
    let mut values = Vec::with_capacity(cfg.times.len());
    let mut errors = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let u = inverse_transform(&samples, &problem.quad, t, SampleSymmetry::RealData)?;
        let exact = exact_nodal_solution(&problem.space, t)?;
        let diff: Vec<C64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
        errors.push(TimeError {
            t,
            error: problem.space.discrete_norm(&diff)?,
            norm_u: problem.space.discrete_norm(&exact)?,
        });
        values.push(u.iter().map(|v| v.re).collect());
    }
    let all_converged = points.iter().all(|p| p.converged);
    Ok(ParabolicSolution {
        times: cfg.times.clone(),
        values,
        points,
        errors,
        lambda1: problem.lambda1,
        lambda_n: problem.lambda_n,
        dim: n,
        all_converged,
    })
}
