//! The complex-shifted linear system `(z M + S) w = g` shared by all solvers,
//! plus stopping rules and iteration reports.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::numerics::{dotc, split, BandLdlt, CsrMatrix, RealOperator, C64};

/// Mass and stiffness matrices together with a solver for the mass matrix.
///
/// In lumped mode the mass matrix is the row-sum diagonal and its solver is a
/// division.
pub struct Discretization {
    mass: CsrMatrix<f64>,
    stiffness: CsrMatrix<f64>,
    mass_solver: Box<dyn RealOperator>,
    lumped: bool,
}

/// Inverse of a positive diagonal matrix.
#[derive(Debug, Clone)]
pub struct DiagonalInverse(pub Vec<f64>);

impl RealOperator for DiagonalInverse {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = xi / d;
        }
    }
}

impl Discretization {
    pub fn new(mass: CsrMatrix<f64>, stiffness: CsrMatrix<f64>) -> Result<Self> {
        check_len(mass.nrows(), stiffness.nrows())?;
        let solver = BandLdlt::factor_spd(&mass)?;
        Ok(Self {
            mass,
            stiffness,
            mass_solver: Box::new(solver),
            lumped: false,
        })
    }

    /// Uses the diagonal `D` (stored on the pattern of `S`) as the mass matrix.
    pub fn lumped(diag: &[f64], stiffness: CsrMatrix<f64>) -> Result<Self> {
        check_len(stiffness.nrows(), diag.len())?;
        if let Some(row) = diag.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::ZeroDiagonal { row });
        }
        let values = (0..stiffness.nrows())
            .flat_map(|i| stiffness.pattern().row(i).iter().map(move |&j| (i, j)))
            .map(|(i, j)| if i == j { diag[i] } else { 0.0 })
            .collect();
        let mass = CsrMatrix::from_parts(std::sync::Arc::clone(stiffness.pattern()), values);
        Ok(Self {
            mass,
            stiffness,
            mass_solver: Box::new(DiagonalInverse(diag.to_vec())),
            lumped: true,
        })
    }

    pub fn from_space(space: &crate::fem::FemSpace, lumped: bool) -> Result<Self> {
        if lumped {
            Self::lumped(space.lumped(), space.stiffness().clone())
        } else {
            Self::new(space.mass().clone(), space.stiffness().clone())
        }
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }
    pub fn mass(&self) -> &CsrMatrix<f64> {
        &self.mass
    }
    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }
    pub fn mass_solver(&self) -> &dyn RealOperator {
        self.mass_solver.as_ref()
    }
    pub fn is_lumped(&self) -> bool {
        self.lumped
    }

    /// `‖v‖ = <M v, v>^(1/2)`.
    pub fn norm(&self, v: &[C64]) -> f64 {
        dotc(&self.mass.mul_complex(v), v).re.max(0.0).sqrt()
    }

    /// `|||v||| = (|z| ‖v‖^2 + <S v, v>)^(1/2)`.
    pub fn triple_norm(&self, z: C64, v: &[C64]) -> f64 {
        let m = dotc(&self.mass.mul_complex(v), v).re;
        let s = dotc(&self.stiffness.mul_complex(v), v).re;
        (z.norm() * m + s).max(0.0).sqrt()
    }

    /// `z M + S`.
    pub fn shifted_matrix(&self, z: C64) -> CsrMatrix<C64> {
        self.mass.combine(z, &self.stiffness, C64::new(1.0, 0.0))
    }

    /// `μ M + S`.
    pub fn shifted_real(&self, mu: f64) -> CsrMatrix<f64> {
        self.mass.combine_real(mu, &self.stiffness, 1.0)
    }

    /// Direct solution of `(z M + S) w = g`.
    pub fn direct_solve(&self, z: C64, g: &[C64]) -> Result<Vec<C64>> {
        check_len(self.dim(), g.len())?;
        let f = BandLdlt::factor(&self.shifted_matrix(z))?;
        Ok(f.solve(g))
    }
}

/// `(z M + S) w = g` at one shift.
pub struct ShiftedSystem<'a> {
    pub disc: &'a Discretization,
    pub z: C64,
    pub rhs: &'a [C64],
}

impl<'a> ShiftedSystem<'a> {
    pub fn new(disc: &'a Discretization, z: C64, rhs: &'a [C64]) -> Result<Self> {
        check_len(disc.dim(), rhs.len())?;
        if z.re <= 0.0 && z.im == 0.0 && z.re != 0.0 {
            log::debug!("shift {z} on the negative real axis");
        }
        Ok(Self { disc, z, rhs })
    }

    pub fn dim(&self) -> usize {
        self.disc.dim()
    }

    /// `(z M + S) v`
    pub fn matrix_apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = self.disc.mass.mul_complex(v);
        let sv = self.disc.stiffness.mul_complex(v);
        for (o, s) in out.iter_mut().zip(sv) {
            *o = *o * self.z + s;
        }
        out
    }

    /// `g - (z M + S) w`, i.e. `M r` for the operator residual `r`.
    pub fn matrix_residual(&self, w: &[C64]) -> Vec<C64> {
        let aw = self.matrix_apply(w);
        self.rhs.iter().zip(aw).map(|(g, a)| g - a).collect()
    }

    pub fn mass_solve(&self, v: &[C64]) -> Vec<C64> {
        self.disc.mass_solver.apply(v)
    }

    /// `‖r‖` in the M-norm given `M r`.
    pub fn residual_norm(&self, mr: &[C64]) -> f64 {
        dotc(mr, &self.mass_solve(mr)).re.max(0.0).sqrt()
    }
}

/// Distance from `-z` to the interval `[lo, hi]`, i.e. `min |z + λ|`.
pub fn distance_to_spectrum(z: C64, lo: f64, hi: f64) -> f64 {
    let x = (-z.re).clamp(lo, hi);
    (z + x).norm()
}

#[derive(Debug, Clone)]
pub enum StopCriterion {
    /// Stop when `‖w_n - reference‖ <= tol` in the M-norm.
    Error { reference: Vec<C64>, tol: f64 },
    /// Stop when the residual guarantees `‖w_n - w‖ <= tol`, using the
    /// spectral interval `[lambda1, lambda_n]` of `M^{-1} S` to bound `‖A_z^{-1}‖`.
    Residual { tol: f64, lambda1: f64, lambda_n: f64 },
}

#[derive(Debug, Clone)]
pub struct StoppingRule {
    pub criterion: StopCriterion,
    pub max_iter: usize,
    /// Keep every iterate, residual and direction in the report.
    pub trace: bool,
}

impl StoppingRule {
    pub fn error(reference: Vec<C64>, tol: f64) -> Self {
        Self {
            criterion: StopCriterion::Error { reference, tol },
            max_iter: 5000,
            trace: false,
        }
    }

    pub fn residual(tol: f64, lambda1: f64, lambda_n: f64) -> Self {
        Self {
            criterion: StopCriterion::Residual {
                tol,
                lambda1,
                lambda_n,
            },
            max_iter: 5000,
            trace: false,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn tol(&self) -> f64 {
        match &self.criterion {
            StopCriterion::Error { tol, .. } | StopCriterion::Residual { tol, .. } => *tol,
        }
    }

    pub(crate) fn reference(&self) -> Option<&[C64]> {
        match &self.criterion {
            StopCriterion::Error { reference, .. } => Some(reference),
            StopCriterion::Residual { .. } => None,
        }
    }

    pub(crate) fn check_dims(&self, n: usize) -> Result<()> {
        if let Some(r) = self.reference() {
            check_len(n, r.len())?;
        }
        Ok(())
    }
}

/// Per-step data kept when [`StoppingRule::trace`] is set.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Trace {
    pub iterates: Vec<Vec<C64>>,
    /// Residuals of the iterated equation (preconditioned residuals for the
    /// general preconditioned CG method).
    pub residuals: Vec<Vec<C64>>,
    pub directions: Vec<Vec<C64>>,
    pub alphas: Vec<C64>,
    pub betas: Vec<C64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub solution: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖r_n‖` in the M-norm for `n = 0..=iterations`.
    pub residual_norms: Vec<f64>,
    /// `‖w_n - reference‖` in the M-norm, when a reference was given.
    pub error_norms: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
}

/// Book-keeping shared by the iteration loops.
pub(crate) struct Monitor<'r> {
    rule: &'r StoppingRule,
    /// Bound on `‖w - w_n‖ / ‖r_n‖`.
    amplification: f64,
    pub residual_norms: Vec<f64>,
    pub error_norms: Vec<f64>,
    pub trace: Option<Trace>,
    growth: usize,
    last: f64,
}

impl<'r> Monitor<'r> {
    /// `amplification` is a bound on `‖A^{-1}‖` for the iterated operator, used
    /// only by the residual criterion.
    pub fn new(rule: &'r StoppingRule, amplification: f64) -> Self {
        Self {
            rule,
            amplification,
            residual_norms: Vec::new(),
            error_norms: Vec::new(),
            trace: rule.trace.then(Trace::default),
            growth: 0,
            last: f64::INFINITY,
        }
    }

    /// Records step data and reports whether the stopping test passes.
    pub fn record(&mut self, disc: &Discretization, w: &[C64], residual_norm: f64) -> bool {
        self.residual_norms.push(residual_norm);
        let (value, done) = match &self.rule.criterion {
            StopCriterion::Error { reference, tol } => {
                let e: Vec<C64> = w.iter().zip(reference).map(|(a, b)| a - b).collect();
                let err = disc.norm(&e);
                self.error_norms.push(err);
                (err, err <= *tol)
            }
            StopCriterion::Residual { tol, .. } => {
                (residual_norm, self.amplification * residual_norm <= *tol)
            }
        };
        if value > self.last {
            self.growth += 1;
        } else {
            self.growth = 0;
        }
        self.last = value;
        if let Some(t) = &mut self.trace {
            t.iterates.push(w.to_vec());
        }
        done
    }

    /// Monitored quantity grew for 10 consecutive steps.
    pub fn diverging(&self) -> bool {
        self.growth >= 10
    }

    pub fn finish(self, solution: Vec<C64>, iterations: usize, converged: bool) -> IterationReport {
        IterationReport {
            solution,
            iterations,
            converged,
            residual_norms: self.residual_norms,
            error_norms: self.error_norms,
            trace: self.trace,
        }
    }
}

pub(crate) fn real_parts_finite(v: &[C64]) -> bool {
    let (re, im) = split(v);
    re.iter().chain(&im).all(|x| x.is_finite())
}
