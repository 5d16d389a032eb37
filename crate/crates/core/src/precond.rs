//! Symmetric positive-definite preconditioners `𝓑 ≈ (μ M + S)^{-1}`.
//!
//! A preconditioner acts on residual vectors `g - (z M + S) w`; the
//! corresponding operator on the M-geometry is `B v = 𝓑 M v`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{BandLdlt, CsrMatrix, RealOperator};
use crate::system::Discretization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondKind {
    /// Exact `(μ M + S)^{-1}`.
    Inv,
    /// Zero-fill incomplete Cholesky of `μ M + S`.
    Ic0,
    /// `k` steps of symmetric Gauss-Seidel on `μ M + S`, starting from zero.
    Sgs(usize),
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Inv => write!(f, "inv"),
            Self::Ic0 => write!(f, "ic0"),
            Self::Sgs(k) => write!(f, "sgs:{k}"),
        }
    }
}

impl std::str::FromStr for PrecondKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inv" => Ok(Self::Inv),
            "ic0" => Ok(Self::Ic0),
            _ => match s.strip_prefix("sgs:").or(if s == "sgs" { Some("1") } else { None }) {
                Some(k) => match k.parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(Self::Sgs(k)),
                    _ => Err(Error::InvalidArgument(format!("bad step count in {s:?}"))),
                },
                None => Err(Error::InvalidArgument(format!(
                    "unknown preconditioner {s:?} (expected inv, ic0 or sgs:K)"
                ))),
            },
        }
    }
}

/// Spectral data of a preconditioner at a given `μ`.
///
/// `m` and `big_m` bound the eigenvalues of `𝓑 (μ M + S)`; `norm_b` is the
/// norm of `B = 𝓑 M` in the M-inner product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralMeta {
    pub m: f64,
    pub big_m: f64,
    pub norm_b: f64,
    pub gamma: Option<f64>,
    /// Spectral radius of the one-step error operator (symmetric Gauss-Seidel).
    pub contraction: Option<f64>,
}

pub trait Preconditioner: RealOperator {
    fn kind(&self) -> PrecondKind;
    fn mu(&self) -> f64;
    fn metadata(&self) -> Option<SpectralMeta>;
}

/// `(μ M + S)^{-1}` through a banded factorization.
pub struct InvPreconditioner {
    mu: f64,
    factor: BandLdlt<f64>,
    lambda1: Option<f64>,
}

impl InvPreconditioner {
    /// Attaches `λ1(S, M)`, which fixes `‖B‖ = 1/(λ1 + μ)`.
    pub fn with_lambda1(mut self, lambda1: f64) -> Self {
        self.lambda1 = Some(lambda1);
        self
    }

    pub fn factor(&self) -> &BandLdlt<f64> {
        &self.factor
    }
}

pub fn make_inv(disc: &Discretization, mu: f64) -> Result<InvPreconditioner> {
    let factor = BandLdlt::factor_spd(&disc.shifted_real(mu))?;
    Ok(InvPreconditioner {
        mu,
        factor,
        lambda1: None,
    })
}

impl RealOperator for InvPreconditioner {
    fn dim(&self) -> usize {
        self.factor.dim()
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.factor.solve(x));
    }
}

impl Preconditioner for InvPreconditioner {
    fn kind(&self) -> PrecondKind {
        PrecondKind::Inv
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn metadata(&self) -> Option<SpectralMeta> {
        self.lambda1.map(|l1| SpectralMeta {
            m: 1.0,
            big_m: 1.0,
            norm_b: 1.0 / (l1 + self.mu),
            gamma: None,
            contraction: None,
        })
    }
}

/// Lower-triangular factor `L` with `L Lᵀ ≈ μ M + S` on the pattern of the lower triangle.
pub struct Ic0Preconditioner {
    mu: f64,
    /// Row-wise strictly lower entries, sorted by column.
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    shift: f64,
    meta: Option<SpectralMeta>,
}

/// Strictly lower rows of the factor as `(column, value)` pairs, and the diagonal.
type Ic0Factor = (Vec<Vec<(usize, f64)>>, Vec<f64>);

/// On a non-positive pivot, returns its row.
fn ic0_factor(a: &CsrMatrix<f64>, shift: f64) -> std::result::Result<Ic0Factor, usize> {
    let n = a.nrows();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut diag = vec![0.0; n];
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = a.row(i).filter(|&(j, _)| j < i).collect();
        let mut aii = a.get(i, i) * (1.0 + shift);
        for idx in 0..row.len() {
            let (k, aik) = row[idx];
            // sum over j < k of L_ij L_kj; both rows sorted by column
            let (mut p, mut q, mut s) = (0, 0, 0.0);
            let rk = &rows[k];
            while p < idx && q < rk.len() {
                match row[p].0.cmp(&rk[q].0) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        s += row[p].1 * rk[q].1;
                        p += 1;
                        q += 1;
                    }
                }
            }
            let lik = (aik - s) / diag[k];
            row[idx].1 = lik;
            aii -= lik * lik;
        }
        if !(aii > 0.0) {
            return Err(i);
        }
        diag[i] = aii.sqrt();
        rows.push(row);
    }
    Ok((rows, diag))
}

/// Incomplete Cholesky without fill. On a nonpositive pivot the diagonal is
/// scaled by `1 + s` for `s` in 1e-3, 1e-2, 1e-1 before giving up.
pub fn make_ic0(disc: &Discretization, mu: f64) -> Result<Ic0Preconditioner> {
    ic0_of(&disc.shifted_real(mu), mu)
}

pub fn ic0_of(target: &CsrMatrix<f64>, mu: f64) -> Result<Ic0Preconditioner> {
    let mut last = 0;
    for shift in [0.0, 1e-3, 1e-2, 1e-1] {
        match ic0_factor(target, shift) {
            Ok((rows, diag)) => {
                if shift > 0.0 {
                    log::warn!("IC(0) needed a diagonal shift of {shift}");
                }
                return Ok(Ic0Preconditioner {
                    mu,
                    rows,
                    diag,
                    shift,
                    meta: None,
                });
            }
            Err(i) => last = i,
        }
    }
    Err(Error::NotPositiveDefinite {
        index: last,
        value: target.get(last, last),
    })
}

impl Ic0Preconditioner {
    /// Relative diagonal shift that was needed for a positive factorization.
    pub fn shift(&self) -> f64 {
        self.shift
    }
    pub fn set_metadata(&mut self, meta: SpectralMeta) {
        self.meta = Some(meta);
    }
}

impl RealOperator for Ic0Preconditioner {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        let n = self.diag.len();
        // L u = x
        for i in 0..n {
            let s: f64 = self.rows[i].iter().map(|&(j, l)| l * y[j]).sum();
            y[i] = (x[i] - s) / self.diag[i];
        }
        // Lᵀ y = u, column-oriented over the rows of L
        for i in (0..n).rev() {
            y[i] /= self.diag[i];
            let yi = y[i];
            for &(j, l) in &self.rows[i] {
                y[j] -= l * yi;
            }
        }
    }
}

impl Preconditioner for Ic0Preconditioner {
    fn kind(&self) -> PrecondKind {
        PrecondKind::Ic0
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn metadata(&self) -> Option<SpectralMeta> {
        self.meta
    }
}

/// `k` symmetric Gauss-Seidel steps (forward then backward sweep) on `μ M + S`.
pub struct SgsPreconditioner {
    mu: f64,
    steps: usize,
    matrix: CsrMatrix<f64>,
    diag: Vec<f64>,
    meta: Option<SpectralMeta>,
}

pub fn make_sgs(disc: &Discretization, mu: f64, steps: usize) -> Result<SgsPreconditioner> {
    sgs_of(disc.shifted_real(mu), mu, steps)
}

pub fn sgs_of(matrix: CsrMatrix<f64>, mu: f64, steps: usize) -> Result<SgsPreconditioner> {
    if steps == 0 {
        return Err(Error::InvalidArgument("symmetric Gauss-Seidel needs k >= 1".into()));
    }
    let diag = matrix.diagonal();
    if let Some(row) = diag.iter().position(|d| *d == 0.0 || !d.is_finite()) {
        return Err(Error::ZeroDiagonal { row });
    }
    Ok(SgsPreconditioner {
        mu,
        steps,
        matrix,
        diag,
        meta: None,
    })
}

impl SgsPreconditioner {
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }
    pub fn set_metadata(&mut self, meta: SpectralMeta) {
        self.meta = Some(meta);
    }

    fn relax(&self, i: usize, b: &[f64], y: &mut [f64]) {
        let mut s = b[i];
        for (j, a) in self.matrix.row(i) {
            if j != i {
                s -= a * y[j];
            }
        }
        y[i] = s / self.diag[i];
    }
}

impl RealOperator for SgsPreconditioner {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let n = self.diag.len();
        for _ in 0..self.steps {
            for i in 0..n {
                self.relax(i, x, y);
            }
            for i in (0..n).rev() {
                self.relax(i, x, y);
            }
        }
    }
}

impl Preconditioner for SgsPreconditioner {
    fn kind(&self) -> PrecondKind {
        PrecondKind::Sgs(self.steps)
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn metadata(&self) -> Option<SpectralMeta> {
        self.meta
    }
}

pub fn make_preconditioner(disc: &Discretization, kind: PrecondKind, mu: f64) -> Result<Box<dyn Preconditioner>> {
    Ok(match kind {
        PrecondKind::Inv => Box::new(make_inv(disc, mu)?),
        PrecondKind::Ic0 => Box::new(make_ic0(disc, mu)?),
        PrecondKind::Sgs(k) => Box::new(make_sgs(disc, mu, k)?),
    })
}

/// Preconditioners keyed by kind and `μ` rounded to 6 digits.
#[derive(Default)]
pub struct PreconditionerCache {
    entries: Mutex<HashMap<(PrecondKind, i64), Arc<dyn Preconditioner>>>,
}

impl PreconditionerCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&self, disc: &Discretization, kind: PrecondKind, mu: f64) -> Result<Arc<dyn Preconditioner>> {
        let key = (kind, (mu * 1e6).round() as i64);
        if let Some(p) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(p));
        }
        // built outside the lock so concurrent builds of different keys proceed
        let built: Arc<dyn Preconditioner> = Arc::from(make_preconditioner(disc, kind, mu)?);
        let mut map = self.entries.lock().expect("cache lock");
        Ok(Arc::clone(map.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
