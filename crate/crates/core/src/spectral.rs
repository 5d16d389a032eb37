//! Extremal generalized eigenvalues by Lanczos, with dense oracles.
//!
//! Every operator handled here is real and self-adjoint in some Gram inner
//! product `<G x, y>`, so the Lanczos process runs in real arithmetic.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::numerics::{BandLdlt, CsrMatrix, RealOperator, C64};
use crate::precond::{Preconditioner, SpectralMeta};
use crate::system::Discretization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenEstimate {
    pub value: f64,
    /// `‖T v - θ v‖_G` for the unit Ritz vector of the iterated operator `T`,
    /// rescaled to the eigenvalue reported in `value`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosConfig {
    pub tol: f64,
    pub max_steps: usize,
    pub max_restarts: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_steps: 200,
            max_restarts: 5,
        }
    }
}

/// Closure-backed operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64]) + Send + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Send + Sync> RealOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn start_vector(n: usize) -> Vec<f64> {
    // deterministic, not aligned with any mesh structure
    (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.7548776662).fract()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum End {
    Low,
    High,
}

/// Runs Lanczos on `op` (self-adjoint in the `gram` inner product) and
/// returns the requested extreme Ritz value. Restarts from the current Ritz
/// vector when `max_steps` is reached without convergence.
fn lanczos_end(op: &dyn RealOperator, gram: &dyn RealOperator, end: End, cfg: &LanczosConfig) -> Result<EigenEstimate> {
    let n = op.dim();
    check_len(n, gram.dim())?;
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let mut start = start_vector(n);
    let mut total = 0;
    let mut best = EigenEstimate {
        value: f64::NAN,
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    let steps = cfg.max_steps.min(n).max(1);
    let mut gv = vec![0.0; n];
    let mut w = vec![0.0; n];
    for _restart in 0..=cfg.max_restarts {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut gbasis: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut alphas = Vec::with_capacity(steps);
        let mut betas: Vec<f64> = Vec::with_capacity(steps);
        gram.apply_real(&start, &mut gv);
        let nrm = dot(&gv, &start).sqrt();
        if !(nrm > 0.0) {
            return Err(Error::NotPositiveDefinite { index: 0, value: nrm });
        }
        let mut v: Vec<f64> = start.iter().map(|x| x / nrm).collect();
        let mut g: Vec<f64> = gv.iter().map(|x| x / nrm).collect();
        let mut ritz_vec = None;
        for k in 0..steps {
            op.apply_real(&v, &mut w);
            total += 1;
            let a = dot(&w, &g);
            basis.push(v.clone());
            gbasis.push(g.clone());
            alphas.push(a);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for (b, gb) in basis.iter().zip(&gbasis) {
                    let c = dot(&w, gb);
                    w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
                }
            }
            gram.apply_real(&w, &mut gv);
            let beta = dot(&gv, &w).max(0.0).sqrt();
            let m = alphas.len();
            let check = k + 1 == steps || beta <= 1e-14 * a.abs().max(1e-300) || m % 5 == 0 || m <= 3;
            if check {
                let mut t = DMatrix::<f64>::zeros(m, m);
                for i in 0..m {
                    t[(i, i)] = alphas[i];
                    if i + 1 < m {
                        t[(i, i + 1)] = betas[i];
                        t[(i + 1, i)] = betas[i];
                    }
                }
                let eig = SymmetricEigen::new(t);
                let idx = (0..m)
                    .reduce(|p, q| {
                        let better = match end {
                            End::Low => eig.eigenvalues[q] < eig.eigenvalues[p],
                            End::High => eig.eigenvalues[q] > eig.eigenvalues[p],
                        };
                        if better {
                            q
                        } else {
                            p
                        }
                    })
                    .expect("nonempty");
                let theta = eig.eigenvalues[idx];
                let res = beta * eig.eigenvectors[(m - 1, idx)].abs();
                best = EigenEstimate {
                    value: theta,
                    residual: res,
                    iterations: total,
                    converged: res <= cfg.tol * theta.abs().max(f64::MIN_POSITIVE),
                };
                let exhausted = beta <= 1e-14 * theta.abs().max(1e-300);
                if best.converged || exhausted || k + 1 == steps {
                    let s = eig.eigenvectors.column(idx).into_owned();
                    ritz_vec = Some((0..n).map(|i| (0..m).map(|j| s[j] * basis[j][i]).sum::<f64>()).collect::<Vec<f64>>());
                    if exhausted {
                        best.converged = true;
                    }
                    break;
                }
            }
            betas.push(beta);
            v = w.iter().map(|x| x / beta).collect();
            g = gv.iter().map(|x| x / beta).collect();
        }
        if best.converged {
            return Ok(best);
        }
        match ritz_vec {
            Some(r) => start = r,
            None => break,
        }
    }
    log::warn!("Lanczos did not converge: residual {} after {} steps", best.residual, total);
    Ok(best)
}

/// Smallest and largest eigenvalues of `op`, self-adjoint in the `gram` inner product.
pub fn extreme_eigenvalues(
    op: &dyn RealOperator,
    gram: &dyn RealOperator,
    cfg: &LanczosConfig,
) -> Result<(EigenEstimate, EigenEstimate)> {
    Ok((lanczos_end(op, gram, End::Low, cfg)?, lanczos_end(op, gram, End::High, cfg)?))
}

fn tol_config(tol: f64) -> Result<LanczosConfig> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(LanczosConfig {
        tol,
        ..LanczosConfig::default()
    })
}

/// Largest `λ` with `A v = λ B v`, by Lanczos on `B^{-1} A` in the B-inner product.
pub fn lambda_max(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>, tol: f64) -> Result<EigenEstimate> {
    check_len(a.nrows(), b.nrows())?;
    let cfg = tol_config(tol)?;
    let bf = BandLdlt::factor_spd(b)?;
    let op = FnOperator {
        dim: a.nrows(),
        f: |x: &[f64], y: &mut [f64]| {
            let ax = a.mul_vec(x).expect("dimensions checked");
            y.copy_from_slice(&bf.solve(&ax));
        },
    };
    lanczos_end(&op, b, End::High, &cfg)
}

/// Smallest `λ` with `A v = λ B v` (both SPD), by shift-invert Lanczos on
/// `A^{-1} B` in the B-inner product.
pub fn lambda_min(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>, tol: f64) -> Result<EigenEstimate> {
    check_len(a.nrows(), b.nrows())?;
    let cfg = tol_config(tol)?;
    let af = BandLdlt::factor_spd(a)?;
    let op = FnOperator {
        dim: a.nrows(),
        f: |x: &[f64], y: &mut [f64]| {
            let bx = b.mul_vec(x).expect("dimensions checked");
            y.copy_from_slice(&af.solve(&bx));
        },
    };
    let inv = lanczos_end(&op, b, End::High, &cfg)?;
    let value = 1.0 / inv.value;
    Ok(EigenEstimate {
        value,
        residual: inv.residual * value * value,
        ..inv
    })
}

/// `(λ1, λN)` of the pencil `(S, M)` of a discretization.
pub fn stiffness_bounds(disc: &Discretization, tol: f64) -> Result<(EigenEstimate, EigenEstimate)> {
    Ok((
        lambda_min(disc.stiffness(), disc.mass(), tol)?,
        lambda_max(disc.stiffness(), disc.mass(), tol)?,
    ))
}

/// `m = λ1(𝓑 K)`, `M = λN(𝓑 K)` with `K = μ M + S` (self-adjoint in the
/// K-inner product), and `‖B‖ = λN(𝓑 M)` in the M-inner product.
pub fn spectral_bounds(precond: &dyn Preconditioner, disc: &Discretization, tol: f64) -> Result<SpectralMeta> {
    check_len(disc.dim(), precond.dim())?;
    let cfg = tol_config(tol)?;
    let k = disc.shifted_real(precond.mu());
    let bk = FnOperator {
        dim: disc.dim(),
        f: |x: &[f64], y: &mut [f64]| precond.apply_real(&k.mul_vec(x).expect("dims"), y),
    };
    let (lo, hi) = extreme_eigenvalues(&bk, &k, &cfg)?;
    let mass = disc.mass();
    let bm = FnOperator {
        dim: disc.dim(),
        f: |x: &[f64], y: &mut [f64]| precond.apply_real(&mass.mul_vec(x).expect("dims"), y),
    };
    let norm_b = lanczos_end(&bm, mass, End::High, &cfg)?;
    for e in [&lo, &hi, &norm_b] {
        if !e.converged {
            log::warn!("spectral bound estimate not converged (residual {})", e.residual);
        }
    }
    Ok(SpectralMeta {
        m: lo.value,
        big_m: hi.value,
        norm_b: norm_b.value,
        gamma: None,
        contraction: None,
    })
}

/// All eigenvalues of the pencil `A v = λ B v` (B SPD), ascending.
pub fn dense_generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = b
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { index: 0, value: f64::NAN })?
        .l();
    let li = l
        .clone()
        .try_inverse()
        .ok_or(Error::SingularPivot { index: 0 })?;
    let c = &li * a * li.transpose();
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Dense matrix of a real operator, column by column.
pub fn dense_operator(op: &dyn RealOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_real(&e, &mut y);
        e[j] = 0.0;
        out.column_mut(j).copy_from_slice(&y);
    }
    out
}

/// Largest system handled by the dense paths below.
pub const DENSE_LIMIT: usize = 5000;

fn dense_guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    Ok(())
}

/// `𝓕 = |x̂| 𝓗⁺ - y 𝓗⁻` for `ẑ = z - μ = x̂ + i y`, with
/// `𝓗⁺ = μ M𝓑M + (S𝓑M + M𝓑S)/2` and `𝓗⁻ = i (S𝓑M - M𝓑S)/2`.
/// `z` is conjugated first when `Im z < 0`.
pub fn dense_f_matrix(precond: &dyn Preconditioner, disc: &Discretization, z: C64) -> Result<DMatrix<C64>> {
    let n = disc.dim();
    dense_guard(n)?;
    check_len(n, precond.dim())?;
    let mu = precond.mu();
    let z = if z.im < 0.0 { z.conj() } else { z };
    let xhat = z.re - mu;
    if xhat > 0.0 {
        return Err(Error::InvalidArgument(format!("need Re z <= mu, got Re z - mu = {xhat}")));
    }
    let m = disc.mass().to_dense();
    let s = disc.stiffness().to_dense();
    let bm = dense_operator(precond) * &m;
    let sbm = &s * &bm;
    let mbs = sbm.transpose();
    let hplus = mu * (&m * &bm) + 0.5 * (&sbm + &mbs);
    let skew = 0.5 * (&sbm - &mbs);
    Ok(DMatrix::from_fn(n, n, |i, j| {
        // -y * i * skew
        C64::new(xhat.abs() * hplus[(i, j)], -z.im * skew[(i, j)])
    }))
}

/// `λ1(𝓕, M)` by a dense Hermitian eigensolve.
pub fn lambda1_fz(precond: &dyn Preconditioner, disc: &Discretization, z: C64) -> Result<f64> {
    let f = dense_f_matrix(precond, disc, z)?;
    let m = disc.mass().to_dense();
    let l = m
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { index: 0, value: f64::NAN })?
        .l();
    let li = l.try_inverse().ok_or(Error::SingularPivot { index: 0 })?;
    let li_c = li.map(|x| C64::new(x, 0.0));
    let c = &li_c * f * li_c.transpose();
    let c = (&c + c.adjoint()).scale(0.5);
    Ok(c.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}

/// `‖H - I‖` in the M-norm, `H = 𝓑 (μ M + S)`.
pub fn norm_h_minus_identity(precond: &dyn Preconditioner, disc: &Discretization) -> Result<f64> {
    let n = disc.dim();
    dense_guard(n)?;
    let m = disc.mass().to_dense();
    let k = disc.shifted_real(precond.mu()).to_dense();
    let h = dense_operator(precond) * k - DMatrix::<f64>::identity(n, n);
    let l = m
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { index: 0, value: f64::NAN })?
        .l();
    let lt_inv = l.transpose().try_inverse().ok_or(Error::SingularPivot { index: 0 })?;
    let x = l.transpose() * h * lt_inv;
    Ok(x.singular_values().max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::trapezium_space;
    use crate::precond::{make_inv, make_sgs};

    fn disc(m: usize) -> Discretization {
        Discretization::from_space(&trapezium_space(m, 1.0 / 15.0).unwrap(), false).unwrap()
    }

    #[test]
    fn identity_pencil() {
        let i = CsrMatrix::<f64>::identity(7);
        assert!((lambda_max(&i, &i, 1e-10).unwrap().value - 1.0).abs() < 1e-12);
        assert!((lambda_min(&i, &i, 1e-10).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pencil() {
        let d: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let a = CsrMatrix::from_diagonal(&d);
        let b = CsrMatrix::<f64>::identity(10);
        let hi = lambda_max(&a, &b, 1e-10).unwrap();
        let lo = lambda_min(&a, &b, 1e-10).unwrap();
        assert!(hi.converged && lo.converged);
        assert!((hi.value - 10.0).abs() < 1e-8);
        assert!((lo.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lanczos_matches_dense_on_mesh() {
        let d = disc(10);
        let dense = dense_generalized_eigenvalues(&d.stiffness().to_dense(), &d.mass().to_dense()).unwrap();
        let (lo, hi) = stiffness_bounds(&d, 1e-10).unwrap();
        assert!(((lo.value - dense[0]) / dense[0]).abs() < 1e-6);
        assert!(((hi.value - dense[dense.len() - 1]) / dense[dense.len() - 1]).abs() < 1e-6);
        assert!(lo.value <= hi.value && lo.value > 0.0);
    }

    #[test]
    fn inv_bounds_are_exact() {
        let d = disc(8);
        let p = make_inv(&d, 0.7).unwrap();
        let meta = spectral_bounds(&p, &d, 1e-10).unwrap();
        assert!((meta.m - 1.0).abs() < 1e-8 && (meta.big_m - 1.0).abs() < 1e-8);
        let lam1 = lambda_min(d.stiffness(), d.mass(), 1e-12).unwrap().value;
        assert!((meta.norm_b - 1.0 / (lam1 + 0.7)).abs() < 1e-8 * meta.norm_b);
    }

    #[test]
    fn f_matrix_of_inv_is_scaled_mass() {
        let d = disc(5);
        let z = C64::new(-1.35, 2.12);
        let mu = 1.14;
        let p = make_inv(&d, mu).unwrap();
        let lam = lambda1_fz(&p, &d, z).unwrap();
        assert!((lam - (mu - z.re)).abs() < 1e-8, "{lam}");
    }

    #[test]
    fn f_matrix_matches_quadratic_form_identity() {
        // (v, F v) = -Re(ẑ (v, H v)) with (v, Hv) = <M v, 𝓑 K v>
        let d = disc(5);
        let z = C64::new(-1.35, 2.12);
        let p = make_sgs(&d, 0.5, 1).unwrap();
        let f = dense_f_matrix(&p, &d, z).unwrap();
        let n = d.dim();
        let v: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (2.0 * i as f64).cos())).collect();
        let fv: Vec<C64> = (0..n).map(|i| (0..n).map(|j| f[(i, j)] * v[j]).sum()).collect();
        let lhs = crate::numerics::dotc(&fv, &v).re;
        let kv = d.shifted_real(0.5).mul_complex(&v);
        let hv = p.apply(&kv);
        let mv = d.mass().mul_complex(&v);
        let rhs = -(C64::new(z.re - 0.5, z.im) * crate::numerics::dotc(&mv, &hv)).re;
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn sgs_bounds_within_contraction_interval() {
        let d = disc(8);
        let mu = 0.5;
        for k in [1, 2, 4] {
            let p = make_sgs(&d, mu, k).unwrap();
            let meta = spectral_bounds(&p, &d, 1e-10).unwrap();
            let one = make_sgs(&d, mu, 1).unwrap();
            let kd = d.shifted_real(mu).to_dense();
            let err = DMatrix::<f64>::identity(d.dim(), d.dim()) - dense_operator(&one) * &kd;
            let rho = err.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max);
            let lo = (1.0 - rho).powi(k as i32);
            let hi = (1.0 + rho).powi(k as i32);
            assert!(meta.m >= lo - 1e-8 && meta.big_m <= hi + 1e-8, "k={k}: [{}, {}] vs [{lo}, {hi}]", meta.m, meta.big_m);
            let dense = dense_generalized_eigenvalues(&kd, &dense_operator(&p).try_inverse().unwrap()).unwrap();
            assert!((meta.m - dense[0]).abs() < 1e-6 * dense[0]);
            assert!((meta.big_m - dense[dense.len() - 1]).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_guard_rejects_large() {
        assert!(matches!(dense_guard(DENSE_LIMIT + 1), Err(Error::TooLarge { .. })));
    }
}
