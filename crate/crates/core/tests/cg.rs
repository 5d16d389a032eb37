#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use contour_krylov::krylov::{
    cg_general_precond, cg_inv_precond, cg_shifted, chebyshev_prediction, chebyshev_prediction_inv, inv_triple_norm,
    optimal_mu_cg,
};
use contour_krylov::numerics::{dotc, BandLdlt, RealOperator, C64};
use contour_krylov::precond::{make_inv, make_preconditioner, PrecondKind, Preconditioner, SpectralMeta};
use contour_krylov::spectral::dense_operator;
use contour_krylov::system::{Discretization, ShiftedSystem, StoppingRule};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn apply_shifted(disc: &Discretization, z: C64, v: &[C64]) -> Vec<C64> {
    let m = disc.mass().mul_complex(v);
    let s = disc.stiffness().mul_complex(v);
    m.iter().zip(&s).map(|(a, b)| z * a + b).collect()
}

#[test]
fn basic_cg_residuals_orthogonal_and_directions_conjugate() {
    let p = small_problem(12);
    let disc = &p.disc;
    for j in [4, 12, 20] {
        let z = p.z(j).unwrap();
        let g = p.load(j).unwrap();
        let sys = ShiftedSystem::new(disc, z, &g).unwrap();
        let stop = StoppingRule::error(p.direct(j).unwrap(), 1e-300)
            .with_max_iter(30)
            .with_trace();
        let rep = cg_shifted(&sys, &zeros(disc.dim()), &stop).unwrap();
        let t = rep.trace.unwrap();
        let n = t.directions.len();
        assert_eq!(n, 30);
        let mnorm = |v: &[C64]| disc.norm(v);
        for a in 0..=n {
            let ma = disc.mass().mul_complex(&t.residuals[a]);
            for b in 0..a {
                let ip = dotc(&ma, &t.residuals[b]).norm();
                let scale = mnorm(&t.residuals[a]) * mnorm(&t.residuals[b]);
                assert!(ip <= 1e-8 * scale, "j={j}: (r_{a}, r_{b}) = {ip:e} vs {scale:e}");
            }
        }
        for a in 0..n {
            let ap = apply_shifted(disc, z, &t.directions[a]);
            for b in 0..a {
                let ip = dotc(&ap, &t.directions[b]).norm();
                let scale = disc.triple_norm(z, &t.directions[a]) * disc.triple_norm(z, &t.directions[b]);
                assert!(ip <= 1e-8 * scale, "j={j}: (A p_{a}, p_{b}) = {ip:e} vs {scale:e}");
            }
        }
    }
}

#[test]
fn basic_cg_three_term_identities() {
    let p = small_problem(12);
    let disc = &p.disc;
    let j = 10;
    let z = p.z(j).unwrap();
    let g = p.load(j).unwrap();
    let sys = ShiftedSystem::new(disc, z, &g).unwrap();
    let stop = StoppingRule::error(p.direct(j).unwrap(), 1e-300)
        .with_max_iter(30)
        .with_trace();
    let rep = cg_shifted(&sys, &zeros(disc.dim()), &stop).unwrap();
    let t = rep.trace.unwrap();
    let gnorm = norm(&g);
    for n in 0..30 {
        // M r_n = g - (zM + S) w_n
        let mr = disc.mass().mul_complex(&t.residuals[n]);
        let direct = diff(&g, &apply_shifted(disc, z, &t.iterates[n]));
        assert!(norm(&diff(&mr, &direct)) <= 1e-8 * gnorm, "residual at {n}");
        // w_{n+1} = w_n + α_n p_n
        let mut w = t.iterates[n].clone();
        contour_krylov::numerics::axpy(t.alphas[n], &t.directions[n], &mut w);
        assert!(norm(&diff(&w, &t.iterates[n + 1])) <= 1e-10 * norm(&t.iterates[n + 1]));
        // M r_{n+1} = M r_n - α_n (zM + S) p_n
        let mut next = mr.clone();
        contour_krylov::numerics::axpy(-t.alphas[n], &apply_shifted(disc, z, &t.directions[n]), &mut next);
        let mr1 = disc.mass().mul_complex(&t.residuals[n + 1]);
        assert!(norm(&diff(&next, &mr1)) <= 1e-8 * gnorm, "residual recurrence at {n}");
        // p_{n+1} = r_{n+1} + β_n p_n
        if n + 1 < 30 {
            let mut p1 = t.residuals[n + 1].clone();
            contour_krylov::numerics::axpy(t.betas[n], &t.directions[n], &mut p1);
            assert!(norm(&diff(&p1, &t.directions[n + 1])) <= 1e-10 * norm(&p1));
        }
    }
}

#[test]
fn inv_cg_residuals_orthogonal_and_directions_conjugate() {
    let p = small_problem(12);
    let disc = &p.disc;
    let j = 16;
    let z = p.z(j).unwrap();
    let (mu, _) = optimal_mu_cg(p.lambda1, p.lambda_n, z).unwrap();
    let inv = make_inv(disc, mu).unwrap();
    let zt = 1.0 / (z - mu);
    let g = p.load(j).unwrap();
    let sys = ShiftedSystem::new(disc, z, &g).unwrap();
    let stop = StoppingRule::error(p.direct(j).unwrap(), 1e-300)
        .with_max_iter(8)
        .with_trace();
    let rep = cg_inv_precond(&sys, &inv, &zeros(disc.dim()), &stop).unwrap();
    let t = rep.trace.unwrap();
    let n = t.directions.len();
    assert!(n >= 4);
    for a in 0..n {
        let ma = disc.mass().mul_complex(&t.residuals[a]);
        for b in 0..a {
            let ip = dotc(&ma, &t.residuals[b]).norm();
            assert!(ip <= 1e-8 * disc.norm(&t.residuals[a]) * disc.norm(&t.residuals[b]));
        }
        // (z̃ + K^{-1} M) p in the M-inner product
        let hp = inv.apply(&disc.mass().mul_complex(&t.directions[a]));
        let ap: Vec<C64> = t.directions[a].iter().zip(&hp).map(|(x, y)| zt * x + y).collect();
        let map = disc.mass().mul_complex(&ap);
        for b in 0..a {
            let ip = dotc(&map, &t.directions[b]).norm();
            let scale = inv_triple_norm(disc, &inv, zt, &t.directions[a]) * inv_triple_norm(disc, &inv, zt, &t.directions[b]);
            assert!(ip <= 1e-8 * scale, "(A p_{a}, p_{b}) = {ip:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn cg_terminates_in_n_steps(seed in any::<u64>(), n in 2usize..=30, arg in -2.8f64..2.8, radius in 0.1f64..50.0) {
        let mut rng = rng(seed);
        let mass_eigs: Vec<f64> = (0..n).map(|i| 0.5 + 1.5 * i as f64 / n as f64).collect();
        // moderate conditioning: rounding delays termination on ill-conditioned spectra
        let stiff_eigs: Vec<f64> = (0..n).map(|i| 1.0 + 9.0 * i as f64 / n as f64).collect();
        let disc = Discretization::new(random_spd(&mut rng, &mass_eigs), random_spd(&mut rng, &stiff_eigs)).unwrap();
        let z = C64::from_polar(radius, arg);
        let g = random_complex(&mut rng, n);
        let sys = ShiftedSystem::new(&disc, z, &g).unwrap();
        let reference = disc.direct_solve(z, &g).unwrap();
        let stop = StoppingRule::error(reference, 1e-300).with_max_iter(n);
        let rep = cg_shifted(&sys, &zeros(n), &stop).unwrap();
        let r0 = rep.residual_norms[0];
        let last = *rep.residual_norms.last().unwrap();
        prop_assert!(last <= 1e-9 * r0, "n = {n}: {last:e} vs {r0:e}");
    }
}

#[test]
fn chebyshev_bound_dominates_energy_error() {
    let p = small_problem(16);
    let disc = &p.disc;
    for j in [5, 15] {
        let z = p.z(j).unwrap();
        let w = p.direct(j).unwrap();
        let g = p.load(j).unwrap();
        let sys = ShiftedSystem::new(disc, z, &g).unwrap();
        let stop = StoppingRule::error(w.clone(), 1e-12).with_max_iter(400).with_trace();
        let rep = cg_shifted(&sys, &zeros(disc.dim()), &stop).unwrap();
        assert!(rep.converged);
        let pred = chebyshev_prediction(p.lambda1, p.lambda_n, z, rep.iterations).unwrap();
        let it = &rep.trace.unwrap().iterates;
        let e0 = disc.triple_norm(z, &diff(&it[0], &w));
        for (n, wn) in it.iter().enumerate() {
            let ratio = disc.triple_norm(z, &diff(wn, &w)) / e0;
            assert!(ratio <= pred.bound(n) * (1.0 + 1e-9) + 1e-12, "j={j} n={n}: {ratio} > {}", pred.bound(n));
        }

        let (mu, _) = optimal_mu_cg(p.lambda1, p.lambda_n, z).unwrap();
        let inv = make_inv(disc, mu).unwrap();
        let zt = 1.0 / (z - mu);
        let rep = cg_inv_precond(&sys, &inv, &zeros(disc.dim()), &stop).unwrap();
        let pred = chebyshev_prediction_inv(p.lambda1, p.lambda_n, z, mu, rep.iterations).unwrap();
        let it = &rep.trace.unwrap().iterates;
        let e0 = inv_triple_norm(disc, &inv, zt, &diff(&it[0], &w));
        for (n, wn) in it.iter().enumerate() {
            let ratio = inv_triple_norm(disc, &inv, zt, &diff(wn, &w)) / e0;
            assert!(ratio <= pred.bound(n) * (1.0 + 1e-9) + 1e-12, "INV j={j} n={n}");
        }
    }
}

/// `(zM+S)` and the triple-norm Gram matrix `|z| M + S` as dense matrices.
fn dense_pair(disc: &Discretization, z: C64) -> (DMatrix<C64>, DMatrix<C64>) {
    let m = complex_dense(disc.mass());
    let s = complex_dense(disc.stiffness());
    (&m * z + &s, &m * C64::new(z.norm(), 0.0) + &s)
}

/// Orthonormal basis (Euclidean) of span{v, Tv, ..., T^{n-1}v}.
fn krylov_basis(t: &DMatrix<C64>, v: &[C64], n: usize) -> DMatrix<C64> {
    let mut cols: Vec<DVector<C64>> = Vec::new();
    let mut next = DVector::from_column_slice(v);
    for _ in 0..n {
        for _ in 0..2 {
            for c in &cols {
                let h = c.dotc(&next);
                next -= c * h;
            }
        }
        let nrm = next.norm();
        next /= C64::new(nrm, 0.0);
        cols.push(next.clone());
        next = t * &next;
    }
    DMatrix::from_columns(&cols)
}

#[test]
fn quasi_optimality_against_dense_best_approximation() {
    let p = small_problem(6);
    let disc = &p.disc;
    let j = 10;
    let z = p.z(j).unwrap();
    let g = p.load(j).unwrap();
    let w = p.direct(j).unwrap();
    let sys = ShiftedSystem::new(disc, z, &g).unwrap();
    let stop = StoppingRule::error(w.clone(), 1e-300).with_max_iter(8).with_trace();
    let rep = cg_shifted(&sys, &zeros(disc.dim()), &stop).unwrap();
    let it = rep.trace.unwrap().iterates;
    let (_, energy) = dense_pair(disc, z);
    let h = disc
        .mass()
        .to_dense()
        .cholesky()
        .unwrap()
        .solve(&disc.stiffness().to_dense())
        .map(|x| C64::new(x, 0.0));
    let r0 = disc.mass_solver().apply(&g);
    let sec = 1.0 / (0.5 * z.arg()).cos();
    let wv = DVector::from_column_slice(&w);
    for n in 1..it.len() {
        let v = krylov_basis(&h, &r0, n);
        // energy-orthogonal projection of w onto V_n
        let lhs = v.adjoint() * &energy * &v;
        let rhs = v.adjoint() * &energy * &wv;
        let y = lhs.lu().solve(&rhs).unwrap();
        let best: Vec<C64> = (&v * y).iter().copied().collect();
        let best_err = disc.triple_norm(z, &diff(&best, &w));
        let cg_err = disc.triple_norm(z, &diff(&it[n], &w));
        assert!(cg_err <= sec * best_err * (1.0 + 1e-8), "n={n}: {cg_err} > sec * {best_err}");
    }
}

struct MassInverse(BandLdlt<f64>);

impl RealOperator for MassInverse {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.0.solve(x));
    }
}

impl Preconditioner for MassInverse {
    fn kind(&self) -> PrecondKind {
        PrecondKind::Inv
    }
    fn mu(&self) -> f64 {
        0.0
    }
    fn metadata(&self) -> Option<SpectralMeta> {
        None
    }
}

#[test]
fn general_cg_with_inverse_mass_is_basic_cg() {
    let p = small_problem(10);
    let disc = &p.disc;
    let j = 8;
    let z = p.z(j).unwrap();
    let g = p.load(j).unwrap();
    let sys = ShiftedSystem::new(disc, z, &g).unwrap();
    let stop = StoppingRule::error(p.direct(j).unwrap(), 1e-300)
        .with_max_iter(20)
        .with_trace();
    let basic = cg_shifted(&sys, &zeros(disc.dim()), &stop).unwrap();
    let pc = MassInverse(BandLdlt::factor_spd(disc.mass()).unwrap());
    let general = cg_general_precond(&sys, &pc, &zeros(disc.dim()), &stop, 100).unwrap();
    let a = basic.trace.unwrap().iterates;
    let b = general.trace.unwrap().iterates;
    assert_eq!(a.len(), b.len());
    for (n, (x, y)) in a.iter().zip(&b).enumerate().skip(1) {
        assert!(norm(&diff(x, y)) <= 1e-8 * norm(x), "n={n}");
    }
}

#[test]
fn general_cg_matches_dense_galerkin_projection() {
    let p = small_problem(6);
    let disc = &p.disc;
    let j = 10;
    let z = p.z(j).unwrap();
    let g = p.load(j).unwrap();
    let (mu, _) = optimal_mu_cg(p.lambda1, p.lambda_n, z).unwrap();
    let sys = ShiftedSystem::new(disc, z, &g).unwrap();
    let (a, _) = dense_pair(disc, z);
    let gv = DVector::from_column_slice(&g);
    for kind in [PrecondKind::Ic0, PrecondKind::Sgs(2), PrecondKind::Inv] {
        let pc = make_preconditioner(disc, kind, mu).unwrap();
        let b = dense_operator(pc.as_ref()).map(|x| C64::new(x, 0.0));
        let stop = StoppingRule::error(p.direct(j).unwrap(), 1e-300)
            .with_max_iter(8)
            .with_trace();
        let rep = cg_general_precond(&sys, pc.as_ref(), &zeros(disc.dim()), &stop, 100).unwrap();
        let it = rep.trace.unwrap().iterates;
        let r0: Vec<C64> = (&b * &gv).iter().copied().collect();
        let ba = &b * &a;
        for n in 1..it.len() {
            let v = krylov_basis(&ba, &r0, n);
            // V^H (g - A V y) = 0
            let y = (v.adjoint() * &a * &v).lu().solve(&(v.adjoint() * &gv)).unwrap();
            let oracle: Vec<C64> = (&v * y).iter().copied().collect();
            let err = norm(&diff(&it[n], &oracle));
            assert!(err <= 1e-7 * norm(&oracle), "{kind} n={n}: {err:e}");
        }
    }
}

#[test]
fn shifted_form_is_continuous_and_coercive() {
    let p = small_problem(8);
    let disc = &p.disc;
    let mut rng = rng(7);
    for j in [0, 5, 12, 20] {
        let z = p.z(j).unwrap();
        let c = (0.5 * z.arg()).cos();
        for _ in 0..50 {
            let v = random_complex(&mut rng, disc.dim());
            let w = random_complex(&mut rng, disc.dim());
            let av = apply_shifted(disc, z, &v);
            let tv = disc.triple_norm(z, &v);
            let tw = disc.triple_norm(z, &w);
            assert!(dotc(&av, &w).norm() <= tv * tw * (1.0 + 1e-12));
            assert!(dotc(&av, &v).norm() >= c * tv * tv * (1.0 - 1e-12));
        }
    }
}
