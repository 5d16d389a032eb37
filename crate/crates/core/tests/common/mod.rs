#![allow(dead_code)]

use contour_krylov::driver::{MeshSource, Problem, RunConfig};
use contour_krylov::numerics::{dotc, CsrMatrix, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_problem(m: usize) -> Problem {
    Problem::from_config(&RunConfig {
        mesh: MeshSource::Generated(m),
        ..RunConfig::default()
    })
    .unwrap()
}

pub fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

pub fn diff(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn norm(v: &[C64]) -> f64 {
    dotc(v, v).re.sqrt()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// `Q diag(eigs) Qᵀ` with a random orthogonal `Q`.
pub fn random_spd(rng: &mut ChaCha8Rng, eigs: &[f64]) -> CsrMatrix<f64> {
    let n = eigs.len();
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(eigs));
    let s = &q * d * q.transpose();
    let s = (&s + s.transpose()) * 0.5;
    CsrMatrix::from_dense(&s)
}

pub fn complex_dense(a: &CsrMatrix<f64>) -> DMatrix<C64> {
    a.to_dense().map(|x| C64::new(x, 0.0))
}

/// `min_α max(|1 - α a|, |1 - α b|)` by repeatedly refined grid search.
///
/// The maximum of `|1 - α s|` over the segment is attained at an endpoint,
/// and the objective is convex in `α`, so zooming in on the best cell converges.
pub fn grid_search(a: C64, b: C64) -> f64 {
    let f = |al: C64| (1.0 - al * a).norm().max((1.0 - al * b).norm());
    let mut centre = 2.0 / (a + b);
    let mut half = 2.0 / a.norm().min(b.norm());
    let mut best = f(centre);
    let k = 100;
    for _ in 0..60 {
        let mut next = centre;
        for ix in -k..=k {
            for iy in -k..=k {
                let al = centre + C64::new(ix as f64, iy as f64) * (half / k as f64);
                let v = f(al);
                if v < best {
                    best = v;
                    next = al;
                }
            }
        }
        centre = next;
        half *= 0.5;
    }
    best
}

/// Largest observed one-step ratio of `norm(e_{n+1}) / norm(e_n)`.
pub fn worst_ratio(iterates: &[Vec<C64>], reference: &[C64], norm: impl Fn(&[C64]) -> f64) -> f64 {
    let errs: Vec<f64> = iterates.iter().map(|w| norm(&diff(w, reference))).collect();
    // The direct reference is only accurate to about cond * eps (~1e-13
    // relative on the finer meshes), which shifts a ratio by roughly that
    // over the current error. Above 1e-6 of the initial error the shift is
    // below 1e-7; further down the ratios measure the reference, not the iteration.
    errs.windows(2)
        .filter(|e| e[0] > 1e-6 * errs[0])
        .map(|e| e[1] / e[0])
        .fold(0.0, f64::max)
}
