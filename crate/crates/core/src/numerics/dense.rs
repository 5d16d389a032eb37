use nalgebra::DMatrix;

use super::C64;
use crate::error::{check_len, Error, Result};

/// LU factorization with partial pivoting of a dense complex matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DMatrix<C64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &DMatrix<C64>) -> Result<Self> {
        let n = a.nrows();
        check_len(n, a.ncols())?;
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, big) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if big <= tiny {
                return Err(Error::SingularPivot { index: k });
            }
            if p != k {
                lu.swap_rows(p, k);
                piv.swap(p, k);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != C64::new(0.0, 0.0) {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.lu.nrows();
        check_len(n, b.len())?;
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[(i, j)];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        Ok(x)
    }
}

/// Solves `A x = b` by dense LU with partial pivoting.
pub fn dense_complex_solve(a: &DMatrix<C64>, b: &[C64]) -> Result<Vec<C64>> {
    DenseLu::factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        for i in 0..n {
            a[(i, i)] += C64::new(n as f64 * 0.5, 0.0);
        }
        a
    }

    #[test]
    fn identity_returns_rhs() {
        let a = DMatrix::<C64>::identity(4, 4);
        let b = vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0), C64::new(0.0, 3.0), C64::new(-1.0, 1.0)];
        assert_eq!(dense_complex_solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn diagonal_shifted_system() {
        let z = C64::new(-1.35, 2.12);
        let lams = [1.0, 2.5, 10.0];
        let a = DMatrix::from_fn(3, 3, |i, j| if i == j { z + lams[i] } else { C64::new(0.0, 0.0) });
        let x = dense_complex_solve(&a, &[C64::new(1.0, 0.0); 3]).unwrap();
        for (xi, l) in x.iter().zip(lams) {
            assert!((xi - 1.0 / (z + l)).norm() < 1e-15);
        }
    }

    #[test]
    fn random_50_residual() {
        let a = random_matrix(50, 11);
        let b: Vec<C64> = (0..50).map(|i| C64::new(i as f64, 1.0)).collect();
        let x = dense_complex_solve(&a, &b).unwrap();
        let ax = &a * nalgebra::DVector::from_vec(x.clone());
        let res: f64 = ax.iter().zip(&b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * a.norm() * xn);
    }

    #[test]
    fn singular_reports_pivot() {
        let mut a = DMatrix::<C64>::identity(3, 3);
        a[(2, 2)] = C64::new(0.0, 0.0);
        assert!(matches!(
            dense_complex_solve(&a, &[C64::new(1.0, 0.0); 3]),
            Err(Error::SingularPivot { index: 2 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn solve_inverts_matvec(n in 1usize..40, seed in any::<u64>()) {
            let a = random_matrix(n, seed);
            let x: Vec<C64> = (0..n).map(|i| C64::new((i % 5) as f64 - 2.0, (i % 3) as f64)).collect();
            let b = (&a * nalgebra::DVector::from_vec(x.clone())).as_slice().to_vec();
            let y = dense_complex_solve(&a, &b).unwrap();
            let xn = x.iter().map(|v| v.norm()).fold(1.0, f64::max);
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).norm() <= 1e-9 * xn);
            }
        }
    }
}
