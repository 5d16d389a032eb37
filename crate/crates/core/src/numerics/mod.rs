//! Scalar, vector and matrix plumbing shared by every solver.

mod banded;
mod brent;
mod dense;
mod inner;
mod sparse;

pub use banded::{reverse_cuthill_mckee, BandLdlt};
pub use brent::{minimize_scalar, Minimum, ScalarMinimizerConfig};
pub use dense::{dense_complex_solve, DenseLu};
pub use inner::{weighted_inner, InnerProductSpace};
pub use sparse::{CsrMatrix, CsrPattern};

use num_complex::Complex64;
use num_traits::NumAssign;
use std::fmt::Debug;
use std::ops::Neg;

pub type C64 = Complex64;

/// Field of matrix entries: `f64` for mass/stiffness, `C64` for shifted systems.
pub trait Scalar: Copy + Send + Sync + Debug + PartialEq + NumAssign + Neg<Output = Self> {
    fn from_real(x: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
}

impl Scalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
}

impl Scalar for C64 {
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
}

/// Unitary pairing `<x, y> = sum x_i conj(y_i)`, linear in the first argument.
pub fn dotc(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a * x`
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn scale(a: C64, x: &[C64]) -> Vec<C64> {
    x.iter().map(|v| a * v).collect()
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

pub fn split(x: &[C64]) -> (Vec<f64>, Vec<f64>) {
    (x.iter().map(|v| v.re).collect(), x.iter().map(|v| v.im).collect())
}

pub fn join(re: &[f64], im: &[f64]) -> Vec<C64> {
    re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect()
}

/// A real symmetric linear map applied to real vectors.
///
/// Complex vectors are handled by acting on real and imaginary parts.
pub trait RealOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply_real(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let (re, im) = split(x);
        let n = self.dim();
        let mut yr = vec![0.0; n];
        let mut yi = vec![0.0; n];
        self.apply_real(&re, &mut yr);
        self.apply_real(&im, &mut yi);
        join(&yr, &yi)
    }
}

impl RealOperator for CsrMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.mul_complex(x)
    }
}

impl RealOperator for BandLdlt<f64> {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.solve(x));
    }
}
