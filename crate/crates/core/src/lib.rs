//! Laplace-transform time stepping for parabolic problems, with Richardson
//! and conjugate-gradient solvers for the complex-shifted systems it produces.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the textbook form of the dense and banded kernels.
#![allow(clippy::needless_range_loop)]

pub mod contour;
pub mod driver;
pub mod error;
pub mod fem;
pub mod krylov;
pub mod numerics;
pub mod precond;
pub mod richardson;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
pub use numerics::C64;

/// The guide's chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/contour.md")]
    pub mod contour {}
    #[doc = include_str!("../../../book/src/finite-elements.md")]
    pub mod finite_elements {}
    #[doc = include_str!("../../../book/src/richardson.md")]
    pub mod richardson {}
    #[doc = include_str!("../../../book/src/conjugate-gradient.md")]
    pub mod conjugate_gradient {}
    #[doc = include_str!("../../../book/src/preconditioners.md")]
    pub mod preconditioners {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
