//! The heat-equation test problem on the trapezium.
//!
//! `u_t = a lap(u) + f` with exact solution `u = X(x, y) T(t)`,
//! `X = (1 + x)(1 - x - y) sin(pi y)` and `T = (1 + 2t) exp(-t)`.
//! Since `u(0) = X` and `f = X T' - a lap(X) T`, the transformed data are
//! `g(z) = u0 + f^(z) = (z X - a lap(X)) T^(z)` with `T^(z) = 1/(z+1) + 2/(z+1)^2`.

use std::f64::consts::PI;

use super::FemSpace;
use crate::error::{Error, Result};
use crate::numerics::C64;

pub const DEFAULT_DIFFUSIVITY: f64 = 1.0 / 15.0;

pub fn spatial_factor(x: f64, y: f64) -> f64 {
    (1.0 + x) * (1.0 - x - y) * (PI * y).sin()
}

pub fn spatial_laplacian(x: f64, y: f64) -> f64 {
    let (s, c) = (PI * y).sin_cos();
    -2.0 * s - 2.0 * PI * (1.0 + x) * c - PI * PI * (1.0 + x) * (1.0 - x - y) * s
}

pub fn temporal_factor(t: f64) -> f64 {
    (1.0 + 2.0 * t) * (-t).exp()
}

pub fn temporal_transform(z: C64) -> Result<C64> {
    let p = z + 1.0;
    if p.norm() <= 1e-8 {
        return Err(Error::InvalidArgument(format!("z = {z} is at the pole z = -1 of the load transform")));
    }
    Ok(1.0 / p + 2.0 / (p * p))
}

pub fn exact_solution(x: f64, y: f64, t: f64) -> f64 {
    spatial_factor(x, y) * temporal_factor(t)
}

/// Load vectors `g(z)` for the model problem on a given space.
///
/// The two spatial integrals are computed once; each `g(z)` is then a
/// combination of them.
#[derive(Debug, Clone)]
pub struct ModelProblem {
    x_proj: Vec<f64>,
    lap_proj: Vec<f64>,
    a: f64,
}

impl ModelProblem {
    pub fn new(space: &FemSpace) -> Self {
        Self {
            x_proj: space.project(spatial_factor),
            lap_proj: space.project(spatial_laplacian),
            a: space.diffusivity(),
        }
    }

    /// `g_i = (g(z), phi_i)`.
    pub fn load_vector(&self, z: C64) -> Result<Vec<C64>> {
        let tz = temporal_transform(z)?;
        Ok(self
            .x_proj
            .iter()
            .zip(&self.lap_proj)
            .map(|(&gx, &gl)| (z * gx - self.a * gl) * tz)
            .collect())
    }
}

/// Nodal values of the exact solution at time `t`.
pub fn exact_nodal_solution(space: &FemSpace, t: f64) -> Result<Vec<C64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
    }
    Ok(space
        .interpolate(|x, y| exact_solution(x, y, t))
        .into_iter()
        .map(|v| C64::new(v, 0.0))
        .collect())
}
