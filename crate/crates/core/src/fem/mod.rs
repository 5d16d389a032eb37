//! Piecewise-linear finite elements on triangles.

mod io;
mod mesh;
mod model;
mod space;

pub use io::{read_mesh, write_mesh};
pub use mesh::{generate_trapezium_mesh, Mesh};
pub use model::{
    exact_nodal_solution, exact_solution, spatial_factor, spatial_laplacian, temporal_factor,
    temporal_transform, ModelProblem, DEFAULT_DIFFUSIVITY,
};
pub use space::{element_mass, element_stiffness, FemSpace};

/// Convenience: assemble the model problem space on the structured mesh.
pub fn trapezium_space(m: usize, a: f64) -> crate::Result<FemSpace> {
    FemSpace::assemble(generate_trapezium_mesh(m)?, a)
}
