use std::sync::Arc;

use super::Mesh;
use crate::error::{check_len, Error, Result};
use crate::numerics::{CsrMatrix, C64};

/// P1 space on a mesh with homogeneous Dirichlet conditions.
///
/// Unknowns are the interior vertices; `M` and `S` share one sparsity pattern.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Mesh,
    a: f64,
    equation: Vec<Option<usize>>,
    interior: Vec<usize>,
    mass: CsrMatrix<f64>,
    stiffness: CsrMatrix<f64>,
    lumped: Vec<f64>,
    unreduced_mass_total: f64,
}

/// Element stiffness for unit diffusivity.
pub fn element_stiffness(p: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let area = super::mesh::signed_area(p[0], p[1], p[2]);
    if !(area > 0.0) {
        return Err(Error::DegenerateTriangle { index: 0, area });
    }
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    Ok(k)
}

pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

impl FemSpace {
    pub fn assemble(mesh: Mesh, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!("diffusivity must be positive, got {a}")));
        }
        let mut equation = vec![None; mesh.vertices().len()];
        let mut interior = Vec::new();
        for (v, &b) in mesh.boundary().iter().enumerate() {
            if !b {
                equation[v] = Some(interior.len());
                interior.push(v);
            }
        }
        let n = interior.len();
        if n == 0 {
            return Err(Error::InvalidArgument("mesh has no interior vertices".into()));
        }
        let mut mass_t = Vec::with_capacity(9 * mesh.triangles().len());
        let mut stiff_t = Vec::with_capacity(9 * mesh.triangles().len());
        let mut total = 0.0;
        for (index, tri) in mesh.triangles().iter().enumerate() {
            let p = tri.map(|v| mesh.vertices()[v]);
            let area = mesh.area(index);
            let ke = element_stiffness(p).map_err(|_| Error::DegenerateTriangle { index, area })?;
            let me = element_mass(area);
            for r in 0..3 {
                for c in 0..3 {
                    total += me[r][c];
                    if let (Some(i), Some(j)) = (equation[tri[r]], equation[tri[c]]) {
                        mass_t.push((i, j, me[r][c]));
                        stiff_t.push((i, j, a * ke[r][c]));
                    }
                }
            }
        }
        let mass = CsrMatrix::from_triplets(n, n, &mass_t);
        let pattern = Arc::clone(mass.pattern());
        let mut sv = vec![0.0; pattern.nnz()];
        for (i, j, v) in stiff_t {
            sv[pattern.find(i, j).expect("mass pattern covers stiffness")] += v;
        }
        let stiffness = CsrMatrix::from_parts(pattern, sv);
        let lumped = mass.row_sums();
        Ok(Self {
            mesh,
            a,
            equation,
            interior,
            mass,
            stiffness,
            lumped,
            unreduced_mass_total: total,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    pub fn diffusivity(&self) -> f64 {
        self.a
    }
    /// Number of unknowns `N`.
    pub fn dim(&self) -> usize {
        self.interior.len()
    }
    pub fn mass(&self) -> &CsrMatrix<f64> {
        &self.mass
    }
    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }
    /// Row sums of the (reduced) mass matrix.
    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }
    /// `D` stored on the mass pattern, so `z D + S` stays a value-wise combination.
    pub fn lumped_matrix(&self) -> CsrMatrix<f64> {
        let values = (0..self.dim())
            .flat_map(|i| self.mass.pattern().row(i).iter().map(move |&j| (i, j)))
            .map(|(i, j)| if i == j { self.lumped[i] } else { 0.0 })
            .collect();
        CsrMatrix::from_parts(Arc::clone(self.mass.pattern()), values)
    }
    /// Sum of all entries of the mass matrix before boundary elimination.
    pub fn unreduced_mass_total(&self) -> f64 {
        self.unreduced_mass_total
    }
    /// Global vertex of each unknown.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }
    pub fn equation_of(&self, vertex: usize) -> Option<usize> {
        self.equation[vertex]
    }

    /// Vector of `f` at the interior vertices.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.interior
            .iter()
            .map(|&v| {
                let [x, y] = self.mesh.vertices()[v];
                f(x, y)
            })
            .collect()
    }

    /// `(f, phi_i)` for every unknown, using the edge-midpoint rule on each triangle.
    pub fn project<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        let verts = self.mesh.vertices();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let area = self.mesh.area(t);
            let mid = |a: usize, b: usize| {
                let (p, q) = (verts[tri[a]], verts[tri[b]]);
                f(0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))
            };
            let f01 = mid(0, 1);
            let f12 = mid(1, 2);
            let f20 = mid(2, 0);
            let local = [f01 + f20, f01 + f12, f12 + f20];
            for (r, &v) in tri.iter().enumerate() {
                if let Some(i) = self.equation[v] {
                    g[i] += area / 6.0 * local[r];
                }
            }
        }
        g
    }

    /// `sqrt(Re v^H M v)`.
    pub fn discrete_norm(&self, v: &[C64]) -> Result<f64> {
        check_len(self.dim(), v.len())?;
        let mv = self.mass.mul_complex(v);
        Ok(crate::numerics::dotc(&mv, v).re.max(0.0).sqrt())
    }
}
