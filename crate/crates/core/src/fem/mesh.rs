use std::collections::HashMap;

use crate::error::{Error, Result};

/// Triangulation of a polygonal domain with counterclockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    h: f64,
    reoriented: usize,
}

pub(crate) fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

impl Mesh {
    /// Validates a triangulation. Clockwise triangles are flipped (with a
    /// warning); degenerate ones are rejected.
    pub fn new(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>, boundary: Vec<bool>) -> Result<Self> {
        if boundary.len() != vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: vertices.len(),
                found: boundary.len(),
            });
        }
        let mut reoriented = 0;
        let mut h: f64 = 0.0;
        for (index, tri) in triangles.iter_mut().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {index} references vertex {v} of {}",
                    vertices.len()
                )));
            }
            let [p, q, r] = tri.map(|v| vertices[v]);
            let area = signed_area(p, q, r);
            let scale = [p, q, r]
                .iter()
                .flat_map(|v| v.iter())
                .fold(0.0f64, |m, c| m.max(c.abs()))
                .max(1.0);
            if !(area.abs() > 1e-14 * scale * scale) {
                return Err(Error::DegenerateTriangle { index, area });
            }
            if area < 0.0 {
                tri.swap(1, 2);
                reoriented += 1;
            }
            for (a, b) in [(p, q), (q, r), (r, p)] {
                h = h.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        if reoriented > 0 {
            log::warn!("reoriented {reoriented} clockwise triangle(s) to counterclockwise");
        }
        Ok(Self {
            vertices,
            triangles,
            boundary,
            h,
            reoriented,
        })
    }

    /// Marks as boundary every vertex on an edge that belongs to one triangle only.
    pub fn topological_boundary(n_vertices: usize, triangles: &[[usize; 3]]) -> Vec<bool> {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary = vec![false; n_vertices];
        for ((a, b), count) in edges {
            if count == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        boundary
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }
    /// Longest edge.
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Number of triangles whose orientation was flipped on construction.
    pub fn reoriented(&self) -> usize {
        self.reoriented
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangles[t].map(|v| self.vertices[v]);
        signed_area(p, q, r)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn interior_count(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }
}

/// Structured mesh of the trapezium with corners (1,0), (0,1), (-1,1), (-1,0).
///
/// Grid points are `(i/m, j/m)`; each grid square is cut along the diagonal
/// parallel to `x + y = 1`, so the slanted side is made of element edges.
pub fn generate_trapezium_mesh(m: usize) -> Result<Mesh> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("mesh needs m >= 2, got {m}")));
    }
    let mi = m as i64;
    let mut index = HashMap::new();
    let mut vertices = Vec::new();
    let mut boundary = Vec::new();
    for j in 0..=mi {
        for i in -mi..=(mi - j) {
            index.insert((i, j), vertices.len());
            vertices.push([i as f64 / m as f64, j as f64 / m as f64]);
            boundary.push(i == -mi || j == 0 || j == mi || i + j == mi);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..mi {
        for i in -mi..(mi - j) {
            let v = |a: i64, b: i64| index[&(a, b)];
            triangles.push([v(i, j), v(i + 1, j), v(i, j + 1)]);
            if i + j + 2 <= mi {
                triangles.push([v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
    }
    Mesh::new(vertices, triangles, boundary)
}
