//! Triangle-style `.node` / `.ele` files.
//!
//! `.node`: header `count dim attrs markers`, then `index x y [attrs..] [marker]`.
//! `.ele`: header `count nodes_per_triangle attrs`, then `index v1 v2 v3 [attrs..]`.
//! Indices may start at 0 or 1 (decided by the first entry); `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Mesh;
use crate::error::{Error, Result};

struct Lines<'a> {
    path: String,
    inner: Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>,
}

impl<'a> Lines<'a> {
    fn new(path: &Path, text: &'a str) -> Self {
        let inner = text.lines().enumerate().filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("");
            let toks: Vec<&str> = l.split_whitespace().collect();
            (!toks.is_empty()).then_some((i + 1, toks))
        });
        Self {
            path: path.display().to_string(),
            inner: Box::new(inner),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.inner.next().ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 0,
            message: format!("unexpected end of file while reading {what}"),
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, line: usize, tok: Option<&&str>, what: &str) -> Result<T> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(line, format!("expected {what}")))
    }
}

/// Reads a mesh; boundary flags come from node markers when present,
/// otherwise from edges owned by a single triangle.
pub fn read_mesh(node_file: impl AsRef<Path>, ele_file: impl AsRef<Path>) -> Result<Mesh> {
    let node_path = node_file.as_ref();
    let ele_path = ele_file.as_ref();
    let node_text = fs::read_to_string(node_path)?;
    let ele_text = fs::read_to_string(ele_path)?;

    let mut nodes = Lines::new(node_path, &node_text);
    let (line, head) = nodes.next("node header")?;
    let count: usize = nodes.num(line, head.first(), "node count")?;
    let dim: usize = nodes.num(line, head.get(1), "dimension")?;
    let attrs: usize = nodes.num(line, head.get(2).or(Some(&"0")), "attribute count")?;
    let has_marker = nodes.num::<usize>(line, head.get(3).or(Some(&"0")), "marker flag")? > 0;
    if dim != 2 {
        return Err(nodes.err(line, format!("only 2D meshes are supported, got dim {dim}")));
    }
    let mut vertices = Vec::with_capacity(count);
    let mut markers = Vec::with_capacity(count);
    let mut base = None;
    for k in 0..count {
        let (line, toks) = nodes.next("node")?;
        let idx: usize = nodes.num(line, toks.first(), "node index")?;
        let b = *base.get_or_insert(idx.min(1));
        if idx != k + b {
            return Err(nodes.err(line, format!("node index {idx} out of sequence")));
        }
        let x: f64 = nodes.num(line, toks.get(1), "x coordinate")?;
        let y: f64 = nodes.num(line, toks.get(2), "y coordinate")?;
        vertices.push([x, y]);
        if has_marker {
            let m: i64 = nodes.num(line, toks.get(3 + attrs), "boundary marker")?;
            markers.push(m != 0);
        }
    }
    let base = base.unwrap_or(1);

    let mut eles = Lines::new(ele_path, &ele_text);
    let (line, head) = eles.next("element header")?;
    let ntri: usize = eles.num(line, head.first(), "triangle count")?;
    let per: usize = eles.num(line, head.get(1), "nodes per triangle")?;
    if per != 3 {
        return Err(eles.err(line, format!("only linear triangles are supported, got {per} nodes")));
    }
    let mut triangles = Vec::with_capacity(ntri);
    for k in 0..ntri {
        let (line, toks) = eles.next("triangle")?;
        let idx: usize = eles.num(line, toks.first(), "triangle index")?;
        if idx != k + base {
            return Err(eles.err(line, format!("triangle index {idx} out of sequence")));
        }
        let mut tri = [0; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let v: usize = eles.num(line, toks.get(1 + c), "vertex index")?;
            if v < base || v - base >= count {
                return Err(eles.err(line, format!("vertex {v} out of range")));
            }
            *slot = v - base;
        }
        triangles.push(tri);
    }
    if eles.inner.next().is_some() || nodes.inner.next().is_some() {
        log::warn!("ignoring trailing lines in mesh files");
    }
    let boundary = if has_marker {
        markers
    } else {
        Mesh::topological_boundary(vertices.len(), &triangles)
    };
    Mesh::new(vertices, triangles, boundary)
}

/// Writes a mesh with 1-based indices and boundary markers.
pub fn write_mesh(mesh: &Mesh, node_file: impl AsRef<Path>, ele_file: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "{} 2 0 1", mesh.vertices().len());
    for (i, (v, b)) in mesh.vertices().iter().zip(mesh.boundary()).enumerate() {
        let _ = writeln!(s, "{} {:?} {:?} {}", i + 1, v[0], v[1], u8::from(*b));
    }
    fs::write(node_file, s)?;
    let mut s = String::new();
    let _ = writeln!(s, "{} 3 0", mesh.triangles().len());
    for (i, t) in mesh.triangles().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1);
    }
    fs::write(ele_file, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::generate_trapezium_mesh;

    fn tmpdir(name: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("ck-mesh-{name}-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn single_triangle() {
        let d = tmpdir("single");
        fs::write(d.join("a.node"), "# comment\n3 2 0 1\n1 0 0 1\n2 2 0 1\n3 0 1 1 # last\n").unwrap();
        fs::write(d.join("a.ele"), "1 3 0\n1 1 2 3\n").unwrap();
        let mesh = read_mesh(d.join("a.node"), d.join("a.ele")).unwrap();
        assert_eq!(mesh.triangles().len(), 1);
        assert!((mesh.area(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip() {
        let d = tmpdir("rt");
        let mesh = generate_trapezium_mesh(4).unwrap();
        write_mesh(&mesh, d.join("m.node"), d.join("m.ele")).unwrap();
        let back = read_mesh(d.join("m.node"), d.join("m.ele")).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let d = tmpdir("cw");
        fs::write(d.join("a.node"), "3 2 0 0\n1 0 0\n2 0 1\n3 1 0\n").unwrap();
        fs::write(d.join("a.ele"), "1 3 0\n1 1 2 3\n").unwrap();
        let mesh = read_mesh(d.join("a.node"), d.join("a.ele")).unwrap();
        assert_eq!(mesh.reoriented(), 1);
        assert!(mesh.area(0) > 0.0);
        assert_eq!(mesh.boundary(), &[true, true, true]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let d = tmpdir("bad");
        fs::write(d.join("a.node"), "3 2 0 0\n1 0 0\n2 0 x\n3 1 0\n").unwrap();
        fs::write(d.join("a.ele"), "1 3 0\n1 1 2 3\n").unwrap();
        match read_mesh(d.join("a.node"), d.join("a.ele")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(d.join("a.node"), "3 2 0 0\n1 0 0\n2 0 1\n3 1 0\n").unwrap();
        fs::write(d.join("b.ele"), "2 3 0\n1 1 2 3\n").unwrap();
        assert!(matches!(
            read_mesh(d.join("a.node"), d.join("b.ele")),
            Err(Error::Parse { .. })
        ));
        fs::write(d.join("c.ele"), "1 3 0\n1 1 2 9\n").unwrap();
        match read_mesh(d.join("a.node"), d.join("c.ele")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        fs::write(d.join("d.node"), "3 2 0 0\n1 0 0\n2 1 1\n3 2 2\n").unwrap();
        assert!(matches!(
            read_mesh(d.join("d.node"), d.join("a.ele")),
            Err(Error::DegenerateTriangle { .. })
        ));
    }
}
