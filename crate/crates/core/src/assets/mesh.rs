use std::fmt::Write as _;

use crate::assets::primitives::Primitive;
use crate::assets::AssetError;
use crate::math::{Aabb, Vec2, Vec3};

/// Triangle soup with shared vertices. Counter-clockwise winding seen from
/// outside gives the outward normal.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex texture coordinates, when present.
    pub uvs: Option<Vec<Vec2>>,
    /// Set by [`make_primitive`](crate::assets::make_primitive); lets the
    /// collision builder use exact analytic shapes.
    pub primitive: Option<Primitive>,
}

pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        TriangleMesh { vertices, triangles, uvs: None, primitive: None }
    }

    pub fn validate(&self) -> Result<(), AssetError> {
        if self.vertices.is_empty() || self.triangles.is_empty() {
            return Err(AssetError::EmptyMesh);
        }
        let n = self.vertices.len();
        for (ti, t) in self.triangles.iter().enumerate() {
            for &i in t {
                if i as usize >= n {
                    return Err(AssetError::IndexError { index: i as usize + 1, count: n });
                }
            }
            if self.triangle_area(ti) <= MIN_TRIANGLE_AREA {
                return Err(AssetError::DegenerateTriangle(ti));
            }
        }
        if let Some(uvs) = &self.uvs {
            if uvs.len() != n {
                return Err(AssetError::Parse {
                    line: 0,
                    message: format!("{} uvs for {} vertices", uvs.len(), n),
                });
            }
        }
        Ok(())
    }

    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit outward normal of a triangle (zero for degenerate ones).
    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn translated(&self, offset: &Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            triangles: self.triangles.clone(),
            uvs: self.uvs.clone(),
            primitive: None,
        }
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
            uvs: self.uvs.clone(),
            primitive: None,
        }
    }

    /// Disjoint union; indices of `other` are offset.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let off = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        TriangleMesh::new(vertices, triangles)
    }

    /// Plain-text geometry in the dialect accepted by [`load_mesh`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        if let Some(uvs) = &self.uvs {
            for uv in uvs {
                let _ = writeln!(out, "vt {} {}", uv.x, uv.y);
            }
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }
}

/// Parses the plain-text geometry dialect: `v x y z`, `vt u v` and
/// `f i j k ...` (1-based, polygons fan-triangulated from their first
/// vertex). Face tokens of the form `i/t/n` use the leading vertex index.
/// Every other line is ignored.
pub fn load_mesh(text: &str) -> Result<TriangleMesh, AssetError> {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut polygons: Vec<(usize, Vec<usize>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut tok = raw.split_whitespace();
        match tok.next() {
            Some("v") => {
                let xyz = parse_floats(tok, 3, line)?;
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("vt") => {
                let uv = parse_floats(tok, 2, line)?;
                uvs.push(Vec2::new(uv[0], uv[1]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: usize = head.parse().map_err(|_| AssetError::Parse {
                        line,
                        message: format!("bad face index {t:?}"),
                    })?;
                    if i == 0 {
                        return Err(AssetError::Parse { line, message: "face indices are 1-based".into() });
                    }
                    idx.push(i);
                }
                if idx.len() < 3 {
                    return Err(AssetError::Parse { line, message: "face needs at least 3 vertices".into() });
                }
                polygons.push((line, idx));
            }
            _ => {}
        }
    }

    if vertices.is_empty() || polygons.is_empty() {
        return Err(AssetError::EmptyMesh);
    }
    let mut triangles = Vec::new();
    for (_, poly) in &polygons {
        for &i in poly {
            if i > vertices.len() {
                return Err(AssetError::IndexError { index: i, count: vertices.len() });
            }
        }
        for k in 1..poly.len() - 1 {
            triangles.push([(poly[0] - 1) as u32, (poly[k] - 1) as u32, (poly[k + 1] - 1) as u32]);
        }
    }
    let mut mesh = TriangleMesh::new(vertices, triangles);
    if !uvs.is_empty() {
        if uvs.len() != mesh.vertices.len() {
            return Err(AssetError::Parse {
                line: 0,
                message: format!("{} texture coordinates for {} vertices", uvs.len(), mesh.vertices.len()),
            });
        }
        mesh.uvs = Some(uvs);
    }
    mesh.validate()?;
    Ok(mesh)
}

fn parse_floats<'a>(tok: impl Iterator<Item = &'a str>, n: usize, line: usize) -> Result<Vec<f64>, AssetError> {
    let vals: Vec<f64> = tok
        .take(n)
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| AssetError::Parse { line, message: e.to_string() })?;
    if vals.len() != n || vals.iter().any(|v| !v.is_finite()) {
        return Err(AssetError::Parse { line, message: format!("expected {n} finite numbers") });
    }
    Ok(vals)
}
