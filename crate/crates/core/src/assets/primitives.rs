use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assets::{AssetError, TriangleMesh};
use crate::math::{Vec2, Vec3};

pub const ICOSPHERE_SUBDIVISIONS: usize = 3;
pub const RADIAL_SEGMENTS: usize = 32;
pub const TORUS_MAJOR_SEGMENTS: usize = 32;
pub const TORUS_MINOR_SEGMENTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Cube,
    Sphere,
    Cylinder,
    Cone,
    Torus,
    /// Single-sided unit quad in the XY plane facing +Z, with texture
    /// coordinates. Used for floors and texture patches.
    Plane,
}

impl PrimitiveKind {
    pub const SOLIDS: [PrimitiveKind; 5] =
        [PrimitiveKind::Cube, PrimitiveKind::Sphere, PrimitiveKind::Cylinder, PrimitiveKind::Cone, PrimitiveKind::Torus];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Cube => "cube",
            PrimitiveKind::Sphere => "sphere",
            PrimitiveKind::Cylinder => "cylinder",
            PrimitiveKind::Cone => "cone",
            PrimitiveKind::Torus => "torus",
            PrimitiveKind::Plane => "plane",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrimitiveKind {
    type Err = AssetError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "cube" => PrimitiveKind::Cube,
            "sphere" => PrimitiveKind::Sphere,
            "cylinder" => PrimitiveKind::Cylinder,
            "cone" => PrimitiveKind::Cone,
            "torus" => PrimitiveKind::Torus,
            "plane" => PrimitiveKind::Plane,
            other => return Err(AssetError::UnknownPrimitive(other.to_string())),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub size: f64,
}

/// Canonical primitive meshes, centred on their bounding box.
///
/// * cube: edge `size`
/// * sphere: icosphere of radius `size`
/// * cylinder, cone: radius `size`, height `2 size`
/// * torus: major radius `size`, minor radius `size / 4`
/// * plane: `size` x `size` quad
pub fn make_primitive(kind: PrimitiveKind, size: f64) -> Result<TriangleMesh, AssetError> {
    if !(size > 0.0 && size.is_finite()) {
        return Err(AssetError::InvalidSize(size));
    }
    let mut mesh = match kind {
        PrimitiveKind::Cube => cube(size),
        PrimitiveKind::Sphere => icosphere(size, ICOSPHERE_SUBDIVISIONS),
        PrimitiveKind::Cylinder => cylinder(size, 2.0 * size, RADIAL_SEGMENTS),
        PrimitiveKind::Cone => cone(size, 2.0 * size, RADIAL_SEGMENTS),
        PrimitiveKind::Torus => torus(size, size / 4.0, TORUS_MAJOR_SEGMENTS, TORUS_MINOR_SEGMENTS),
        PrimitiveKind::Plane => plane(size),
    };
    mesh.primitive = Some(Primitive { kind, size });
    Ok(mesh)
}

fn cube(size: f64) -> TriangleMesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    // Corner index bits: x=1, y=2, z=4.
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut triangles = Vec::with_capacity(12);
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    TriangleMesh::new(vertices, triangles)
}

fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v = v.normalize() * radius;
    }
    TriangleMesh::new(vertices, faces)
}

fn ring(radius: f64, z: f64, segments: usize) -> impl Iterator<Item = Vec3> {
    (0..segments).map(move |k| {
        let a = TAU * k as f64 / segments as f64;
        Vec3::new(radius * a.cos(), radius * a.sin(), z)
    })
}

fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments as u32;
    let h = height / 2.0;
    let mut vertices: Vec<Vec3> = ring(radius, -h, segments).collect();
    vertices.extend(ring(radius, h, segments));
    vertices.push(Vec3::new(0.0, 0.0, -h));
    vertices.push(Vec3::new(0.0, 0.0, h));
    let (cb, ct) = (2 * n, 2 * n + 1);
    let mut triangles = Vec::new();
    for k in 0..n {
        let k1 = (k + 1) % n;
        let (b0, b1, t0, t1) = (k, k1, n + k, n + k1);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
        triangles.push([ct, t0, t1]);
        triangles.push([cb, b1, b0]);
    }
    TriangleMesh::new(vertices, triangles)
}

fn cone(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments as u32;
    let h = height / 2.0;
    let mut vertices: Vec<Vec3> = ring(radius, -h, segments).collect();
    vertices.push(Vec3::new(0.0, 0.0, -h));
    vertices.push(Vec3::new(0.0, 0.0, h));
    let (cb, apex) = (n, n + 1);
    let mut triangles = Vec::new();
    for k in 0..n {
        let k1 = (k + 1) % n;
        triangles.push([k, k1, apex]);
        triangles.push([cb, k1, k]);
    }
    TriangleMesh::new(vertices, triangles)
}

fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

fn plane(size: f64) -> TriangleMesh {
    let h = size / 2.0;
    let vertices = vec![Vec3::new(-h, -h, 0.0), Vec3::new(h, -h, 0.0), Vec3::new(h, h, 0.0), Vec3::new(-h, h, 0.0)];
    let mut mesh = TriangleMesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]]);
    mesh.uvs = Some(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)]);
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::mass_properties;

    #[test]
    fn unit_cube() {
        let m = make_primitive(PrimitiveKind::Cube, 1.0).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
        let b = m.bounds();
        assert_eq!(b.min, Vec3::repeat(-0.5));
        assert_eq!(b.max, Vec3::repeat(0.5));
    }

    #[test]
    fn sphere_vertices_on_radius() {
        let m = make_primitive(PrimitiveKind::Sphere, 1.0).unwrap();
        assert_eq!(m.vertices.len(), 642);
        assert_eq!(m.triangles.len(), 1280);
        for v in &m.vertices {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn solids_are_closed_and_outward() {
        for kind in PrimitiveKind::SOLIDS {
            let m = make_primitive(kind, 1.0).unwrap();
            m.validate().unwrap();
            let props = mass_properties(&m, 1.0).unwrap();
            assert!(props.volume > 0.0, "{kind}");
            let c = m.bounds().center();
            assert!(c.norm() < 1e-12, "{kind} not centred: {c}");
        }
    }

    #[test]
    fn torus_resolution() {
        let m = make_primitive(PrimitiveKind::Torus, 2.0).unwrap();
        assert_eq!(m.vertices.len(), 32 * 16);
        let b = m.bounds();
        assert!((b.max.x - 2.5).abs() < 1e-12);
        assert!((b.max.z - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_positive_size_rejected() {
        assert!(make_primitive(PrimitiveKind::Cube, 0.0).is_err());
        assert!(make_primitive(PrimitiveKind::Cube, -1.0).is_err());
    }

    #[test]
    fn kind_names_parse_back() {
        for kind in PrimitiveKind::SOLIDS.into_iter().chain([PrimitiveKind::Plane]) {
            assert_eq!(kind.name().parse::<PrimitiveKind>().unwrap(), kind);
        }
    }
}
