use crate::assets::hull::convex_hull;
use crate::assets::primitives::PrimitiveKind;
use crate::assets::{AssetError, TriangleMesh};
use crate::math::{Aabb, Vec3};

/// Convex polytope with precomputed face planes.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexHull {
    pub vertices: Vec<Vec3>,
    /// Outward unit normal and plane offset, one per hull triangle.
    pub planes: Vec<(Vec3, f64)>,
}

impl ConvexHull {
    pub fn from_mesh(hull: &TriangleMesh) -> ConvexHull {
        let planes = (0..hull.triangles.len())
            .map(|t| {
                let n = hull.face_normal(t);
                (n, n.dot(&hull.vertices[hull.triangles[t][0] as usize]))
            })
            .collect();
        ConvexHull { vertices: hull.vertices.clone(), planes }
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.planes.iter().map(|(n, d)| n.dot(p) - d).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CollisionShape {
    Sphere { radius: f64 },
    Box { half_extents: Vec3 },
    ConvexHull(ConvexHull),
}

impl CollisionShape {
    pub fn validate(&self) -> Result<(), AssetError> {
        match self {
            CollisionShape::Sphere { radius } if !(*radius > 0.0) => {
                Err(AssetError::DegenerateInput(format!("sphere radius {radius}")))
            }
            CollisionShape::Box { half_extents } if !half_extents.iter().all(|&h| h > 0.0) => {
                Err(AssetError::DegenerateInput(format!("box half extents {half_extents:?}")))
            }
            CollisionShape::ConvexHull(h) if h.vertices.len() < 4 => {
                Err(AssetError::DegenerateInput("hull with fewer than 4 vertices".into()))
            }
            _ => Ok(()),
        }
    }

    /// Shape-local bounds.
    pub fn local_bounds(&self) -> Aabb {
        match self {
            CollisionShape::Sphere { radius } => Aabb { min: Vec3::repeat(-radius), max: Vec3::repeat(*radius) },
            CollisionShape::Box { half_extents } => Aabb { min: -half_extents, max: *half_extents },
            CollisionShape::ConvexHull(h) => Aabb::from_points(&h.vertices),
        }
    }

    pub fn scaled(&self, s: f64) -> CollisionShape {
        match self {
            CollisionShape::Sphere { radius } => CollisionShape::Sphere { radius: radius * s },
            CollisionShape::Box { half_extents } => CollisionShape::Box { half_extents: half_extents * s },
            CollisionShape::ConvexHull(h) => CollisionShape::ConvexHull(ConvexHull {
                vertices: h.vertices.iter().map(|v| v * s).collect(),
                planes: h.planes.iter().map(|(n, d)| (*n, d * s)).collect(),
            }),
        }
    }

    /// Moves the shape's origin to `origin` (only meaningful for hulls;
    /// spheres and boxes are already centred on their mass center).
    pub fn recentered(&self, origin: &Vec3) -> CollisionShape {
        match self {
            CollisionShape::ConvexHull(h) => CollisionShape::ConvexHull(ConvexHull {
                vertices: h.vertices.iter().map(|v| v - origin).collect(),
                planes: h.planes.iter().map(|(n, d)| (*n, d - n.dot(origin))).collect(),
            }),
            other => other.clone(),
        }
    }

    /// Polytope vertices, if any.
    pub fn vertices(&self) -> Option<Vec<Vec3>> {
        match self {
            CollisionShape::Sphere { .. } => None,
            CollisionShape::Box { half_extents: h } => Some(
                (0..8)
                    .map(|i| {
                        Vec3::new(
                            if i & 1 == 0 { -h.x } else { h.x },
                            if i & 2 == 0 { -h.y } else { h.y },
                            if i & 4 == 0 { -h.z } else { h.z },
                        )
                    })
                    .collect(),
            ),
            CollisionShape::ConvexHull(h) => Some(h.vertices.clone()),
        }
    }

    /// Signed distance-like containment test in shape-local coordinates;
    /// non-positive means inside. Exact for boxes and spheres; for hulls,
    /// the maximum face-plane distance.
    pub fn local_containment(&self, p: &Vec3) -> f64 {
        match self {
            CollisionShape::Sphere { radius } => p.norm() - radius,
            CollisionShape::Box { half_extents } => (p.abs() - half_extents).max(),
            CollisionShape::ConvexHull(h) => h.signed_distance(p),
        }
    }
}

/// Collision proxy for a render mesh: exact analytic shapes for cube and
/// sphere primitives, otherwise the convex hull of the vertices.
pub fn make_collision_shape(mesh: &TriangleMesh) -> Result<CollisionShape, AssetError> {
    if let Some(p) = mesh.primitive {
        match p.kind {
            PrimitiveKind::Cube => return Ok(CollisionShape::Box { half_extents: Vec3::repeat(p.size / 2.0) }),
            PrimitiveKind::Sphere => return Ok(CollisionShape::Sphere { radius: p.size }),
            PrimitiveKind::Plane => {
                // A thin slab under the quad so that the top face is the plane.
                let h = p.size / 2.0;
                let depth = p.size / 10.0;
                let mut pts = mesh.vertices.clone();
                pts.extend([
                    Vec3::new(-h, -h, -depth),
                    Vec3::new(h, -h, -depth),
                    Vec3::new(h, h, -depth),
                    Vec3::new(-h, h, -depth),
                ]);
                return Ok(CollisionShape::ConvexHull(ConvexHull::from_mesh(&convex_hull(&pts)?)));
            }
            _ => {}
        }
    }
    let hull = convex_hull(&mesh.vertices)?;
    Ok(CollisionShape::ConvexHull(ConvexHull::from_mesh(&hull)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{load_mesh, make_primitive};

    #[test]
    fn primitive_shortcuts() {
        let cube = make_primitive(PrimitiveKind::Cube, 1.0).unwrap();
        assert_eq!(make_collision_shape(&cube).unwrap(), CollisionShape::Box { half_extents: Vec3::repeat(0.5) });
        let sphere = make_primitive(PrimitiveKind::Sphere, 0.75).unwrap();
        assert_eq!(make_collision_shape(&sphere).unwrap(), CollisionShape::Sphere { radius: 0.75 });
    }

    #[test]
    fn concave_l_shape_gets_hull() {
        // L-shaped prism: the re-entrant corner vertices are interior to the hull.
        let text = "\
v 0 0 0\nv 2 0 0\nv 2 1 0\nv 1 1 0\nv 1 2 0\nv 0 2 0
v 0 0 1\nv 2 0 1\nv 2 1 1\nv 1 1 1\nv 1 2 1\nv 0 2 1
f 1 6 5 4 3 2
f 7 8 9 10 11 12
f 1 2 8 7
f 2 3 9 8
f 3 4 10 9
f 4 5 11 10
f 5 6 12 11
f 6 1 7 12
";
        let mesh = load_mesh(text).unwrap();
        let shape = make_collision_shape(&mesh).unwrap();
        let CollisionShape::ConvexHull(h) = shape else { panic!("expected hull") };
        assert!(h.vertices.len() < mesh.vertices.len());
        for v in &mesh.vertices {
            assert!(h.signed_distance(v) <= 1e-9);
        }
    }

    #[test]
    fn plane_slab_top_is_the_plane() {
        let plane = make_primitive(PrimitiveKind::Plane, 4.0).unwrap();
        let shape = make_collision_shape(&plane).unwrap();
        let b = shape.local_bounds();
        assert_eq!(b.max.z, 0.0);
        assert!(b.min.z < 0.0);
    }

    #[test]
    fn recentering_preserves_containment() {
        let cone = make_primitive(PrimitiveKind::Cone, 1.0).unwrap();
        let shape = make_collision_shape(&cone).unwrap();
        let off = Vec3::new(0.0, 0.0, -0.5);
        let moved = shape.recentered(&off);
        let p = Vec3::new(0.1, 0.2, 0.0);
        assert!((shape.local_containment(&p) - moved.local_containment(&(p - off))).abs() < 1e-12);
    }
}
