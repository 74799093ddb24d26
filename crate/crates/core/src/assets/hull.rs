//! Exact 3D convex hull by incremental quickhull.

use std::collections::HashMap;

use crate::assets::{AssetError, TriangleMesh};
use crate::math::Vec3;

/// Points within this distance of a face plane count as on the face.
pub const HULL_EPSILON: f64 = 1e-9;

struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], v: [usize; 3]) -> Face {
        let [a, b, c] = v.map(|i| points[i]);
        let normal = (b - a).cross(&(c - a)).normalize();
        Face { v, normal, offset: normal.dot(&a), outside: Vec::new(), alive: true }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

fn epsilon_for(points: &[Vec3]) -> f64 {
    let scale = points.iter().fold(1.0f64, |m, p| m.max(p.amax()));
    HULL_EPSILON * scale
}

fn initial_simplex(points: &[Vec3], eps: f64) -> Result<[usize; 4], AssetError> {
    // Extreme points along the axes.
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[lo][axis] {
                lo = i;
            }
            if p[axis] > points[hi][axis] {
                hi = i;
            }
        }
        extremes.push(lo);
        extremes.push(hi);
    }
    let (mut i0, mut i1, mut best) = (0, 0, -1.0);
    for &a in &extremes {
        for &b in &extremes {
            let d = (points[a] - points[b]).norm_squared();
            if d > best {
                (i0, i1, best) = (a, b, d);
            }
        }
    }
    if best.sqrt() <= eps {
        return Err(AssetError::DegenerateInput("all points coincide".into()));
    }
    let axis = (points[i1] - points[i0]).normalize();
    let (mut i2, mut best) = (0, -1.0);
    for (i, p) in points.iter().enumerate() {
        let d = (p - points[i0]).cross(&axis).norm();
        if d > best {
            (i2, best) = (i, d);
        }
    }
    if best <= eps {
        return Err(AssetError::DegenerateInput("points are collinear".into()));
    }
    let n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let (mut i3, mut best) = (0, -1.0);
    for (i, p) in points.iter().enumerate() {
        let d = n.dot(&(p - points[i0])).abs();
        if d > best {
            (i3, best) = (i, d);
        }
    }
    if best <= eps {
        return Err(AssetError::DegenerateInput("points are coplanar".into()));
    }
    Ok([i0, i1, i2, i3])
}

/// Convex hull of `points` as a watertight, outward-wound triangle mesh.
/// Only extreme points become hull vertices; the vertex order follows the
/// input order.
pub fn convex_hull(points: &[Vec3]) -> Result<TriangleMesh, AssetError> {
    let (used, triangles) = convex_hull_indexed(points)?;
    Ok(TriangleMesh::new(used.iter().map(|&i| points[i]).collect(), triangles))
}

/// Hull as (input indices of the hull vertices, triangles over those).
pub fn convex_hull_indexed(points: &[Vec3]) -> Result<(Vec<usize>, Vec<[u32; 3]>), AssetError> {
    if points.len() < 4 {
        return Err(AssetError::DegenerateInput(format!("{} points, need at least 4", points.len())));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(AssetError::DegenerateInput("non-finite coordinate".into()));
    }
    let eps = epsilon_for(points);
    let simplex = initial_simplex(points, eps)?;
    let interior = simplex.iter().map(|&i| points[i]).sum::<Vec3>() / 4.0;

    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();

    let add_face = |faces: &mut Vec<Face>, edges: &mut HashMap<(usize, usize), usize>, v: [usize; 3]| {
        let id = faces.len();
        faces.push(Face::new(points, v));
        for k in 0..3 {
            edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        id
    };

    for skip in 0..4 {
        let mut v: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| simplex[k]).collect();
        let f = Face::new(points, [v[0], v[1], v[2]]);
        if f.distance(&interior) > 0.0 {
            v.swap(1, 2);
        }
        add_face(&mut faces, &mut edges, [v[0], v[1], v[2]]);
    }

    for (i, p) in points.iter().enumerate() {
        if simplex.contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.distance(p) > eps) {
            f.outside.push(i);
        }
    }

    loop {
        let Some(fid) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) else {
            break;
        };
        let eye = *faces[fid]
            .outside
            .iter()
            .max_by(|&&a, &&b| faces[fid].distance(&points[a]).total_cmp(&faces[fid].distance(&points[b])).then(b.cmp(&a)))
            .unwrap();
        let eye_p = points[eye];

        // Faces seen from the eye, grown from the seed face across edges.
        let mut visible = vec![fid];
        let mut seen = vec![false; faces.len()];
        seen[fid] = true;
        let mut k = 0;
        while k < visible.len() {
            let f = &faces[visible[k]];
            for e in 0..3 {
                let (a, b) = (f.v[e], f.v[(e + 1) % 3]);
                if let Some(&nb) = edges.get(&(b, a)) {
                    if !seen[nb] && faces[nb].alive && faces[nb].distance(&eye_p) > eps {
                        seen[nb] = true;
                        visible.push(nb);
                    }
                }
            }
            k += 1;
        }

        let mut horizon = Vec::new();
        for &vf in &visible {
            let v = faces[vf].v;
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                let across = edges.get(&(b, a)).copied();
                if across.map_or(true, |nb| !seen[nb]) {
                    horizon.push((a, b));
                }
            }
        }

        let mut orphans = Vec::new();
        for &vf in &visible {
            let f = &mut faces[vf];
            f.alive = false;
            orphans.append(&mut f.outside);
            let v = f.v;
            for e in 0..3 {
                let key = (v[e], v[(e + 1) % 3]);
                if edges.get(&key) == Some(&vf) {
                    edges.remove(&key);
                }
            }
        }

        let mut new_faces = Vec::with_capacity(horizon.len());
        for (a, b) in horizon {
            new_faces.push(add_face(&mut faces, &mut edges, [a, b, eye]));
        }
        seen.resize(faces.len(), false);
        orphans.sort_unstable();
        for p in orphans {
            if p == eye {
                continue;
            }
            if let Some(&nf) = new_faces.iter().find(|&&nf| faces[nf].distance(&points[p]) > eps) {
                faces[nf].outside.push(p);
            }
        }
    }

    let alive: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    let mut used: Vec<usize> = alive.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, u32> = used.iter().enumerate().map(|(k, &i)| (i, k as u32)).collect();
    let triangles = alive.iter().map(|f| f.v.map(|i| remap[&i])).collect();
    Ok((used, triangles))
}

/// Largest signed distance from `p` to any face plane of a convex mesh;
/// non-positive means inside or on the hull.
pub fn hull_signed_distance(hull: &TriangleMesh, p: &Vec3) -> f64 {
    (0..hull.triangles.len())
        .map(|t| {
            let n = hull.face_normal(t);
            n.dot(&(p - hull.vertices[hull.triangles[t][0] as usize]))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::mass_properties;
    use crate::rng::Rng;

    fn cube_corners() -> Vec<Vec3> {
        (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -1.0 } else { 1.0 },
                    if i & 2 == 0 { -1.0 } else { 1.0 },
                    if i & 4 == 0 { -1.0 } else { 1.0 },
                )
            })
            .collect()
    }

    fn is_closed(m: &TriangleMesh) -> bool {
        let mut count: HashMap<(u32, u32), i32> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                *count.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        count.iter().all(|(&(a, b), &c)| c == 1 && count.get(&(b, a)) == Some(&1))
    }

    #[test]
    fn cube_with_centroid() {
        let mut pts = cube_corners();
        pts.push(Vec3::zeros());
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices.len(), 8);
        assert_eq!(h.triangles.len(), 12);
        assert!(is_closed(&h));
        assert!((mass_properties(&h, 1.0).unwrap().volume - 8.0).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_is_its_own_hull() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices, pts);
        assert_eq!(h.triangles.len(), 4);
        assert!((mass_properties(&h, 1.0).unwrap().volume - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        let flat: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(matches!(convex_hull(&flat), Err(AssetError::DegenerateInput(_))));
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::repeat(i as f64)).collect();
        assert!(matches!(convex_hull(&line), Err(AssetError::DegenerateInput(_))));
        assert!(convex_hull(&cube_corners()[..3]).is_err());
    }

    fn random_ball(rng: &mut Rng, n: usize) -> Vec<Vec3> {
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let p = Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            if p.norm() <= 1.0 {
                pts.push(p);
            }
        }
        pts
    }

    #[test]
    fn random_ball_contained_brute_force() {
        let mut rng = Rng::new(17);
        let pts = random_ball(&mut rng, 1000);
        let h = convex_hull(&pts).unwrap();
        assert!(is_closed(&h));
        // Oracle: every point against every face plane.
        for p in &pts {
            for t in 0..h.triangles.len() {
                let n = h.face_normal(t);
                let d = n.dot(&(p - h.vertices[h.triangles[t][0] as usize]));
                assert!(d <= 1e-9, "point outside face {t} by {d}");
            }
        }
    }

    #[test]
    fn midpoints_of_hull_vertices_are_inside() {
        let mut rng = Rng::new(3);
        let pts = random_ball(&mut rng, 400);
        let h = convex_hull(&pts).unwrap();
        let n = h.vertices.len();
        for _ in 0..200 {
            let a = h.vertices[rng.below(n)];
            let b = h.vertices[rng.below(n)];
            assert!(hull_signed_distance(&h, &((a + b) * 0.5)) <= 1e-9);
        }
    }
}
