//! Per-mesh bounding-volume hierarchy with a watertight ray-triangle test.

use crate::assets::TriangleMesh;
use crate::math::{Aabb, Vec3};
use crate::render::RenderError;

const LEAF_SIZE: usize = 4;

/// Nearest triangle hit in mesh-local coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleHit {
    pub triangle: u32,
    pub t: f64,
    /// Weights of the triangle's three corners.
    pub barycentric: [f64; 3],
}

/// Counters for one traversal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub nodes_visited: u64,
    pub triangle_tests: u64,
}

#[derive(Clone, Debug, PartialEq)]
struct Node {
    bounds: Aabb,
    /// Leaves: start of the node's run in `order`. Interior nodes: the
    /// left child, with the right child in `right`.
    first: u32,
    count: u32,
    right: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Watertight ray/triangle intersection. Returns the ray parameter and the
/// corner weights for hits on either face.
pub fn intersect_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<(f64, [f64; 3])> {
    let kz = dir.iamax();
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];
    let pa = a - origin;
    let pb = b - origin;
    let pc = c - origin;
    let ax = pa[kx] - sx * pa[kz];
    let ay = pa[ky] - sy * pa[kz];
    let bx = pb[kx] - sx * pb[kz];
    let by = pb[ky] - sy * pb[kz];
    let cx = pc[kx] - sx * pc[kz];
    let cy = pc[ky] - sy * pc[kz];
    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t = (u * sz * pa[kz] + v * sz * pb[kz] + w * sz * pc[kz]) / det;
    Some((t, [u / det, v / det, w / det]))
}

fn better(t: f64, tri: u32, best: &Option<TriangleHit>) -> bool {
    match best {
        None => true,
        Some(h) => t < h.t || (t == h.t && tri < h.triangle),
    }
}

/// Reference intersector: every triangle, nearest `t` in `[t_min, t_max]`,
/// ties to the lowest triangle index.
pub fn brute_force_intersect(mesh: &TriangleMesh, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<TriangleHit> {
    let mut best = None;
    for i in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.corners(i);
        if let Some((t, bary)) = intersect_triangle(origin, dir, &a, &b, &c) {
            if t >= t_min && t <= t_max && better(t, i as u32, &best) {
                best = Some(TriangleHit { triangle: i as u32, t, barycentric: bary });
            }
        }
    }
    best
}

fn padded(b: Aabb) -> Aabb {
    // Widen slightly so the slab test never rejects a ray the exact
    // triangle test would accept.
    let pad = b.extent().map(|e| e * 1e-9) + Vec3::repeat(1e-12 * (b.max.abs().max() + 1.0));
    Aabb { min: b.min - pad, max: b.max + pad }
}

/// Builds a hierarchy over all triangles of `mesh` (median split along the
/// widest centroid axis).
pub fn build_bvh(mesh: &TriangleMesh) -> Result<Bvh, RenderError> {
    if mesh.triangles.is_empty() {
        return Err(RenderError::EmptyMesh);
    }
    let tri_bounds: Vec<Aabb> = (0..mesh.triangles.len()).map(|i| Aabb::from_points(&mesh.corners(i))).collect();
    let centroids: Vec<Vec3> = tri_bounds.iter().map(Aabb::center).collect();
    let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
    let mut nodes = Vec::new();
    build_node(&mut nodes, &mut order, 0, mesh.triangles.len(), &tri_bounds, &centroids);
    Ok(Bvh { nodes, order })
}

fn build_node(nodes: &mut Vec<Node>, order: &mut [u32], start: usize, end: usize, tb: &[Aabb], cent: &[Vec3]) -> u32 {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        bounds = bounds.union(&tb[i as usize]);
        cbounds.grow(&cent[i as usize]);
    }
    let idx = nodes.len() as u32;
    nodes.push(Node { bounds: padded(bounds), first: start as u32, count: (end - start) as u32, right: 0 });
    let ext = cbounds.extent();
    if end - start <= LEAF_SIZE || ext.max() <= 0.0 {
        return idx;
    }
    let axis = ext.imax();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        cent[a as usize][axis].total_cmp(&cent[b as usize][axis]).then(a.cmp(&b))
    });
    build_node(nodes, order, start, mid, tb, cent);
    let right = build_node(nodes, order, mid, end, tb, cent);
    let node = &mut nodes[idx as usize];
    node.count = 0;
    node.first = idx + 1;
    node.right = right;
    idx
}

impl Bvh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Nearest hit with `t` in `[t_min, t_max]`; identical to
    /// [`brute_force_intersect`].
    pub fn intersect(
        &self,
        mesh: &TriangleMesh,
        origin: &Vec3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
        stats: &mut TraversalStats,
    ) -> Option<TriangleHit> {
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<TriangleHit> = None;
        let mut stack: Vec<u32> = vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            stats.nodes_visited += 1;
            let limit = best.map_or(t_max, |h| h.t);
            if node.bounds.ray_interval(origin, &inv, t_min, limit).is_none() {
                continue;
            }
            if node.is_leaf() {
                for &tri in &self.order[node.first as usize..(node.first + node.count) as usize] {
                    stats.triangle_tests += 1;
                    let [a, b, c] = mesh.corners(tri as usize);
                    if let Some((t, bary)) = intersect_triangle(origin, dir, &a, &b, &c) {
                        if t >= t_min && t <= t_max && better(t, tri, &best) {
                            best = Some(TriangleHit { triangle: tri, t, barycentric: bary });
                        }
                    }
                }
            } else {
                // Visit the nearer child first.
                let (l, r) = (node.first, node.right);
                let tl = self.nodes[l as usize].bounds.ray_interval(origin, &inv, t_min, t_max).map(|x| x.0);
                let tr = self.nodes[r as usize].bounds.ray_interval(origin, &inv, t_min, t_max).map(|x| x.0);
                match (tl, tr) {
                    (Some(a), Some(b)) if a <= b => stack.extend([r, l]),
                    (Some(_), Some(_)) => stack.extend([l, r]),
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Whether anything is hit with `t` in `[t_min, t_max]`.
    pub fn occluded(&self, mesh: &TriangleMesh, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> bool {
        let inv = dir.map(|d| 1.0 / d);
        let mut stack: Vec<u32> = vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_interval(origin, &inv, t_min, t_max).is_none() {
                continue;
            }
            if node.is_leaf() {
                for &tri in &self.order[node.first as usize..(node.first + node.count) as usize] {
                    let [a, b, c] = mesh.corners(tri as usize);
                    if let Some((t, _)) = intersect_triangle(origin, dir, &a, &b, &c) {
                        if t >= t_min && t <= t_max {
                            return true;
                        }
                    }
                }
            } else {
                stack.extend([node.first, node.right]);
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_soup(n: usize, rng: &mut Rng) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for i in 0..n {
            let c = Vec3::new(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
            for _ in 0..3 {
                vertices.push(c + Vec3::new(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)));
            }
            let b = 3 * i as u32;
            triangles.push([b, b + 1, b + 2]);
        }
        TriangleMesh::new(vertices, triangles)
    }

    #[test]
    fn single_triangle_is_one_leaf() {
        let m = TriangleMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]);
        let bvh = build_bvh(&m).unwrap();
        assert_eq!(bvh.node_count(), 1);
        assert_eq!(bvh.leaf_count(), 1);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        assert_eq!(build_bvh(&TriangleMesh::new(vec![], vec![])), Err(RenderError::EmptyMesh));
    }

    #[test]
    fn matches_brute_force_on_random_soup() {
        let mut rng = Rng::new(99);
        let mesh = random_soup(10_000, &mut rng);
        let bvh = build_bvh(&mesh).unwrap();
        let mut hits = 0;
        for _ in 0..1000 {
            let o = Vec3::new(rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0));
            let target = Vec3::new(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
            let d = (target - o).normalize();
            let mut stats = TraversalStats::default();
            let got = bvh.intersect(&mesh, &o, &d, 0.0, f64::INFINITY, &mut stats);
            let want = brute_force_intersect(&mesh, &o, &d, 0.0, f64::INFINITY);
            match (got, want) {
                (Some(g), Some(w)) => {
                    assert_eq!(g.triangle, w.triangle);
                    assert!((g.t - w.t).abs() <= 1e-9);
                    hits += 1;
                }
                (None, None) => {}
                other => panic!("mismatch {other:?}"),
            }
            assert!(stats.triangle_tests < 10_000);
        }
        assert!(hits > 100);
    }

    #[test]
    fn missing_ray_tests_no_triangles() {
        let mut rng = Rng::new(3);
        let mesh = random_soup(500, &mut rng);
        let bvh = build_bvh(&mesh).unwrap();
        let mut stats = TraversalStats::default();
        let hit = bvh.intersect(&mesh, &Vec3::new(100.0, 0.0, 0.0), &Vec3::x(), 0.0, f64::INFINITY, &mut stats);
        assert!(hit.is_none());
        assert_eq!(stats.triangle_tests, 0);
        assert_eq!(stats.nodes_visited, 1);
    }

    #[test]
    fn parallel_ray_misses_triangle() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        assert!(intersect_triangle(&Vec3::new(0.2, 0.2, 1.0), &Vec3::x(), &a, &b, &c).is_none());
        let (t, bary) = intersect_triangle(&Vec3::new(0.25, 0.25, 1.0), &-Vec3::z(), &a, &b, &c).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Back face is reported too.
        assert!(intersect_triangle(&Vec3::new(0.25, 0.25, -1.0), &Vec3::z(), &a, &b, &c).is_some());
    }

    #[test]
    fn shared_edge_is_watertight() {
        // Rays through the diagonal of a split quad hit exactly one of the
        // two triangles or both, never neither.
        let v = [Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::y()];
        let mut rng = Rng::new(4);
        for _ in 0..2000 {
            let s = rng.uniform(0.01, 0.99);
            let o = Vec3::new(s, s, 1.0);
            let d = Vec3::new(rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), -1.0).normalize();
            let h1 = intersect_triangle(&o, &d, &v[0], &v[1], &v[2]);
            let h2 = intersect_triangle(&o, &d, &v[0], &v[2], &v[3]);
            assert!(h1.is_some() || h2.is_some());
        }
    }
}
