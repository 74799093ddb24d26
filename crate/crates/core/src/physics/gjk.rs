//! Support mapping, GJK distance and EPA penetration.
//!
//! Every shape is treated as a convex core plus a spherical margin. A sphere
//! is a point core with margin equal to its radius; polytopes have no margin.
//! GJK and EPA run on the cores, and the margins are added afterwards.

use std::collections::{HashMap, VecDeque};

use crate::assets::{convex_hull_indexed, CollisionShape};
use crate::math::{Pose, Vec3};
use crate::physics::PhysicsError;

const MAX_GJK_ITERATIONS: usize = 64;
const MAX_EPA_ITERATIONS: usize = 128;
/// Squared core distance below which the cores are considered touching.
const TOUCH_EPS_SQ: f64 = 1e-20;

/// Outcome of a distance query between two shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GjkResult {
    /// Closest points on shape A and shape B, `distance` apart.
    Separated { distance: f64, point_a: Vec3, point_b: Vec3 },
    Intersecting,
}

/// Minimum translation separating two overlapping shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penetration {
    pub depth: f64,
    /// Unit normal pointing from A to B.
    pub normal: Vec3,
    pub point_a: Vec3,
    pub point_b: Vec3,
}

fn margin(shape: &CollisionShape) -> f64 {
    match shape {
        CollisionShape::Sphere { radius } => *radius,
        _ => 0.0,
    }
}

fn core_support_local(shape: &CollisionShape, d: &Vec3) -> Vec3 {
    match shape {
        CollisionShape::Sphere { .. } => Vec3::zeros(),
        CollisionShape::Box { half_extents: h } => Vec3::new(
            if d.x >= 0.0 { h.x } else { -h.x },
            if d.y >= 0.0 { h.y } else { -h.y },
            if d.z >= 0.0 { h.z } else { -h.z },
        ),
        CollisionShape::ConvexHull(hull) => {
            let mut best = hull.vertices[0];
            let mut best_dot = best.dot(d);
            for v in &hull.vertices[1..] {
                let dot = v.dot(d);
                if dot > best_dot {
                    best = *v;
                    best_dot = dot;
                }
            }
            best
        }
    }
}

fn core_support(shape: &CollisionShape, pose: &Pose, d: &Vec3) -> Vec3 {
    pose.to_world(&core_support_local(shape, &pose.dir_to_local(d)))
}

/// World-frame point of `shape` (placed at `pose`) furthest along `direction`.
pub fn support(shape: &CollisionShape, pose: &Pose, direction: &Vec3) -> Result<Vec3, PhysicsError> {
    let n = direction.norm();
    if !(n > 1e-12) || !n.is_finite() {
        return Err(PhysicsError::InvalidDirection);
    }
    let d = direction / n;
    Ok(core_support(shape, pose, &d) + d * margin(shape) * pose.scale)
}

#[derive(Clone, Copy, Debug)]
struct SupportPoint {
    w: Vec3,
    a: Vec3,
    b: Vec3,
}

struct Pair<'a> {
    a: &'a CollisionShape,
    pa: &'a Pose,
    b: &'a CollisionShape,
    pb: &'a Pose,
}

impl Pair<'_> {
    fn support(&self, d: &Vec3) -> SupportPoint {
        let a = core_support(self.a, self.pa, d);
        let b = core_support(self.b, self.pb, &-d);
        SupportPoint { w: a - b, a, b }
    }
}

/// Closest point to the origin on the simplex; shrinks the simplex to the
/// supporting feature and returns the barycentric weights over what is left.
/// `None` means the origin is inside a full tetrahedron.
fn closest_on_simplex(s: &mut Vec<SupportPoint>) -> Option<(Vec3, Vec<f64>)> {
    match s.len() {
        1 => Some((s[0].w, vec![1.0])),
        2 => Some(closest_segment(s)),
        3 => Some(closest_triangle(s)),
        _ => closest_tetrahedron(s),
    }
}

fn closest_segment(s: &mut Vec<SupportPoint>) -> (Vec3, Vec<f64>) {
    let (a, b) = (s[0].w, s[1].w);
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { -a.dot(&ab) / len2 } else { 0.0 };
    if t <= 0.0 {
        s.truncate(1);
        (a, vec![1.0])
    } else if t >= 1.0 {
        s.remove(0);
        (b, vec![1.0])
    } else {
        (a + ab * t, vec![1.0 - t, t])
    }
}

fn keep(s: &mut Vec<SupportPoint>, idx: &[usize]) {
    *s = idx.iter().map(|&i| s[i]).collect();
}

fn closest_triangle(s: &mut Vec<SupportPoint>) -> (Vec3, Vec<f64>) {
    let (a, b, c) = (s[0].w, s[1].w, s[2].w);
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        keep(s, &[0]);
        return (a, vec![1.0]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        keep(s, &[1]);
        return (b, vec![1.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        keep(s, &[0, 1]);
        return (a + ab * v, vec![1.0 - v, v]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        keep(s, &[2]);
        return (c, vec![1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        keep(s, &[0, 2]);
        return (a + ac * w, vec![1.0 - w, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        keep(s, &[1, 2]);
        return (b + (c - b) * w, vec![1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, vec![1.0 - v - w, v, w])
}

fn closest_tetrahedron(s: &mut Vec<SupportPoint>) -> Option<(Vec3, Vec<f64>)> {
    const FACES: [([usize; 3], usize); 4] = [([0, 1, 2], 3), ([0, 2, 3], 1), ([0, 3, 1], 2), ([1, 3, 2], 0)];
    let mut best: Option<(f64, Vec<SupportPoint>, Vec3, Vec<f64>)> = None;
    for (face, opp) in FACES {
        let (a, b, c) = (s[face[0]].w, s[face[1]].w, s[face[2]].w);
        let n = (b - a).cross(&(c - a));
        let side_origin = n.dot(&-a);
        let side_opp = n.dot(&(s[opp].w - a));
        let degenerate = side_opp.abs() <= 1e-14 * n.norm().max(1e-300);
        if !(degenerate || side_origin * side_opp < 0.0) {
            continue;
        }
        let mut sub: Vec<SupportPoint> = face.iter().map(|&i| s[i]).collect();
        let (p, bary) = closest_triangle(&mut sub);
        let d2 = p.norm_squared();
        if best.as_ref().is_none_or(|(bd, ..)| d2 < *bd) {
            best = Some((d2, sub, p, bary));
        }
    }
    let (_, sub, p, bary) = best?;
    *s = sub;
    Some((p, bary))
}

fn witnesses(s: &[SupportPoint], bary: &[f64]) -> (Vec3, Vec3) {
    let mut a = Vec3::zeros();
    let mut b = Vec3::zeros();
    for (p, l) in s.iter().zip(bary) {
        a += p.a * *l;
        b += p.b * *l;
    }
    (a, b)
}

enum CoreResult {
    Separated { distance: f64, point_a: Vec3, point_b: Vec3 },
    Intersecting(Vec<SupportPoint>),
}

fn gjk_cores(pair: &Pair) -> CoreResult {
    let mut dir = pair.pb.position - pair.pa.position;
    if dir.norm_squared() < 1e-24 {
        dir = Vec3::x();
    }
    let first = pair.support(&-dir);
    let mut simplex = vec![first];
    let mut v = first.w;
    let mut bary = vec![1.0];
    for _ in 0..MAX_GJK_ITERATIONS {
        let vv = v.norm_squared();
        if vv <= TOUCH_EPS_SQ {
            return CoreResult::Intersecting(simplex);
        }
        let w = pair.support(&-v);
        // No support point gets closer than the current estimate: converged.
        if vv - v.dot(&w.w) <= 1e-12 * vv || simplex.iter().any(|p| (p.w - w.w).norm_squared() <= 1e-24) {
            break;
        }
        simplex.push(w);
        match closest_on_simplex(&mut simplex) {
            None => return CoreResult::Intersecting(simplex),
            Some((nv, nb)) => {
                if nv.norm_squared() >= vv {
                    // Numerical stall; keep the previous estimate.
                    break;
                }
                v = nv;
                bary = nb;
            }
        }
    }
    if v.norm_squared() <= TOUCH_EPS_SQ {
        return CoreResult::Intersecting(simplex);
    }
    // `simplex` and `bary` may disagree after a stall; recompute the weights.
    if simplex.len() != bary.len() {
        let (nv, nb) = closest_on_simplex(&mut simplex).unwrap_or((v, vec![1.0; 1]));
        v = nv;
        bary = nb;
        if simplex.len() != bary.len() {
            simplex.truncate(1);
            bary = vec![1.0];
            v = simplex[0].w;
        }
    }
    let (point_a, point_b) = witnesses(&simplex, &bary);
    CoreResult::Separated { distance: v.norm(), point_a, point_b }
}

/// Distance between two shapes, or `Intersecting` when they overlap or touch.
pub fn gjk_distance(a: &CollisionShape, pa: &Pose, b: &CollisionShape, pb: &Pose) -> GjkResult {
    let pair = Pair { a, pa, b, pb };
    let (ma, mb) = (margin(a) * pa.scale, margin(b) * pb.scale);
    match gjk_cores(&pair) {
        CoreResult::Separated { distance, point_a, point_b } if distance > ma + mb + 1e-12 => {
            let n = (point_b - point_a) / distance;
            GjkResult::Separated {
                distance: distance - ma - mb,
                point_a: point_a + n * ma,
                point_b: point_b - n * mb,
            }
        }
        _ => GjkResult::Intersecting,
    }
}

#[derive(Clone, Copy, Debug)]
struct EpaFace {
    v: [usize; 3],
    normal: Vec3,
    dist: f64,
    alive: bool,
}

fn epa_face(verts: &[SupportPoint], v: [usize; 3]) -> Option<EpaFace> {
    let (a, b, c) = (verts[v[0]].w, verts[v[1]].w, verts[v[2]].w);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if !(len > 1e-300) {
        return None;
    }
    let normal = n / len;
    Some(EpaFace { v, normal, dist: normal.dot(&a), alive: true })
}

/// Penetration of the cores, starting from a GJK simplex that encloses (or
/// touches) the origin. `None` if the Minkowski difference is degenerate.
fn epa_cores(pair: &Pair, simplex: &[SupportPoint]) -> Option<Penetration> {
    let mut verts: Vec<SupportPoint> = simplex.to_vec();
    const DIRS: [[f64; 3]; 14] = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, -1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, 1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [-1.0, -1.0, -1.0],
    ];
    for d in DIRS {
        verts.push(pair.support(&Vec3::from(d)));
    }
    let points: Vec<Vec3> = verts.iter().map(|p| p.w).collect();
    let (used, tris) = convex_hull_indexed(&points).ok()?;
    let mut faces: Vec<EpaFace> = Vec::new();
    for t in tris {
        faces.push(epa_face(&verts, t.map(|i| used[i as usize]))?);
    }
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edges.insert((f.v[k], f.v[(k + 1) % 3]), fi);
        }
    }

    let mut best = 0;
    for _ in 0..MAX_EPA_ITERATIONS {
        best = (0..faces.len())
            .filter(|&i| faces[i].alive)
            .min_by(|&i, &j| faces[i].dist.total_cmp(&faces[j].dist).then(i.cmp(&j)))?;
        let f = faces[best];
        let w = pair.support(&f.normal);
        let gap = w.w.dot(&f.normal) - f.dist;
        if gap <= 1e-10 * f.dist.abs().max(1.0) {
            break;
        }
        if verts.iter().any(|p| (p.w - w.w).norm_squared() <= 1e-24) {
            break;
        }
        let wi = verts.len();
        verts.push(w);

        // Flood-fill the faces that see the new point, starting from `best`.
        let mut visible = vec![false; faces.len()];
        let mut queue = VecDeque::from([best]);
        visible[best] = true;
        while let Some(fi) = queue.pop_front() {
            let fv = faces[fi].v;
            for k in 0..3 {
                let (u, v) = (fv[k], fv[(k + 1) % 3]);
                if let Some(&g) = edges.get(&(v, u)) {
                    if !visible[g] && faces[g].alive {
                        let gf = &faces[g];
                        if gf.normal.dot(&(w.w - verts[gf.v[0]].w)) > 1e-12 {
                            visible[g] = true;
                            queue.push_back(g);
                        }
                    }
                }
            }
        }
        let mut horizon = Vec::new();
        for fi in 0..faces.len() {
            if !visible[fi] {
                continue;
            }
            let fv = faces[fi].v;
            for k in 0..3 {
                let (u, v) = (fv[k], fv[(k + 1) % 3]);
                match edges.get(&(v, u)) {
                    Some(&g) if visible[g] => {}
                    _ => horizon.push((u, v)),
                }
            }
        }
        for fi in 0..faces.len() {
            if visible[fi] {
                faces[fi].alive = false;
                let fv = faces[fi].v;
                for k in 0..3 {
                    edges.remove(&(fv[k], fv[(k + 1) % 3]));
                }
            }
        }
        let mut degenerate = false;
        for (u, v) in horizon {
            match epa_face(&verts, [u, v, wi]) {
                Some(nf) => {
                    let idx = faces.len();
                    for k in 0..3 {
                        edges.insert((nf.v[k], nf.v[(k + 1) % 3]), idx);
                    }
                    faces.push(nf);
                }
                None => degenerate = true,
            }
        }
        if degenerate {
            break;
        }
    }

    let f = faces.iter().enumerate().filter(|(_, f)| f.alive).min_by(|(i, a), (j, b)| {
        a.dist.total_cmp(&b.dist).then(i.cmp(j))
    });
    let f = match f {
        Some((_, f)) => *f,
        None => faces[best],
    };
    let p = f.normal * f.dist;
    let (a, b, c) = (verts[f.v[0]], verts[f.v[1]], verts[f.v[2]]);
    let bary = barycentric(&p, &a.w, &b.w, &c.w);
    let point_a = a.a * bary[0] + b.a * bary[1] + c.a * bary[2];
    let point_b = a.b * bary[0] + b.b * bary[1] + c.b * bary[2];
    Some(Penetration { depth: f.dist.max(0.0), normal: f.normal, point_a, point_b })
}

fn barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() < 1e-300 {
        return [1.0, 0.0, 0.0];
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}

/// Penetration depth and direction of two overlapping shapes; `None` when
/// they are separated.
pub fn penetration(a: &CollisionShape, pa: &Pose, b: &CollisionShape, pb: &Pose) -> Option<Penetration> {
    let pair = Pair { a, pa, b, pb };
    let (ma, mb) = (margin(a) * pa.scale, margin(b) * pb.scale);
    match gjk_cores(&pair) {
        CoreResult::Separated { distance, point_a, point_b } => {
            if distance > ma + mb {
                return None;
            }
            let normal = (point_b - point_a) / distance;
            Some(Penetration {
                depth: ma + mb - distance,
                normal,
                point_a: point_a + normal * ma,
                point_b: point_b - normal * mb,
            })
        }
        CoreResult::Intersecting(simplex) => {
            let core = epa_cores(&pair, &simplex).unwrap_or(Penetration {
                // Coincident point cores: any direction separates.
                depth: 0.0,
                normal: Vec3::z(),
                point_a: pa.position,
                point_b: pb.position,
            });
            Some(Penetration {
                depth: core.depth + ma + mb,
                normal: core.normal,
                point_a: core.point_a + core.normal * ma,
                point_b: core.point_b - core.normal * mb,
            })
        }
    }
}

/// A contact location with its penetration depth (negative when the
/// surfaces are slightly apart).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactPoint {
    pub position: Vec3,
    pub depth: f64,
}

/// Contact points sharing one normal (from A to B).
#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    pub normal: Vec3,
    pub points: Vec<ContactPoint>,
}

/// Lateral tolerance when testing whether a vertex lies over the other
/// shape, and the largest separation for which a vertex still counts.
const FEATURE_TOLERANCE: f64 = 1e-3;
const MAX_MANIFOLD_POINTS: usize = 4;

/// Contact manifold between two shapes, or `None` if they do not touch.
/// The deepest point comes from GJK/EPA; between polytopes it is augmented
/// with the vertices of each shape lying inside the other.
pub fn collide(a: &CollisionShape, pa: &Pose, b: &CollisionShape, pb: &Pose) -> Option<Manifold> {
    let pen = penetration(a, pa, b, pb)?;
    let n = pen.normal;
    let mut points = vec![ContactPoint { position: (pen.point_a + pen.point_b) * 0.5, depth: pen.depth }];
    if let (Some(va), Some(vb)) = (a.vertices(), b.vertices()) {
        // Surface planes of each shape facing the other.
        let plane_b = core_support(b, pb, &-n).dot(&n);
        let plane_a = core_support(a, pa, &n).dot(&n);
        for v in &va {
            let w = pa.to_world(v);
            let depth = w.dot(&n) - plane_b;
            if depth >= -FEATURE_TOLERANCE && b.local_containment(&pb.to_local(&(w - n * depth))) <= FEATURE_TOLERANCE
            {
                points.push(ContactPoint { position: w - n * (depth * 0.5), depth });
            }
        }
        for v in &vb {
            let w = pb.to_world(v);
            let depth = plane_a - w.dot(&n);
            if depth >= -FEATURE_TOLERANCE && a.local_containment(&pa.to_local(&(w + n * depth))) <= FEATURE_TOLERANCE
            {
                points.push(ContactPoint { position: w + n * (depth * 0.5), depth });
            }
        }
    }
    Some(Manifold { normal: n, points: reduce_manifold(points) })
}

/// Deduplicates and keeps at most four points: the deepest, the one
/// furthest from it, the one spanning the largest triangle with both, and
/// the one furthest from the three chosen.
fn reduce_manifold(mut pts: Vec<ContactPoint>) -> Vec<ContactPoint> {
    let mut unique: Vec<ContactPoint> = Vec::new();
    for p in pts.drain(..) {
        if !unique.iter().any(|q| (q.position - p.position).norm_squared() < 1e-12) {
            unique.push(p);
        }
    }
    if unique.len() <= MAX_MANIFOLD_POINTS {
        return unique;
    }
    let argmax = |f: &dyn Fn(&ContactPoint) -> f64, taken: &[usize]| -> usize {
        let mut best = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for (i, p) in unique.iter().enumerate() {
            if taken.contains(&i) {
                continue;
            }
            let val = f(p);
            if val > best_val {
                best = i;
                best_val = val;
            }
        }
        best
    };
    let i0 = argmax(&|p| p.depth, &[]);
    let p0 = unique[i0].position;
    let i1 = argmax(&|p| (p.position - p0).norm_squared(), &[i0]);
    let p1 = unique[i1].position;
    let i2 = argmax(&|p| (p1 - p0).cross(&(p.position - p0)).norm_squared(), &[i0, i1]);
    let p2 = unique[i2].position;
    let i3 = argmax(
        &|p| {
            [p0, p1, p2].iter().map(|q| (p.position - q).norm_squared()).fold(f64::INFINITY, f64::min)
        },
        &[i0, i1, i2],
    );
    [i0, i1, i2, i3].iter().map(|&i| unique[i]).collect()
}
