//! Small geometric vocabulary shared by every subsystem.
//!
//! World frame is right-handed with +Z up. Quaternions are exchanged as
//! `[w, x, y, z]` on every external surface.

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion, Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Linear RGB triple.
pub type Rgb = [f64; 3];

pub fn quat_from_wxyz(q: [f64; 4]) -> Quat {
    Quat::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

pub fn quat_to_wxyz(q: &Quat) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Rotation of `angle` radians about world +Z.
pub fn yaw(angle: f64) -> Quat {
    Quat::from_axis_angle(&Vector3::z_axis(), angle)
}

/// Re-projects a quaternion onto the unit sphere. Keeps the invariant
/// `|q| = 1` tight after many small updates.
pub fn renormalize(q: &Quat) -> Quat {
    Unit::new_normalize(q.into_inner())
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i] <= self.max[i])
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn surface_area(&self) -> f64 {
        let e = self.extent();
        if !self.is_valid() {
            return 0.0;
        }
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    /// Slab test. Returns the parametric entry/exit interval clipped to
    /// `[t_min, t_max]`, or `None` when the ray misses.
    pub fn ray_interval(&self, origin: &Vec3, inv_dir: &Vec3, t_min: f64, t_max: f64) -> Option<(f64, f64)> {
        let mut lo = t_min;
        let mut hi = t_max;
        for i in 0..3 {
            let t0 = (self.min[i] - origin[i]) * inv_dir[i];
            let t1 = (self.max[i] - origin[i]) * inv_dir[i];
            let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            // NaN from 0 * inf means the origin sits on the slab plane; treat as inside.
            if a > lo {
                lo = a;
            }
            if b < hi {
                hi = b;
            }
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }

    /// The eight corners, transformed by `f`, re-boxed.
    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Aabb {
        let mut out = Aabb::empty();
        for i in 0..8 {
            let c = Vec3::new(
                if i & 1 == 0 { self.min.x } else { self.max.x },
                if i & 2 == 0 { self.min.y } else { self.max.y },
                if i & 4 == 0 { self.min.z } else { self.max.z },
            );
            out.grow(&f(&c));
        }
        out
    }
}

/// Rigid pose with uniform scale: `world = position + orientation * (scale * local)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
    pub scale: f64,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat, scale: f64) -> Self {
        Pose { position, orientation, scale }
    }

    pub fn identity() -> Self {
        Pose::new(Vec3::zeros(), Quat::identity(), 1.0)
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.position + self.orientation * (local * self.scale)
    }

    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        self.orientation.inverse() * (world - self.position) / self.scale
    }

    pub fn dir_to_world(&self, local: &Vec3) -> Vec3 {
        self.orientation * local
    }

    pub fn dir_to_local(&self, world: &Vec3) -> Vec3 {
        self.orientation.inverse() * world
    }
}

/// HSV (all in [0,1]) to linear RGB.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as i32 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_storage_order_round_trips() {
        let q = Quat::from_euler_angles(0.1, -0.4, 2.0);
        let back = quat_from_wxyz(quat_to_wxyz(&q));
        assert!((back.into_inner() - q.into_inner()).norm() < 1e-15);
    }

    #[test]
    fn slab_test_hits_and_misses() {
        let b = Aabb { min: Vec3::repeat(-1.0), max: Vec3::repeat(1.0) };
        let o = Vec3::new(0.0, 0.0, 5.0);
        let d = Vec3::new(0.0, 0.0, -1.0);
        let inv = d.map(|c| 1.0 / c);
        let (t0, t1) = b.ray_interval(&o, &inv, 0.0, f64::INFINITY).unwrap();
        assert_eq!((t0, t1), (4.0, 6.0));
        let o2 = Vec3::new(3.0, 0.0, 5.0);
        assert!(b.ray_interval(&o2, &inv, 0.0, f64::INFINITY).is_none());
    }

    #[test]
    fn pose_round_trip() {
        let p = Pose::new(Vec3::new(1.0, 2.0, 3.0), yaw(0.7), 1.5);
        let x = Vec3::new(0.3, -0.2, 0.9);
        assert!((p.to_local(&p.to_world(&x)) - x).norm() < 1e-12);
    }
}
