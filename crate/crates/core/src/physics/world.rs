use std::cell::Cell;

use crate::assets::{AssetLibrary, CollisionShape};
use crate::math::{renormalize, Aabb, Mat3, Pose, Quat, Vec3};
use crate::physics::gjk::{collide, gjk_distance, GjkResult};
use crate::physics::PhysicsError;
use crate::scene::RigidObject;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    pub baumgarte: f64,
    pub slop: f64,
    /// Approach speeds below this do not bounce.
    pub restitution_threshold: f64,
    pub event_impulse_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 10,
            baumgarte: 0.2,
            slop: 1e-3,
            restitution_threshold: 0.5,
            event_impulse_threshold: 1e-6,
        }
    }
}

/// Position, orientation and velocities of a body's reference frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyState {
    pub position: Vec3,
    pub orientation: Quat,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
}

/// A rigid body simulated about its center of mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Body {
    pub uid: String,
    /// Collision shape with its origin at the center of mass.
    pub shape: CollisionShape,
    /// Center of mass in the object frame (already scaled).
    pub com_local: Vec3,
    /// World position of the center of mass.
    pub position: Vec3,
    pub orientation: Quat,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    /// Inertia about the center of mass, body frame.
    pub inertia: Mat3,
    pub friction: f64,
    pub restitution: f64,
    pub is_static: bool,
}

impl Body {
    /// Body for a shape already centred on its center of mass.
    pub fn new(uid: impl Into<String>, shape: CollisionShape, mass: f64, inertia: Mat3) -> Body {
        Body {
            uid: uid.into(),
            shape,
            com_local: Vec3::zeros(),
            position: Vec3::zeros(),
            orientation: Quat::identity(),
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            mass,
            inertia,
            friction: crate::assets::DEFAULT_FRICTION,
            restitution: crate::assets::DEFAULT_RESTITUTION,
            is_static: false,
        }
    }

    pub fn sphere(uid: impl Into<String>, radius: f64, mass: f64) -> Body {
        let i = 0.4 * mass * radius * radius;
        Body::new(uid, CollisionShape::Sphere { radius }, mass, Mat3::identity() * i)
    }

    pub fn cuboid(uid: impl Into<String>, half_extents: Vec3, mass: f64) -> Body {
        let s = half_extents * 2.0;
        let k = mass / 12.0;
        let inertia = Mat3::from_diagonal(&Vec3::new(
            k * (s.y * s.y + s.z * s.z),
            k * (s.x * s.x + s.z * s.z),
            k * (s.x * s.x + s.y * s.y),
        ));
        Body::new(uid, CollisionShape::Box { half_extents }, mass, inertia)
    }

    pub fn into_static(mut self) -> Body {
        self.is_static = true;
        self
    }

    pub fn at(mut self, position: Vec3) -> Body {
        self.set_object_pose(position, self.orientation);
        self
    }

    /// Body for a scene object, using its asset's geometry scaled by the
    /// object's scale.
    pub fn from_object(obj: &RigidObject, library: &AssetLibrary) -> Result<Body, PhysicsError> {
        let geom = library.get(&obj.asset_ref).ok_or_else(|| PhysicsError::UnknownAsset(obj.asset_ref.clone()))?;
        let shape = geom.collision.scaled(obj.scale);
        let (com, inertia) = match geom.scaled_mass_properties(obj.scale, obj.mass) {
            Some(p) => (p.center_of_mass, p.inertia_tensor),
            None if obj.is_static => (Vec3::zeros(), Mat3::identity()),
            None => return Err(PhysicsError::MissingMassProperties(obj.uid.clone())),
        };
        if !obj.is_static && !(obj.mass > 0.0) {
            return Err(PhysicsError::InvalidBody(format!("{}: mass must be positive", obj.uid)));
        }
        let shape = match shape {
            CollisionShape::ConvexHull(_) => shape.recentered(&com),
            other => other,
        };
        let com = match shape {
            CollisionShape::ConvexHull(_) => com,
            _ => Vec3::zeros(),
        };
        let mut body = Body::new(obj.uid.clone(), shape, obj.mass, inertia);
        body.com_local = com;
        body.friction = obj.friction;
        body.restitution = obj.restitution;
        body.is_static = obj.is_static;
        body.set_object_pose(obj.position, obj.orientation);
        body.velocity = obj.velocity;
        body.angular_velocity = obj.angular_velocity;
        Ok(body)
    }

    /// Places the body so that its object frame sits at `position`.
    pub fn set_object_pose(&mut self, position: Vec3, orientation: Quat) {
        self.orientation = orientation;
        self.position = position + orientation * self.com_local;
    }

    pub fn object_position(&self) -> Vec3 {
        self.position - self.orientation * self.com_local
    }

    /// State of the object frame (velocity is that of the center of mass).
    pub fn state(&self) -> BodyState {
        BodyState {
            position: self.object_position(),
            orientation: self.orientation,
            linear_velocity: self.velocity,
            angular_velocity: self.angular_velocity,
        }
    }

    /// Pose of the center-of-mass frame.
    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.orientation, 1.0)
    }

    pub fn inv_mass(&self) -> f64 {
        if self.is_static {
            0.0
        } else {
            1.0 / self.mass
        }
    }

    pub fn inv_inertia_world(&self) -> Mat3 {
        if self.is_static {
            return Mat3::zeros();
        }
        let r = self.orientation.to_rotation_matrix().into_inner();
        let inv = self.inertia.try_inverse().unwrap_or_else(Mat3::zeros);
        r * inv * r.transpose()
    }

    pub fn aabb(&self) -> Aabb {
        let pose = self.pose();
        self.shape.local_bounds().transformed(|p| pose.to_world(p))
    }

    pub fn kinetic_energy(&self) -> f64 {
        if self.is_static {
            return 0.0;
        }
        let r = self.orientation.to_rotation_matrix().into_inner();
        let w_body = r.transpose() * self.angular_velocity;
        0.5 * self.mass * self.velocity.norm_squared() + 0.5 * w_body.dot(&(self.inertia * w_body))
    }
}

/// A contact reported by [`World::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct ContactEvent {
    pub body_a: String,
    pub body_b: String,
    pub contact_position: Vec3,
    /// Unit normal from `body_a` to `body_b`.
    pub contact_normal: Vec3,
    pub impulse: f64,
    pub simulation_time: f64,
    pub frame: f64,
}

#[derive(Clone, Debug)]
struct PointConstraint {
    ra: Vec3,
    rb: Vec3,
    tangents: [Vec3; 2],
    normal_mass: f64,
    tangent_mass: [f64; 2],
    target: f64,
    position_bias: f64,
    normal_impulse: f64,
    tangent_impulse: [f64; 2],
    pseudo_impulse: f64,
}

#[derive(Clone, Debug)]
struct PairConstraint {
    a: usize,
    b: usize,
    normal: Vec3,
    friction: f64,
    points: Vec<PointConstraint>,
    deepest: Vec3,
}

/// Rigid bodies stepped together.
#[derive(Debug, Default)]
pub struct World {
    pub bodies: Vec<Body>,
    pub gravity: Vec3,
    pub config: SolverConfig,
    /// Simulated time in seconds.
    pub time: f64,
    narrowphase_tests: Cell<u64>,
}

impl World {
    pub fn new(gravity: Vec3) -> World {
        World { gravity, ..World::default() }
    }

    pub fn add_body(&mut self, body: Body) -> Result<usize, PhysicsError> {
        if self.bodies.iter().any(|b| b.uid == body.uid) {
            return Err(PhysicsError::InvalidBody(format!("duplicate body uid {}", body.uid)));
        }
        body.shape.validate().map_err(|e| PhysicsError::InvalidBody(e.to_string()))?;
        self.bodies.push(body);
        Ok(self.bodies.len() - 1)
    }

    pub fn body(&self, uid: &str) -> Option<&Body> {
        self.bodies.iter().find(|b| b.uid == uid)
    }

    /// Number of narrowphase tests run so far by [`World::check_overlap`].
    pub fn narrowphase_tests(&self) -> u64 {
        self.narrowphase_tests.get()
    }

    /// Whether `candidate` intersects any body in the world.
    pub fn check_overlap(&self, candidate: &Body) -> bool {
        let bounds = candidate.aabb();
        let pose = candidate.pose();
        self.bodies.iter().any(|b| {
            if !bounds.overlaps(&b.aabb()) {
                return false;
            }
            self.narrowphase_tests.set(self.narrowphase_tests.get() + 1);
            gjk_distance(&candidate.shape, &pose, &b.shape, &b.pose()) == GjkResult::Intersecting
        })
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies.iter().map(Body::kinetic_energy).sum()
    }

    pub fn potential_energy(&self) -> f64 {
        self.bodies.iter().filter(|b| !b.is_static).map(|b| -b.mass * self.gravity.dot(&b.position)).sum()
    }

    pub fn momentum(&self) -> Vec3 {
        self.bodies.iter().filter(|b| !b.is_static).map(|b| b.velocity * b.mass).sum()
    }

    /// Advances by `dt` seconds; returns the contacts whose total normal
    /// impulse exceeded the event threshold (frame stamps left at zero).
    pub fn step(&mut self, dt: f64) -> Vec<ContactEvent> {
        assert!(dt > 0.0, "dt must be positive");
        let cfg = self.config;
        for b in self.bodies.iter_mut().filter(|b| !b.is_static) {
            b.velocity += self.gravity * dt;
        }

        let inv_mass: Vec<f64> = self.bodies.iter().map(Body::inv_mass).collect();
        let inv_inertia: Vec<Mat3> = self.bodies.iter().map(Body::inv_inertia_world).collect();
        let mut pairs = self.find_contacts(dt, &inv_mass, &inv_inertia);

        for _ in 0..cfg.iterations {
            for pair in pairs.iter_mut() {
                self.solve_velocity(pair, &inv_mass, &inv_inertia);
            }
        }

        // Split-impulse position correction: pseudo velocities move the
        // bodies apart without adding kinetic energy.
        let n = self.bodies.len();
        let mut pv = vec![Vec3::zeros(); n];
        let mut pw = vec![Vec3::zeros(); n];
        if pairs.iter().any(|p| p.points.iter().any(|c| c.position_bias > 0.0)) {
            for _ in 0..cfg.iterations {
                for pair in pairs.iter_mut() {
                    let (a, b) = (pair.a, pair.b);
                    for c in pair.points.iter_mut() {
                        if c.position_bias <= 0.0 {
                            continue;
                        }
                        let dv = pv[b] + pw[b].cross(&c.rb) - pv[a] - pw[a].cross(&c.ra);
                        let lambda = -c.normal_mass * (dv.dot(&pair.normal) - c.position_bias);
                        let new = (c.pseudo_impulse + lambda).max(0.0);
                        let lambda = new - c.pseudo_impulse;
                        c.pseudo_impulse = new;
                        let p = pair.normal * lambda;
                        pv[a] -= p * inv_mass[a];
                        pw[a] -= inv_inertia[a] * c.ra.cross(&p);
                        pv[b] += p * inv_mass[b];
                        pw[b] += inv_inertia[b] * c.rb.cross(&p);
                    }
                }
            }
        }

        for (i, b) in self.bodies.iter_mut().enumerate() {
            if b.is_static {
                continue;
            }
            b.position += (b.velocity + pv[i]) * dt;
            let w = b.angular_velocity + pw[i];
            b.orientation = renormalize(&(Quat::from_scaled_axis(w * dt) * b.orientation));
        }

        let time = self.time;
        self.time += dt;
        pairs
            .iter()
            .filter_map(|p| {
                let impulse: f64 = p.points.iter().map(|c| c.normal_impulse).sum();
                (impulse > cfg.event_impulse_threshold).then(|| ContactEvent {
                    body_a: self.bodies[p.a].uid.clone(),
                    body_b: self.bodies[p.b].uid.clone(),
                    contact_position: p.deepest,
                    contact_normal: p.normal,
                    impulse,
                    simulation_time: time,
                    frame: 0.0,
                })
            })
            .collect()
    }

    fn find_contacts(&self, dt: f64, inv_mass: &[f64], inv_inertia: &[Mat3]) -> Vec<PairConstraint> {
        let cfg = self.config;
        let bounds: Vec<Aabb> = self.bodies.iter().map(Body::aabb).collect();
        let mut pairs = Vec::new();
        for i in 0..self.bodies.len() {
            for j in i + 1..self.bodies.len() {
                let (a, b) = (&self.bodies[i], &self.bodies[j]);
                if a.is_static && b.is_static {
                    continue;
                }
                let grown = Aabb { min: bounds[i].min.add_scalar(-cfg.slop), max: bounds[i].max.add_scalar(cfg.slop) };
                if !grown.overlaps(&bounds[j]) {
                    continue;
                }
                let Some(m) = collide(&a.shape, &a.pose(), &b.shape, &b.pose()) else { continue };
                let n = m.normal;
                let tangents = tangent_basis(&n);
                let friction = (a.friction * b.friction).sqrt();
                let restitution = a.restitution.max(b.restitution);
                let effective = |ra: &Vec3, rb: &Vec3, axis: &Vec3| {
                    let ka = inv_mass[i] + ra.cross(axis).dot(&(inv_inertia[i] * ra.cross(axis)));
                    let kb = inv_mass[j] + rb.cross(axis).dot(&(inv_inertia[j] * rb.cross(axis)));
                    let k = ka + kb;
                    if k > 0.0 {
                        1.0 / k
                    } else {
                        0.0
                    }
                };
                let mut deepest = m.points[0];
                let points = m
                    .points
                    .iter()
                    .map(|p| {
                        if p.depth > deepest.depth {
                            deepest = *p;
                        }
                        let ra = p.position - a.position;
                        let rb = p.position - b.position;
                        let dv = b.velocity + b.angular_velocity.cross(&rb) - a.velocity - a.angular_velocity.cross(&ra);
                        let vn = dv.dot(&n);
                        let mut target = if vn < -cfg.restitution_threshold { -restitution * vn } else { 0.0 };
                        if p.depth < 0.0 {
                            // Not yet touching: allow closing the gap this step.
                            target = target.max(p.depth / dt);
                        }
                        PointConstraint {
                            ra,
                            rb,
                            tangents,
                            normal_mass: effective(&ra, &rb, &n),
                            tangent_mass: [effective(&ra, &rb, &tangents[0]), effective(&ra, &rb, &tangents[1])],
                            target,
                            position_bias: cfg.baumgarte * (p.depth - cfg.slop).max(0.0) / dt,
                            normal_impulse: 0.0,
                            tangent_impulse: [0.0; 2],
                            pseudo_impulse: 0.0,
                        }
                    })
                    .collect();
                pairs.push(PairConstraint { a: i, b: j, normal: n, friction, points, deepest: deepest.position });
            }
        }
        pairs
    }

    fn solve_velocity(&mut self, pair: &mut PairConstraint, inv_mass: &[f64], inv_inertia: &[Mat3]) {
        let (a, b) = (pair.a, pair.b);
        let n = pair.normal;
        for c in pair.points.iter_mut() {
            let (ba, bb) = (&self.bodies[a], &self.bodies[b]);
            let dv = bb.velocity + bb.angular_velocity.cross(&c.rb) - ba.velocity - ba.angular_velocity.cross(&c.ra);
            let lambda = -c.normal_mass * (dv.dot(&n) - c.target);
            let new = (c.normal_impulse + lambda).max(0.0);
            let lambda = new - c.normal_impulse;
            c.normal_impulse = new;
            self.apply(a, b, &(n * lambda), c, inv_mass, inv_inertia);
        }
        if pair.friction <= 0.0 {
            return;
        }
        for c in pair.points.iter_mut() {
            let (ba, bb) = (&self.bodies[a], &self.bodies[b]);
            let dv = bb.velocity + bb.angular_velocity.cross(&c.rb) - ba.velocity - ba.angular_velocity.cross(&c.ra);
            let mut acc = [0.0; 2];
            for k in 0..2 {
                acc[k] = c.tangent_impulse[k] - c.tangent_mass[k] * dv.dot(&c.tangents[k]);
            }
            // Clamp to the friction cone.
            let limit = pair.friction * c.normal_impulse;
            let mag = (acc[0] * acc[0] + acc[1] * acc[1]).sqrt();
            if mag > limit {
                let s = if mag > 0.0 { limit / mag } else { 0.0 };
                acc = [acc[0] * s, acc[1] * s];
            }
            let impulse = c.tangents[0] * (acc[0] - c.tangent_impulse[0]) + c.tangents[1] * (acc[1] - c.tangent_impulse[1]);
            c.tangent_impulse = acc;
            self.apply(a, b, &impulse, c, inv_mass, inv_inertia);
        }
    }

    fn apply(&mut self, a: usize, b: usize, p: &Vec3, c: &PointConstraint, inv_mass: &[f64], inv_inertia: &[Mat3]) {
        let ba = &mut self.bodies[a];
        ba.velocity -= p * inv_mass[a];
        ba.angular_velocity -= inv_inertia[a] * c.ra.cross(p);
        let bb = &mut self.bodies[b];
        bb.velocity += p * inv_mass[b];
        bb.angular_velocity += inv_inertia[b] * c.rb.cross(p);
    }
}

fn tangent_basis(n: &Vec3) -> [Vec3; 2] {
    let helper = if n.x.abs() < 0.57 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    [t1, n.cross(&t1)]
}
