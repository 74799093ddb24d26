//! Ray-casting renderer: one primary ray per pixel centre, Lambert shading
//! with shadow rays, and exact annotation passes.

mod bvh;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::assets::{AssetGeometry, PrimitiveKind};
use crate::math::{Aabb, Pose, Rgb, Vec2, Vec3};
use crate::scene::{LightKind, Material, PerspectiveCamera, Ray, Resolution, Scene, SceneError};

pub use bvh::{brute_force_intersect, build_bvh, intersect_triangle, Bvh, TraversalStats, TriangleHit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("unknown asset {0}")]
    UnknownAsset(String),
    #[error("unknown texture {0}")]
    UnknownTexture(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Offset applied along the normal before casting shadow rays.
pub const SHADOW_EPSILON: f64 = 1e-4;

/// Object-frame bounding box used for object coordinates and exported 3D
/// boxes. Sphere primitives use their exact analytic extent.
pub fn object_bounds(geom: &AssetGeometry) -> Aabb {
    match geom.render.primitive {
        Some(p) if p.kind == PrimitiveKind::Sphere => Aabb { min: Vec3::repeat(-p.size), max: Vec3::repeat(p.size) },
        _ => geom.render.bounds(),
    }
}

/// Object coordinates of a local point: `(p - min) / extent` per axis,
/// `0.5` along axes where the box is flat.
pub fn object_coordinates(bounds: &Aabb, local: &Vec3) -> Vec3 {
    let e = bounds.extent();
    Vec3::from_fn(|i, _| if e[i] > 1e-12 { ((local[i] - bounds.min[i]) / e[i]).clamp(0.0, 1.0) } else { 0.5 })
}

#[derive(Debug)]
struct Prepared {
    geometry: Arc<AssetGeometry>,
    bvh: Bvh,
    /// Radius when the asset is rendered as an exact sphere.
    sphere: Option<f64>,
    bounds: Aabb,
}

/// An object placed at one point in time.
#[derive(Clone, Debug)]
pub struct Instance {
    pub uid: String,
    pub segmentation_id: u32,
    pub pose: Pose,
    pub material: Material,
    prepared: Arc<Prepared>,
    world_bounds: Aabb,
}

impl Instance {
    pub fn local_bounds(&self) -> Aabb {
        self.prepared.bounds
    }
}

/// Nearest surface hit along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitRecord {
    /// Index into [`SceneState::instances`].
    pub instance: usize,
    pub segmentation_id: u32,
    pub triangle: u32,
    pub barycentric: [f64; 3],
    pub t: f64,
    pub point: Vec3,
    pub local_point: Vec3,
    /// Geometric normal as stored in the mesh winding (world, unit).
    pub normal: Vec3,
    /// `normal` flipped to face the incoming ray.
    pub shading_normal: Vec3,
    pub uv: Option<Vec2>,
}

/// All instances and lights at one (possibly fractional) frame.
#[derive(Clone, Debug)]
pub struct SceneState<'a> {
    pub scene: &'a Scene,
    pub instances: Vec<Instance>,
}

fn ray_sphere(o: &Vec3, d: &Vec3, r: f64, t_min: f64, t_max: f64) -> Option<f64> {
    let a = d.dot(d);
    let b = 2.0 * o.dot(d);
    let c = o.dot(o) - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (mut t0, mut t1) = (q / a, if q != 0.0 { c / q } else { -q / a });
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    [t0, t1].into_iter().find(|t| *t >= t_min && *t <= t_max)
}

impl SceneState<'_> {
    /// Nearest hit with `t` in `[t_min, t_max]`; ties go to the earlier
    /// instance.
    pub fn intersect_range(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<HitRecord> {
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<HitRecord> = None;
        for (idx, inst) in self.instances.iter().enumerate() {
            let limit = best.map_or(t_max, |h| h.t);
            if inst.world_bounds.ray_interval(&ray.origin, &inv, t_min, limit).is_none() {
                continue;
            }
            let o = inst.pose.to_local(&ray.origin);
            let d = inst.pose.dir_to_local(&ray.direction) / inst.pose.scale;
            let p = &inst.prepared;
            let hit = if let Some(r) = p.sphere {
                ray_sphere(&o, &d, r, t_min, limit).map(|t| {
                    let local = o + d * t;
                    (t, 0, [1.0, 0.0, 0.0], local, local / r, None)
                })
            } else {
                let mut stats = TraversalStats::default();
                p.bvh.intersect(&p.geometry.render, &o, &d, t_min, limit, &mut stats).map(|h| {
                    let mesh = &p.geometry.render;
                    let tri = mesh.triangles[h.triangle as usize];
                    let b = h.barycentric;
                    let [va, vb, vc] = tri.map(|i| mesh.vertices[i as usize]);
                    let local = va * b[0] + vb * b[1] + vc * b[2];
                    let uv = mesh.uvs.as_ref().map(|uv| {
                        uv[tri[0] as usize] * b[0] + uv[tri[1] as usize] * b[1] + uv[tri[2] as usize] * b[2]
                    });
                    (h.t, h.triangle, b, local, mesh.face_normal(h.triangle as usize), uv)
                })
            };
            let Some((t, triangle, barycentric, local_point, local_normal, uv)) = hit else { continue };
            if best.is_some_and(|b| t >= b.t) {
                continue;
            }
            let normal = inst.pose.dir_to_world(&local_normal).normalize();
            let shading_normal = if normal.dot(&ray.direction) > 0.0 { -normal } else { normal };
            best = Some(HitRecord {
                instance: idx,
                segmentation_id: inst.segmentation_id,
                triangle,
                barycentric,
                t,
                point: ray.at(t),
                local_point,
                normal,
                shading_normal,
                uv,
            });
        }
        best
    }

    /// Nearest hit within the camera's clip range.
    pub fn intersect(&self, ray: &Ray, camera: &PerspectiveCamera) -> Option<HitRecord> {
        self.intersect_range(ray, camera.near_clip, camera.far_clip)
    }

    /// Whether any surface lies along `dir` from `origin` within `t_max`.
    pub fn occluded(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> bool {
        let inv = dir.map(|d| 1.0 / d);
        self.instances.iter().any(|inst| {
            if inst.world_bounds.ray_interval(origin, &inv, 0.0, t_max).is_none() {
                return false;
            }
            let o = inst.pose.to_local(origin);
            let d = inst.pose.dir_to_local(dir) / inst.pose.scale;
            let p = &inst.prepared;
            match p.sphere {
                Some(r) => ray_sphere(&o, &d, r, 0.0, t_max).is_some(),
                None => p.bvh.occluded(&p.geometry.render, &o, &d, 0.0, t_max),
            }
        })
    }
}

/// Lambert shading with one shadow ray per light, clamped to `[0, 1]`.
pub fn shade(hit: &HitRecord, state: &SceneState) -> Rgb {
    let scene = state.scene;
    let inst = &state.instances[hit.instance];
    let albedo = match &inst.material {
        Material::Albedo(c) => *c,
        Material::Texture { texture, tint } => {
            let v = match (scene.textures.get(texture), hit.uv) {
                (Some(tex), Some(uv)) => tex.sample(uv.x, uv.y),
                (Some(tex), None) => tex.sample(0.0, 0.0),
                (None, _) => 1.0,
            };
            [tint[0] * v, tint[1] * v, tint[2] * v]
        }
    };
    let n = hit.shading_normal;
    let origin = hit.point + n * SHADOW_EPSILON;
    let mut light = scene.ambient_light;
    for l in state.scene.lights() {
        let (dir, dist, atten) = match l.kind {
            LightKind::Point { position } => {
                let to = position - hit.point;
                let r = to.norm();
                (to / r, (position - origin).norm(), 1.0 / (r * r))
            }
            LightKind::Directional { direction } => (-direction.normalize(), f64::INFINITY, 1.0),
        };
        let cos = n.dot(&dir);
        if cos <= 0.0 || state.occluded(&origin, &dir, dist) {
            continue;
        }
        for k in 0..3 {
            light[k] += l.color[k] * cos * atten;
        }
    }
    [0, 1, 2].map(|k| (albedo[k] * light[k]).clamp(0.0, 1.0))
}

/// Image position of `world` under `camera`; points at or behind the near
/// plane are pulled onto it, which the second value reports.
pub fn project_clamped(camera: &PerspectiveCamera, world: &Vec3, res: Resolution) -> (Vec2, bool) {
    let pc = camera.to_camera(world);
    let mut z = -pc.z;
    let clamped = z < camera.near_clip;
    if clamped {
        z = camera.near_clip;
    }
    let f = camera.focal_pixels(res);
    let x = f * pc.x / z + res.width as f64 / 2.0 - 0.5;
    let y = -f * pc.y / z + res.height as f64 / 2.0 - 0.5;
    (Vec2::new(x, y), clamped)
}

/// Displacement in pixels of a hit's surface point to where it projects in
/// another state; the flag is set when the point was behind the camera.
pub fn compute_flow(
    hit: &HitRecord,
    pixel: &Vec2,
    other: &SceneState,
    other_camera: &PerspectiveCamera,
    res: Resolution,
) -> (Vec2, bool) {
    let pose = other.instances[hit.instance].pose;
    let (p, clamped) = project_clamped(other_camera, &pose.to_world(&hit.local_point), res);
    (p - pixel, clamped)
}

/// Everything computed for one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelSample {
    pub rgba: [f32; 4],
    pub depth: f32,
    pub segmentation: u32,
    pub normal: [f32; 3],
    pub object_coordinates: [f32; 3],
    pub forward_flow: [f32; 2],
    pub backward_flow: [f32; 2],
    pub flow_clamped: bool,
}

/// All render passes of one frame, row-major, channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBundle {
    pub frame: i32,
    pub resolution: Resolution,
    pub rgba: Vec<f32>,
    pub depth: Vec<f32>,
    pub segmentation: Vec<u32>,
    pub normal: Vec<f32>,
    pub object_coordinates: Vec<f32>,
    pub forward_flow: Vec<f32>,
    pub backward_flow: Vec<f32>,
    /// False at the first frame, where backward flow is zero-filled.
    pub backward_flow_valid: bool,
    /// Pixels whose flow target was behind the camera.
    pub clamped_flow_pixels: u32,
}

impl FrameBundle {
    fn with_capacity(frame: i32, res: Resolution) -> FrameBundle {
        let n = res.pixel_count();
        FrameBundle {
            frame,
            resolution: res,
            rgba: Vec::with_capacity(4 * n),
            depth: Vec::with_capacity(n),
            segmentation: Vec::with_capacity(n),
            normal: Vec::with_capacity(3 * n),
            object_coordinates: Vec::with_capacity(3 * n),
            forward_flow: Vec::with_capacity(2 * n),
            backward_flow: Vec::with_capacity(2 * n),
            backward_flow_valid: true,
            clamped_flow_pixels: 0,
        }
    }

    fn push(&mut self, s: &PixelSample) {
        self.rgba.extend(s.rgba);
        self.depth.push(s.depth);
        self.segmentation.push(s.segmentation);
        self.normal.extend(s.normal);
        self.object_coordinates.extend(s.object_coordinates);
        self.forward_flow.extend(s.forward_flow);
        self.backward_flow.extend(s.backward_flow);
        self.clamped_flow_pixels += s.flow_clamped as u32;
    }

    /// Assembles a bundle from per-pixel samples in row-major order.
    pub fn from_samples(frame: i32, res: Resolution, samples: &[PixelSample], backward_flow_valid: bool) -> FrameBundle {
        let mut b = FrameBundle::with_capacity(frame, res);
        for s in samples {
            b.push(s);
        }
        b.backward_flow_valid = backward_flow_valid;
        b
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.resolution.width as usize + x as usize
    }
}

/// States and cameras needed to render one frame.
pub struct FrameContext<'a> {
    pub frame: i32,
    pub current: SceneState<'a>,
    pub previous: Option<SceneState<'a>>,
    pub next: SceneState<'a>,
    pub camera: PerspectiveCamera,
    pub previous_camera: PerspectiveCamera,
    pub next_camera: PerspectiveCamera,
}

/// Renders frames of one scene; geometry acceleration structures are built
/// once per asset.
pub struct Renderer<'a> {
    scene: &'a Scene,
    prepared: BTreeMap<String, Arc<Prepared>>,
}

impl<'a> Renderer<'a> {
    pub fn new(scene: &'a Scene) -> Result<Renderer<'a>, RenderError> {
        let mut prepared = BTreeMap::new();
        for obj in scene.objects() {
            if prepared.contains_key(&obj.asset_ref) {
                continue;
            }
            let geometry = scene.library.get(&obj.asset_ref).ok_or_else(|| RenderError::UnknownAsset(obj.asset_ref.clone()))?;
            let sphere = match geometry.render.primitive {
                Some(p) if p.kind == PrimitiveKind::Sphere => Some(p.size),
                _ => None,
            };
            let p = Prepared {
                bvh: build_bvh(&geometry.render)?,
                bounds: object_bounds(geometry),
                geometry: geometry.clone(),
                sphere,
            };
            prepared.insert(obj.asset_ref.clone(), Arc::new(p));
            if let Material::Texture { texture, .. } = &obj.material {
                if !scene.textures.contains_key(texture) {
                    return Err(RenderError::UnknownTexture(texture.clone()));
                }
            }
        }
        Ok(Renderer { scene, prepared })
    }

    pub fn state_at(&self, frame: f64) -> SceneState<'a> {
        let instances = self
            .scene
            .objects()
            .map(|obj| {
                let prepared = self.prepared[&obj.asset_ref].clone();
                let pose = obj.pose_at(frame);
                let bounds = match prepared.sphere {
                    Some(r) => Aabb { min: Vec3::repeat(-r), max: Vec3::repeat(r) },
                    None => prepared.bvh.bounds(),
                };
                Instance {
                    uid: obj.uid.clone(),
                    segmentation_id: obj.segmentation_id,
                    pose,
                    material: obj.material.clone(),
                    world_bounds: bounds.transformed(|p| pose.to_world(p)),
                    prepared,
                }
            })
            .collect();
        SceneState { scene: self.scene, instances }
    }

    pub fn context(&self, frame: i32) -> FrameContext<'a> {
        let f = frame as f64;
        FrameContext {
            frame,
            current: self.state_at(f),
            previous: (frame > self.scene.frame_start).then(|| self.state_at(f - 1.0)),
            next: self.state_at(f + 1.0),
            camera: self.scene.camera_at(f),
            previous_camera: self.scene.camera_at(f - 1.0),
            next_camera: self.scene.camera_at(f + 1.0),
        }
    }

    /// All passes for the pixel centred at `(x, y)`.
    pub fn render_pixel(&self, ctx: &FrameContext, x: u32, y: u32) -> PixelSample {
        let res = self.scene.resolution;
        let ray = ctx.camera.generate_ray(x as f64, y as f64, res);
        let bg = self.scene.background_color;
        let Some(hit) = ctx.current.intersect(&ray, &ctx.camera) else {
            return PixelSample {
                rgba: [bg[0] as f32, bg[1] as f32, bg[2] as f32, 1.0],
                depth: f32::INFINITY,
                segmentation: 0,
                normal: [0.0; 3],
                object_coordinates: [0.0; 3],
                forward_flow: [0.0; 2],
                backward_flow: [0.0; 2],
                flow_clamped: false,
            };
        };
        let c = shade(&hit, &ctx.current);
        let pixel = Vec2::new(x as f64, y as f64);
        let inst = &ctx.current.instances[hit.instance];
        // Unchanged pose and camera: exactly zero rather than round-off.
        let flow = |other: &SceneState, cam: &PerspectiveCamera| {
            if other.instances[hit.instance].pose == inst.pose && *cam == ctx.camera {
                (Vec2::zeros(), false)
            } else {
                compute_flow(&hit, &pixel, other, cam, res)
            }
        };
        let (fwd, c1) = flow(&ctx.next, &ctx.next_camera);
        let (bwd, c2) = match &ctx.previous {
            Some(prev) => flow(prev, &ctx.previous_camera),
            None => (Vec2::zeros(), false),
        };
        let oc = object_coordinates(&inst.local_bounds(), &hit.local_point);
        PixelSample {
            rgba: [c[0] as f32, c[1] as f32, c[2] as f32, 1.0],
            depth: hit.t as f32,
            segmentation: hit.segmentation_id,
            normal: [hit.normal.x as f32, hit.normal.y as f32, hit.normal.z as f32],
            object_coordinates: [oc.x as f32, oc.y as f32, oc.z as f32],
            forward_flow: [fwd.x as f32, fwd.y as f32],
            backward_flow: [bwd.x as f32, bwd.y as f32],
            flow_clamped: c1 || c2,
        }
    }

    /// Renders `frame`, evaluating pixels in parallel.
    pub fn render_frame(&self, frame: i32) -> FrameBundle {
        let ctx = self.context(frame);
        let w = self.scene.resolution.width;
        let samples: Vec<PixelSample> = (0..self.scene.resolution.pixel_count())
            .into_par_iter()
            .map(|i| self.render_pixel(&ctx, (i % w as usize) as u32, (i / w as usize) as u32))
            .collect();
        FrameBundle::from_samples(frame, self.scene.resolution, &samples, ctx.previous.is_some())
    }
}

/// Renders one frame of `scene`.
pub fn render_frame(scene: &Scene, frame: i32) -> Result<FrameBundle, RenderError> {
    Ok(Renderer::new(scene)?.render_frame(frame))
}

/// Renders every frame of `scene` in order.
pub fn render_frames(scene: &Scene) -> Result<Vec<FrameBundle>, RenderError> {
    let r = Renderer::new(scene)?;
    Ok(scene.frames().map(|f| r.render_frame(f)).collect())
}
