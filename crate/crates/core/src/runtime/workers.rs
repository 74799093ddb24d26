//! Built-in workers. Each builds one scene from a seed; the runtime then
//! renders and exports it.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use serde_json::{json, Value};

use super::texture::band_limited_noise;
use super::RuntimeError;
use crate::assets::{AssetLibrary, DEFAULT_DENSITY};
use crate::math::{hsv_to_rgb, yaw, Aabb, Vec3};
use crate::physics::{place_without_overlap, simulate, Body, ContactEvent, World, MAX_PLACEMENT_TRIALS};
use crate::render::object_bounds;
use crate::rng::Rng;
use crate::scene::{look_at, KeyValue, Light, Material, RigidObject, Resolution, Scene, CAMERA_UID};

pub const WORKERS: [&str; 3] = ["movi-basic", "sod-multiview", "texture-plane"];

/// Settings shared by every worker, taken from the job.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneParams {
    pub resolution: Resolution,
    /// Inclusive frame range; `None` uses the worker default.
    pub frames: Option<(i32, i32)>,
}

/// `key=value` options, consumed as they are read.
struct Options {
    map: BTreeMap<String, String>,
}

impl Options {
    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, RuntimeError> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| RuntimeError::InvalidJobSpec(format!("bad value {v:?} for {key}"))),
        }
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, RuntimeError> {
        match self.map.remove(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| RuntimeError::InvalidJobSpec(format!("bad value {v:?} for {key}"))))
                .collect(),
        }
    }

    fn finish(self) -> Result<(), RuntimeError> {
        match self.map.keys().next() {
            Some(k) => Err(RuntimeError::InvalidJobSpec(format!("unknown config key {k:?}"))),
            None => Ok(()),
        }
    }
}

fn check(ok: bool, message: &str) -> Result<(), RuntimeError> {
    if ok {
        Ok(())
    } else {
        Err(RuntimeError::InvalidJobSpec(message.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoviConfig {
    pub min_objects: u32,
    pub max_objects: u32,
    pub min_scale: f64,
    pub max_scale: f64,
    /// Objects spawn in `[-e, e]²` horizontally.
    pub spawn_extent: f64,
    pub min_height: f64,
    pub max_height: f64,
    /// Horizontal velocity components are uniform in `[-v, v]`.
    pub max_velocity: f64,
    pub frame_rate: u32,
    pub step_rate: u32,
}

impl Default for MoviConfig {
    fn default() -> Self {
        MoviConfig {
            min_objects: 3,
            max_objects: 10,
            min_scale: 0.7,
            max_scale: 1.4,
            spawn_extent: 4.0,
            min_height: 1.0,
            max_height: 3.0,
            max_velocity: 4.0,
            frame_rate: 12,
            step_rate: 240,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewConfig {
    pub min_radius: f64,
    pub max_radius: f64,
    /// Degrees above the horizon.
    pub min_elevation: f64,
    pub max_elevation: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig { min_radius: 3.0, max_radius: 5.0, min_elevation: 15.0, max_elevation: 75.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SodConfig {
    pub hard: bool,
    pub min_clutter: u32,
    pub max_clutter: u32,
    pub views: ViewConfig,
}

impl Default for SodConfig {
    fn default() -> Self {
        SodConfig { hard: false, min_clutter: 2, max_clutter: 6, views: ViewConfig::default() }
    }
}

/// Default cutoffs in cycles per texture: `10^-0.5 … 10^2`.
pub fn default_cutoffs() -> Vec<f64> {
    vec![10f64.powf(-0.5), 1.0, 10f64.powf(0.5), 10.0, 100.0]
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextureConfig {
    pub cutoffs: Vec<f64>,
    pub texture_size: usize,
    /// Edge length of one patch in metres.
    pub patch_size: f64,
    pub views: ViewConfig,
}

impl Default for TextureConfig {
    fn default() -> Self {
        TextureConfig { cutoffs: default_cutoffs(), texture_size: 256, patch_size: 2.0, views: ViewConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkerKind {
    MoviBasic(MoviConfig),
    SodMultiview(SodConfig),
    TexturePlane(TextureConfig),
}

/// Track extraction settings, valid for every worker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommonConfig {
    pub tracks: bool,
    pub num_queries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerConfig {
    pub kind: WorkerKind,
    pub common: CommonConfig,
}

fn view_config(o: &mut Options, d: ViewConfig) -> Result<ViewConfig, RuntimeError> {
    let v = ViewConfig {
        min_radius: o.get("radius_min", d.min_radius)?,
        max_radius: o.get("radius_max", d.max_radius)?,
        min_elevation: o.get("elevation_min", d.min_elevation)?,
        max_elevation: o.get("elevation_max", d.max_elevation)?,
    };
    check(0.0 < v.min_radius && v.min_radius <= v.max_radius, "need 0 < radius_min <= radius_max")?;
    check(
        0.0 <= v.min_elevation && v.min_elevation <= v.max_elevation && v.max_elevation < 90.0,
        "need 0 <= elevation_min <= elevation_max < 90",
    )?;
    Ok(v)
}

impl WorkerConfig {
    /// Parses the job's `--config` pairs for `worker`. Unknown keys are
    /// rejected.
    pub fn parse(worker: &str, config: &BTreeMap<String, String>) -> Result<WorkerConfig, RuntimeError> {
        let mut o = Options { map: config.clone() };
        let common = CommonConfig { tracks: o.get("tracks", true)?, num_queries: o.get("num_queries", 256)? };
        let kind = match worker {
            "movi-basic" => {
                let d = MoviConfig::default();
                let c = MoviConfig {
                    min_objects: o.get("objects_min", d.min_objects)?,
                    max_objects: o.get("objects_max", d.max_objects)?,
                    min_scale: o.get("scale_min", d.min_scale)?,
                    max_scale: o.get("scale_max", d.max_scale)?,
                    spawn_extent: o.get("spawn_extent", d.spawn_extent)?,
                    min_height: o.get("height_min", d.min_height)?,
                    max_height: o.get("height_max", d.max_height)?,
                    max_velocity: o.get("velocity_max", d.max_velocity)?,
                    frame_rate: o.get("frame_rate", d.frame_rate)?,
                    step_rate: o.get("step_rate", d.step_rate)?,
                };
                check(c.min_objects <= c.max_objects, "need objects_min <= objects_max")?;
                check(0.0 < c.min_scale && c.min_scale <= c.max_scale, "need 0 < scale_min <= scale_max")?;
                check(c.spawn_extent > 0.0 && c.min_height <= c.max_height, "bad spawn region")?;
                check(c.max_velocity >= 0.0, "velocity_max must be non-negative")?;
                check(c.frame_rate >= 1 && c.step_rate % c.frame_rate == 0 && c.step_rate >= c.frame_rate, "step_rate must be a multiple of frame_rate")?;
                WorkerKind::MoviBasic(c)
            }
            "sod-multiview" => {
                let d = SodConfig::default();
                let c = SodConfig {
                    hard: o.get("hard", d.hard)?,
                    min_clutter: o.get("clutter_min", d.min_clutter)?,
                    max_clutter: o.get("clutter_max", d.max_clutter)?,
                    views: view_config(&mut o, d.views)?,
                };
                check(c.min_clutter <= c.max_clutter, "need clutter_min <= clutter_max")?;
                WorkerKind::SodMultiview(c)
            }
            "texture-plane" => {
                let d = TextureConfig::default();
                let c = TextureConfig {
                    cutoffs: o.list("cutoffs", &d.cutoffs)?,
                    texture_size: o.get("texture_size", d.texture_size)?,
                    patch_size: o.get("patch_size", d.patch_size)?,
                    views: view_config(&mut o, d.views)?,
                };
                check(!c.cutoffs.is_empty(), "cutoffs must not be empty")?;
                if let Some(bad) = c.cutoffs.iter().find(|f| !(**f > 0.0)) {
                    return Err(RuntimeError::InvalidCutoff(*bad));
                }
                check(c.texture_size.is_power_of_two(), "texture_size must be a power of two")?;
                check(c.patch_size > 0.0, "patch_size must be positive")?;
                WorkerKind::TexturePlane(c)
            }
            other => return Err(RuntimeError::UnknownWorker(other.to_string())),
        };
        o.finish()?;
        Ok(WorkerConfig { kind, common })
    }
}

/// A built scene plus what the exporter needs beyond it.
#[derive(Clone, Debug)]
pub struct WorkerOutput {
    pub scene: Scene,
    pub events: Vec<ContactEvent>,
    pub attributes: BTreeMap<String, Value>,
    /// Extra f32 layer given as a value per segmentation id (0 elsewhere).
    pub segment_layer: Option<(String, BTreeMap<u32, f32>)>,
}

pub fn run_worker(config: &WorkerConfig, seed: u64, params: &SceneParams) -> Result<WorkerOutput, RuntimeError> {
    match &config.kind {
        WorkerKind::MoviBasic(c) => worker_movi_basic(seed, params, c),
        WorkerKind::SodMultiview(c) => worker_sod_multiview(seed, params, c),
        WorkerKind::TexturePlane(c) => worker_texture_plane(seed, params, c),
    }
}

fn base_scene(seed: u64, params: &SceneParams, default_frames: (i32, i32)) -> Result<Scene, RuntimeError> {
    let mut scene = Scene::new(params.resolution);
    let (start, end) = params.frames.unwrap_or(default_frames);
    scene.frame_start = start;
    scene.frame_end = end;
    scene.master_rng_state = seed;
    scene.validate()?;
    Ok(scene)
}

fn mass_for(library: &AssetLibrary, asset: &str, scale: f64) -> f64 {
    library.get(asset).map_or(1.0, |g| g.volume(scale) * DEFAULT_DENSITY)
}

const MOVI_SHAPES: [&str; 4] = ["cube", "sphere", "cylinder", "cone"];
const SOD_SHAPES: [&str; 5] = ["cube", "sphere", "cylinder", "cone", "torus"];

fn floor(size: f64) -> RigidObject {
    let mut f = RigidObject::new("floor", "plane");
    f.scale = size;
    f.is_static = true;
    f.mass = 0.0;
    f.material = Material::albedo([0.6, 0.6, 0.6]);
    f
}

/// Falling, sliding KuBasic primitives on a floor, seen by a fixed camera.
pub fn worker_movi_basic(seed: u64, params: &SceneParams, c: &MoviConfig) -> Result<WorkerOutput, RuntimeError> {
    let mut rng = Rng::new(seed);
    let mut scene = base_scene(seed, params, (0, 23))?;
    scene.frame_rate = c.frame_rate;
    scene.step_rate = c.step_rate;
    scene.validate()?;
    scene.camera.position = Vec3::new(7.48113, -6.50764, 5.34367);
    scene.camera.focal_length = 35.0;
    scene.camera.sensor_width = 32.0;
    scene.camera = scene.camera.looking_at(&Vec3::zeros());
    scene.ambient_light = [0.15; 3];
    scene.background_color = [0.05; 3];
    let library = scene.library.clone();

    let ground = floor(40.0);
    let mut world = World::new(scene.gravity);
    world.add_body(Body::from_object(&ground, &library)?)?;
    let region = Aabb {
        min: Vec3::new(-c.spawn_extent, -c.spawn_extent, c.min_height),
        max: Vec3::new(c.spawn_extent, c.spawn_extent, c.max_height),
    };
    let n = rng.range_inclusive(c.min_objects as i64, c.max_objects as i64) as usize;
    for i in 0..n {
        let shape = MOVI_SHAPES[rng.below(MOVI_SHAPES.len())];
        let mut obj = RigidObject::new(format!("object_{i:02}"), shape);
        obj.scale = rng.uniform(c.min_scale, c.max_scale);
        obj.material = Material::albedo(hsv_to_rgb(rng.next_f64(), 0.85, 0.9));
        obj.mass = mass_for(&library, shape, obj.scale);
        let body = Body::from_object(&obj, &library)?;
        let (p, q) = place_without_overlap(&mut world, body, &region, &mut rng, MAX_PLACEMENT_TRIALS)?;
        obj.position = p;
        obj.orientation = q;
        obj.velocity = Vec3::new(rng.uniform(-c.max_velocity, c.max_velocity), rng.uniform(-c.max_velocity, c.max_velocity), 0.0);
        scene.add_object(obj)?;
    }
    scene.add_object(ground)?;
    scene.add_light(Light::point("lamp", Vec3::new(4.0, -6.0, 12.0), [200.0; 3]))?;
    let sim = simulate(&mut scene)?;
    let mut attributes = BTreeMap::new();
    attributes.insert("num_objects".into(), json!(n));
    Ok(WorkerOutput { scene, events: sim.events, attributes, segment_layer: None })
}

/// Keys one camera per frame on the upper hemisphere around the origin,
/// each aimed at the origin.
fn hemisphere_cameras(scene: &mut Scene, views: &ViewConfig, rng: &mut Rng) -> Result<(), RuntimeError> {
    let frames: Vec<i32> = scene.frames().collect();
    for f in frames {
        let r = rng.uniform(views.min_radius, views.max_radius);
        let el = rng.uniform(views.min_elevation, views.max_elevation).to_radians();
        let az = rng.uniform(0.0, TAU);
        let pos = Vec3::new(r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin());
        let q = look_at(&pos, &Vec3::zeros());
        scene.keyframe_insert(CAMERA_UID, "position", f, KeyValue::Vector(pos))?;
        scene.keyframe_insert(CAMERA_UID, "orientation", f, KeyValue::Quaternion(crate::math::quat_to_wxyz(&q)))?;
        if f == scene.frame_start {
            scene.camera.position = pos;
            scene.camera.orientation = q;
        }
    }
    Ok(())
}

/// Height that rests an object's lowest point on `ground`.
fn resting_height(library: &AssetLibrary, asset: &str, scale: f64, ground: f64) -> f64 {
    library.get(asset).map_or(ground, |g| ground - object_bounds(g).min.z * scale)
}

/// One static salient object at the origin (id 1), optional clutter, and
/// one camera view per frame.
pub fn worker_sod_multiview(seed: u64, params: &SceneParams, c: &SodConfig) -> Result<WorkerOutput, RuntimeError> {
    let mut rng = Rng::new(seed);
    let mut scene = base_scene(seed, params, (0, 9))?;
    scene.ambient_light = [0.25; 3];
    scene.background_color = [0.5; 3];
    let library: Arc<AssetLibrary> = scene.library.clone();

    let shape = SOD_SHAPES[rng.below(SOD_SHAPES.len())];
    let mut salient = RigidObject::new("salient", shape);
    salient.scale = rng.uniform(0.8, 1.2);
    salient.orientation = yaw(rng.uniform(0.0, TAU));
    salient.is_static = true;
    salient.mass = mass_for(&library, shape, salient.scale);
    salient.material = Material::albedo(hsv_to_rgb(rng.next_f64(), 0.85, 0.9));
    let ground = library.get(shape).map_or(0.0, |g| object_bounds(g).min.z * salient.scale);
    let mut world = World::new(Vec3::zeros());
    world.add_body(Body::from_object(&salient, &library)?)?;
    scene.add_object(salient)?;

    let mut clutter = 0;
    if c.hard {
        clutter = rng.range_inclusive(c.min_clutter as i64, c.max_clutter as i64) as usize;
        for i in 0..clutter {
            let shape = SOD_SHAPES[rng.below(SOD_SHAPES.len())];
            let mut obj = RigidObject::new(format!("clutter_{i:02}"), shape);
            obj.scale = rng.uniform(0.3, 0.6);
            obj.is_static = true;
            obj.mass = mass_for(&library, shape, obj.scale);
            obj.material = Material::albedo(hsv_to_rgb(rng.next_f64(), 0.6, 0.8));
            let z = resting_height(&library, shape, obj.scale, ground);
            let region = Aabb { min: Vec3::new(-2.5, -2.5, z), max: Vec3::new(2.5, 2.5, z) };
            let (p, q) = place_without_overlap(&mut world, Body::from_object(&obj, &library)?, &region, &mut rng, MAX_PLACEMENT_TRIALS)?;
            obj.position = p;
            obj.orientation = q;
            scene.add_object(obj)?;
        }
    }
    scene.add_light(Light::directional("sun", Vec3::new(-0.3, -0.2, -1.0), [0.9; 3]))?;
    hemisphere_cameras(&mut scene, &c.views, &mut rng)?;
    let mut attributes = BTreeMap::new();
    attributes.insert("salient_segmentation_id".into(), json!(1));
    attributes.insert("hard".into(), json!(c.hard));
    attributes.insert("num_clutter".into(), json!(clutter));
    Ok(WorkerOutput { scene, events: Vec::new(), attributes, segment_layer: None })
}

/// A ground plane tiled with one band-limited noise patch per cutoff.
pub fn worker_texture_plane(seed: u64, params: &SceneParams, c: &TextureConfig) -> Result<WorkerOutput, RuntimeError> {
    let mut rng = Rng::new(seed);
    let mut scene = base_scene(seed, params, (0, 9))?;
    scene.ambient_light = [0.3; 3];
    scene.background_color = [0.0; 3];
    let k = c.cutoffs.len();
    let cols = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(cols);
    let mut per_id = BTreeMap::new();
    let mut cutoff_attr = serde_json::Map::new();
    for (i, &cutoff) in c.cutoffs.iter().enumerate() {
        let name = format!("patch_{i:02}");
        scene.textures.insert(name.clone(), band_limited_noise(c.texture_size, cutoff, &mut rng)?);
        let (row, col) = (i / cols, i % cols);
        let mut patch = RigidObject::new(name.clone(), "plane");
        patch.scale = c.patch_size;
        patch.is_static = true;
        patch.mass = 0.0;
        patch.position = Vec3::new(
            (col as f64 - (cols as f64 - 1.0) / 2.0) * c.patch_size,
            (row as f64 - (rows as f64 - 1.0) / 2.0) * c.patch_size,
            0.0,
        );
        patch.material = Material::Texture { texture: name.clone(), tint: [1.0; 3] };
        scene.add_object(patch)?;
        let id = scene.object(&name).map(|o| o.segmentation_id).unwrap_or(0);
        per_id.insert(id, cutoff as f32);
        cutoff_attr.insert(name, json!(cutoff));
    }
    scene.add_light(Light::directional("sun", Vec3::new(0.0, 0.0, -1.0), [0.7; 3]))?;
    hemisphere_cameras(&mut scene, &c.views, &mut rng)?;
    let mut attributes = BTreeMap::new();
    attributes.insert("cutoffs".into(), Value::Object(cutoff_attr));
    attributes.insert("texture_size".into(), json!(c.texture_size));
    Ok(WorkerOutput { scene, events: Vec::new(), attributes, segment_layer: Some(("cutoff_frequency".into(), per_id)) })
}
