//! Scene graph: the single description both the simulator and the renderer
//! consume.

mod camera;
mod keyframe;
mod view;

pub use camera::{look_at, PerspectiveCamera, Projection, Ray, Resolution};
pub use keyframe::{Interpolate, KeyValue, KeyframeTrack, ObjectTracks, Property};
pub use view::{SceneChange, SharedView, View, ViewRegistry};

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::assets::AssetLibrary;
use crate::math::{quat_to_wxyz, renormalize, Pose, Quat, Rgb, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("asset uid {0:?} already present")]
    DuplicateAsset(String),
    #[error("no asset with uid {0:?}")]
    UnknownAsset(String),
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
    #[error("value has the wrong type for property {0:?}")]
    TypeMismatch(String),
    #[error("keyframe track is empty")]
    EmptyTrack,
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("invalid camera parameters")]
    InvalidCamera,
    #[error("invalid scene settings: {0}")]
    InvalidSettings(String),
}

/// Reserved uid that addresses the scene camera in keyframe calls.
pub const CAMERA_UID: &str = "camera";

#[derive(Clone, Debug, PartialEq)]
pub enum Material {
    Albedo(Rgb),
    /// Grey-level texture looked up by the mesh's uv coordinates, times `tint`.
    Texture { texture: String, tint: Rgb },
}

impl Material {
    pub fn albedo(rgb: Rgb) -> Material {
        Material::Albedo(rgb.map(|c| c.clamp(0.0, 1.0)))
    }
}

/// Square single-channel texture, row-major, values in [0, 1]. Row `r`
/// covers `v ∈ [r/N, (r+1)/N)`, column `c` covers `u ∈ [c/N, (c+1)/N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    pub size: usize,
    pub data: Vec<f32>,
}

impl Texture {
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        let n = self.size as f64;
        let col = ((u.rem_euclid(1.0) * n) as usize).min(self.size - 1);
        let row = ((v.rem_euclid(1.0) * n) as usize).min(self.size - 1);
        self.data[row * self.size + col] as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigidObject {
    pub uid: String,
    /// Key into the scene's [`AssetLibrary`].
    pub asset_ref: String,
    pub position: Vec3,
    pub orientation: Quat,
    pub scale: f64,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    pub friction: f64,
    pub restitution: f64,
    pub is_static: bool,
    pub material: Material,
    /// Assigned on insertion, starting at 1.
    pub segmentation_id: u32,
    pub tracks: ObjectTracks,
}

impl RigidObject {
    pub fn new(uid: impl Into<String>, asset_ref: impl Into<String>) -> Self {
        RigidObject {
            uid: uid.into(),
            asset_ref: asset_ref.into(),
            position: Vec3::zeros(),
            orientation: Quat::identity(),
            scale: 1.0,
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            mass: 1.0,
            friction: crate::assets::DEFAULT_FRICTION,
            restitution: crate::assets::DEFAULT_RESTITUTION,
            is_static: false,
            material: Material::Albedo([0.8, 0.8, 0.8]),
            segmentation_id: 0,
            tracks: ObjectTracks::default(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.orientation, self.scale)
    }

    /// Pose at a (possibly fractional) frame: keyed values where present,
    /// otherwise the object's current state.
    pub fn pose_at(&self, frame: f64) -> Pose {
        let position = self.tracks.position.interpolate(frame).unwrap_or(self.position);
        let orientation = self.tracks.orientation.interpolate(frame).unwrap_or(self.orientation);
        Pose::new(position, orientation, self.scale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LightKind {
    Point { position: Vec3 },
    /// Direction the light travels (unit).
    Directional { direction: Vec3 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Light {
    pub uid: String,
    pub kind: LightKind,
    /// Linear intensity per channel.
    pub color: Rgb,
}

impl Light {
    pub fn point(uid: impl Into<String>, position: Vec3, color: Rgb) -> Light {
        Light { uid: uid.into(), kind: LightKind::Point { position }, color }
    }

    pub fn directional(uid: impl Into<String>, direction: Vec3, color: Rgb) -> Light {
        Light { uid: uid.into(), kind: LightKind::Directional { direction: direction.normalize() }, color }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Asset {
    Object(RigidObject),
    Light(Light),
}

impl Asset {
    pub fn uid(&self) -> &str {
        match self {
            Asset::Object(o) => &o.uid,
            Asset::Light(l) => &l.uid,
        }
    }
}

/// Camera keyframes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CameraTracks {
    pub position: KeyframeTrack<Vec3>,
    pub orientation: KeyframeTrack<Quat>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub resolution: Resolution,
    pub frame_start: i32,
    pub frame_end: i32,
    pub frame_rate: u32,
    pub step_rate: u32,
    pub gravity: Vec3,
    pub ambient_light: Rgb,
    pub background_color: Rgb,
    pub camera: PerspectiveCamera,
    pub camera_tracks: CameraTracks,
    pub master_rng_state: u64,
    pub library: Arc<AssetLibrary>,
    pub textures: BTreeMap<String, Texture>,
    assets: Vec<Asset>,
    next_segmentation_id: u32,
    views: ViewRegistry,
}

impl Scene {
    pub fn new(resolution: Resolution) -> Scene {
        Scene {
            resolution,
            frame_start: 0,
            frame_end: 23,
            frame_rate: 12,
            step_rate: 240,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            ambient_light: [0.1, 0.1, 0.1],
            background_color: [0.0, 0.0, 0.0],
            camera: PerspectiveCamera::default(),
            camera_tracks: CameraTracks::default(),
            master_rng_state: 0,
            library: Arc::new(AssetLibrary::kubasic()),
            textures: BTreeMap::new(),
            assets: Vec::new(),
            next_segmentation_id: 1,
            views: ViewRegistry::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidSettings(m.to_string()));
        if self.resolution.width < 1 || self.resolution.height < 1 {
            return bad("resolution must be at least 1x1");
        }
        if self.frame_end < self.frame_start {
            return bad("frame_end precedes frame_start");
        }
        if self.frame_rate < 1 || self.step_rate < self.frame_rate || self.step_rate % self.frame_rate != 0 {
            return bad("step_rate must be a positive multiple of frame_rate");
        }
        self.camera.validate()
    }

    pub fn num_frames(&self) -> usize {
        (self.frame_end - self.frame_start + 1) as usize
    }

    pub fn frames(&self) -> impl Iterator<Item = i32> {
        self.frame_start..=self.frame_end
    }

    pub fn register_view(&mut self, view: SharedView) {
        self.views.register(view);
    }

    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn objects(&self) -> impl Iterator<Item = &RigidObject> {
        self.assets.iter().filter_map(|a| match a {
            Asset::Object(o) => Some(o),
            _ => None,
        })
    }

    pub fn lights(&self) -> impl Iterator<Item = &Light> {
        self.assets.iter().filter_map(|a| match a {
            Asset::Light(l) => Some(l),
            _ => None,
        })
    }

    pub fn object(&self, uid: &str) -> Option<&RigidObject> {
        self.objects().find(|o| o.uid == uid)
    }

    pub fn object_by_segmentation(&self, id: u32) -> Option<&RigidObject> {
        self.objects().find(|o| o.segmentation_id == id)
    }

    fn object_mut(&mut self, uid: &str) -> Result<&mut RigidObject, SceneError> {
        self.assets
            .iter_mut()
            .find_map(|a| match a {
                Asset::Object(o) if o.uid == uid => Some(o),
                _ => None,
            })
            .ok_or_else(|| SceneError::UnknownAsset(uid.to_string()))
    }

    /// Appends an asset. Objects receive the next segmentation id.
    pub fn add_asset(&mut self, asset: Asset) -> Result<String, SceneError> {
        let uid = asset.uid().to_string();
        if uid == CAMERA_UID || self.assets.iter().any(|a| a.uid() == uid) {
            return Err(SceneError::DuplicateAsset(uid));
        }
        let asset = match asset {
            Asset::Object(mut o) => {
                o.orientation = renormalize(&o.orientation);
                o.segmentation_id = self.next_segmentation_id;
                self.next_segmentation_id += 1;
                Asset::Object(o)
            }
            light => light,
        };
        self.views.notify(&SceneChange::AssetAdded(asset.clone()));
        self.assets.push(asset);
        Ok(uid)
    }

    pub fn add_object(&mut self, object: RigidObject) -> Result<String, SceneError> {
        self.add_asset(Asset::Object(object))
    }

    pub fn add_light(&mut self, light: Light) -> Result<String, SceneError> {
        self.add_asset(Asset::Light(light))
    }

    /// Sets a current (un-keyed) property of an object.
    pub fn set_property(&mut self, uid: &str, property: Property, value: KeyValue) -> Result<(), SceneError> {
        let obj = self.object_mut(uid)?;
        match property {
            Property::Position => obj.position = value.into_vector(property)?,
            Property::Orientation => obj.orientation = value.into_quaternion(property)?,
            Property::Velocity => obj.velocity = value.into_vector(property)?,
            Property::AngularVelocity => obj.angular_velocity = value.into_vector(property)?,
        }
        let stored = match property {
            Property::Orientation => KeyValue::Quaternion(quat_to_wxyz(&obj.orientation)),
            _ => value,
        };
        self.views.notify(&SceneChange::PropertySet { uid: uid.to_string(), property, value: stored });
        Ok(())
    }

    /// Stores a key for `property` of the object `uid` (or of the camera
    /// when `uid` is [`CAMERA_UID`]); an existing key at `frame` is replaced.
    pub fn keyframe_insert(&mut self, uid: &str, property: &str, frame: i32, value: KeyValue) -> Result<(), SceneError> {
        let prop: Property = property.parse()?;
        let stored = if uid == CAMERA_UID {
            match prop {
                Property::Position => {
                    let v = value.into_vector(prop)?;
                    self.camera_tracks.position.insert(frame, v);
                    KeyValue::Vector(v)
                }
                Property::Orientation => {
                    let q = value.into_quaternion(prop)?;
                    self.camera_tracks.orientation.insert(frame, q);
                    KeyValue::Quaternion(quat_to_wxyz(&q))
                }
                _ => return Err(SceneError::UnknownProperty(format!("camera.{property}"))),
            }
        } else {
            let obj = self.object_mut(uid)?;
            obj.tracks.insert(prop, frame, value)?;
            match prop {
                Property::Orientation => KeyValue::Quaternion(quat_to_wxyz(obj.tracks.orientation.get(frame).unwrap())),
                _ => value,
            }
        };
        self.views.notify(&SceneChange::KeyframeInserted { uid: uid.to_string(), property: prop, frame, value: stored });
        Ok(())
    }

    /// Camera with its pose evaluated at `frame`.
    pub fn camera_at(&self, frame: f64) -> PerspectiveCamera {
        let mut cam = self.camera;
        if let Ok(p) = self.camera_tracks.position.interpolate(frame) {
            cam.position = p;
        }
        if let Ok(q) = self.camera_tracks.orientation.interpolate(frame) {
            cam.orientation = q;
        }
        cam
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::Mutex;

    #[test]
    fn segmentation_ids_follow_insertion() {
        let mut s = Scene::new(Resolution::new(4, 4));
        s.add_light(Light::point("lamp", Vec3::z(), [1.0; 3])).unwrap();
        for uid in ["a", "b", "c"] {
            s.add_object(RigidObject::new(uid, "cube")).unwrap();
        }
        let ids: Vec<u32> = s.objects().map(|o| o.segmentation_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn duplicate_uid_rejected() {
        let mut s = Scene::new(Resolution::new(4, 4));
        s.add_object(RigidObject::new("a", "cube")).unwrap();
        assert_eq!(s.add_object(RigidObject::new("a", "sphere")), Err(SceneError::DuplicateAsset("a".into())));
        assert!(s.add_light(Light::point("a", Vec3::z(), [1.0; 3])).is_err());
    }

    #[test]
    fn settings_validation() {
        let mut s = Scene::new(Resolution::new(4, 4));
        s.validate().unwrap();
        s.step_rate = 250;
        assert!(s.validate().is_err());
        s.step_rate = 240;
        s.frame_end = -1;
        assert!(s.validate().is_err());
    }

    /// Mirrors object state from change notifications only.
    #[derive(Default)]
    struct Mirror {
        positions: HashMap<String, Vec3>,
        orientations: HashMap<String, [f64; 4]>,
        keys: HashMap<(String, Property, i32), KeyValue>,
    }

    impl View for Mirror {
        fn apply(&mut self, change: &SceneChange) {
            match change {
                SceneChange::AssetAdded(Asset::Object(o)) => {
                    self.positions.insert(o.uid.clone(), o.position);
                    self.orientations.insert(o.uid.clone(), quat_to_wxyz(&o.orientation));
                }
                SceneChange::AssetAdded(_) => {}
                SceneChange::PropertySet { uid, property: Property::Position, value: KeyValue::Vector(v) } => {
                    self.positions.insert(uid.clone(), *v);
                }
                SceneChange::PropertySet { uid, property: Property::Orientation, value: KeyValue::Quaternion(q) } => {
                    self.orientations.insert(uid.clone(), *q);
                }
                SceneChange::PropertySet { .. } => {}
                SceneChange::KeyframeInserted { uid, property, frame, value } => {
                    self.keys.insert((uid.clone(), *property, *frame), *value);
                }
            }
        }
    }

    #[test]
    fn views_track_every_mutation() {
        let mirror = Arc::new(Mutex::new(Mirror::default()));
        let mut s = Scene::new(Resolution::new(4, 4));
        s.register_view(mirror.clone());
        s.add_object(RigidObject::new("a", "cube")).unwrap();
        s.add_object(RigidObject::new("b", "sphere")).unwrap();
        s.set_property("a", Property::Position, KeyValue::Vector(Vec3::new(1.0, 2.0, 3.0))).unwrap();
        s.set_property("b", Property::Orientation, KeyValue::Quaternion([0.0, 0.0, 0.0, 3.0])).unwrap();
        s.keyframe_insert("a", "position", 4, KeyValue::Vector(Vec3::x())).unwrap();
        s.keyframe_insert("b", "orientation", 2, KeyValue::Quaternion([1.0, 1.0, 0.0, 0.0])).unwrap();

        let m = mirror.lock().unwrap();
        for o in s.objects() {
            assert_eq!(m.positions[&o.uid], o.position);
            assert_eq!(m.orientations[&o.uid], quat_to_wxyz(&o.orientation));
        }
        let b = s.object("b").unwrap();
        assert!((b.orientation.into_inner().norm() - 1.0).abs() < 1e-9);
        let KeyValue::Quaternion(q) = m.keys[&("b".to_string(), Property::Orientation, 2)] else { panic!() };
        assert_eq!(q, quat_to_wxyz(b.tracks.orientation.get(2).unwrap()));
    }

    #[test]
    fn camera_keyframes() {
        let mut s = Scene::new(Resolution::new(4, 4));
        s.keyframe_insert(CAMERA_UID, "position", 0, KeyValue::Vector(Vec3::zeros())).unwrap();
        s.keyframe_insert(CAMERA_UID, "position", 2, KeyValue::Vector(Vec3::new(2.0, 0.0, 0.0))).unwrap();
        assert_eq!(s.camera_at(1.0).position, Vec3::new(1.0, 0.0, 0.0));
        assert!(s.keyframe_insert(CAMERA_UID, "velocity", 0, KeyValue::Vector(Vec3::zeros())).is_err());
        assert!(matches!(
            s.keyframe_insert("nobody", "position", 0, KeyValue::Vector(Vec3::zeros())),
            Err(SceneError::UnknownAsset(_))
        ));
    }
}
