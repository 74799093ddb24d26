//! Scene records: one directory per scene.
//!
//! ```text
//! metadata.json                 scene settings, cameras, instances
//! events.json                   contact events
//! tracks.json                   optional point tracks
//! <layer>_<i:05>.kbr            one raster per layer and frame index i
//! preview_<i:05>.ppm            8-bit gamma 2.2 preview of rgba
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::annotations::{compute_bbox_2d, segmentation_histogram};
use super::raster::{read_raster, write_raster, Raster};
use super::tracks::PointTrack;
use super::ExportError;
use crate::math::{arr3, quat_to_wxyz, Mat3};
use crate::physics::ContactEvent;
use crate::render::{object_bounds, FrameBundle};
use crate::scene::Scene;

pub const METADATA_FILE: &str = "metadata.json";
pub const EVENTS_FILE: &str = "events.json";
pub const TRACKS_FILE: &str = "tracks.json";
pub const FORMAT_VERSION: u32 = 1;

/// Layers every record carries, with their channel counts.
pub const CORE_LAYERS: [(&str, u32); 7] = [
    ("rgba", 4),
    ("depth", 1),
    ("segmentation", 1),
    ("normal", 3),
    ("object_coordinates", 3),
    ("forward_flow", 2),
    ("backward_flow", 2),
];

pub fn raster_file_name(layer: &str, index: usize) -> String {
    format!("{layer}_{index:05}.kbr")
}

pub fn preview_file_name(index: usize) -> String {
    format!("preview_{index:05}.ppm")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSettings {
    pub resolution: [u32; 2],
    pub frame_start: i32,
    pub frame_end: i32,
    pub frame_rate: u32,
    pub step_rate: u32,
    pub gravity: [f64; 3],
    pub ambient_light: [f64; 3],
    pub background_color: [f64; 3],
    pub master_rng_state: u64,
    pub focal_length: f64,
    pub sensor_width: f64,
    pub near_clip: f64,
    pub far_clip: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub position: [f64; 3],
    /// `[w, x, y, z]`; the camera looks along its local −Z with +Y up.
    pub quaternion: [f64; 4],
    /// Maps `(x, −y, −z)` in the camera frame to pixel-corner
    /// coordinates; pixel centres sit at integer + 0.5.
    #[serde(rename = "K")]
    pub k: [[f64; 3]; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: i32,
    pub camera: CameraFrame,
    pub backward_flow_valid: bool,
    pub clamped_flow_pixels: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bbox3d {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFrame {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    /// `[ymin, xmin, ymax, xmax]` normalised; null when not visible.
    pub bbox_2d: Option<[f64; 4]>,
    pub visible_pixels: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub uid: String,
    pub asset_ref: String,
    pub segmentation_id: u32,
    pub mass: f64,
    pub friction: f64,
    pub restitution: f64,
    pub scale: f64,
    pub is_static: bool,
    /// Unscaled, in the object frame.
    pub bbox_3d: Bbox3d,
    pub frames: Vec<InstanceFrame>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub format_version: u32,
    pub scene: SceneSettings,
    pub num_frames: usize,
    /// Raster layers present for every frame.
    pub layers: Vec<String>,
    pub frames: Vec<FrameRecord>,
    pub instances: Vec<InstanceRecord>,
    /// Worker-specific values.
    #[serde(default)]
    pub attributes: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub body_a: String,
    pub body_b: String,
    pub contact_position: [f64; 3],
    pub contact_normal: [f64; 3],
    pub impulse: f64,
    pub simulation_time: f64,
    pub frame: f64,
}

impl From<&ContactEvent> for EventRecord {
    fn from(e: &ContactEvent) -> Self {
        EventRecord {
            body_a: e.body_a.clone(),
            body_b: e.body_b.clone(),
            contact_position: arr3(&e.contact_position),
            contact_normal: arr3(&e.contact_normal),
            impulse: e.impulse,
            simulation_time: e.simulation_time,
            frame: e.frame,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracksDocument {
    pub num_frames: usize,
    pub tracks: Vec<PointTrack>,
}

/// In-memory value of one scene record.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneRecord {
    pub metadata: Metadata,
    pub events: Vec<EventRecord>,
    /// Layer name to one raster per frame.
    pub layers: BTreeMap<String, Vec<Raster>>,
    pub tracks: Option<Vec<PointTrack>>,
}

fn mat_rows(m: &Mat3) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| m[(r, c)]))
}

/// Rasters of the seven core layers of one frame.
pub fn bundle_rasters(b: &FrameBundle) -> Vec<(&'static str, Raster)> {
    let (w, h) = (b.resolution.width, b.resolution.height);
    let f = |c: u32, v: &Vec<f32>| Raster::f32(w, h, c, v.clone()).expect("bundle layers match the resolution");
    vec![
        ("rgba", f(4, &b.rgba)),
        ("depth", f(1, &b.depth)),
        ("segmentation", Raster::u32(w, h, 1, b.segmentation.clone()).expect("bundle layers match the resolution")),
        ("normal", f(3, &b.normal)),
        ("object_coordinates", f(3, &b.object_coordinates)),
        ("forward_flow", f(2, &b.forward_flow)),
        ("backward_flow", f(2, &b.backward_flow)),
    ]
}

impl SceneRecord {
    /// Assembles the record of a simulated and rendered scene. `extra`
    /// holds additional per-frame layers.
    pub fn from_scene(
        scene: &Scene,
        bundles: &[FrameBundle],
        events: &[ContactEvent],
        tracks: Option<Vec<PointTrack>>,
        extra: BTreeMap<String, Vec<Raster>>,
    ) -> Result<SceneRecord, ExportError> {
        let n = scene.num_frames();
        if bundles.len() != n {
            return Err(ExportError::InconsistentRecord(format!("{} frames rendered, scene has {n}", bundles.len())));
        }
        let res = scene.resolution;
        let cam = &scene.camera;
        let settings = SceneSettings {
            resolution: [res.width, res.height],
            frame_start: scene.frame_start,
            frame_end: scene.frame_end,
            frame_rate: scene.frame_rate,
            step_rate: scene.step_rate,
            gravity: arr3(&scene.gravity),
            ambient_light: scene.ambient_light,
            background_color: scene.background_color,
            master_rng_state: scene.master_rng_state,
            focal_length: cam.focal_length,
            sensor_width: cam.sensor_width,
            near_clip: cam.near_clip,
            far_clip: cam.far_clip,
        };
        let frames = bundles
            .iter()
            .map(|b| {
                let c = scene.camera_at(b.frame as f64);
                FrameRecord {
                    frame: b.frame,
                    camera: CameraFrame {
                        position: arr3(&c.position),
                        quaternion: quat_to_wxyz(&c.orientation),
                        k: mat_rows(&c.intrinsics(res)),
                    },
                    backward_flow_valid: b.backward_flow_valid,
                    clamped_flow_pixels: b.clamped_flow_pixels,
                }
            })
            .collect();
        let histograms: Vec<BTreeMap<u32, u64>> = bundles.iter().map(|b| segmentation_histogram(&b.segmentation)).collect();
        let mut instances = Vec::new();
        for obj in scene.objects() {
            let geom = scene.library.get(&obj.asset_ref).ok_or_else(|| ExportError::UnknownAsset(obj.asset_ref.clone()))?;
            let bounds = object_bounds(geom);
            let per_frame = bundles
                .iter()
                .zip(&histograms)
                .map(|(b, hist)| {
                    let f = b.frame as f64;
                    let pose = obj.pose_at(f);
                    let velocity = obj.tracks.velocity.get(b.frame).copied().unwrap_or(obj.velocity);
                    let angular = obj.tracks.angular_velocity.get(b.frame).copied().unwrap_or(obj.angular_velocity);
                    InstanceFrame {
                        position: arr3(&pose.position),
                        quaternion: quat_to_wxyz(&pose.orientation),
                        velocity: arr3(&velocity),
                        angular_velocity: arr3(&angular),
                        bbox_2d: compute_bbox_2d(&b.segmentation, res, obj.segmentation_id),
                        visible_pixels: hist.get(&obj.segmentation_id).copied().unwrap_or(0),
                    }
                })
                .collect();
            instances.push(InstanceRecord {
                uid: obj.uid.clone(),
                asset_ref: obj.asset_ref.clone(),
                segmentation_id: obj.segmentation_id,
                mass: obj.mass,
                friction: obj.friction,
                restitution: obj.restitution,
                scale: obj.scale,
                is_static: obj.is_static,
                bbox_3d: Bbox3d { min: arr3(&bounds.min), max: arr3(&bounds.max) },
                frames: per_frame,
            });
        }
        let mut layers: BTreeMap<String, Vec<Raster>> = BTreeMap::new();
        for b in bundles {
            for (name, r) in bundle_rasters(b) {
                layers.entry(name.to_string()).or_default().push(r);
            }
        }
        for (name, rasters) in extra {
            if layers.contains_key(&name) {
                return Err(ExportError::InconsistentRecord(format!("layer {name} given twice")));
            }
            layers.insert(name, rasters);
        }
        let record = SceneRecord {
            metadata: Metadata {
                format_version: FORMAT_VERSION,
                scene: settings,
                num_frames: n,
                layers: layers.keys().cloned().collect(),
                frames,
                instances,
                attributes: BTreeMap::new(),
            },
            events: events.iter().map(EventRecord::from).collect(),
            layers,
            tracks,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn layer(&self, name: &str) -> Option<&[Raster]> {
        self.layers.get(name).map(|v| v.as_slice())
    }

    /// Checks counts, shapes and the segmentation/metadata agreement.
    pub fn validate(&self) -> Result<(), ExportError> {
        let bad = |m: String| Err(ExportError::InconsistentRecord(m));
        let md = &self.metadata;
        let n = md.num_frames;
        let [w, h] = md.scene.resolution;
        if md.scene.frame_end < md.scene.frame_start || (md.scene.frame_end - md.scene.frame_start + 1) as usize != n {
            return bad(format!("frame range does not give {n} frames"));
        }
        if md.frames.len() != n {
            return bad(format!("{} camera frames for {n} frames", md.frames.len()));
        }
        let names: Vec<String> = self.layers.keys().cloned().collect();
        if names != md.layers {
            return bad("layer list does not match the rasters".into());
        }
        for (name, channels) in CORE_LAYERS {
            if !self.layers.contains_key(name) {
                return bad(format!("missing core layer {name}"));
            }
            if self.layers[name].iter().any(|r| r.channels != channels) {
                return bad(format!("layer {name} must have {channels} channels"));
            }
        }
        for (name, rasters) in &self.layers {
            if rasters.len() != n {
                return bad(format!("layer {name} has {} frames, expected {n}", rasters.len()));
            }
            if rasters.iter().any(|r| r.width != w || r.height != h || r.channels != rasters[0].channels) {
                return bad(format!("layer {name} has inconsistent shapes"));
            }
        }
        let mut ids = BTreeSet::new();
        for inst in &md.instances {
            if inst.frames.len() != n {
                return bad(format!("instance {} has {} frames", inst.uid, inst.frames.len()));
            }
            if !ids.insert(inst.segmentation_id) {
                return bad(format!("segmentation id {} used twice", inst.segmentation_id));
            }
        }
        for (i, seg) in self.layers["segmentation"].iter().enumerate() {
            let Some(seg) = seg.as_u32() else {
                return bad("segmentation must be u32".into());
            };
            let hist = segmentation_histogram(seg);
            for id in hist.keys() {
                if *id != 0 && !ids.contains(id) {
                    return bad(format!("segmentation id {id} at frame index {i} has no instance"));
                }
            }
            for inst in &md.instances {
                let count = hist.get(&inst.segmentation_id).copied().unwrap_or(0);
                if inst.frames[i].visible_pixels != count {
                    return bad(format!("visible pixel count of {} at frame index {i} disagrees with the raster", inst.uid));
                }
            }
        }
        if let Some(tracks) = &self.tracks {
            if tracks.iter().any(|t| t.positions.len() != n || t.visible.len() != n) {
                return bad("track length differs from the frame count".into());
            }
        }
        Ok(())
    }
}

/// Sorted keys, two-space indentation, trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, ExportError> {
    let v = serde_json::to_value(value).map_err(|e| ExportError::Json(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| ExportError::Json(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    std::fs::write(path, bytes).map_err(|e| ExportError::io(path, e))
}

/// Binary PPM of the rgb channels with gamma 2.2 encoding.
pub fn preview_ppm(rgba: &Raster) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", rgba.width, rgba.height).into_bytes();
    let data = rgba.as_f32().unwrap_or(&[]);
    for px in data.chunks_exact(rgba.channels as usize) {
        for &c in &px[..3] {
            let v = (c as f64).clamp(0.0, 1.0).powf(1.0 / 2.2);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

pub fn write_scene_record(dir: &Path, record: &SceneRecord) -> Result<(), ExportError> {
    record.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| ExportError::io(dir, e))?;
    write_file(&dir.join(METADATA_FILE), to_canonical_json(&record.metadata)?.as_bytes())?;
    write_file(&dir.join(EVENTS_FILE), to_canonical_json(&record.events)?.as_bytes())?;
    let tracks_path = dir.join(TRACKS_FILE);
    match &record.tracks {
        Some(tracks) => {
            let doc = TracksDocument { num_frames: record.metadata.num_frames, tracks: tracks.clone() };
            write_file(&tracks_path, to_canonical_json(&doc)?.as_bytes())?;
        }
        None if tracks_path.exists() => std::fs::remove_file(&tracks_path).map_err(|e| ExportError::io(&tracks_path, e))?,
        None => {}
    }
    for (name, rasters) in &record.layers {
        for (i, r) in rasters.iter().enumerate() {
            write_raster(&dir.join(raster_file_name(name, i)), r)?;
        }
    }
    for (i, r) in record.layers["rgba"].iter().enumerate() {
        write_file(&dir.join(preview_file_name(i)), &preview_ppm(r))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, ExportError> {
    if !path.exists() {
        return Err(ExportError::IncompleteRecord(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|e| ExportError::io(path, e))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ExportError> {
    serde_json::from_str(text).map_err(|e| ExportError::Format(format!("{}: {e}", path.display())))
}

pub fn read_metadata(dir: &Path) -> Result<Metadata, ExportError> {
    let path = dir.join(METADATA_FILE);
    parse(&path, &read_text(&path)?)
}

pub fn read_tracks_file(path: &Path) -> Result<TracksDocument, ExportError> {
    parse(path, &read_text(path)?)
}

/// Reads one raster of a record, reporting a missing file as incomplete.
pub fn read_layer(dir: &Path, layer: &str, index: usize) -> Result<Raster, ExportError> {
    let path: PathBuf = dir.join(raster_file_name(layer, index));
    if !path.exists() {
        return Err(ExportError::IncompleteRecord(path));
    }
    read_raster(&path)
}

pub fn read_scene_record(dir: &Path) -> Result<SceneRecord, ExportError> {
    let metadata = read_metadata(dir)?;
    let events_path = dir.join(EVENTS_FILE);
    let events: Vec<EventRecord> = parse(&events_path, &read_text(&events_path)?)?;
    let mut layers = BTreeMap::new();
    for name in &metadata.layers {
        let rasters = (0..metadata.num_frames).map(|i| read_layer(dir, name, i)).collect::<Result<Vec<_>, _>>()?;
        layers.insert(name.clone(), rasters);
    }
    let tracks_path = dir.join(TRACKS_FILE);
    let tracks = if tracks_path.exists() {
        let doc = read_tracks_file(&tracks_path)?;
        if doc.num_frames != metadata.num_frames {
            return Err(ExportError::InconsistentRecord("tracks.json frame count differs".into()));
        }
        Some(doc.tracks)
    } else {
        None
    };
    let record = SceneRecord { metadata, events, layers, tracks };
    record.validate()?;
    Ok(record)
}
