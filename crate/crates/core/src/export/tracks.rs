//! Ground-truth point tracks: a surface point picked at a query pixel is
//! carried rigidly with its object and projected into every frame.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ExportError;
use crate::math::{arr3, vec3, Vec3};
use crate::render::{project_clamped, FrameBundle, Renderer};
use crate::rng::Rng;
use crate::scene::{Resolution, Scene};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointTrack {
    /// `[x, y, t]`: query pixel and zero-based frame index.
    pub query: [f64; 3],
    /// One `[x, y]` per frame.
    pub positions: Vec<[f64; 2]>,
    pub visible: Vec<bool>,
    /// Uid of the object the point lies on; empty for predictions.
    #[serde(default)]
    pub instance: String,
    /// Point in the object's local frame.
    #[serde(default)]
    pub local_point: [f64; 3],
}

impl PointTrack {
    pub fn query_frame(&self) -> usize {
        self.query[2] as usize
    }

    pub fn num_frames(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackConfig {
    pub num_queries: usize,
    /// Fraction of an object's visible pixels (summed over frames) that
    /// caps its number of queries, rounded up.
    pub per_object_fraction: f64,
    /// Relative depth tolerance of the visibility test.
    pub depth_tolerance: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig { num_queries: 256, per_object_fraction: 0.002, depth_tolerance: 0.01 }
    }
}

impl TrackConfig {
    pub fn cap(&self, visible_pixels: usize) -> usize {
        (self.per_object_fraction * visible_pixels as f64).ceil() as usize
    }
}

/// Splits `total` queries round-robin over groups with the given caps.
fn allocate(total: usize, caps: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; caps.len()];
    let mut left = total;
    while left > 0 {
        let mut progressed = false;
        for (c, cap) in counts.iter_mut().zip(caps) {
            if left > 0 && *c < *cap {
                *c += 1;
                left -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    counts
}

/// `k` distinct indices below `n`, uniformly, by partial Fisher-Yates.
fn sample_distinct(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut chosen = BTreeMap::<usize, usize>::new();
    let mut out = Vec::with_capacity(k);
    for i in 0..k.min(n) {
        let j = i + rng.below(n - i);
        let vj = *chosen.get(&j).unwrap_or(&j);
        let vi = *chosen.get(&i).unwrap_or(&i);
        chosen.insert(j, vi);
        out.push(vj);
    }
    out
}

/// Pixel index containing image point `(x, y)`, if inside the image.
pub fn pixel_at(x: f64, y: f64, res: Resolution) -> Option<usize> {
    let (px, py) = ((x + 0.5).floor(), (y + 0.5).floor());
    if px < 0.0 || py < 0.0 || px >= res.width as f64 || py >= res.height as f64 {
        return None;
    }
    Some(py as usize * res.width as usize + px as usize)
}

/// Samples up to `num_queries` query pixels over all frames, balanced
/// across segmentation ids and capped per id, and tracks each one.
///
/// Queries in a group are uniform over its `(frame, pixel)` pairs. A point
/// is visible in a frame when it projects in front of the camera inside
/// the image and the depth raster there matches its distance.
pub fn extract_point_tracks(
    scene: &Scene,
    bundles: &[FrameBundle],
    config: &TrackConfig,
    rng: &mut Rng,
) -> Result<Vec<PointTrack>, ExportError> {
    let res = scene.resolution;
    let n = res.pixel_count();
    let mut groups: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for (fi, b) in bundles.iter().enumerate() {
        for (pi, &s) in b.segmentation.iter().enumerate() {
            if s != 0 && b.depth[pi].is_finite() {
                groups.entry(s).or_default().push((fi, pi));
            }
        }
    }
    if groups.is_empty() {
        return Err(ExportError::NoQueryCandidates);
    }
    let caps: Vec<usize> = groups.values().map(|g| config.cap(g.len())).collect();
    let counts = allocate(config.num_queries, &caps);

    let renderer = Renderer::new(scene)?;
    let frame_of = |fi: usize| bundles[fi].frame;
    let mut tracks = Vec::new();
    for ((&seg, candidates), &k) in groups.iter().zip(&counts) {
        let obj = scene
            .object_by_segmentation(seg)
            .ok_or_else(|| ExportError::InconsistentRecord(format!("segmentation id {seg} has no object")))?;
        for idx in sample_distinct(candidates.len(), k, rng) {
            let (fi, pi) = candidates[idx];
            let (x, y) = ((pi % res.width as usize) as f64, (pi / res.width as usize) as f64);
            let frame = frame_of(fi);
            let camera = scene.camera_at(frame as f64);
            let ray = camera.generate_ray(x, y, res);
            let state = renderer.state_at(frame as f64);
            let Some(hit) = state.intersect(&ray, &camera) else { continue };
            if hit.segmentation_id != seg {
                continue;
            }
            let local = hit.local_point;
            let mut positions = Vec::with_capacity(bundles.len());
            let mut visible = Vec::with_capacity(bundles.len());
            for (fj, b) in bundles.iter().enumerate() {
                let (pos, vis) = track_point(scene, &obj.uid, &local, b, config.depth_tolerance);
                positions.push(pos);
                visible.push(vis || fj == fi);
            }
            tracks.push(PointTrack {
                query: [x, y, fi as f64],
                positions,
                visible,
                instance: obj.uid.clone(),
                local_point: arr3(&local),
            });
        }
    }
    debug_assert!(tracks.iter().all(|t| t.positions.len() == bundles.len() && n > 0));
    Ok(tracks)
}

/// Position of an object-local point in one rendered frame and whether it
/// is visible there.
pub fn track_point(scene: &Scene, uid: &str, local: &Vec3, bundle: &FrameBundle, depth_tolerance: f64) -> ([f64; 2], bool) {
    let res = scene.resolution;
    let frame = bundle.frame as f64;
    let Some(obj) = scene.object(uid) else {
        return ([0.0, 0.0], false);
    };
    let world = obj.pose_at(frame).to_world(local);
    let camera = scene.camera_at(frame);
    let (p, clamped) = project_clamped(&camera, &world, res);
    let distance = (world - camera.position).norm();
    let visible = !clamped
        && pixel_at(p.x, p.y, res).is_some_and(|i| {
            let d = bundle.depth[i] as f64;
            d.is_finite() && (d - distance).abs() <= depth_tolerance * distance
        });
    ([p.x, p.y], visible)
}

/// Re-projects a track's local point with an explicit object pose per
/// frame; used to check stored tracks against stored metadata.
pub fn local_to_world(position: [f64; 3], quaternion: [f64; 4], scale: f64, local: [f64; 3]) -> Vec3 {
    let q = crate::math::quat_from_wxyz(quaternion);
    vec3(position) + q * (vec3(local) * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;
    use crate::render::render_frame;
    use crate::scene::{KeyValue, Light, RigidObject, CAMERA_UID};
    use std::collections::HashSet;

    #[test]
    fn allocation_is_balanced_and_capped() {
        assert_eq!(allocate(10, &[100, 100, 100]), vec![4, 3, 3]);
        assert_eq!(allocate(10, &[1, 100, 2]), vec![1, 7, 2]);
        assert_eq!(allocate(10, &[1, 2]), vec![1, 2]);
    }

    #[test]
    fn distinct_sampling() {
        let mut rng = Rng::new(9);
        let s = sample_distinct(50, 50, &mut rng);
        assert_eq!(s.iter().collect::<HashSet<_>>().len(), 50);
        let s = sample_distinct(1000, 20, &mut rng);
        assert_eq!(s.iter().collect::<HashSet<_>>().len(), 20);
        assert!(s.iter().all(|&i| i < 1000));
        assert_eq!(sample_distinct(3, 10, &mut rng).len(), 3);
    }

    fn camera_above(scene: &mut Scene) {
        scene.camera.position = Vec3::new(0.0, 0.0, 10.0);
        scene.camera.orientation = Quat::identity();
    }

    fn render_all(scene: &Scene) -> Vec<FrameBundle> {
        scene.frames().map(|f| render_frame(scene, f).unwrap()).collect()
    }

    #[test]
    fn static_scene_tracks_are_constant() {
        let mut scene = Scene::new(Resolution::new(32, 32));
        scene.frame_end = 3;
        camera_above(&mut scene);
        let mut cube = RigidObject::new("cube", "cube");
        cube.is_static = true;
        scene.add_object(cube).unwrap();
        scene.add_light(Light::point("sun", Vec3::new(0.0, 0.0, 20.0), [1.0; 3])).unwrap();
        let bundles = render_all(&scene);
        let cfg = TrackConfig { per_object_fraction: 0.05, ..Default::default() };
        let tracks = extract_point_tracks(&scene, &bundles, &cfg, &mut Rng::new(1)).unwrap();
        assert!(!tracks.is_empty());
        for t in &tracks {
            assert!(t.visible.iter().all(|v| *v));
            assert!(t.positions.iter().all(|p| *p == t.positions[0]));
            assert!((t.positions[0][0] - t.query[0]).abs() < 1e-9);
            assert!((t.positions[0][1] - t.query[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn nothing_visible() {
        let mut scene = Scene::new(Resolution::new(8, 8));
        scene.frame_end = 1;
        let bundles = render_all(&scene);
        let r = extract_point_tracks(&scene, &bundles, &TrackConfig::default(), &mut Rng::new(0));
        assert!(matches!(r, Err(ExportError::NoQueryCandidates)));
    }

    /// Box B jumps between the camera and box A at frame `K`.
    const K: i32 = 3;

    fn two_box_scene() -> Scene {
        let mut scene = Scene::new(Resolution::new(48, 48));
        scene.frame_end = 5;
        camera_above(&mut scene);
        scene.keyframe_insert(CAMERA_UID, "position", 0, KeyValue::Vector(Vec3::new(0.0, 0.0, 10.0))).unwrap();
        let mut a = RigidObject::new("a", "cube");
        a.is_static = true;
        scene.add_object(a).unwrap();
        let mut b = RigidObject::new("b", "cube");
        b.scale = 2.0;
        b.position = Vec3::new(-10.0, 0.0, 3.0);
        scene.add_object(b).unwrap();
        for f in 0..K {
            scene.keyframe_insert("b", "position", f, KeyValue::Vector(Vec3::new(-10.0, 0.0, 3.0))).unwrap();
        }
        for f in K..=6 {
            scene.keyframe_insert("b", "position", f, KeyValue::Vector(Vec3::new(0.0, 0.0, 3.0))).unwrap();
        }
        scene.add_light(Light::point("sun", Vec3::new(3.0, 2.0, 20.0), [1.0; 3])).unwrap();
        scene
    }

    /// Slab test: does the segment from `o` to `p` cross the box?
    fn segment_hits_box(o: &Vec3, p: &Vec3, min: &Vec3, max: &Vec3) -> bool {
        let d = p - o;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for i in 0..3 {
            if d[i].abs() < 1e-15 {
                if o[i] < min[i] || o[i] > max[i] {
                    return false;
                }
                continue;
            }
            let (a, b) = ((min[i] - o[i]) / d[i], (max[i] - o[i]) / d[i]);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        t0 <= t1
    }

    #[test]
    fn occluder_flips_visibility() {
        let scene = two_box_scene();
        let bundles = render_all(&scene);
        let cfg = TrackConfig { per_object_fraction: 1.0, num_queries: 64, ..Default::default() };
        let tracks = extract_point_tracks(&scene, &bundles, &cfg, &mut Rng::new(5)).unwrap();
        let on_a: Vec<&PointTrack> = tracks.iter().filter(|t| t.instance == "a").collect();
        assert!(on_a.len() >= 16);
        let cam = scene.camera.position;
        for t in on_a {
            // A is a unit cube at the origin seen from above: its top face.
            let world = vec3(t.local_point);
            assert!((world.z - 0.5).abs() < 1e-9);
            for (fi, f) in scene.frames().enumerate() {
                let b = scene.object("b").unwrap().pose_at(f as f64).position;
                let hidden = segment_hits_box(&cam, &world, &(b - Vec3::repeat(1.0)), &(b + Vec3::repeat(1.0)));
                assert_eq!(hidden, f >= K);
                assert_eq!(t.visible[fi], !hidden, "frame {f}");
            }
            assert!(t.visible[(K - 1) as usize] && !t.visible[K as usize]);
        }
    }

    #[test]
    fn cap_and_budget() {
        let scene = two_box_scene();
        let bundles = render_all(&scene);
        let cfg = TrackConfig::default();
        let tracks = extract_point_tracks(&scene, &bundles, &cfg, &mut Rng::new(2)).unwrap();
        assert!(tracks.len() <= 256);
        for (uid, seg) in [("a", 1u32), ("b", 2u32)] {
            let visible: usize = bundles.iter().map(|b| b.segmentation.iter().filter(|s| **s == seg).count()).sum();
            let n = tracks.iter().filter(|t| t.instance == uid).count();
            assert_eq!(n, cfg.cap(visible));
        }
    }
}
