//! Reference camera rays for cross-checking consumers that rebuild rays
//! from the metadata camera.

use serde::{Deserialize, Serialize};

use super::{ExportError, Metadata};
use crate::math::{arr3, quat_from_wxyz, vec3};
use crate::rng::Rng;
use crate::scene::{PerspectiveCamera, Resolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRay {
    /// Integer pixel `[x, y]`; the ray passes through the pixel centre.
    pub pixel: [u32; 2],
    pub origin: [f64; 3],
    /// Unit length.
    pub direction: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayFixture {
    /// Zero-based frame index within the record.
    pub frame_index: usize,
    pub resolution: [u32; 2],
    pub rays: Vec<ReferenceRay>,
}

/// Camera of frame `index` as stored in the metadata.
pub fn metadata_camera(md: &Metadata, index: usize) -> Result<PerspectiveCamera, ExportError> {
    let f = md
        .frames
        .get(index)
        .ok_or_else(|| ExportError::Format(format!("frame index {index} out of range ({} frames)", md.frames.len())))?;
    Ok(PerspectiveCamera {
        position: vec3(f.camera.position),
        orientation: quat_from_wxyz(f.camera.quaternion),
        focal_length: md.scene.focal_length,
        sensor_width: md.scene.sensor_width,
        near_clip: md.scene.near_clip,
        far_clip: md.scene.far_clip,
    })
}

/// `count` pixels drawn uniformly (with replacement) and their primary
/// rays.
pub fn reference_rays(md: &Metadata, index: usize, count: usize, rng: &mut Rng) -> Result<RayFixture, ExportError> {
    let cam = metadata_camera(md, index)?;
    let [w, h] = md.scene.resolution;
    let res = Resolution::new(w, h);
    let rays = (0..count)
        .map(|_| {
            let x = rng.below(w as usize) as u32;
            let y = rng.below(h as usize) as u32;
            let r = cam.generate_ray(x as f64, y as f64, res);
            ReferenceRay { pixel: [x, y], origin: arr3(&r.origin), direction: arr3(&r.direction) }
        })
        .collect();
    Ok(RayFixture { frame_index: index, resolution: [w, h], rays })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::tests::toy_record;
    use crate::math::Vec3;

    #[test]
    fn rays_agree_with_stored_intrinsics() {
        let rec = toy_record(false);
        let md = &rec.metadata;
        let fx = reference_rays(md, 1, 200, &mut Rng::new(4)).unwrap();
        assert_eq!(fx.rays.len(), 200);
        let cam = &md.frames[1].camera;
        let q = quat_from_wxyz(cam.quaternion);
        for r in &fx.rays {
            assert_eq!(r.origin, cam.position);
            let d = vec3(r.direction);
            assert!((d.norm() - 1.0).abs() < 1e-12);
            // K applied to the camera-frame direction (x, −y, −z) lands on the pixel centre.
            let c = q.inverse() * d;
            let v = Vec3::new(c.x, -c.y, -c.z);
            let k = cam.k;
            let u = (k[0][0] * v.x + k[0][1] * v.y + k[0][2] * v.z) / v.z;
            let w = (k[1][0] * v.x + k[1][1] * v.y + k[1][2] * v.z) / v.z;
            assert!((u - (r.pixel[0] as f64 + 0.5)).abs() < 1e-9);
            assert!((w - (r.pixel[1] as f64 + 0.5)).abs() < 1e-9);
        }
        assert!(reference_rays(md, 9, 1, &mut Rng::new(0)).is_err());
    }
}
