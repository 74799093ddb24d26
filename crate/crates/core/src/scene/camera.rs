//! Pinhole camera: intrinsics, projection and primary-ray generation.
//!
//! The camera looks along its local −Z with +Y up. Image coordinates put
//! `(0, 0)` at the centre of the top-left pixel, x to the right and y
//! downward, so integer coordinates address pixel centres.

use crate::math::{Mat3, Quat, Vec3};
use crate::scene::SceneError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

impl Resolution {
    pub fn new(width: u32, height: u32) -> Self {
        Resolution { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub x: f64,
    pub y: f64,
    /// Euclidean distance from the camera origin.
    pub distance: f64,
    /// Depth along the optical axis.
    pub axial_depth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerspectiveCamera {
    pub position: Vec3,
    pub orientation: Quat,
    /// Millimetres.
    pub focal_length: f64,
    /// Millimetres.
    pub sensor_width: f64,
    pub near_clip: f64,
    pub far_clip: f64,
}

impl Default for PerspectiveCamera {
    fn default() -> Self {
        PerspectiveCamera {
            position: Vec3::zeros(),
            orientation: Quat::identity(),
            focal_length: 50.0,
            sensor_width: 36.0,
            near_clip: 0.1,
            far_clip: 1000.0,
        }
    }
}

/// Orientation that points a camera at `position` towards `target`,
/// keeping world +Z up in the image.
pub fn look_at(position: &Vec3, target: &Vec3) -> Quat {
    let forward = (target - position).normalize();
    let up = if forward.cross(&Vec3::z()).norm() < 1e-9 { Vec3::y() } else { Vec3::z() };
    let right = forward.cross(&up).normalize();
    let cam_up = right.cross(&forward);
    let m = Mat3::from_columns(&[right, cam_up, -forward]);
    Quat::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m))
}

impl PerspectiveCamera {
    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.focal_length > 0.0
            && self.sensor_width > 0.0
            && self.near_clip > 0.0
            && self.near_clip < self.far_clip
            && self.position.iter().all(|c| c.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SceneError::InvalidCamera)
        }
    }

    pub fn looking_at(mut self, target: &Vec3) -> Self {
        self.orientation = look_at(&self.position, target);
        self
    }

    /// Focal length in pixels; equal on both axes.
    pub fn focal_pixels(&self, res: Resolution) -> f64 {
        res.width as f64 * self.focal_length / self.sensor_width
    }

    /// `K` mapping camera-frame rays (x right, y down, z forward) to
    /// pixel-corner coordinates.
    pub fn intrinsics(&self, res: Resolution) -> Mat3 {
        let f = self.focal_pixels(res);
        let (cx, cy) = (res.width as f64 / 2.0, res.height as f64 / 2.0);
        Mat3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0)
    }

    pub fn optical_axis(&self) -> Vec3 {
        self.orientation * -Vec3::z()
    }

    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.orientation.inverse() * (world - self.position)
    }

    /// Projection without the in-front check. `axial_depth` may be ≤ 0.
    pub fn project_unchecked(&self, world: &Vec3, res: Resolution) -> Projection {
        let p = self.to_camera(world);
        let f = self.focal_pixels(res);
        let z = -p.z;
        Projection {
            x: f * p.x / z + res.width as f64 / 2.0 - 0.5,
            y: -f * p.y / z + res.height as f64 / 2.0 - 0.5,
            distance: p.norm(),
            axial_depth: z,
        }
    }

    pub fn project(&self, world: &Vec3, res: Resolution) -> Result<Projection, SceneError> {
        let pr = self.project_unchecked(world, res);
        if pr.axial_depth <= 0.0 {
            return Err(SceneError::BehindCamera);
        }
        Ok(pr)
    }

    /// Primary ray through image point `(x, y)`; integer values hit pixel
    /// centres.
    pub fn generate_ray(&self, x: f64, y: f64, res: Resolution) -> Ray {
        let f = self.focal_pixels(res);
        let local = Vec3::new(
            (x + 0.5 - res.width as f64 / 2.0) / f,
            -(y + 0.5 - res.height as f64 / 2.0) / f,
            -1.0,
        );
        Ray { origin: self.position, direction: (self.orientation * local).normalize() }
    }
}
