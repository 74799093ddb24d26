use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::math::{quat_from_wxyz, Quat, Vec3};
use crate::scene::SceneError;

/// Values that can be blended between two keys.
pub trait Interpolate: Clone {
    fn interpolate(a: &Self, b: &Self, s: f64) -> Self;
}

impl Interpolate for Vec3 {
    fn interpolate(a: &Self, b: &Self, s: f64) -> Self {
        a + (b - a) * s
    }
}

impl Interpolate for Quat {
    fn interpolate(a: &Self, b: &Self, s: f64) -> Self {
        // Shortest arc; the antipodal case falls back to nlerp.
        let q = a.try_slerp(b, s, 1e-12).unwrap_or_else(|| a.nlerp(b, s));
        crate::math::renormalize(&q)
    }
}

/// Sorted `frame -> value` samples of one animated property.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyframeTrack<T> {
    keys: BTreeMap<i32, T>,
}

impl<T> Default for KeyframeTrack<T> {
    fn default() -> Self {
        KeyframeTrack { keys: BTreeMap::new() }
    }
}

impl<T: Interpolate> KeyframeTrack<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores a key, replacing any key already at `frame`.
    pub fn insert(&mut self, frame: i32, value: T) {
        self.keys.insert(frame, value);
    }

    pub fn get(&self, frame: i32) -> Option<&T> {
        self.keys.get(&frame)
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &T)> {
        self.keys.iter().map(|(f, v)| (*f, v))
    }

    pub fn first_frame(&self) -> Option<i32> {
        self.keys.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<i32> {
        self.keys.keys().next_back().copied()
    }

    /// Value at a real-valued frame: linear (slerp for rotations) between
    /// the bracketing keys, held constant outside the keyed range.
    pub fn interpolate(&self, frame: f64) -> Result<T, SceneError> {
        let (&f0, v0) = self.keys.iter().next().ok_or(SceneError::EmptyTrack)?;
        let (&f1, v1) = self.keys.iter().next_back().unwrap();
        if frame <= f0 as f64 {
            return Ok(v0.clone());
        }
        if frame >= f1 as f64 {
            return Ok(v1.clone());
        }
        let lo = frame.floor() as i32;
        let (&ka, va) = self.keys.range(..=lo).next_back().unwrap();
        let (&kb, vb) = self.keys.range(lo + 1..).next().unwrap();
        if ka as f64 == frame {
            return Ok(va.clone());
        }
        let s = (frame - ka as f64) / (kb - ka) as f64;
        Ok(T::interpolate(va, vb, s))
    }
}

/// Animatable properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    Position,
    Orientation,
    Velocity,
    AngularVelocity,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Position => "position",
            Property::Orientation => "orientation",
            Property::Velocity => "velocity",
            Property::AngularVelocity => "angular_velocity",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, SceneError> {
        match s {
            "position" => Ok(Property::Position),
            "orientation" | "quaternion" => Ok(Property::Orientation),
            "velocity" => Ok(Property::Velocity),
            "angular_velocity" => Ok(Property::AngularVelocity),
            other => Err(SceneError::UnknownProperty(other.to_string())),
        }
    }
}

/// A property value as supplied by callers. Quaternions are `[w, x, y, z]`
/// and need not be normalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KeyValue {
    Vector(Vec3),
    Quaternion([f64; 4]),
}

impl KeyValue {
    pub fn into_vector(self, property: Property) -> Result<Vec3, SceneError> {
        match self {
            KeyValue::Vector(v) if v.iter().all(|c| c.is_finite()) => Ok(v),
            _ => Err(SceneError::TypeMismatch(property.name().to_string())),
        }
    }

    pub fn into_quaternion(self, property: Property) -> Result<Quat, SceneError> {
        match self {
            KeyValue::Quaternion(q) => {
                let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
                if !(n > 1e-12 && n.is_finite()) {
                    return Err(SceneError::TypeMismatch(property.name().to_string()));
                }
                Ok(quat_from_wxyz(q))
            }
            _ => Err(SceneError::TypeMismatch(property.name().to_string())),
        }
    }
}

/// Per-object animation: one track per animatable property.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjectTracks {
    pub position: KeyframeTrack<Vec3>,
    pub orientation: KeyframeTrack<Quat>,
    pub velocity: KeyframeTrack<Vec3>,
    pub angular_velocity: KeyframeTrack<Vec3>,
}

impl ObjectTracks {
    pub fn insert(&mut self, property: Property, frame: i32, value: KeyValue) -> Result<(), SceneError> {
        match property {
            Property::Position => self.position.insert(frame, value.into_vector(property)?),
            Property::Orientation => self.orientation.insert(frame, value.into_quaternion(property)?),
            Property::Velocity => self.velocity.insert(frame, value.into_vector(property)?),
            Property::AngularVelocity => self.angular_velocity.insert(frame, value.into_vector(property)?),
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty() && self.orientation.is_empty() && self.velocity.is_empty() && self.angular_velocity.is_empty()
    }
}
