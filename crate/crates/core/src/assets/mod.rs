//! Asset pipeline: manifests, meshes, convex collision proxies and mass
//! properties.

mod hull;
mod library;
mod manifest;
mod mass;
mod mesh;
mod primitives;
mod shape;

pub use hull::{convex_hull, convex_hull_indexed, hull_signed_distance, HULL_EPSILON};
pub use library::{AssetGeometry, AssetLibrary, KUBASIC};
pub use manifest::{parse_manifest, AssetManifest, ManifestEntry, DEFAULT_DENSITY, DEFAULT_FRICTION, DEFAULT_RESTITUTION};
pub use mass::{mass_properties, MassProperties};
pub use mesh::{load_mesh, TriangleMesh};
pub use primitives::{make_primitive, Primitive, PrimitiveKind};
pub use shape::{make_collision_shape, CollisionShape, ConvexHull};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssetError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate asset id {0:?}")]
    DuplicateAsset(String),
    #[error("asset {entry:?} is missing required field {field:?}")]
    MissingField { entry: String, field: String },
    #[error("face references vertex {index} but the mesh has {count}")]
    IndexError { index: usize, count: usize },
    #[error("mesh has no geometry")]
    EmptyMesh,
    #[error("triangle {0} has zero area")]
    DegenerateTriangle(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("mesh encloses non-positive signed volume {signed_volume}; fix the winding")]
    InvalidWinding { signed_volume: f64 },
    #[error("invalid mass {0}")]
    InvalidMass(f64),
    #[error("invalid primitive size {0}")]
    InvalidSize(f64),
    #[error("unknown primitive {0:?}")]
    UnknownPrimitive(String),
    #[error("io: {0}")]
    Io(String),
}
