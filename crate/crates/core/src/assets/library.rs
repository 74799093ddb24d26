use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::assets::manifest::{parse_manifest, AssetManifest, DEFAULT_DENSITY, DEFAULT_FRICTION, DEFAULT_RESTITUTION};
use crate::assets::shape::ConvexHull;
use crate::assets::{
    convex_hull, load_mesh, make_collision_shape, make_primitive, mass_properties, AssetError, CollisionShape,
    MassProperties, PrimitiveKind, TriangleMesh,
};
use crate::math::Vec3;

/// Render and collision geometry of one asset, in the asset frame.
#[derive(Clone, Debug, PartialEq)]
pub struct AssetGeometry {
    pub id: String,
    pub render: TriangleMesh,
    pub collision: CollisionShape,
    /// Properties at mass 1 and scale 1; `None` for open meshes, which can
    /// only be used for static objects.
    pub unit_mass: Option<MassProperties>,
    pub mass: f64,
    pub friction: f64,
    pub restitution: f64,
}

impl AssetGeometry {
    pub fn from_mesh(id: &str, render: TriangleMesh, collision: CollisionShape) -> AssetGeometry {
        let unit_mass = mass_properties(&render, 1.0)
            .ok()
            .or_else(|| hull_mass(&collision));
        let mass = unit_mass.map_or(0.0, |p| p.volume * DEFAULT_DENSITY);
        AssetGeometry {
            id: id.to_string(),
            render,
            collision,
            unit_mass,
            mass,
            friction: DEFAULT_FRICTION,
            restitution: DEFAULT_RESTITUTION,
        }
    }

    /// Mass properties for the asset scaled by `scale` with total `mass`.
    pub fn scaled_mass_properties(&self, scale: f64, mass: f64) -> Option<MassProperties> {
        self.unit_mass.map(|p| MassProperties {
            mass,
            volume: p.volume * scale.powi(3),
            center_of_mass: p.center_of_mass * scale,
            inertia_tensor: p.inertia_tensor * (mass * scale * scale),
        })
    }

    pub fn volume(&self, scale: f64) -> f64 {
        self.unit_mass.map_or(0.0, |p| p.volume * scale.powi(3))
    }
}

fn hull_mass(shape: &CollisionShape) -> Option<MassProperties> {
    let verts = shape.vertices()?;
    mass_properties(&convex_hull(&verts).ok()?, 1.0).ok()
}

/// Geometry addressed by asset reference strings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssetLibrary {
    entries: BTreeMap<String, Arc<AssetGeometry>>,
}

/// Built-in primitive assets and their canonical sizes (about unit extent).
pub const KUBASIC: [(&str, PrimitiveKind, f64); 6] = [
    ("cube", PrimitiveKind::Cube, 1.0),
    ("sphere", PrimitiveKind::Sphere, 0.5),
    ("cylinder", PrimitiveKind::Cylinder, 0.5),
    ("cone", PrimitiveKind::Cone, 0.5),
    ("torus", PrimitiveKind::Torus, 0.4),
    ("plane", PrimitiveKind::Plane, 1.0),
];

impl AssetLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// The built-in primitive collection.
    pub fn kubasic() -> Self {
        let mut lib = AssetLibrary::new();
        for (id, kind, size) in KUBASIC {
            let mesh = make_primitive(kind, size).expect("positive size");
            let shape = make_collision_shape(&mesh).expect("primitives are not degenerate");
            lib.insert(AssetGeometry::from_mesh(id, mesh, shape));
        }
        lib
    }

    pub fn insert(&mut self, geometry: AssetGeometry) {
        self.entries.insert(geometry.id.clone(), Arc::new(geometry));
    }

    pub fn get(&self, id: &str) -> Option<&Arc<AssetGeometry>> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Loads every asset indexed by `dir/manifest.json`. Collision meshes,
    /// when listed, are merged into a single convex hull.
    pub fn load_source(dir: &Path) -> Result<(AssetManifest, AssetLibrary), AssetError> {
        let read = |rel: &str| fs::read_to_string(dir.join(rel)).map_err(|e| AssetError::Io(format!("{rel}: {e}")));
        let manifest = parse_manifest(&read("manifest.json")?)?;
        let mut lib = AssetLibrary::new();
        for (id, entry) in &manifest.entries {
            let render = load_mesh(&read(&entry.render_mesh)?)?;
            let collision = if entry.collision_meshes.is_empty() {
                make_collision_shape(&render)?
            } else {
                let mut pts: Vec<Vec3> = Vec::new();
                for path in &entry.collision_meshes {
                    pts.extend(load_mesh(&read(path)?)?.vertices);
                }
                CollisionShape::ConvexHull(ConvexHull::from_mesh(&convex_hull(&pts)?))
            };
            let mut geom = AssetGeometry::from_mesh(id, render, collision);
            if let Some(m) = entry.mass {
                geom.mass = m;
            }
            geom.friction = entry.friction;
            geom.restitution = entry.restitution;
            lib.insert(geom);
        }
        Ok((manifest, lib))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kubasic_has_solids_with_mass() {
        let lib = AssetLibrary::kubasic();
        for id in ["cube", "sphere", "cylinder", "cone", "torus"] {
            let g = lib.get(id).unwrap();
            assert!(g.unit_mass.is_some(), "{id}");
            let ext = g.render.bounds().extent();
            assert!(ext.max() <= 1.0 + 1e-12 && ext.max() >= 0.9, "{id} extent {ext}");
        }
        assert_eq!(lib.get("cube").unwrap().mass, 1000.0);
    }

    #[test]
    fn scaled_properties() {
        let lib = AssetLibrary::kubasic();
        let cube = lib.get("cube").unwrap();
        let p = cube.scaled_mass_properties(2.0, 6.0).unwrap();
        assert!((p.volume - 8.0).abs() < 1e-12);
        // Solid cube of edge 2: I = m (a² + a²) / 12 = 6 * 8 / 12 = 4.
        assert!((p.inertia_tensor[(0, 0)] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn loads_source_directory() {
        let dir = tempfile::tempdir().unwrap();
        let cube = make_primitive(PrimitiveKind::Cube, 2.0).unwrap();
        fs::write(dir.path().join("box.obj"), cube.to_text()).unwrap();
        fs::write(
            dir.path().join("manifest.json"),
            r#"{"name":"s","version":"1","assets":{"box":{"asset_type":"FileBasedObject",
                "bounds":[[-1,-1,-1],[1,1,1]],"render_mesh":"box.obj","collision_meshes":["box.obj"],"friction":0.3}}}"#,
        )
        .unwrap();
        let (manifest, lib) = AssetLibrary::load_source(dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 1);
        let g = lib.get("box").unwrap();
        assert!((g.mass - 8000.0).abs() < 1e-6);
        assert_eq!(g.friction, 0.3);
        assert!(matches!(g.collision, CollisionShape::ConvexHull(_)));
    }

    #[test]
    fn missing_mesh_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("manifest.json"),
            r#"{"name":"s","version":"1","assets":{"x":{"asset_type":"o","bounds":[[0,0,0],[1,1,1]],"render_mesh":"nope.obj"}}}"#,
        )
        .unwrap();
        assert!(matches!(AssetLibrary::load_source(dir.path()), Err(AssetError::Io(_))));
    }
}
