//! `manifest.json`: the index of an asset source directory.
//!
//! ```json
//! {
//!   "name": "kubasic",
//!   "version": "1.0",
//!   "assets": {
//!     "cube": {
//!       "asset_type": "FileBasedObject",
//!       "bounds": [[-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]],
//!       "render_mesh": "cube/visual.obj",
//!       "collision_meshes": ["cube/collision.obj"],
//!       "mass": 1000.0,
//!       "friction": 0.5,
//!       "restitution": 0.5
//!     }
//!   }
//! }
//! ```
//!
//! `collision_meshes`, `mass`, `friction` and `restitution` are optional.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::assets::AssetError;
use crate::math::{arr3, vec3, Aabb};

pub const DEFAULT_FRICTION: f64 = 0.5;
pub const DEFAULT_RESTITUTION: f64 = 0.5;
/// Used to derive a mass from the mesh volume when the entry has none.
pub const DEFAULT_DENSITY: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub asset_type: String,
    pub bounds: Aabb,
    pub render_mesh: String,
    pub collision_meshes: Vec<String>,
    /// `None` means "density 1000 kg/m³ times the mesh volume".
    pub mass: Option<f64>,
    pub friction: f64,
    pub restitution: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssetManifest {
    pub name: String,
    pub version: String,
    pub entries: BTreeMap<String, ManifestEntry>,
}

/// Object entries in document order, duplicates preserved.
struct RawEntries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for RawEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RawEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of asset entries")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawEntries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(RawEntries(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Deserialize)]
struct RawManifest {
    name: Option<String>,
    version: Option<String>,
    assets: Option<RawEntries>,
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, id: &str, name: &str) -> Result<&'a Value, AssetError> {
    obj.get(name).ok_or_else(|| AssetError::MissingField { entry: id.to_string(), field: name.to_string() })
}

fn bad(id: &str, name: &str, message: &str) -> AssetError {
    AssetError::Parse { line: 0, message: format!("asset {id:?} field {name:?}: {message}") }
}

fn number(v: &Value, id: &str, name: &str) -> Result<f64, AssetError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| bad(id, name, "expected a finite number"))
}

fn point(v: &Value, id: &str) -> Result<[f64; 3], AssetError> {
    let a = v.as_array().filter(|a| a.len() == 3).ok_or_else(|| bad(id, "bounds", "expected [x, y, z]"))?;
    Ok([number(&a[0], id, "bounds")?, number(&a[1], id, "bounds")?, number(&a[2], id, "bounds")?])
}

fn parse_entry(id: &str, v: &Value) -> Result<ManifestEntry, AssetError> {
    let obj = v.as_object().ok_or_else(|| bad(id, "", "entry must be an object"))?;
    let string = |name: &str| -> Result<String, AssetError> {
        field(obj, id, name)?.as_str().map(str::to_string).ok_or_else(|| bad(id, name, "expected a string"))
    };
    let asset_type = string("asset_type")?;
    let render_mesh = string("render_mesh")?;
    let b = field(obj, id, "bounds")?.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad(id, "bounds", "expected [min, max]"))?;
    let bounds = Aabb { min: vec3(point(&b[0], id)?), max: vec3(point(&b[1], id)?) };
    if !bounds.is_valid() {
        return Err(bad(id, "bounds", "min exceeds max"));
    }
    let collision_meshes = match obj.get("collision_meshes") {
        None => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .map(|p| p.as_str().map(str::to_string).ok_or_else(|| bad(id, "collision_meshes", "expected strings")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(bad(id, "collision_meshes", "expected a list of paths")),
    };
    let mass = match obj.get("mass") {
        None | Some(Value::Null) => None,
        Some(m) => {
            let m = number(m, id, "mass")?;
            if m <= 0.0 {
                return Err(bad(id, "mass", "must be positive"));
            }
            Some(m)
        }
    };
    let friction = obj.get("friction").map(|v| number(v, id, "friction")).transpose()?.unwrap_or(DEFAULT_FRICTION);
    if friction < 0.0 {
        return Err(bad(id, "friction", "must be non-negative"));
    }
    let restitution =
        obj.get("restitution").map(|v| number(v, id, "restitution")).transpose()?.unwrap_or(DEFAULT_RESTITUTION);
    if !(0.0..=1.0).contains(&restitution) {
        return Err(bad(id, "restitution", "must lie in [0, 1]"));
    }
    Ok(ManifestEntry { asset_type, bounds, render_mesh, collision_meshes, mass, friction, restitution })
}

pub fn parse_manifest(text: &str) -> Result<AssetManifest, AssetError> {
    let raw: RawManifest =
        serde_json::from_str(text).map_err(|e| AssetError::Parse { line: e.line(), message: e.to_string() })?;
    let missing = |f: &str| AssetError::MissingField { entry: String::new(), field: f.to_string() };
    let name = raw.name.ok_or_else(|| missing("name"))?;
    let version = raw.version.ok_or_else(|| missing("version"))?;
    let raw_entries = raw.assets.ok_or_else(|| missing("assets"))?;
    let mut entries = BTreeMap::new();
    for (id, v) in &raw_entries.0 {
        if entries.contains_key(id) {
            return Err(AssetError::DuplicateAsset(id.clone()));
        }
        entries.insert(id.clone(), parse_entry(id, v)?);
    }
    Ok(AssetManifest { name, version, entries })
}

impl AssetManifest {
    pub fn to_json(&self) -> String {
        let assets: serde_json::Map<String, Value> = self
            .entries
            .iter()
            .map(|(id, e)| {
                let mut obj = json!({
                    "asset_type": e.asset_type,
                    "bounds": [arr3(&e.bounds.min), arr3(&e.bounds.max)],
                    "render_mesh": e.render_mesh,
                    "collision_meshes": e.collision_meshes,
                    "friction": e.friction,
                    "restitution": e.restitution,
                });
                if let Some(m) = e.mass {
                    obj["mass"] = json!(m);
                }
                (id.clone(), obj)
            })
            .collect();
        let doc = json!({ "name": self.name, "version": self.version, "assets": assets });
        let mut s = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{
        "name": "tiny", "version": "1",
        "assets": {
            "rock": {"asset_type": "FileBasedObject", "bounds": [[0,0,0],[1,2,3]], "render_mesh": "rock.obj"}
        }
    }"#;

    #[test]
    fn minimal_entry_gets_defaults() {
        let m = parse_manifest(MINIMAL).unwrap();
        let e = &m.entries["rock"];
        assert_eq!(e.friction, DEFAULT_FRICTION);
        assert_eq!(e.restitution, DEFAULT_RESTITUTION);
        assert_eq!(e.mass, None);
        assert!(e.collision_meshes.is_empty());
        assert_eq!(e.bounds.max, crate::math::Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn duplicate_ids() {
        let text = r#"{"name":"d","version":"1","assets":{
            "a":{"asset_type":"x","bounds":[[0,0,0],[1,1,1]],"render_mesh":"a.obj"},
            "a":{"asset_type":"x","bounds":[[0,0,0],[1,1,1]],"render_mesh":"b.obj"}}}"#;
        assert!(matches!(parse_manifest(text), Err(AssetError::DuplicateAsset(id)) if id == "a"));
    }

    #[test]
    fn missing_required_field() {
        let text = r#"{"name":"d","version":"1","assets":{"a":{"asset_type":"x","bounds":[[0,0,0],[1,1,1]]}}}"#;
        match parse_manifest(text) {
            Err(AssetError::MissingField { entry, field }) => {
                assert_eq!(entry, "a");
                assert_eq!(field, "render_mesh");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_reports_line() {
        let text = "{\n\"name\": \"x\",\n\"version\": 1 2\n}";
        match parse_manifest(text) {
            Err(AssetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inverted_bounds_rejected() {
        let text = r#"{"name":"d","version":"1","assets":{"a":{"asset_type":"x","bounds":[[1,0,0],[0,1,1]],"render_mesh":"a"}}}"#;
        assert!(matches!(parse_manifest(text), Err(AssetError::Parse { .. })));
    }

    fn entry_strategy() -> impl Strategy<Value = ManifestEntry> {
        (
            "[A-Za-z]{1,8}",
            prop::array::uniform3(-100.0f64..100.0),
            prop::array::uniform3(0.0f64..50.0),
            "[a-z/]{1,12}\\.obj",
            prop::collection::vec("[a-z]{1,6}\\.obj", 0..3),
            prop::option::of(0.01f64..1e4),
            0.0f64..2.0,
            0.0f64..=1.0,
        )
            .prop_map(|(asset_type, lo, ext, render_mesh, collision_meshes, mass, friction, restitution)| {
                let min = vec3(lo);
                ManifestEntry {
                    asset_type,
                    bounds: Aabb { min, max: min + vec3(ext) },
                    render_mesh,
                    collision_meshes,
                    mass,
                    friction,
                    restitution,
                }
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(
            name in "[a-z]{1,10}",
            version in "[0-9.]{1,5}",
            entries in prop::collection::btree_map("[a-z_0-9]{1,10}", entry_strategy(), 0..6),
        ) {
            let m = AssetManifest { name, version, entries };
            let back = parse_manifest(&m.to_json()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
