//! Scene representation: labeled meshes, object models and scene variants.

mod description;
pub mod library;
pub mod mesh;
pub mod presets;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use description::{
    DecorSpec, DoorSpec, ReceptacleKind, ReceptacleSpec, RoomSpec, SceneDescription, SurfaceTruth, SCHEMA_VERSION,
};
pub use library::{ObjectLibrary, ObjectModel};
pub use mesh::TriangleMesh;

use crate::raycast::Bvh;
use crate::{geom, Error, Point2, Point3, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Receptacle,
    Decor,
    Object,
    Unknown,
}

impl InstanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InstanceKind::Receptacle => "receptacle",
            InstanceKind::Decor => "decor",
            InstanceKind::Object => "object",
            InstanceKind::Unknown => "unknown",
        }
    }

    fn parse(s: &str) -> Self {
        match s {
            "receptacle" => InstanceKind::Receptacle,
            "decor" => InstanceKind::Decor,
            "object" => InstanceKind::Object,
            _ => InstanceKind::Unknown,
        }
    }
}

/// Ground-truth annotation for a labeled sub-mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub id: u32,
    pub label: String,
    pub kind: InstanceKind,
    pub room: Option<String>,
    /// Stable key: receptacle id, placed object id, decor index.
    pub key: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionTruth {
    pub room: String,
    pub region: String,
    pub polygon: Vec<Point2>,
    pub floor_z: f64,
}

/// Immutable labeled scene with a ray-casting acceleration structure.
#[derive(Clone, Debug)]
pub struct Scene {
    pub id: String,
    pub mesh: TriangleMesh,
    pub instances: Vec<InstanceInfo>,
    pub regions: Vec<RegionTruth>,
    pub description: Option<SceneDescription>,
    bvh: Arc<Bvh>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneFormat {
    MeshAscii,
    SceneJson,
}

impl std::str::FromStr for SceneFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mesh-ascii" => Ok(SceneFormat::MeshAscii),
            "scene-json" => Ok(SceneFormat::SceneJson),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

impl SceneFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(SceneFormat::SceneJson),
            Some("mesh") | Some("txt") => Ok(SceneFormat::MeshAscii),
            other => Err(Error::UnsupportedFormat(format!("{other:?}"))),
        }
    }
}

impl Scene {
    pub(crate) fn assemble(
        id: String,
        mesh: TriangleMesh,
        instances: Vec<InstanceInfo>,
        regions: Vec<RegionTruth>,
        description: Option<SceneDescription>,
    ) -> Result<Self> {
        mesh.validate()?;
        let bvh = Arc::new(Bvh::build(&mesh));
        Ok(Scene {
            id,
            mesh,
            instances,
            regions,
            description,
            bvh,
        })
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn instance(&self, id: u32) -> Option<&InstanceInfo> {
        self.instances.get(id as usize)
    }

    pub fn from_ascii(text: &str, source_name: &str, scene_id: &str) -> Result<Self> {
        let parsed = mesh::parse_ascii(text, source_name)?;
        let mut instances: Vec<InstanceInfo> = Vec::new();
        let mut by_token: BTreeMap<String, u32> = BTreeMap::new();
        let mut face_instance = Vec::with_capacity(parsed.face_labels.len());
        for label in &parsed.face_labels {
            face_instance.push(label.as_ref().map(|tok| {
                *by_token.entry(tok.clone()).or_insert_with(|| {
                    let (kind, rest) = match tok.split_once('/') {
                        Some((k, r)) => (InstanceKind::parse(k), r),
                        None => (InstanceKind::Unknown, tok.as_str()),
                    };
                    let label = rest.rsplit_once('#').map(|(l, _)| l).unwrap_or(rest);
                    let id = instances.len() as u32;
                    instances.push(InstanceInfo {
                        id,
                        label: label.to_string(),
                        kind,
                        room: None,
                        key: Some(tok.clone()),
                    });
                    id
                })
            }));
        }
        let mesh = TriangleMesh {
            vertices: parsed.vertices,
            triangles: parsed.triangles,
            face_instance,
        };
        Scene::assemble(scene_id.to_string(), mesh, instances, Vec::new(), None)
    }

    pub fn to_ascii(&self) -> String {
        mesh::write_ascii(&self.mesh, |i| {
            let inst = &self.instances[i as usize];
            format!("{}/{}#{}", inst.kind.as_str(), inst.label, inst.id)
        })
    }

    /// Canonical serialization: the scene description when the scene came from
    /// one, otherwise the ASCII mesh.
    pub fn serialize(&self) -> String {
        match &self.description {
            Some(d) => d.to_json(),
            None => self.to_ascii(),
        }
    }

    /// Adds the placed objects of a variant as labeled prisms.
    pub fn with_variant(&self, variant: &SceneVariant, library: &ObjectLibrary) -> Result<Scene> {
        let mut mesh = self.mesh.clone();
        let mut instances = self.instances.clone();
        for p in &variant.placements {
            let model = library
                .get(&p.object_id)
                .ok_or_else(|| Error::Dataset(format!("unknown object model {}", p.object_id)))?;
            let id = instances.len() as u32;
            instances.push(InstanceInfo {
                id,
                label: p.category.clone(),
                kind: InstanceKind::Object,
                room: None,
                key: Some(p.instance_key()),
            });
            let base = Point3::new(p.position[0], p.position[1], p.position[2]);
            mesh.add_prism(base, model.footprint_radius, model.height, 8, p.yaw, Some(id));
        }
        Scene::assemble(
            format!("{}/{}", self.id, variant.variant_id),
            mesh,
            instances,
            self.regions.clone(),
            self.description.clone(),
        )
    }

    pub fn region_at(&self, p: &Point2) -> Option<&RegionTruth> {
        self.regions.iter().find(|r| geom::contains_convex(&r.polygon, p))
    }
}

pub fn load_scene(path: &Path, format: SceneFormat) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    parse_scene(&text, format, &name)
}

pub fn parse_scene(text: &str, format: SceneFormat, source_name: &str) -> Result<Scene> {
    match format {
        SceneFormat::SceneJson => SceneDescription::from_json(text, source_name)?.build(),
        SceneFormat::MeshAscii => {
            let stem = Path::new(source_name)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scene")
                .to_string();
            Scene::from_ascii(text, source_name, &stem)
        }
    }
}

/// Builds a fixture scene from a description. Receptacle tops are exact
/// horizontal planes at the declared heights.
pub fn make_fixture_scene(desc: &SceneDescription) -> Result<Scene> {
    desc.build()
}

/// Object pose after placement. Angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub object_id: String,
    pub category: String,
    pub position: [f64; 3],
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub roll: f64,
    pub plane_id: String,
    pub region: String,
    /// Index of the placement inside the variant.
    pub index: usize,
}

impl Placement {
    pub fn instance_key(&self) -> String {
        format!("{}@{}", self.object_id, self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneVariant {
    pub scene_id: String,
    pub variant_id: String,
    pub seed: u64,
    pub placements: Vec<Placement>,
}
