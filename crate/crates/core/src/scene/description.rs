//! Scene description JSON (schema 1) and the fixture builder that turns it
//! into a labeled mesh.
//!
//! Rooms are extruded rectangles with walls on their boundary, doors cut
//! openings into any wall passing through their centre, receptacles are
//! boxes, tables (top slab on four legs) or shelves (side panels plus
//! boards). Every receptacle surface is an exact horizontal plane.

use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use super::{InstanceInfo, InstanceKind, RegionTruth, Scene};
use crate::{Error, Point2, Point3, Result};

pub const SCHEMA_VERSION: u32 = 1;

const TABLE_TOP_THICKNESS: f64 = 0.04;
const TABLE_LEG_SIZE: f64 = 0.05;
const SHELF_PANEL: f64 = 0.03;
const SHELF_BOARD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub schema: u32,
    pub scene_id: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_wall_thickness")]
    pub wall_thickness: f64,
    pub rooms: Vec<RoomSpec>,
    #[serde(default)]
    pub doors: Vec<DoorSpec>,
    #[serde(default)]
    pub receptacles: Vec<ReceptacleSpec>,
    #[serde(default)]
    pub decor: Vec<DecorSpec>,
}

fn default_wall_thickness() -> f64 {
    0.1
}

fn default_wall_height() -> f64 {
    2.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub name: String,
    /// Ground-truth region label, e.g. "bedroom".
    pub region: String,
    pub min: [f64; 2],
    pub max: [f64; 2],
    #[serde(default)]
    pub floor_z: f64,
    #[serde(default = "default_wall_height")]
    pub wall_height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoorSpec {
    pub center: [f64; 2],
    pub width: f64,
    #[serde(default)]
    pub floor_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceptacleKind {
    /// Solid block from the floor to `height` (bed, counter, sofa).
    Box,
    /// Top slab on four legs.
    Table,
    /// Two side panels with boards at `levels` and a top board at `height`.
    Shelf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptacleSpec {
    pub id: String,
    pub label: String,
    pub room: String,
    pub kind: ReceptacleKind,
    pub center: [f64; 2],
    pub size: [f64; 2],
    /// Height of the top surface above the room floor.
    pub height: f64,
    /// Additional board heights above the floor (shelves only).
    #[serde(default)]
    pub levels: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorSpec {
    pub label: String,
    pub room: String,
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub height: f64,
    #[serde(default)]
    pub elevation: f64,
}

/// A ground-truth horizontal receptacle surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceTruth {
    pub receptacle_id: String,
    pub label: String,
    pub height: f64,
    pub polygon: Vec<Point2>,
}

impl RoomSpec {
    fn rect(&self) -> Vec<Point2> {
        rect_polygon(self.min, self.max)
    }

    fn contains_rect(&self, lo: [f64; 2], hi: [f64; 2], margin: f64) -> bool {
        lo[0] >= self.min[0] + margin - 1e-9
            && lo[1] >= self.min[1] + margin - 1e-9
            && hi[0] <= self.max[0] - margin + 1e-9
            && hi[1] <= self.max[1] - margin + 1e-9
    }
}

fn rect_polygon(lo: [f64; 2], hi: [f64; 2]) -> Vec<Point2> {
    vec![
        Point2::new(lo[0], lo[1]),
        Point2::new(hi[0], lo[1]),
        Point2::new(hi[0], hi[1]),
        Point2::new(lo[0], hi[1]),
    ]
}

fn footprint(center: [f64; 2], size: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    (
        [center[0] - size[0] / 2.0, center[1] - size[1] / 2.0],
        [center[0] + size[0] / 2.0, center[1] + size[1] / 2.0],
    )
}

impl SceneDescription {
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let desc: SceneDescription = serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(desc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene description serializes") + "\n"
    }

    fn room(&self, name: &str) -> Option<&RoomSpec> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::InvalidScene(format!("unsupported schema {}", self.schema)));
        }
        if self.rooms.is_empty() {
            return Err(Error::InvalidScene("scene has no rooms".into()));
        }
        for r in &self.rooms {
            if !(r.max[0] > r.min[0] && r.max[1] > r.min[1]) || r.wall_height <= 0.0 {
                return Err(Error::InvalidScene(format!("room {} is degenerate", r.name)));
            }
        }
        for (i, a) in self.rooms.iter().enumerate() {
            for b in &self.rooms[i + 1..] {
                if (a.floor_z - b.floor_z).abs() > 1e-9 {
                    continue;
                }
                let ox = a.max[0].min(b.max[0]) - a.min[0].max(b.min[0]);
                let oy = a.max[1].min(b.max[1]) - a.min[1].max(b.min[1]);
                if ox > 1e-9 && oy > 1e-9 {
                    return Err(Error::InvalidScene(format!("rooms {} and {} overlap", a.name, b.name)));
                }
            }
        }
        let margin = self.wall_thickness / 2.0;
        for r in &self.receptacles {
            let room = self
                .room(&r.room)
                .ok_or_else(|| Error::InvalidScene(format!("receptacle {} in unknown room {}", r.id, r.room)))?;
            if r.size[0] <= 0.0 || r.size[1] <= 0.0 || r.height <= 0.0 {
                return Err(Error::InvalidScene(format!("receptacle {} is degenerate", r.id)));
            }
            let (lo, hi) = footprint(r.center, r.size);
            if !room.contains_rect(lo, hi, margin) {
                return Err(Error::InvalidScene(format!("receptacle {} lies outside room {}", r.id, r.room)));
            }
            if r.levels.iter().any(|&l| l <= 0.0 || l >= r.height) {
                return Err(Error::InvalidScene(format!("receptacle {} has a level outside (0, height)", r.id)));
            }
        }
        for d in &self.decor {
            let room = self
                .room(&d.room)
                .ok_or_else(|| Error::InvalidScene(format!("decor {} in unknown room {}", d.label, d.room)))?;
            let (lo, hi) = footprint(d.center, d.size);
            if !room.contains_rect(lo, hi, margin) || d.height <= 0.0 {
                return Err(Error::InvalidScene(format!("decor {} lies outside room {}", d.label, d.room)));
            }
        }
        let mut ids: Vec<&str> = self.receptacles.iter().map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidScene("duplicate receptacle id".into()));
        }
        Ok(())
    }

    /// Ground-truth receptacle surfaces (top faces of boxes and tables, every
    /// board of a shelf), in world coordinates.
    pub fn receptacle_surfaces(&self) -> Vec<SurfaceTruth> {
        let mut out = Vec::new();
        for r in &self.receptacles {
            let floor = self.room(&r.room).map(|x| x.floor_z).unwrap_or(0.0);
            let (lo, hi) = footprint(r.center, r.size);
            let mut heights = vec![r.height];
            let (mut slo, mut shi) = (lo, hi);
            if r.kind == ReceptacleKind::Shelf {
                heights.extend(r.levels.iter().copied());
                slo[0] += SHELF_PANEL;
                shi[0] -= SHELF_PANEL;
            }
            heights.sort_by(f64::total_cmp);
            for h in heights {
                let (plo, phi) = if r.kind == ReceptacleKind::Shelf && (h - r.height).abs() > 1e-9 {
                    (slo, shi)
                } else {
                    (lo, hi)
                };
                out.push(SurfaceTruth {
                    receptacle_id: r.id.clone(),
                    label: r.label.clone(),
                    height: floor + h,
                    polygon: rect_polygon(plo, phi),
                });
            }
        }
        out
    }

    /// Builds the labeled scene mesh.
    pub fn build(&self) -> Result<Scene> {
        self.validate()?;
        let mut mesh = TriangleMesh::new();
        let mut instances: Vec<InstanceInfo> = Vec::new();
        let t = self.wall_thickness;

        for room in &self.rooms {
            let z = room.floor_z;
            mesh.add_quad(
                [
                    Point3::new(room.min[0], room.min[1], z),
                    Point3::new(room.max[0], room.min[1], z),
                    Point3::new(room.max[0], room.max[1], z),
                    Point3::new(room.min[0], room.max[1], z),
                ],
                None,
            );
            for wall in room_walls(room, t, &self.doors) {
                mesh.add_box(wall.0, wall.1, None);
            }
        }

        for r in &self.receptacles {
            let floor = self.room(&r.room).map(|x| x.floor_z).unwrap_or(0.0);
            let id = instances.len() as u32;
            instances.push(InstanceInfo {
                id,
                label: r.label.clone(),
                kind: InstanceKind::Receptacle,
                room: Some(r.room.clone()),
                key: Some(r.id.clone()),
            });
            add_receptacle(&mut mesh, r, floor, Some(id));
        }

        for (k, d) in self.decor.iter().enumerate() {
            let floor = self.room(&d.room).map(|x| x.floor_z).unwrap_or(0.0);
            let id = instances.len() as u32;
            instances.push(InstanceInfo {
                id,
                label: d.label.clone(),
                kind: InstanceKind::Decor,
                room: Some(d.room.clone()),
                key: Some(format!("decor_{k}")),
            });
            let (lo, hi) = footprint(d.center, d.size);
            let z0 = floor + d.elevation;
            mesh.add_box(Point3::new(lo[0], lo[1], z0), Point3::new(hi[0], hi[1], z0 + d.height), Some(id));
        }

        let regions = self
            .rooms
            .iter()
            .map(|r| RegionTruth {
                room: r.name.clone(),
                region: r.region.clone(),
                polygon: r.rect(),
                floor_z: r.floor_z,
            })
            .collect();

        Scene::assemble(self.scene_id.clone(), mesh, instances, regions, Some(self.clone()))
    }
}

/// Wall boxes along the four room edges, with door openings removed.
fn room_walls(room: &RoomSpec, t: f64, doors: &[DoorSpec]) -> Vec<(Point3, Point3)> {
    let z0 = room.floor_z;
    let z1 = room.floor_z + room.wall_height;
    let h = t / 2.0;
    let mut out = Vec::new();
    // (fixed coordinate, is the wall along x?, span start, span end)
    let edges = [
        (room.min[1], true, room.min[0] - h, room.max[0] + h),
        (room.max[1], true, room.min[0] - h, room.max[0] + h),
        (room.min[0], false, room.min[1] - h, room.max[1] + h),
        (room.max[0], false, room.min[1] - h, room.max[1] + h),
    ];
    for (fixed, along_x, s0, s1) in edges {
        let mut spans = vec![(s0, s1)];
        for d in doors.iter().filter(|d| (d.floor_z - room.floor_z).abs() < 1e-9) {
            let (across, along) = if along_x { (d.center[1], d.center[0]) } else { (d.center[0], d.center[1]) };
            if (across - fixed).abs() > h + 1e-6 || along < s0 || along > s1 {
                continue;
            }
            let (c0, c1) = (along - d.width / 2.0, along + d.width / 2.0);
            spans = spans
                .into_iter()
                .flat_map(|(a, b)| {
                    let mut v = Vec::new();
                    if c0 > a {
                        v.push((a, c0.min(b)));
                    }
                    if c1 < b {
                        v.push((c1.max(a), b));
                    }
                    v
                })
                .filter(|(a, b)| b - a > 1e-6)
                .collect();
        }
        for (a, b) in spans {
            let (lo, hi) = if along_x {
                (Point3::new(a, fixed - h, z0), Point3::new(b, fixed + h, z1))
            } else {
                (Point3::new(fixed - h, a, z0), Point3::new(fixed + h, b, z1))
            };
            out.push((lo, hi));
        }
    }
    out
}

fn add_receptacle(mesh: &mut TriangleMesh, r: &ReceptacleSpec, floor: f64, inst: Option<u32>) {
    let (lo, hi) = footprint(r.center, r.size);
    let top = floor + r.height;
    match r.kind {
        ReceptacleKind::Box => {
            mesh.add_box(Point3::new(lo[0], lo[1], floor), Point3::new(hi[0], hi[1], top), inst);
        }
        ReceptacleKind::Table => {
            let slab = TABLE_TOP_THICKNESS.min(r.height / 2.0);
            mesh.add_box(Point3::new(lo[0], lo[1], top - slab), Point3::new(hi[0], hi[1], top), inst);
            let inset = 0.03;
            let s = TABLE_LEG_SIZE;
            for (x, y) in [
                (lo[0] + inset, lo[1] + inset),
                (hi[0] - inset - s, lo[1] + inset),
                (hi[0] - inset - s, hi[1] - inset - s),
                (lo[0] + inset, hi[1] - inset - s),
            ] {
                mesh.add_box(Point3::new(x, y, floor), Point3::new(x + s, y + s, top - slab), inst);
            }
        }
        ReceptacleKind::Shelf => {
            let p = SHELF_PANEL;
            mesh.add_box(Point3::new(lo[0], lo[1], floor), Point3::new(lo[0] + p, hi[1], top), inst);
            mesh.add_box(Point3::new(hi[0] - p, lo[1], floor), Point3::new(hi[0], hi[1], top), inst);
            mesh.add_box(Point3::new(lo[0], lo[1], top - SHELF_BOARD), Point3::new(hi[0], hi[1], top), inst);
            for &l in &r.levels {
                let z = floor + l;
                mesh.add_box(
                    Point3::new(lo[0] + p, lo[1], z - SHELF_BOARD),
                    Point3::new(hi[0] - p, hi[1], z),
                    inst,
                );
            }
        }
    }
}
