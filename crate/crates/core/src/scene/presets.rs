//! Hand-built and randomized fixture scenes that stand in for scanned
//! environments at desk scale.

use rand::Rng as _;

use super::description::*;
use crate::rng;

fn room(name: &str, region: &str, min: [f64; 2], max: [f64; 2]) -> RoomSpec {
    RoomSpec {
        name: name.into(),
        region: region.into(),
        min,
        max,
        floor_z: 0.0,
        wall_height: 2.5,
    }
}

fn rec(id: &str, label: &str, room: &str, kind: ReceptacleKind, center: [f64; 2], size: [f64; 2], height: f64) -> ReceptacleSpec {
    ReceptacleSpec {
        id: id.into(),
        label: label.into(),
        room: room.into(),
        kind,
        center,
        size,
        height,
        levels: vec![],
    }
}

fn decor(label: &str, room: &str, center: [f64; 2], size: [f64; 2], height: f64) -> DecorSpec {
    DecorSpec {
        label: label.into(),
        room: room.into(),
        center,
        size,
        height,
        elevation: 0.0,
    }
}

fn base(scene_id: &str, seed: u64, rooms: Vec<RoomSpec>) -> SceneDescription {
    SceneDescription {
        schema: SCHEMA_VERSION,
        scene_id: scene_id.into(),
        seed,
        wall_thickness: 0.1,
        rooms,
        doors: vec![],
        receptacles: vec![],
        decor: vec![],
    }
}

/// One empty `w x h` room.
pub fn empty_room(w: f64, h: f64) -> SceneDescription {
    base("empty_room", 0, vec![room("room", "living room", [0.0, 0.0], [w, h])])
}

/// A 5 x 5 m room with a single table whose top is at 0.75 m.
pub fn single_room() -> SceneDescription {
    let mut d = base("single_room", 0, vec![room("room", "office", [0.0, 0.0], [5.0, 5.0])]);
    d.receptacles
        .push(rec("table_0", "table", "room", ReceptacleKind::Table, [2.5, 2.5], [1.2, 0.8], 0.75));
    d
}

/// Bedroom and kitchen side by side, connected by a door.
pub fn two_room() -> SceneDescription {
    let mut d = base(
        "two_room",
        0,
        vec![room("bedroom_0", "bedroom", [0.0, 0.0], [5.0, 5.0]), room("kitchen_0", "kitchen", [5.0, 0.0], [10.0, 5.0])],
    );
    d.doors.push(DoorSpec {
        center: [5.0, 2.5],
        width: 1.0,
        floor_z: 0.0,
    });
    use ReceptacleKind::*;
    d.receptacles = vec![
        rec("bed_0", "bed", "bedroom_0", Box, [1.05, 3.6], [2.0, 1.6], 0.5),
        rec("nightstand_0", "nightstand", "bedroom_0", Box, [2.45, 4.6], [0.5, 0.5], 0.55),
        rec("desk_0", "desk", "bedroom_0", Table, [3.6, 0.4], [1.2, 0.6], 0.75),
        rec("counter_0", "counter", "kitchen_0", Box, [8.9, 2.5], [0.6, 2.4], 0.9),
        rec("dining_table_0", "dining table", "kitchen_0", Table, [6.9, 2.0], [1.4, 0.9], 0.75),
    ];
    d.decor = vec![
        decor("headboard", "bedroom_0", [0.1, 3.6], [0.1, 1.6], 1.0),
        decor("carpet", "bedroom_0", [2.5, 2.0], [1.5, 1.0], 0.01),
        decor("refrigerator", "kitchen_0", [9.6, 4.5], [0.7, 0.7], 1.8),
        decor("stove", "kitchen_0", [7.0, 4.6], [0.7, 0.6], 0.9),
    ];
    d
}

/// Two stacked single-room floors at z = 0 and z = 3.
pub fn two_story() -> SceneDescription {
    let mut lower = room("lower", "living room", [0.0, 0.0], [6.0, 5.0]);
    lower.wall_height = 2.8;
    let mut upper = room("upper", "bedroom", [0.0, 0.0], [6.0, 5.0]);
    upper.floor_z = 3.0;
    let mut d = base("two_story", 0, vec![lower, upper]);
    d.receptacles = vec![
        rec("sofa_0", "sofa", "lower", ReceptacleKind::Box, [3.0, 0.6], [2.0, 0.9], 0.45),
        rec("bed_0", "bed", "upper", ReceptacleKind::Box, [3.0, 4.0], [2.0, 1.6], 0.5),
    ];
    d
}

struct Template {
    label: &'static str,
    kind: ReceptacleKind,
    size: [f64; 2],
    height: f64,
    levels: &'static [f64],
    against_wall: bool,
}

const fn t(label: &'static str, kind: ReceptacleKind, size: [f64; 2], height: f64, levels: &'static [f64], against_wall: bool) -> Template {
    Template {
        label,
        kind,
        size,
        height,
        levels,
        against_wall,
    }
}

use ReceptacleKind::{Box as Bx, Shelf as Sh, Table as Tb};

const BEDROOM: &[Template] = &[
    t("bed", Bx, [2.0, 1.6], 0.5, &[], true),
    t("nightstand", Bx, [0.5, 0.5], 0.55, &[], true),
    t("dresser", Bx, [1.2, 0.5], 0.8, &[], true),
    t("desk", Tb, [1.2, 0.6], 0.75, &[], true),
];
const KITCHEN: &[Template] = &[
    t("counter", Bx, [2.0, 0.6], 0.9, &[], true),
    t("dining table", Tb, [1.4, 0.9], 0.75, &[], false),
    t("shelf", Sh, [1.0, 0.4], 1.5, &[0.5, 1.0], true),
];
const LIVING: &[Template] = &[
    t("sofa", Bx, [2.0, 0.9], 0.45, &[], true),
    t("coffee table", Tb, [1.0, 0.6], 0.45, &[], false),
    t("tv stand", Bx, [1.5, 0.45], 0.5, &[], true),
];
const BATHROOM: &[Template] = &[
    t("bathroom counter", Bx, [1.2, 0.55], 0.85, &[], true),
    t("shelf", Sh, [0.7, 0.35], 1.2, &[0.6], true),
];
const OFFICE: &[Template] = &[
    t("desk", Tb, [1.4, 0.7], 0.75, &[], true),
    t("shelf", Sh, [1.0, 0.4], 1.5, &[0.5, 1.0], true),
    t("table", Tb, [1.0, 0.8], 0.75, &[], false),
];

fn catalog(region: &str) -> (&'static [Template], &'static [(&'static str, [f64; 2], f64)]) {
    match region {
        "bedroom" => (BEDROOM, &[("headboard", [0.1, 1.2], 1.0), ("carpet", [1.4, 1.0], 0.01)]),
        "kitchen" => (KITCHEN, &[("refrigerator", [0.7, 0.7], 1.8), ("stove", [0.7, 0.6], 0.9)]),
        "living room" => (LIVING, &[("television", [1.0, 0.1], 0.6), ("carpet", [1.6, 1.2], 0.01)]),
        "bathroom" => (BATHROOM, &[("toilet", [0.45, 0.65], 0.45), ("bathtub", [1.6, 0.75], 0.55)]),
        _ => (OFFICE, &[("office chair", [0.5, 0.5], 0.9), ("filing cabinet", [0.45, 0.6], 0.7)]),
    }
}

const REGION_ORDER: &[&str] = &["bedroom", "kitchen", "living room", "office", "bathroom"];

/// Random grid of 2-4 connected rooms, each furnished from a per-region
/// catalog. Deterministic for a given seed.
pub fn random_layout(seed: u64) -> SceneDescription {
    let mut r = rng::rng_for(seed, "layout");
    let (cols, rows) = match r.random_range(0..3) {
        0 => (2usize, 1usize),
        1 => (3, 1),
        _ => (2, 2),
    };
    let widths: Vec<f64> = (0..cols).map(|_| (r.random_range(40..=60) as f64) / 10.0).collect();
    let heights: Vec<f64> = (0..rows).map(|_| (r.random_range(40..=55) as f64) / 10.0).collect();
    let mut regions: Vec<&str> = REGION_ORDER.to_vec();
    // keep bedroom and kitchen in every layout, shuffle the rest
    for i in (3..regions.len()).rev() {
        let j = r.random_range(2..=i);
        regions.swap(i, j);
    }
    let mut d = base(&format!("layout_{seed}"), seed, vec![]);
    let mut xs = vec![0.0];
    for w in &widths {
        xs.push(xs.last().unwrap() + w);
    }
    let mut ys = vec![0.0];
    for h in &heights {
        ys.push(ys.last().unwrap() + h);
    }
    let mut k = 0;
    for j in 0..rows {
        for i in 0..cols {
            let region = regions[k % regions.len()];
            d.rooms.push(room(
                &format!("{}_{k}", region.replace(' ', "_")),
                region,
                [xs[i], ys[j]],
                [xs[i + 1], ys[j + 1]],
            ));
            k += 1;
        }
    }
    for j in 0..rows {
        for i in 0..cols {
            if i + 1 < cols {
                let y = ys[j] + heights[j] * r.random_range(0.3..0.7);
                d.doors.push(DoorSpec {
                    center: [xs[i + 1], y],
                    width: 1.0,
                    floor_z: 0.0,
                });
            }
            if j + 1 < rows {
                let x = xs[i] + widths[i] * r.random_range(0.3..0.7);
                d.doors.push(DoorSpec {
                    center: [x, ys[j + 1]],
                    width: 1.0,
                    floor_z: 0.0,
                });
            }
        }
    }
    furnish(&mut d, &mut r);
    d
}

fn furnish(d: &mut SceneDescription, r: &mut rng::Rng) {
    let wall = d.wall_thickness / 2.0 + 0.02;
    let rooms = d.rooms.clone();
    let doors = d.doors.clone();
    for room in &rooms {
        let (templates, decor_items) = catalog(&room.region);
        // footprints already used in this room, expanded by a walking clearance
        let mut taken: Vec<([f64; 2], [f64; 2])> = Vec::new();
        let fits = |c: [f64; 2], s: [f64; 2], taken: &[([f64; 2], [f64; 2])], clearance: f64| -> bool {
            let lo = [c[0] - s[0] / 2.0, c[1] - s[1] / 2.0];
            let hi = [c[0] + s[0] / 2.0, c[1] + s[1] / 2.0];
            if lo[0] < room.min[0] + wall || lo[1] < room.min[1] + wall || hi[0] > room.max[0] - wall || hi[1] > room.max[1] - wall {
                return false;
            }
            let near_door = doors.iter().any(|dr| {
                let dx = (dr.center[0] - dr.center[0].clamp(lo[0], hi[0])).abs();
                let dy = (dr.center[1] - dr.center[1].clamp(lo[1], hi[1])).abs();
                (dx * dx + dy * dy).sqrt() < 1.1
            });
            !near_door
                && taken.iter().all(|(tlo, thi)| {
                    lo[0] >= thi[0] + clearance || hi[0] + clearance <= tlo[0] || lo[1] >= thi[1] + clearance || hi[1] + clearance <= tlo[1]
                })
        };
        let sample_pose = |r: &mut rng::Rng, size: [f64; 2], against_wall: bool| -> ([f64; 2], [f64; 2]) {
            if !against_wall {
                let c = [
                    r.random_range(room.min[0] + 1.2..room.max[0] - 1.2),
                    r.random_range(room.min[1] + 1.2..room.max[1] - 1.2),
                ];
                return (c, size);
            }
            let side = r.random_range(0..4);
            let (s, horizontal) = if side < 2 { (size, true) } else { ([size[1], size[0]], false) };
            let c = if horizontal {
                let x = r.random_range(room.min[0] + wall + s[0] / 2.0..(room.max[0] - wall - s[0] / 2.0).max(room.min[0] + wall + s[0] / 2.0 + 1e-6));
                let y = if side == 0 { room.min[1] + wall + s[1] / 2.0 } else { room.max[1] - wall - s[1] / 2.0 };
                [x, y]
            } else {
                let y = r.random_range(room.min[1] + wall + s[1] / 2.0..(room.max[1] - wall - s[1] / 2.0).max(room.min[1] + wall + s[1] / 2.0 + 1e-6));
                let x = if side == 2 { room.min[0] + wall + s[0] / 2.0 } else { room.max[0] - wall - s[0] / 2.0 };
                [x, y]
            };
            (c, s)
        };
        for (ti, tpl) in templates.iter().enumerate() {
            for _ in 0..60 {
                let (c, s) = sample_pose(r, tpl.size, tpl.against_wall);
                let c = [(c[0] * 100.0).round() / 100.0, (c[1] * 100.0).round() / 100.0];
                if fits(c, s, &taken, 0.9) {
                    taken.push(([c[0] - s[0] / 2.0, c[1] - s[1] / 2.0], [c[0] + s[0] / 2.0, c[1] + s[1] / 2.0]));
                    d.receptacles.push(ReceptacleSpec {
                        id: format!("{}_{}_{ti}", room.name, tpl.label.replace(' ', "_")),
                        label: tpl.label.into(),
                        room: room.name.clone(),
                        kind: tpl.kind,
                        center: c,
                        size: s,
                        height: tpl.height,
                        levels: tpl.levels.to_vec(),
                    });
                    break;
                }
            }
        }
        for (label, size, height) in decor_items.iter() {
            for _ in 0..60 {
                let against = *label != "carpet";
                let (c, s) = sample_pose(r, *size, against);
                let c = [(c[0] * 100.0).round() / 100.0, (c[1] * 100.0).round() / 100.0];
                let clearance = if *label == "carpet" { -10.0 } else { 0.9 };
                if *label == "carpet" && !fits(c, s, &[], 0.0) {
                    continue;
                }
                if fits(c, s, &taken, clearance) {
                    if *label != "carpet" {
                        taken.push(([c[0] - s[0] / 2.0, c[1] - s[1] / 2.0], [c[0] + s[0] / 2.0, c[1] + s[1] / 2.0]));
                    }
                    d.decor.push(DecorSpec {
                        label: label.to_string(),
                        room: room.name.clone(),
                        center: c,
                        size: s,
                        height: *height,
                        elevation: 0.0,
                    });
                    break;
                }
            }
        }
    }
}
