//! Relevance-weighted object placement onto receptacle planes.

use std::f64::consts::TAU;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::planes::ReceptaclePlane;
use crate::scene::{ObjectLibrary, ObjectModel, Placement, SceneVariant};
use crate::semantics::{joint_relevance, RelevanceTable};
use crate::{geom, par, rng, Error, Point2, Point3, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    /// Category draws per plane.
    pub m: usize,
    pub h_spawn: f64,
    pub max_attempts: usize,
    /// Added to the two footprint radii to get the minimum centre distance.
    pub distance_margin: f64,
    /// Planes tilted more than this are not used.
    pub max_tilt_deg: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            m: 3,
            h_spawn: 0.3,
            max_attempts: 30,
            distance_margin: 0.02,
            max_tilt_deg: 15.0,
        }
    }
}

impl PlacementConfig {
    pub fn min_pair_distance(&self, ra: f64, rb: f64) -> f64 {
        ra + rb + self.distance_margin
    }
}

/// `A + s (B - A) + t (C - A)` with `(s, t) = (r1, r2)`, reflected to
/// `(1 - r1, 1 - r2)` when `r1 + r2 > 1`.
pub fn triangle_point(a: &Point2, b: &Point2, c: &Point2, r1: f64, r2: f64) -> Point2 {
    let (s, t) = if r1 + r2 <= 1.0 { (r1, r2) } else { (1.0 - r1, 1.0 - r2) };
    a + (b - a) * s + (c - a) * t
}

/// Fan triangulation from the first vertex with the triangle areas.
pub fn fan_triangles(hull: &[Point2]) -> Vec<([Point2; 3], f64)> {
    (1..hull.len().saturating_sub(1))
        .map(|i| {
            let t = [hull[0], hull[i], hull[i + 1]];
            (t, geom::area(&t))
        })
        .collect()
}

/// Uniform point in a convex CCW polygon: a triangle of the fan is picked
/// with probability proportional to its area, then a point is drawn inside
/// it by the reflection trick.
pub fn sample_point_in_polygon(hull: &[Point2], r: &mut rng::Rng) -> Result<Point2> {
    let tris = fan_triangles(hull);
    let total: f64 = tris.iter().map(|(_, a)| a).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("polygon has zero area".into()));
    }
    let mut u = r.random::<f64>() * total;
    let mut pick = &tris[tris.len() - 1].0;
    for (t, a) in &tris {
        if u < *a {
            pick = t;
            break;
        }
        u -= a;
    }
    let (r1, r2): (f64, f64) = (r.random(), r.random());
    Ok(triangle_point(&pick[0], &pick[1], &pick[2], r1, r2))
}

/// Drops a spawned object onto the plane: the base comes to rest at the
/// plane height, pitch and roll are flattened and yaw is kept. Returns `None`
/// when the footprint disk does not fit inside the hull.
pub fn settle(spawned: &Placement, plane: &ReceptaclePlane, footprint_radius: f64) -> Option<Placement> {
    let c = Point2::new(spawned.position[0], spawned.position[1]);
    if !geom::disk_inside_convex(&plane.hull, &c, footprint_radius) {
        return None;
    }
    let mut p = spawned.clone();
    p.position[2] = plane.height;
    p.pitch = 0.0;
    p.roll = 0.0;
    Some(p)
}

fn draw_weighted(weights: &[f64], r: &mut rng::Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = r.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return Some(i);
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

/// Places objects on every near-horizontal plane. Each plane draws `m`
/// categories with replacement in proportion to the joint relevance of its
/// region and receptacle, picks a random model per category and tries up to
/// `max_attempts` positions that keep the minimum distance to everything
/// placed so far. Objects that never fit are skipped.
pub fn place_objects(
    scene_id: &str,
    variant_id: &str,
    seed: u64,
    planes: &[ReceptaclePlane],
    table: &RelevanceTable,
    library: &ObjectLibrary,
    cfg: &PlacementConfig,
) -> Result<SceneVariant> {
    if library.models.is_empty() {
        return Err(Error::Empty("object library"));
    }
    let categories = library.categories();
    let mut placed: Vec<(Placement, f64)> = Vec::new();
    for plane in planes.iter().filter(|p| p.is_horizontal(cfg.max_tilt_deg)) {
        let mut r = rng::rng_for(seed, &format!("placement/{}", plane.plane_id));
        let weights: Vec<f64> = categories
            .iter()
            .map(|c| joint_relevance(table, c, &plane.region_label, &plane.receptacle_label))
            .collect();
        for _ in 0..cfg.m {
            let Some(ci) = draw_weighted(&weights, &mut r) else {
                break;
            };
            let models: Vec<&ObjectModel> = library.models_of(&categories[ci]).collect();
            let model = models[r.random_range(0..models.len())];
            let mut accepted = None;
            for _ in 0..cfg.max_attempts {
                let xy = sample_point_in_polygon(&plane.hull, &mut r)?;
                let spawn = Placement {
                    object_id: model.id.clone(),
                    category: model.category.clone(),
                    position: [xy.x, xy.y, plane.height + cfg.h_spawn],
                    yaw: r.random::<f64>() * TAU,
                    pitch: r.random::<f64>() * TAU,
                    roll: r.random::<f64>() * TAU,
                    plane_id: plane.plane_id.clone(),
                    region: plane.region_label.clone(),
                    index: placed.len(),
                };
                let Some(p) = settle(&spawn, plane, model.footprint_radius) else {
                    continue;
                };
                let base = Point3::from(p.position);
                let clear = placed.iter().all(|(q, rq)| {
                    (Point3::from(q.position) - base).norm() >= cfg.min_pair_distance(model.footprint_radius, *rq)
                });
                if clear {
                    accepted = Some(p);
                    break;
                }
            }
            match accepted {
                Some(p) => placed.push((p, model.footprint_radius)),
                None => log::debug!("skipped {} on {}: no free position", model.id, plane.plane_id),
            }
        }
    }
    Ok(SceneVariant {
        scene_id: scene_id.to_string(),
        variant_id: variant_id.to_string(),
        seed,
        placements: placed.into_iter().map(|(p, _)| p).collect(),
    })
}

pub fn variant_id(scene_id: &str, k: usize) -> String {
    format!("{scene_id}_v{k:03}")
}

/// `count` variants with seeds derived from `seed`, in variant order.
pub fn generate_variants(
    scene_id: &str,
    seed: u64,
    count: usize,
    planes: &[ReceptaclePlane],
    table: &RelevanceTable,
    library: &ObjectLibrary,
    cfg: &PlacementConfig,
    exec: par::Exec,
) -> Result<Vec<SceneVariant>> {
    par::map_range(exec, count, |k| {
        let s = rng::derive_seed(seed, &format!("variant/{scene_id}/{k}"));
        place_objects(scene_id, &variant_id(scene_id, k), s, planes, table, library, cfg)
    })
    .into_iter()
    .collect()
}
