//! Goal viewpoints, ObjectNav episode generation and dataset files.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::camera::{instance_visible, project_box, Camera, CameraSpec};
use crate::navgrid::{astar_multi, distance_field, floor_of, CellIndex, FloorMap, NavGrid};
use crate::perception::DEFAULT_ETA_GT;
use crate::scene::{InstanceKind, ObjectLibrary, Placement, Scene, SceneVariant};
use crate::{par, rng, Error, Point2, Point3, Result};

pub const DATASET_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub viewpoint_ring: [f64; 2],
    /// Spacing of the candidate viewpoint lattice.
    pub viewpoint_stride: f64,
    pub camera_height: f64,
    pub camera: CameraSpec,
    pub eta_gt: f64,
    /// Minimum start to nearest-viewpoint geodesic distance.
    pub min_start_distance: f64,
    /// Episodes per valid category and variant (`k_e`).
    pub episodes_per_category: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            viewpoint_ring: [0.3, 1.0],
            viewpoint_stride: 0.1,
            camera_height: 1.25,
            camera: CameraSpec::default(),
            eta_gt: DEFAULT_ETA_GT,
            min_start_distance: 1.0,
            episodes_per_category: 2,
        }
    }
}

/// Pixel window of a box, or the whole frame when the box is not entirely
/// in front of the camera.
pub fn box_window(camera: &Camera, lo: &Point3, hi: &Point3) -> Option<[usize; 4]> {
    project_box(camera, lo, hi).or_else(|| {
        let c = Point3::from((lo.coords + hi.coords) / 2.0);
        (camera.world_to_camera(&c).z > 0.0).then_some([0, 0, camera.width, camera.height])
    })
}

/// Pixels needed to reach the `eta` pixel ratio.
pub fn pixels_needed(camera: &Camera, eta: f64) -> usize {
    ((eta * (camera.width * camera.height) as f64).ceil() as usize).max(1)
}

/// Navigable `(eroded)` lattice points in the ring around `center` from
/// which the instance is seen by a camera looking at `target`.
pub fn sample_viewpoints(
    scene: &Scene,
    grid: &NavGrid,
    instance: u32,
    center: &Point2,
    bounds: (Point3, Point3),
    cfg: &EpisodeConfig,
    exec: par::Exec,
) -> Vec<Point2> {
    let [r0, r1] = cfg.viewpoint_ring;
    let stride = ((cfg.viewpoint_stride / grid.resolution).round() as usize).max(1);
    let reach = (r1 / grid.resolution).ceil() as i64 + 1;
    let cx = ((center.x - grid.origin.x) / grid.resolution).floor() as i64;
    let cy = ((center.y - grid.origin.y) / grid.resolution).floor() as i64;
    let mut cand: Vec<CellIndex> = Vec::new();
    for iy in (cy - reach).max(0)..=(cy + reach).min(grid.height as i64 - 1) {
        for ix in (cx - reach).max(0)..=(cx + reach).min(grid.width as i64 - 1) {
            let (x, y) = (ix as usize, iy as usize);
            // align the lattice to the world so it does not depend on the object
            if x % stride != 0 || y % stride != 0 || !grid.is_navigable(x, y) {
                continue;
            }
            let d = (grid.cell_center(x, y) - center).norm();
            if d >= r0 && d <= r1 {
                cand.push((x, y));
            }
        }
    }
    let target = Point3::from((bounds.0.coords + bounds.1.coords) / 2.0);
    let ok = par::map(exec, &cand, |&(x, y)| {
        let p = grid.cell_center(x, y);
        let eye = Point3::new(p.x, p.y, grid.floor_height + cfg.camera_height);
        let cam = cfg.camera.look_at(eye, target);
        box_window(&cam, &bounds.0, &bounds.1)
            .is_some_and(|w| instance_visible(scene, &cam, instance, w, pixels_needed(&cam, cfg.eta_gt)))
    });
    cand.iter()
        .zip(ok)
        .filter(|(_, ok)| *ok)
        .map(|(&(x, y), _)| grid.cell_center(x, y))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub position: [f64; 2],
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalInstance {
    /// Instance key of the placed object.
    pub object_id: String,
    pub position: [f64; 3],
    pub viewpoints: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub scene_id: String,
    pub variant_id: String,
    pub floor: usize,
    pub start: StartPose,
    pub goal_category: String,
    pub goal_instances: Vec<GoalInstance>,
    /// Geodesic length of the plan from the start to the nearest viewpoint.
    pub shortest_path_length: f64,
}

impl Episode {
    pub fn viewpoints(&self) -> Vec<Point2> {
        self.goal_instances
            .iter()
            .flat_map(|g| g.viewpoints.iter().map(|v| Point2::new(v[0], v[1])))
            .collect()
    }

    pub fn start_point(&self) -> Point2 {
        Point2::new(self.start.position[0], self.start.position[1])
    }
}

/// Bounding box of a placed object from its model extents.
pub fn placement_bounds(p: &Placement, library: &ObjectLibrary) -> Result<(Point3, Point3)> {
    let m = library
        .get(&p.object_id)
        .ok_or_else(|| Error::Dataset(format!("unknown object model {}", p.object_id)))?;
    let [x, y, z] = p.position;
    Ok((
        Point3::new(x - m.footprint_radius, y - m.footprint_radius, z),
        Point3::new(x + m.footprint_radius, y + m.footprint_radius, z + m.height),
    ))
}

/// Goal candidates of a variant: every placed object with its floor and
/// validated viewpoints. `scene` must be the variant scene.
pub fn goal_candidates(
    scene: &Scene,
    variant: &SceneVariant,
    library: &ObjectLibrary,
    floors: &[FloorMap],
    cfg: &EpisodeConfig,
    exec: par::Exec,
) -> Result<Vec<(usize, Placement, Vec<Point2>)>> {
    let heights: Vec<f64> = floors.iter().map(|f| f.height).collect();
    let mut out = Vec::new();
    for p in &variant.placements {
        let key = p.instance_key();
        let inst = scene
            .instances
            .iter()
            .find(|i| i.kind == InstanceKind::Object && i.key.as_deref() == Some(key.as_str()))
            .ok_or_else(|| Error::Dataset(format!("variant scene lacks object {key}")))?;
        let bounds = placement_bounds(p, library)?;
        let f = floor_of(p.position[2], &heights);
        let center = Point2::new(p.position[0], p.position[1]);
        let vps = sample_viewpoints(scene, &floors[f].eroded, inst.id, &center, bounds, cfg, exec);
        out.push((f, p.clone(), vps));
    }
    Ok(out)
}

/// `k_e` episodes per valid category. A category is valid when one of its
/// objects has a viewpoint and some start cell lies at least
/// `min_start_distance` (and finitely far) from those viewpoints. Starts are
/// uniform over such cells across floors; the episode's goals are the
/// category's objects on the start floor.
pub fn generate_episodes(
    scene: &Scene,
    variant: &SceneVariant,
    library: &ObjectLibrary,
    floors: &[FloorMap],
    cfg: &EpisodeConfig,
    seed: u64,
    exec: par::Exec,
) -> Result<Vec<Episode>> {
    let goals = goal_candidates(scene, variant, library, floors, cfg, exec)?;
    let mut by_cat: BTreeMap<String, Vec<&(usize, Placement, Vec<Point2>)>> = BTreeMap::new();
    for g in goals.iter().filter(|g| !g.2.is_empty()) {
        by_cat.entry(g.1.category.clone()).or_default().push(g);
    }
    let mut episodes = Vec::new();
    for (cat, objs) in &by_cat {
        let mut starts: Vec<(usize, CellIndex)> = Vec::new();
        for f in floors {
            let sources: Vec<CellIndex> = objs
                .iter()
                .filter(|g| g.0 == f.index)
                .flat_map(|g| g.2.iter().filter_map(|v| f.eroded.world_to_cell(v)))
                .collect();
            if sources.is_empty() {
                continue;
            }
            let field = distance_field(&f.eroded, &sources);
            for (i, d) in field.iter().enumerate() {
                if d.is_finite() && *d >= cfg.min_start_distance {
                    starts.push((f.index, (i % f.eroded.width, i / f.eroded.width)));
                }
            }
        }
        if starts.is_empty() {
            log::debug!("{}: category {cat} has no valid start", variant.variant_id);
            continue;
        }
        let mut r = rng::rng_for(seed, &format!("episodes/{}/{cat}", variant.variant_id));
        for _ in 0..cfg.episodes_per_category {
            let (fi, cell) = starts[r.random_range(0..starts.len())];
            let heading = r.random::<f64>() * TAU;
            let grid = &floors[fi].eroded;
            let start = grid.cell_center(cell.0, cell.1);
            let on_floor: Vec<&&(usize, Placement, Vec<Point2>)> = objs.iter().filter(|g| g.0 == fi).collect();
            let vps: Vec<Point2> = on_floor.iter().flat_map(|g| g.2.iter().copied()).collect();
            let plan = astar_multi(grid, &start, &vps, 0.0)?;
            episodes.push(Episode {
                episode_id: String::new(),
                scene_id: variant.scene_id.clone(),
                variant_id: variant.variant_id.clone(),
                floor: fi,
                start: StartPose {
                    position: [start.x, start.y],
                    heading,
                },
                goal_category: cat.clone(),
                goal_instances: on_floor
                    .iter()
                    .map(|g| GoalInstance {
                        object_id: g.1.instance_key(),
                        position: g.1.position,
                        viewpoints: g.2.iter().map(|v| [v.x, v.y]).collect(),
                    })
                    .collect(),
                shortest_path_length: plan.length,
            });
        }
    }
    for (k, e) in episodes.iter_mut().enumerate() {
        e.episode_id = format!("{}_e{k:03}", variant.variant_id);
    }
    Ok(episodes)
}

/// Shape of the largest reference dataset, for documentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceShape {
    pub categories: usize,
    pub scenes: usize,
    pub variants: usize,
    pub episodes: usize,
}

pub const SD_OVON_3K: ReferenceShape = ReferenceShape {
    categories: 73,
    scenes: 8,
    variants: 363,
    episodes: 2897,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub episodes: usize,
    pub categories: usize,
    pub per_category: BTreeMap<String, usize>,
    pub per_scene: BTreeMap<String, usize>,
    pub per_variant: BTreeMap<String, usize>,
}

pub fn dataset_manifest(episodes: &[Episode]) -> DatasetSummary {
    let mut s = DatasetSummary {
        episodes: episodes.len(),
        ..Default::default()
    };
    for e in episodes {
        *s.per_category.entry(e.goal_category.clone()).or_default() += 1;
        *s.per_scene.entry(e.scene_id.clone()).or_default() += 1;
        *s.per_variant.entry(e.variant_id.clone()).or_default() += 1;
    }
    s.categories = s.per_category.len();
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: String,
    /// Scene file relative to the dataset root.
    pub file: String,
    pub floors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantEntry {
    pub scene_id: String,
    pub variant_id: String,
    pub variant_file: String,
    pub episode_file: String,
    pub valid_categories: Vec<String>,
    pub episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub seed: u64,
    /// `k_s`
    pub scenes_count: usize,
    /// `k_v`
    pub variants_per_scene: usize,
    /// `k_e`
    pub episodes_per_category: usize,
    /// Realised average number of valid categories per variant (`n_c`).
    pub mean_valid_categories: f64,
    pub total_episodes: usize,
    pub scenes: Vec<SceneEntry>,
    pub variants: Vec<VariantEntry>,
    pub summary: DatasetSummary,
    pub reference: ReferenceShape,
}

impl Manifest {
    /// `k_s * k_v * n_c * k_e`.
    pub fn expected_episodes(&self) -> f64 {
        self.scenes_count as f64 * self.variants_per_scene as f64 * self.mean_valid_categories * self.episodes_per_category as f64
    }

    /// Integer form of the count identity: every variant contributes `k_e`
    /// episodes per valid category.
    pub fn count_identity_holds(&self) -> bool {
        let valid: usize = self.variants.iter().map(|v| v.valid_categories.len()).sum();
        let variants = self.scenes_count * self.variants_per_scene;
        variants == self.variants.len()
            && valid * self.episodes_per_category == self.total_episodes
            && (self.expected_episodes() - self.total_episodes as f64).abs() <= 1e-9 * (1.0 + self.total_episodes as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFile {
    pub schema: u32,
    pub scene_id: String,
    pub variant_id: String,
    pub episodes: Vec<Episode>,
}

/// Realised valid categories of a variant's episodes.
pub fn valid_categories(episodes: &[Episode]) -> Vec<String> {
    episodes.iter().map(|e| e.goal_category.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

/// Episode dataset on disk: `manifest.json` plus per-variant files.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join("manifest.json");
        if !path.exists() {
            return Err(Error::Dataset(format!("no manifest at {}", path.display())));
        }
        let manifest: Manifest = read_json(&path)?;
        if manifest.schema != DATASET_SCHEMA {
            return Err(Error::Dataset(format!(
                "dataset schema {} is not supported (expected {DATASET_SCHEMA})",
                manifest.schema
            )));
        }
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn variant(&self, entry: &VariantEntry) -> Result<SceneVariant> {
        read_json(&self.root.join(&entry.variant_file))
    }

    pub fn episodes(&self, entry: &VariantEntry) -> Result<Vec<Episode>> {
        let f: EpisodeFile = read_json(&self.root.join(&entry.episode_file))?;
        if f.schema != DATASET_SCHEMA || f.variant_id != entry.variant_id {
            return Err(Error::Dataset(format!("episode file of {} does not match the manifest", entry.variant_id)));
        }
        Ok(f.episodes)
    }

    pub fn all_episodes(&self) -> Result<Vec<Episode>> {
        let mut out = Vec::new();
        for v in &self.manifest.variants {
            out.extend(self.episodes(v)?);
        }
        Ok(out)
    }
}
