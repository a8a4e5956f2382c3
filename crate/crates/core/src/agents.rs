//! Memory-based receptacle navigation baselines: frontier exploration on the
//! first visit, then receptacle-by-receptacle search with A*, either in a
//! random order or by decreasing joint relevance.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::camera::{instance_points, instance_visible, render, CameraSpec, Observation, RenderOptions};
use crate::episodes::{box_window, pixels_needed, placement_bounds, Episode};
use crate::metrics::EpisodeResult;
use crate::navgrid::{astar, astar_closest, distance_field, Cell, CellIndex, FloorMap, NavGrid, Path};
use crate::perception::{reproject_to_points, Detector, PointCloud};
use crate::pipeline::{understand_floor, UnderstandInputs};
use crate::planes::ReceptaclePlane;
use crate::scene::{InstanceKind, ObjectLibrary, Scene, SceneVariant};
use crate::semantics::{joint_relevance, normalize_label, RelevanceTable};
use crate::{geom, par, rng, Error, Point2, Point3, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Random,
    Semantic,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Random => "random_astar",
            AgentKind::Semantic => "semantic_astar",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExploreConfig {
    /// Line-of-sight radius within which map cells become known.
    pub reveal_radius: f64,
    pub sweep_yaws: usize,
    pub sweep_pitches_deg: Vec<f64>,
    /// New sweeps are only taken this far from earlier ones.
    pub sweep_spacing: f64,
    pub camera: CameraSpec,
    pub max_frontier_targets: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            reveal_radius: 3.0,
            sweep_yaws: 8,
            sweep_pitches_deg: vec![0.0, -30.0],
            sweep_spacing: 1.5,
            camera: CameraSpec {
                width: 96,
                height: 96,
                ..CameraSpec::default()
            },
            max_frontier_targets: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub eps_nav: f64,
    pub d_next: f64,
    pub use_fn: bool,
    pub max_steps: usize,
    /// Travel per step; a navigation segment of length `d` costs
    /// `ceil(d / step_length)` steps and every observation one more.
    pub step_length: f64,
    /// Geodesic distance to a goal viewpoint that counts as success.
    pub success_radius: f64,
    pub navpoint_ring: [f64; 2],
    pub navpoint_stride: f64,
    pub camera_height: f64,
    pub camera: CameraSpec,
    pub max_tilt_deg: f64,
    pub explore: ExploreConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            eps_nav: 0.5,
            d_next: 1.0,
            use_fn: true,
            max_steps: 500,
            step_length: 0.25,
            success_radius: 1.0,
            navpoint_ring: [0.4, 1.2],
            navpoint_stride: 0.4,
            camera_height: 1.25,
            camera: CameraSpec::default(),
            max_tilt_deg: 15.0,
            explore: ExploreConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub plane_id: String,
    pub receptacle_label: String,
    pub region_label: String,
    pub centroid: [f64; 3],
    pub height: f64,
    pub navpoints: Vec<[f64; 2]>,
}

impl MemoryEntry {
    pub fn target(&self) -> Point3 {
        Point3::new(self.centroid[0], self.centroid[1], self.height)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExploreStats {
    pub known_reachable_fraction: f64,
    pub path_length: f64,
    pub sweeps: usize,
    pub observations: usize,
}

/// What an agent remembers about one floor of a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMemory {
    pub scene_id: String,
    pub floor: usize,
    pub entries: Vec<MemoryEntry>,
    pub explore: ExploreStats,
}

impl SceneMemory {
    pub fn regions(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.region_label.clone()).collect()
    }

    pub fn receptacles(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.receptacle_label.clone()).collect()
    }
}

type Slot = Arc<Mutex<Option<Arc<SceneMemory>>>>;

/// Cross-episode memory. Each `(scene, floor)` entry is built once, under a
/// per-entry lock, and shared read-only afterwards.
#[derive(Default)]
pub struct AgentMemory {
    slots: Mutex<BTreeMap<(String, usize), Slot>>,
}

impl AgentMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, scene_id: &str, floor: usize) -> bool {
        let slots = self.slots.lock().expect("memory lock");
        slots
            .get(&(scene_id.to_string(), floor))
            .is_some_and(|s| s.lock().expect("slot lock").is_some())
    }

    pub fn get_or_build(&self, scene_id: &str, floor: usize, build: impl FnOnce() -> Result<SceneMemory>) -> Result<Arc<SceneMemory>> {
        let slot = {
            let mut slots = self.slots.lock().expect("memory lock");
            slots.entry((scene_id.to_string(), floor)).or_default().clone()
        };
        let mut guard = slot.lock().expect("slot lock");
        if let Some(m) = guard.as_ref() {
            return Ok(m.clone());
        }
        let m = Arc::new(build()?);
        *guard = Some(m.clone());
        Ok(m)
    }
}

const UNKNOWN: u8 = 0;
const KNOWN: u8 = 1;

fn cell_of(grid: &NavGrid, p: &Point2) -> Option<(i64, i64)> {
    grid.world_to_cell(p).map(|(x, y)| (x as i64, y as i64))
}

/// Marks cells within `radius` that are visible from `p` along grid lines of
/// sight. Sight stops at the first non-navigable cell, which is itself seen.
fn reveal(grid: &NavGrid, known: &mut [u8], p: &Point2, radius: f64) {
    let Some((cx, cy)) = cell_of(grid, p) else {
        return;
    };
    let reach = (radius / grid.resolution).ceil() as i64;
    let r2 = (radius / grid.resolution).powi(2);
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if (dx * dx + dy * dy) as f64 > r2 {
                continue;
            }
            let (tx, ty) = (cx + dx, cy + dy);
            if tx < 0 || ty < 0 || tx >= grid.width as i64 || ty >= grid.height as i64 {
                continue;
            }
            if known[grid.index(tx as usize, ty as usize)] == KNOWN {
                continue;
            }
            // Bresenham from the agent to the target
            let (mut x, mut y) = (cx, cy);
            let (sx, sy) = (if tx > cx { 1 } else { -1 }, if ty > cy { 1 } else { -1 });
            let (ax, ay) = ((tx - cx).abs(), -(ty - cy).abs());
            let mut err = ax + ay;
            loop {
                let i = grid.index(x as usize, y as usize);
                known[i] = KNOWN;
                if (x, y) == (tx, ty) || !grid.is_navigable(x as usize, y as usize) {
                    break;
                }
                let e2 = 2 * err;
                if e2 >= ay {
                    err += ay;
                    x += sx;
                }
                if e2 <= ax {
                    err += ax;
                    y += sy;
                }
            }
        }
    }
}

fn is_frontier(grid: &NavGrid, known: &[u8], motion: &NavGrid, x: usize, y: usize) -> bool {
    if !motion.is_navigable(x, y) {
        return false;
    }
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= grid.width as i64 || ny >= grid.height as i64 {
                continue;
            }
            if known[grid.index(nx as usize, ny as usize)] == UNKNOWN {
                return true;
            }
        }
    }
    false
}

fn sweep(scene: &Scene, p: &Point2, floor_height: f64, camera_height: f64, cfg: &ExploreConfig) -> Vec<Observation> {
    let eye = Point3::new(p.x, p.y, floor_height + camera_height);
    let mut out = Vec::new();
    for k in 0..cfg.sweep_yaws {
        let yaw = k as f64 * std::f64::consts::TAU / cfg.sweep_yaws as f64;
        for &pitch in &cfg.sweep_pitches_deg {
            let cam = cfg.camera.at(eye, yaw, pitch.to_radians());
            out.push(render(
                scene,
                &cam,
                RenderOptions {
                    semantic: true,
                    color: false,
                },
            ));
        }
    }
    out
}

/// Deterministic exploration start: the cell of the largest component
/// closest to that component's centroid.
pub fn exploration_start(grid: &NavGrid) -> Result<Point2> {
    let comps = crate::navgrid::components(grid);
    let comp = comps.first().ok_or(Error::NoNavigableCells)?;
    let n = comp.len() as f64;
    let c = comp
        .iter()
        .fold(Point2::origin(), |acc, &(x, y)| acc + grid.cell_center(x, y).coords / n);
    let best = comp
        .iter()
        .min_by(|a, b| {
            let da = (grid.cell_center(a.0, a.1) - c).norm();
            let db = (grid.cell_center(b.0, b.1) - c).norm();
            da.total_cmp(&db).then(a.cmp(b))
        })
        .expect("component is non-empty");
    Ok(grid.cell_center(best.0, best.1))
}

/// Nearest-frontier exploration. Returns the observations of every sweep
/// and the exploration statistics.
pub fn explore(scene: &Scene, floor: &FloorMap, start: &Point2, cfg: &AgentConfig) -> Result<(Vec<Observation>, ExploreStats)> {
    let grid = &floor.grid;
    let motion_full = &floor.eroded;
    let mut known = vec![UNKNOWN; grid.width * grid.height];
    let mut pos = *start;
    if !motion_full.navigable_at(&pos) {
        return Err(Error::NotNavigable(format!("exploration start ({:.2}, {:.2})", pos.x, pos.y)));
    }
    let mut obs = Vec::new();
    let mut sweeps: Vec<Point2> = Vec::new();
    let mut path_length = 0.0;
    let ec = &cfg.explore;
    reveal(grid, &mut known, &pos, ec.reveal_radius);
    obs.extend(sweep(scene, &pos, floor.height, cfg.camera_height, ec));
    sweeps.push(pos);
    for _ in 0..ec.max_frontier_targets {
        let mut motion = motion_full.clone();
        for (i, k) in known.iter().enumerate() {
            if *k == UNKNOWN && motion.cells[i] == Cell::Navigable {
                motion.cells[i] = Cell::Obstacle;
            }
        }
        let Some(s) = motion.world_to_cell(&pos) else {
            break;
        };
        let field = distance_field(&motion, &[s]);
        let target = (0..field.len())
            .filter(|&i| field[i].is_finite())
            .filter(|&i| is_frontier(grid, &known, &motion, i % grid.width, i / grid.width))
            .min_by(|&a, &b| field[a].total_cmp(&field[b]).then(a.cmp(&b)));
        let Some(t) = target else {
            break;
        };
        let goal = grid.cell_center(t % grid.width, t / grid.width);
        let path = astar(&motion, &pos, &goal, 0.0)?;
        let mut since = 0.0;
        for w in path.waypoints.windows(2) {
            since += (w[1] - w[0]).norm();
            if since >= 0.5 {
                reveal(grid, &mut known, &w[1], ec.reveal_radius);
                since = 0.0;
            }
        }
        path_length += path.length;
        pos = path.end();
        reveal(grid, &mut known, &pos, ec.reveal_radius);
        if sweeps.iter().all(|q| (q - pos).norm() >= ec.sweep_spacing) {
            obs.extend(sweep(scene, &pos, floor.height, cfg.camera_height, ec));
            sweeps.push(pos);
        }
    }
    let s = motion_full.world_to_cell(start).expect("start checked");
    let reach = distance_field(motion_full, &[s]);
    let reachable: Vec<usize> = (0..reach.len()).filter(|&i| reach[i].is_finite()).collect();
    let seen = reachable.iter().filter(|&&i| known[i] == KNOWN).count();
    let stats = ExploreStats {
        known_reachable_fraction: seen as f64 / reachable.len().max(1) as f64,
        path_length,
        sweeps: sweeps.len(),
        observations: obs.len(),
    };
    Ok((obs, stats))
}

/// Navigable lattice points at hull distance within the ring, ordered by
/// angle around the hull centroid.
pub fn sample_navpoints(plane: &ReceptaclePlane, grid: &NavGrid, ring: [f64; 2], stride: f64) -> Vec<Point2> {
    let step = ((stride / grid.resolution).round() as usize).max(1);
    let c = geom::centroid(&plane.hull);
    let (lo, hi) = plane
        .hull
        .iter()
        .fold((c, c), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let pad = ring[1] + grid.resolution;
    let to_cell = |v: f64, o: f64| ((v - o) / grid.resolution).floor() as i64;
    let x0 = to_cell(lo.x - pad, grid.origin.x).max(0);
    let x1 = to_cell(hi.x + pad, grid.origin.x).min(grid.width as i64 - 1);
    let y0 = to_cell(lo.y - pad, grid.origin.y).max(0);
    let y1 = to_cell(hi.y + pad, grid.origin.y).min(grid.height as i64 - 1);
    let mut pts: Vec<(f64, f64, Point2)> = Vec::new();
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            let (x, y) = (ix as usize, iy as usize);
            if x % step != 0 || y % step != 0 || !grid.is_navigable(x, y) {
                continue;
            }
            let p = grid.cell_center(x, y);
            let d = geom::distance_to_convex(&plane.hull, &p);
            if d >= ring[0] && d <= ring[1] {
                let a = (p.y - c.y).atan2(p.x - c.x);
                pts.push((a, d, p));
            }
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.into_iter().map(|(_, _, p)| p).collect()
}

/// First-visit memory of one floor: explore, understand the observations
/// and sample navpoints around every near-horizontal plane.
pub fn build_memory(
    scene: &Scene,
    floor: &FloorMap,
    inputs: &UnderstandInputs<'_>,
    cfg: &AgentConfig,
    exec: par::Exec,
) -> Result<SceneMemory> {
    let start = exploration_start(&floor.eroded)?;
    let (obs, stats) = explore(scene, floor, &start, cfg)?;
    let u = understand_floor(floor, &obs, inputs, &format!("f{}_", floor.index), exec)?;
    let entries = u
        .planes
        .iter()
        .filter(|p| p.is_horizontal(cfg.max_tilt_deg))
        .map(|p| MemoryEntry {
            plane_id: p.plane_id.clone(),
            receptacle_label: p.receptacle_label.clone(),
            region_label: p.region_label.clone(),
            centroid: [p.centroid.x, p.centroid.y, p.centroid.z],
            height: p.height,
            navpoints: sample_navpoints(p, &floor.eroded, cfg.navpoint_ring, cfg.navpoint_stride)
                .iter()
                .map(|q| [q.x, q.y])
                .collect(),
        })
        .collect();
    Ok(SceneMemory {
        scene_id: scene.id.clone(),
        floor: floor.index,
        entries,
        explore: stats,
    })
}

/// Visit order of memory entries. Random shuffles with the episode seed;
/// Semantic sorts by decreasing joint relevance, ties by plane id.
pub fn visit_order(kind: AgentKind, memory: &SceneMemory, goal: &str, table: Option<&RelevanceTable>, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..memory.entries.len()).collect();
    match kind {
        AgentKind::Random => {
            order.sort_by(|&a, &b| memory.entries[a].plane_id.cmp(&memory.entries[b].plane_id));
            let mut r = rng::rng_for(seed, "shuffle");
            order.shuffle(&mut r);
        }
        AgentKind::Semantic => {
            let score = |i: usize| {
                let e = &memory.entries[i];
                table.map_or(0.0, |t| joint_relevance(t, goal, &e.region_label, &e.receptacle_label))
            };
            order.sort_by(|&a, &b| {
                score(b)
                    .total_cmp(&score(a))
                    .then(memory.entries[a].plane_id.cmp(&memory.entries[b].plane_id))
            });
        }
    }
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Navigate { target: [f64; 2], length: f64, reached: [f64; 2] },
    Observe { at: [f64; 2], plane_id: String },
    FinalApproach { goal: [f64; 3], length: f64, reached: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub at: [f64; 2],
    pub label: String,
    pub position: [f64; 3],
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GoalDetected,
    Exhausted,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode_id: String,
    pub agent: String,
    pub use_fn: bool,
    pub poses: Vec<[f64; 2]>,
    pub actions: Vec<Action>,
    pub detections: Vec<DetectionRecord>,
    pub visit_order: Vec<String>,
    pub navpoints_visited: usize,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub result: EpisodeResult,
}

/// How goal detection is done at navpoints.
#[derive(Clone)]
pub enum NavDetector {
    /// Ground-truth visibility of the goal's placed objects, checked only in
    /// their projected boxes. Same decision as the full-frame oracle.
    GroundTruth { eta_gt: f64 },
    /// Full-frame rendering through an arbitrary detector.
    Model(Arc<dyn Detector>),
}

/// One episode's world: variant scene, its placements and the floor maps.
pub struct EpisodeWorld<'a> {
    pub scene: &'a Scene,
    pub variant: &'a SceneVariant,
    pub library: &'a ObjectLibrary,
    pub floor: &'a FloorMap,
}

struct Walker<'a> {
    grid: &'a NavGrid,
    pos: Point2,
    poses: Vec<[f64; 2]>,
    actions: Vec<Action>,
    length: f64,
    steps: usize,
    cfg: &'a AgentConfig,
}

impl Walker<'_> {
    fn charge(&mut self, length: f64) {
        self.steps += (length / self.cfg.step_length).ceil() as usize;
    }

    fn follow(&mut self, path: &Path) {
        self.poses.extend(path.waypoints.iter().skip(1).map(|p| [p.x, p.y]));
        self.length += path.length;
        self.charge(path.length);
        self.pos = path.end();
    }

    fn out_of_steps(&self) -> bool {
        self.steps > self.cfg.max_steps
    }
}

fn detect_goal(world: &EpisodeWorld<'_>, goal: &str, eye: Point3, target: Point3, cfg: &AgentConfig, det: &NavDetector) -> Result<Option<(Point3, f64)>> {
    let cam = cfg.camera.look_at(eye, target);
    match det {
        NavDetector::GroundTruth { eta_gt } => {
            let needed = pixels_needed(&cam, *eta_gt);
            let goal_key = normalize_label(goal);
            for p in world.variant.placements.iter().filter(|p| normalize_label(&p.category) == goal_key) {
                let key = p.instance_key();
                let Some(inst) = world
                    .scene
                    .instances
                    .iter()
                    .find(|i| i.kind == InstanceKind::Object && i.key.as_deref() == Some(key.as_str()))
                else {
                    continue;
                };
                let (lo, hi) = placement_bounds(p, world.library)?;
                let Some(w) = box_window(&cam, &lo, &hi) else {
                    continue;
                };
                if instance_visible(world.scene, &cam, inst.id, w, needed) {
                    let c = PointCloud::new(instance_points(world.scene, &cam, inst.id, w))
                        .centroid()
                        .expect("visible instance has points");
                    return Ok(Some((c, 1.0)));
                }
            }
            Ok(None)
        }
        NavDetector::Model(d) => {
            let obs = render(
                world.scene,
                &cam,
                RenderOptions {
                    semantic: true,
                    color: true,
                },
            );
            let vocab = [goal.to_string()];
            let mut best: Option<(Point3, f64)> = None;
            for dn in d.detect(&obs, Some(&vocab))? {
                if normalize_label(&dn.label) != normalize_label(goal) {
                    continue;
                }
                if let Some(c) = reproject_to_points(&obs, &dn.mask).centroid() {
                    if best.as_ref().is_none_or(|b| dn.confidence > b.1) {
                        best = Some((c, dn.confidence));
                    }
                }
            }
            Ok(best)
        }
    }
}

/// Runs one episode with a built memory. `seed` only drives the random
/// visit order.
pub fn run_episode(
    kind: AgentKind,
    episode: &Episode,
    memory: &SceneMemory,
    table: Option<&RelevanceTable>,
    world: &EpisodeWorld<'_>,
    cfg: &AgentConfig,
    detector: &NavDetector,
    seed: u64,
) -> Result<Trajectory> {
    let grid = &world.floor.eroded;
    let start = episode.start_point();
    let vps: Vec<CellIndex> = episode.viewpoints().iter().filter_map(|v| grid.world_to_cell(v)).collect();
    let to_goal = distance_field(grid, &vps);
    let geo = |p: &Point2| grid.world_to_cell(p).map_or(f64::INFINITY, |c| to_goal[grid.index(c.0, c.1)]);
    let d_init = geo(&start);
    let mut w = Walker {
        grid,
        pos: start,
        poses: vec![[start.x, start.y]],
        actions: Vec::new(),
        length: 0.0,
        steps: 0,
        cfg,
    };
    let order = visit_order(kind, memory, &episode.goal_category, table, rng::derive_seed(seed, &episode.episode_id));
    let mut detections = Vec::new();
    let mut visited = 0;
    let mut stop = StopReason::Exhausted;
    'outer: for &ei in &order {
        let entry = &memory.entries[ei];
        let mut pending: Vec<Point2> = entry.navpoints.iter().map(|p| Point2::new(p[0], p[1])).collect();
        while !pending.is_empty() {
            let target = pending.remove(0);
            let path = match astar(w.grid, &w.pos, &target, cfg.eps_nav) {
                Ok(p) => p,
                Err(Error::Unreachable) | Err(Error::NotNavigable(_)) => continue,
                Err(e) => return Err(e),
            };
            w.follow(&path);
            w.actions.push(Action::Navigate {
                target: [target.x, target.y],
                length: path.length,
                reached: [w.pos.x, w.pos.y],
            });
            if w.out_of_steps() {
                stop = StopReason::MaxSteps;
                break 'outer;
            }
            visited += 1;
            w.steps += 1;
            w.actions.push(Action::Observe {
                at: [w.pos.x, w.pos.y],
                plane_id: entry.plane_id.clone(),
            });
            let eye = Point3::new(w.pos.x, w.pos.y, world.floor.height + cfg.camera_height);
            if let Some((g, conf)) = detect_goal(world, &episode.goal_category, eye, entry.target(), cfg, detector)? {
                detections.push(DetectionRecord {
                    at: [w.pos.x, w.pos.y],
                    label: episode.goal_category.clone(),
                    position: [g.x, g.y, g.z],
                    confidence: conf,
                });
                if cfg.use_fn {
                    if let Ok(path) = astar_closest(w.grid, &w.pos, &g.xy(), cfg.eps_nav) {
                        w.follow(&path);
                        w.actions.push(Action::FinalApproach {
                            goal: [g.x, g.y, g.z],
                            length: path.length,
                            reached: [w.pos.x, w.pos.y],
                        });
                    }
                }
                stop = StopReason::GoalDetected;
                break 'outer;
            }
            let here = w.pos;
            pending.retain(|p| (p - here).norm() >= cfg.d_next);
        }
    }
    let d_final = geo(&w.pos);
    let result = EpisodeResult {
        success: d_final <= cfg.success_radius,
        path_length: w.length,
        shortest_path: episode.shortest_path_length,
        d_init,
        d_final,
    };
    Ok(Trajectory {
        episode_id: episode.episode_id.clone(),
        agent: kind.name().to_string(),
        use_fn: cfg.use_fn,
        poses: w.poses,
        actions: w.actions,
        detections,
        visit_order: order.iter().map(|&i| memory.entries[i].plane_id.clone()).collect(),
        navpoints_visited: visited,
        steps: w.steps,
        stop_reason: stop,
        result,
    })
}
