//! Floor identification, top-down navigable maps, erosion and grid planning.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::raycast::Bvh;
use crate::scene::TriangleMesh;
use crate::{Error, Point2, Point3, Result, Vector3};

/// Default planner resolution in metres per cell.
pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_SLICE_HEIGHT: f64 = 0.3;
pub const DEFAULT_EROSION: f64 = 0.25;
/// Bandwidth of the 1D floor clustering.
pub const FLOOR_BANDWIDTH: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Navigable,
    Obstacle,
    Void,
}

pub type CellIndex = (usize, usize);

/// Top-down raster of one floor. Cell `(ix, iy)` covers
/// `origin + [ix, ix+1) x [iy, iy+1) * resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct NavGrid {
    pub resolution: f64,
    pub origin: Point2,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
    pub floor_height: f64,
}

impl NavGrid {
    pub fn new(resolution: f64, origin: Point2, width: usize, height: usize, floor_height: f64, fill: Cell) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::Config(format!("grid resolution must be positive, got {resolution}")));
        }
        Ok(NavGrid {
            resolution,
            origin,
            width,
            height,
            cells: vec![fill; width * height],
            floor_height,
        })
    }

    /// Grid from rows of text, top row = highest y: `.` navigable, `#` obstacle,
    /// anything else void.
    pub fn from_ascii(rows: &[&str], resolution: f64, origin: Point2) -> Result<Self> {
        let height = rows.len();
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let mut g = NavGrid::new(resolution, origin, width, height, 0.0, Cell::Void)?;
        for (r, row) in rows.iter().enumerate() {
            let iy = height - 1 - r;
            for (ix, ch) in row.chars().enumerate() {
                let c = match ch {
                    '.' => Cell::Navigable,
                    '#' => Cell::Obstacle,
                    _ => Cell::Void,
                };
                g.set(ix, iy, c);
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    #[inline]
    pub fn cell(&self, ix: usize, iy: usize) -> Cell {
        self.cells[self.index(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, c: Cell) {
        let i = self.index(ix, iy);
        self.cells[i] = c;
    }

    #[inline]
    pub fn is_navigable(&self, ix: usize, iy: usize) -> bool {
        self.cell(ix, iy) == Cell::Navigable
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn world_to_cell(&self, p: &Point2) -> Option<CellIndex> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn navigable_at(&self, p: &Point2) -> bool {
        self.world_to_cell(p).is_some_and(|(x, y)| self.is_navigable(x, y))
    }

    pub fn navigable_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Navigable).count()
    }

    pub fn navigable_cells(&self) -> Vec<CellIndex> {
        let mut out = Vec::new();
        for iy in 0..self.height {
            for ix in 0..self.width {
                if self.is_navigable(ix, iy) {
                    out.push((ix, iy));
                }
            }
        }
        out
    }

    pub fn mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| *c == Cell::Navigable).collect()
    }

    /// Navigable cell whose centre is closest to `p`.
    pub fn nearest_navigable(&self, p: &Point2) -> Option<CellIndex> {
        self.navigable_cells()
            .into_iter()
            .map(|c| ((self.cell_center(c.0, c.1) - p).norm_squared(), c))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, c)| c)
    }

    /// 8-connected moves with their metric cost; diagonals need both
    /// orthogonal cells navigable.
    pub fn neighbors(&self, ix: usize, iy: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        const DIRS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        let diag = std::f64::consts::SQRT_2 * self.resolution;
        DIRS.iter().filter_map(move |&(dx, dy)| {
            let nx = ix as i64 + dx;
            let ny = iy as i64 + dy;
            if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
                return None;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !self.is_navigable(nx, ny) {
                return None;
            }
            if dx != 0 && dy != 0 {
                // no corner cutting
                if !self.is_navigable(nx, iy) || !self.is_navigable(ix, ny) {
                    return None;
                }
                Some((nx, ny, diag))
            } else {
                Some((nx, ny, self.resolution))
            }
        })
    }

    /// Binary PGM: navigable 255, void 128, obstacle 0; first row is the
    /// highest y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                out.push(match self.cell(ix, iy) {
                    Cell::Navigable => 255,
                    Cell::Void => 128,
                    Cell::Obstacle => 0,
                });
            }
        }
        out
    }

    pub fn sidecar(&self) -> GridSidecar {
        GridSidecar {
            resolution: self.resolution,
            origin: [self.origin.x, self.origin.y],
            width: self.width,
            height: self.height,
            floor_height: self.floor_height,
            navigable: 255,
            void: 128,
            obstacle: 0,
            row_order: "top row is highest y".into(),
        }
    }

    /// Writes `<stem>.pgm` and `<stem>.json`.
    pub fn export(&self, stem: &FsPath) -> Result<()> {
        let pgm = stem.with_extension("pgm");
        std::fs::write(&pgm, self.to_pgm()).map_err(|e| Error::io(&pgm, e))?;
        let json = stem.with_extension("json");
        let text = serde_json::to_string_pretty(&self.sidecar())? + "\n";
        std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
    pub floor_height: f64,
    pub navigable: u8,
    pub void: u8,
    pub obstacle: u8,
    pub row_order: String,
}

fn is_up_facing(n: &Vector3) -> bool {
    let len = n.norm();
    len > 0.0 && n.z / len > 0.95
}

/// Floor heights, ascending. Heights of up-facing triangles are clustered in
/// 1D (area weighted, clusters split at gaps wider than the bandwidth);
/// clusters carrying at least a quarter of the heaviest cluster's area are
/// floors, located at their densest 1 cm bin.
pub fn identify_floors(mesh: &TriangleMesh) -> Result<Vec<f64>> {
    if mesh.is_empty() {
        return Err(Error::Empty("mesh"));
    }
    let mut samples: Vec<(f64, f64)> = (0..mesh.triangles.len())
        .filter(|&i| is_up_facing(&mesh.face_normal(i)))
        .map(|i| {
            let [a, b, c] = mesh.triangle(i);
            ((a.z + b.z + c.z) / 3.0, mesh.face_area(i))
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::NoFloor);
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut clusters: Vec<Vec<(f64, f64)>> = vec![vec![samples[0]]];
    for w in samples.windows(2) {
        if w[1].0 - w[0].0 > FLOOR_BANDWIDTH {
            clusters.push(Vec::new());
        }
        clusters.last_mut().unwrap().push(w[1]);
    }
    let weight = |c: &[(f64, f64)]| c.iter().map(|s| s.1).sum::<f64>();
    let heaviest = clusters.iter().map(|c| weight(c)).fold(0.0, f64::max);
    let floors: Vec<f64> = clusters
        .iter()
        .filter(|c| weight(c) >= 0.25 * heaviest)
        .map(|c| {
            let mut bins: std::collections::BTreeMap<i64, (f64, f64, f64)> = Default::default();
            for &(z, a) in c.iter() {
                let e = bins.entry((z * 100.0).round() as i64).or_default();
                e.0 += a;
                e.1 += a * z;
                e.2 += 1.0;
            }
            let (_, best) = bins
                .iter()
                .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.0.cmp(a.0)))
                .unwrap();
            best.1 / best.0
        })
        .collect();
    if floors.is_empty() {
        return Err(Error::NoFloor);
    }
    Ok(floors)
}

/// Index of the floor a height belongs to: the highest floor not more than
/// half the bandwidth above `z`, or floor 0.
pub fn floor_of(z: f64, floors: &[f64]) -> usize {
    floors.iter().rposition(|&f| f <= z + FLOOR_BANDWIDTH / 2.0).unwrap_or(0)
}

/// Clips a triangle to `z0 <= z <= z1`.
fn clip_to_slab(tri: &[Point3; 3], z0: f64, z1: f64) -> Vec<Point3> {
    let mut poly: Vec<Point3> = tri.to_vec();
    for (bound, keep_above) in [(z0, true), (z1, false)] {
        if poly.is_empty() {
            break;
        }
        let inside = |p: &Point3| if keep_above { p.z >= bound } else { p.z <= bound };
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            match (inside(&a), inside(&b)) {
                (true, true) => out.push(b),
                (true, false) | (false, true) => {
                    let t = (bound - a.z) / (b.z - a.z);
                    let x = a + (b - a) * t;
                    out.push(x);
                    if inside(&b) {
                        out.push(b);
                    }
                }
                (false, false) => {}
            }
        }
        poly = out;
    }
    poly
}

fn point_in_polygon_2d(poly: &[Point2], p: &Point2) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut pos = false;
    let mut neg = false;
    for i in 0..n {
        let c = crate::geom::cross(&poly[i], &poly[(i + 1) % n], p);
        if c > 1e-12 {
            pos = true;
        } else if c < -1e-12 {
            neg = true;
        }
        if pos && neg {
            return false;
        }
    }
    true
}

/// Marks cells touched by a convex polygon's outline, plus cells whose centre
/// lies inside it.
fn rasterize(grid: &NavGrid, poly: &[Point2], mut mark: impl FnMut(usize, usize), outline: bool) {
    if poly.is_empty() {
        return;
    }
    let res = grid.resolution;
    if outline {
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let steps = ((b - a).norm() / (res / 3.0)).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let p = a + (b - a) * (s as f64 / steps as f64);
                if let Some((x, y)) = grid.world_to_cell(&p) {
                    mark(x, y);
                }
            }
        }
    }
    if poly.len() < 3 || crate::geom::area(poly) < 1e-12 {
        return;
    }
    let (mut lo, mut hi) = (poly[0], poly[0]);
    for p in poly {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let Some((x0, y0)) = grid.world_to_cell(&lo.sup(&grid.origin)) else {
        return;
    };
    let xmax = grid.width - 1;
    let ymax = grid.height - 1;
    let x1 = (((hi.x - grid.origin.x) / res).floor().max(0.0) as usize).min(xmax);
    let y1 = (((hi.y - grid.origin.y) / res).floor().max(0.0) as usize).min(ymax);
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            if point_in_polygon_2d(poly, &grid.cell_center(ix, iy)) {
                mark(ix, iy);
            }
        }
    }
}

/// Slices the mesh at `floor_height + slice_height`.
///
/// Geometry intersecting the slab `[h - res/2, h + res/2]` marks obstacles,
/// as do cells whose slice point lies inside a closed labeled solid
/// (parity of upward crossings). Up-facing triangles near the floor height
/// define floor support; supported, unobstructed cells are navigable and the
/// rest is void.
pub fn slice_navmap(mesh: &TriangleMesh, floor_height: f64, slice_height: f64, resolution: f64) -> Result<NavGrid> {
    if !(resolution > 0.0) {
        return Err(Error::Config(format!("grid resolution must be positive, got {resolution}")));
    }
    let (lo, hi) = mesh.bounds().ok_or(Error::Empty("mesh"))?;
    let origin = Point2::new(
        (lo.x / resolution).floor() * resolution - resolution,
        (lo.y / resolution).floor() * resolution - resolution,
    );
    let width = ((hi.x - origin.x) / resolution).ceil() as usize + 2;
    let height = ((hi.y - origin.y) / resolution).ceil() as usize + 2;
    let mut grid = NavGrid::new(resolution, origin, width, height, floor_height, Cell::Void)?;

    let h = floor_height + slice_height;
    let (z0, z1) = (h - resolution / 2.0, h + resolution / 2.0);
    let mut floor = vec![false; width * height];
    let mut obstacle = vec![false; width * height];
    for i in 0..mesh.triangles.len() {
        let tri = mesh.triangle(i);
        let zmin = tri.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        let zmax = tri.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
        if is_up_facing(&mesh.face_normal(i)) && zmin >= floor_height - 0.15 && zmax <= floor_height + 0.15 {
            let poly: Vec<Point2> = tri.iter().map(|p| p.xy()).collect();
            rasterize(&grid, &poly, |x, y| floor[y * width + x] = true, false);
        }
        if zmax < z0 || zmin > z1 {
            continue;
        }
        let clipped = clip_to_slab(&tri, z0, z1);
        let poly: Vec<Point2> = clipped.iter().map(|p| p.xy()).collect();
        rasterize(&grid, &poly, |x, y| obstacle[y * width + x] = true, true);
    }

    // solids whose walls straddle the slab without touching a cell
    let mut labeled = TriangleMesh::new();
    for i in 0..mesh.triangles.len() {
        if mesh.face_instance[i].is_some() {
            let [a, b, c] = mesh.triangle(i);
            if a.z.max(b.z).max(c.z) >= h {
                let base = labeled.vertices.len() as u32;
                labeled.vertices.extend_from_slice(&[a, b, c]);
                labeled.triangles.push([base, base + 1, base + 2]);
                labeled.face_instance.push(mesh.face_instance[i]);
            }
        }
    }
    let bvh = Bvh::build(&labeled);
    let up = Vector3::z();
    let mut crossings: std::collections::HashMap<u32, usize> = Default::default();
    for iy in 0..height {
        for ix in 0..width {
            let k = iy * width + ix;
            if !floor[k] || obstacle[k] {
                continue;
            }
            let c = grid.cell_center(ix, iy);
            // jitter away from shared triangle edges
            let o = Point3::new(c.x + 1.234_567e-5, c.y + 2.345_678e-5, h);
            crossings.clear();
            bvh.for_each_hit(&o, &up, 0.0, f64::INFINITY, |hit| {
                if let Some(id) = hit.instance {
                    *crossings.entry(id).or_default() += 1;
                }
            });
            if crossings.values().any(|n| n % 2 == 1) {
                obstacle[k] = true;
            }
        }
    }

    for k in 0..width * height {
        grid.cells[k] = if obstacle[k] {
            Cell::Obstacle
        } else if floor[k] {
            Cell::Navigable
        } else {
            Cell::Void
        };
    }
    Ok(grid)
}

/// Cell offsets within `radius` (in metres) of a cell centre.
fn disc_offsets(radius: f64, resolution: f64) -> Vec<(i64, i64)> {
    let r = (radius / resolution).floor() as i64 + 1;
    let r2 = (radius / resolution).powi(2) + 1e-9;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Turns navigable cells within `radius` of any non-navigable cell centre
/// (or the raster border) into obstacles.
pub fn erode(grid: &NavGrid, radius: f64) -> NavGrid {
    let mut out = grid.clone();
    if radius <= 0.0 {
        return out;
    }
    let offsets = disc_offsets(radius, grid.resolution);
    let (w, h) = (grid.width as i64, grid.height as i64);
    for iy in -1..=h {
        for ix in -1..=w {
            let blocked = ix < 0 || iy < 0 || ix >= w || iy >= h || !grid.is_navigable(ix as usize, iy as usize);
            if !blocked {
                continue;
            }
            // only boundary blockers can reach a navigable cell first
            let touches = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
                .iter()
                .any(|(dx, dy)| {
                    let (nx, ny) = (ix + dx, iy + dy);
                    nx >= 0 && ny >= 0 && nx < w && ny < h && grid.is_navigable(nx as usize, ny as usize)
                });
            if !touches {
                continue;
            }
            for (dx, dy) in &offsets {
                let (nx, ny) = (ix + dx, iy + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h && out.is_navigable(nx as usize, ny as usize) {
                    out.set(nx as usize, ny as usize, Cell::Obstacle);
                }
            }
        }
    }
    out
}

/// Sliced map of one floor and its eroded counterpart used for planning.
#[derive(Clone, Debug, PartialEq)]
pub struct FloorMap {
    pub index: usize,
    pub height: f64,
    pub grid: NavGrid,
    pub eroded: NavGrid,
}

pub fn build_floor_maps(mesh: &TriangleMesh, slice_height: f64, resolution: f64, erosion: f64) -> Result<Vec<FloorMap>> {
    identify_floors(mesh)?
        .into_iter()
        .enumerate()
        .map(|(index, height)| {
            let grid = slice_navmap(mesh, height, slice_height, resolution)?;
            let eroded = erode(&grid, erosion);
            Ok(FloorMap {
                index,
                height,
                grid,
                eroded,
            })
        })
        .collect()
}

/// Grid path through navigable cell centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point2>,
    pub length: f64,
}

impl Path {
    pub fn end(&self) -> Point2 {
        *self.waypoints.last().expect("path has at least one waypoint")
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Node {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn start_cell(grid: &NavGrid, start: &Point2) -> Result<CellIndex> {
    match grid.world_to_cell(start) {
        Some((x, y)) if grid.is_navigable(x, y) => Ok((x, y)),
        _ => Err(Error::NotNavigable(format!("({:.3}, {:.3})", start.x, start.y))),
    }
}

fn octile(grid: &NavGrid, a: CellIndex, b: CellIndex) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    grid.resolution * (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy))
}

fn reconstruct(grid: &NavGrid, parent: &[usize], g: f64, mut idx: usize) -> Path {
    let mut cells = vec![idx];
    while parent[idx] != usize::MAX {
        idx = parent[idx];
        cells.push(idx);
    }
    cells.reverse();
    Path {
        waypoints: cells
            .iter()
            .map(|&i| grid.cell_center(i % grid.width, i / grid.width))
            .collect(),
        length: g,
    }
}

/// Shortest 8-connected path from the start cell to any navigable cell
/// whose centre is within `tolerance` of `goal` (the goal's own cell always
/// qualifies).
pub fn astar(grid: &NavGrid, start: &Point2, goal: &Point2, tolerance: f64) -> Result<Path> {
    astar_multi(grid, start, std::slice::from_ref(goal), tolerance)
}

/// [`astar`] towards the nearest of several goals.
pub fn astar_multi(grid: &NavGrid, start: &Point2, goals: &[Point2], tolerance: f64) -> Result<Path> {
    let s = start_cell(grid, start)?;
    let goal_cells: Vec<Option<CellIndex>> = goals.iter().map(|g| grid.world_to_cell(g)).collect();
    let mut goal_mask = vec![false; grid.width * grid.height];
    let reach = (tolerance.max(0.0) / grid.resolution).ceil() as i64 + 1;
    for (g, gc) in goals.iter().zip(&goal_cells) {
        if let Some((x, y)) = *gc {
            goal_mask[grid.index(x, y)] = true;
        }
        let cx = ((g.x - grid.origin.x) / grid.resolution).floor() as i64;
        let cy = ((g.y - grid.origin.y) / grid.resolution).floor() as i64;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (x, y) = (cx + dx, cy + dy);
                if x < 0 || y < 0 || x >= grid.width as i64 || y >= grid.height as i64 {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                if (grid.cell_center(x, y) - g).norm() <= tolerance + 1e-9 {
                    goal_mask[grid.index(x, y)] = true;
                }
            }
        }
    }
    let is_goal = |c: CellIndex| goal_mask[grid.index(c.0, c.1)];
    let heuristic = |c: CellIndex| -> f64 {
        if goals.len() > 16 {
            return 0.0;
        }
        let p = grid.cell_center(c.0, c.1);
        goals
            .iter()
            .zip(&goal_cells)
            .map(|(g, gc)| {
                if tolerance <= 0.0 {
                    gc.map_or(((p - g).norm() - grid.resolution).max(0.0), |gc| octile(grid, c, gc))
                } else {
                    ((p - g).norm() - tolerance).max(0.0)
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    let n = grid.width * grid.height;
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let si = grid.index(s.0, s.1);
    dist[si] = 0.0;
    heap.push(Node { f: heuristic(s), g: 0.0, idx: si });
    while let Some(Node { g, idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let c = (idx % grid.width, idx / grid.width);
        if is_goal(c) {
            return Ok(reconstruct(grid, &parent, g, idx));
        }
        for (nx, ny, cost) in grid.neighbors(c.0, c.1) {
            let ni = grid.index(nx, ny);
            let ng = g + cost;
            if ng < dist[ni] - 1e-12 {
                dist[ni] = ng;
                parent[ni] = idx;
                heap.push(Node {
                    f: ng + heuristic((nx, ny)),
                    g: ng,
                    idx: ni,
                });
            }
        }
    }
    Err(Error::Unreachable)
}

/// Multi-source Dijkstra distance field in metres; unreachable cells are
/// `+inf`. Non-navigable sources are ignored.
pub fn distance_field(grid: &NavGrid, sources: &[CellIndex]) -> Vec<f64> {
    let n = grid.width * grid.height;
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for &(x, y) in sources {
        if x < grid.width && y < grid.height && grid.is_navigable(x, y) {
            let i = grid.index(x, y);
            dist[i] = 0.0;
            heap.push(Node { f: 0.0, g: 0.0, idx: i });
        }
    }
    while let Some(Node { g, idx, .. }) = heap.pop() {
        if g > dist[idx] {
            continue;
        }
        for (nx, ny, cost) in grid.neighbors(idx % grid.width, idx / grid.width) {
            let ni = grid.index(nx, ny);
            if g + cost < dist[ni] - 1e-12 {
                dist[ni] = g + cost;
                heap.push(Node { f: g + cost, g: g + cost, idx: ni });
            }
        }
    }
    dist
}

/// Geodesic distance between the cells containing `from` and `to`, or
/// `+inf` when either is not navigable or no path exists.
pub fn geodesic_distance(grid: &NavGrid, from: &Point2, to: &Point2) -> f64 {
    match grid.world_to_cell(to) {
        Some((x, y)) if grid.is_navigable(x, y) => astar(grid, from, to, 0.0).map_or(f64::INFINITY, |p| p.length),
        _ => f64::INFINITY,
    }
}

/// Path to the goal when reachable within `tolerance`; otherwise to the
/// reachable cell closest (in the plane) to the goal.
pub fn astar_closest(grid: &NavGrid, start: &Point2, goal: &Point2, tolerance: f64) -> Result<Path> {
    match astar(grid, start, goal, tolerance) {
        Ok(p) => return Ok(p),
        Err(Error::Unreachable) => {}
        Err(e) => return Err(e),
    }
    let s = start_cell(grid, start)?;
    let field = distance_field(grid, &[s]);
    let best = (0..field.len())
        .filter(|&i| field[i].is_finite())
        .min_by(|&a, &b| {
            let da = (grid.cell_center(a % grid.width, a / grid.width) - goal).norm();
            let db = (grid.cell_center(b % grid.width, b / grid.width) - goal).norm();
            da.total_cmp(&db).then(field[a].total_cmp(&field[b])).then(a.cmp(&b))
        })
        .ok_or(Error::Unreachable)?;
    let target = grid.cell_center(best % grid.width, best / grid.width);
    astar(grid, start, &target, 0.0)
}

/// 8-connected navigable components, largest first, as cell lists.
pub fn components(grid: &NavGrid) -> Vec<Vec<CellIndex>> {
    let mut seen = vec![false; grid.cells.len()];
    let mut out = Vec::new();
    for start in grid.navigable_cells() {
        if seen[grid.index(start.0, start.1)] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[grid.index(start.0, start.1)] = true;
        while let Some(c) = stack.pop() {
            comp.push(c);
            for (nx, ny, _) in grid.neighbors(c.0, c.1) {
                let i = grid.index(nx, ny);
                if !seen[i] {
                    seen[i] = true;
                    stack.push((nx, ny));
                }
            }
        }
        out.push(comp);
    }
    out.sort_by_key(|c| std::cmp::Reverse(c.len()));
    out
}
