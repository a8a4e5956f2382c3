//! Coverage-driven observation sampling over a navigable map.
//!
//! Candidates are drawn with probability proportional to `1 - M_P`, filtered
//! against the eroded map, and each accepted point overlays a peak-normalised
//! Gaussian onto the coverage layer by probabilistic OR.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::camera::{render, CameraSpec, Observation, RenderOptions};
use crate::navgrid::{erode, CellIndex, NavGrid};
use crate::scene::Scene;
use crate::{rng, Error, Point2, Point3, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub yaws_deg: Vec<f64>,
    pub pitches_deg: Vec<f64>,
    pub coverage_threshold: f64,
    pub max_iterations: usize,
    pub strong_threshold: f64,
    pub erosion_radius: f64,
    pub camera_height: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub hfov_deg: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            r_min: 0.1,
            r_max: 3.0,
            yaws_deg: (0..8).map(|k| k as f64 * 45.0).collect(),
            pitches_deg: vec![0.0, -30.0],
            coverage_threshold: 0.9,
            max_iterations: 1000,
            strong_threshold: 0.5,
            erosion_radius: 0.25,
            camera_height: 1.25,
            image_width: 128,
            image_height: 128,
            hfov_deg: 90.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min >= 0.0 && self.r_min < self.r_max) {
            return Err(Error::Config("sampler needs 0 <= r_min < r_max".into()));
        }
        for (name, v) in [("coverage_threshold", self.coverage_threshold), ("strong_threshold", self.strong_threshold)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        if self.erosion_radius < 0.0 {
            return Err(Error::Config("erosion radius must be non-negative".into()));
        }
        Ok(())
    }

    pub fn camera_spec(&self) -> CameraSpec {
        CameraSpec {
            width: self.image_width,
            height: self.image_height,
            hfov_deg: self.hfov_deg,
            r_min: self.r_min.max(0.05),
            r_max: self.r_max,
        }
    }

    /// Distance at which the kernel equals `strong_threshold`.
    pub fn strong_radius(&self) -> f64 {
        self.r_max * (-2.0 * self.strong_threshold.ln()).sqrt()
    }
}

/// Peak-normalised coverage kernel `exp(-d² / 2 r_max²)`, zero inside `r_min`.
pub fn coverage_kernel(center: &Point2, query: &Point2, cfg: &SamplerConfig) -> f64 {
    kernel_at((query - center).norm(), cfg)
}

fn kernel_at(d: f64, cfg: &SamplerConfig) -> f64 {
    if d < cfg.r_min {
        return 0.0;
    }
    (-(d * d) / (2.0 * cfg.r_max * cfg.r_max)).exp()
}

/// Observation-coverage probability raster aligned with a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageLayer {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl CoverageLayer {
    pub fn new(grid: &NavGrid) -> Self {
        CoverageLayer {
            width: grid.width,
            height: grid.height,
            values: vec![0.0; grid.width * grid.height],
        }
    }

    pub fn get(&self, c: CellIndex) -> f64 {
        self.values[c.1 * self.width + c.0]
    }

    /// Probabilistic OR of the kernel centred at `p` (cells farther than
    /// `4 r_max` are left untouched).
    pub fn overlay(&mut self, grid: &NavGrid, p: &Point2, cfg: &SamplerConfig) {
        let cutoff = 4.0 * cfg.r_max;
        let reach = (cutoff / grid.resolution).ceil() as i64;
        let cx = ((p.x - grid.origin.x) / grid.resolution).floor() as i64;
        let cy = ((p.y - grid.origin.y) / grid.resolution).floor() as i64;
        for iy in (cy - reach).max(0)..=(cy + reach).min(grid.height as i64 - 1) {
            for ix in (cx - reach).max(0)..=(cx + reach).min(grid.width as i64 - 1) {
                let q = grid.cell_center(ix as usize, iy as usize);
                let d = (q - p).norm();
                if d > cutoff {
                    continue;
                }
                let g = kernel_at(d, cfg);
                let k = iy as usize * self.width + ix as usize;
                let v = 1.0 - (1.0 - self.values[k]) * (1.0 - g);
                self.values[k] = v.clamp(0.0, 1.0);
            }
        }
    }

    /// Fraction of `cells` whose value is at least `threshold`.
    pub fn fraction_at_least(&self, cells: &[CellIndex], threshold: f64) -> f64 {
        if cells.is_empty() {
            return 0.0;
        }
        cells.iter().filter(|c| self.get(**c) >= threshold).count() as f64 / cells.len() as f64
    }

    /// Binary PGM, first row is the highest y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                out.push((self.values[iy * self.width + ix] * 255.0).round() as u8);
            }
        }
        out
    }
}

/// Draws one candidate cell with probability proportional to `1 - M_P`.
pub fn draw_candidate(layer: &CoverageLayer, cells: &[CellIndex], r: &mut rng::Rng) -> Option<CellIndex> {
    let weights: Vec<f64> = cells.iter().map(|c| (1.0 - layer.get(*c)).max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = r.random::<f64>() * total;
    for (c, w) in cells.iter().zip(&weights) {
        if x < *w {
            return Some(*c);
        }
        x -= *w;
    }
    cells.iter().zip(&weights).rev().find(|(_, w)| **w > 0.0).map(|(c, _)| *c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerResult {
    pub points: Vec<Point2>,
    pub layer: CoverageLayer,
    pub iterations: usize,
    pub coverage_fraction: f64,
    pub converged: bool,
}

/// Samples observation points until the strong-coverage fraction of the
/// navigable cells reaches `coverage_threshold` or `max_iterations` draws
/// were made.
pub fn sample_observation_points(grid: &NavGrid, cfg: &SamplerConfig, seed: u64) -> Result<SamplerResult> {
    cfg.validate()?;
    let cells = grid.navigable_cells();
    if cells.is_empty() {
        return Err(Error::NoNavigableCells);
    }
    let eroded = erode(grid, cfg.erosion_radius);
    let mut r = rng::rng_for(seed, "coverage");
    let mut layer = CoverageLayer::new(grid);
    let mut points = Vec::new();
    let mut taken = std::collections::HashSet::new();
    let mut fraction = 0.0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let Some(c) = draw_candidate(&layer, &cells, &mut r) else {
            break;
        };
        if !eroded.is_navigable(c.0, c.1) || !taken.insert(c) {
            continue;
        }
        let p = grid.cell_center(c.0, c.1);
        layer.overlay(grid, &p, cfg);
        points.push(p);
        fraction = layer.fraction_at_least(&cells, cfg.strong_threshold);
        if fraction >= cfg.coverage_threshold {
            break;
        }
    }
    Ok(SamplerResult {
        points,
        layer,
        iterations,
        coverage_fraction: fraction,
        converged: fraction >= cfg.coverage_threshold,
    })
}

/// One observation per (yaw, pitch) pair from a camera at
/// `camera_height` above the floor.
pub fn generate_observations(point: &Point2, floor_height: f64, cfg: &SamplerConfig, scene: &Scene) -> Vec<Observation> {
    let spec = cfg.camera_spec();
    let eye = Point3::new(point.x, point.y, floor_height + cfg.camera_height);
    let mut out = Vec::with_capacity(cfg.yaws_deg.len() * cfg.pitches_deg.len());
    for &yaw in &cfg.yaws_deg {
        for &pitch in &cfg.pitches_deg {
            let cam = spec.at(eye, yaw.to_radians(), pitch.to_radians());
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPoint {
    pub x: f64,
    pub y: f64,
    pub observation_ids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub floor_height: f64,
    pub iterations: usize,
    pub coverage_fraction: f64,
    pub converged: bool,
    pub points: Vec<SampledPoint>,
    pub config: SamplerConfig,
}

impl SamplerReport {
    /// Observation ids are assigned consecutively, `yaw-major`, per point.
    pub fn new(result: &SamplerResult, grid: &NavGrid, cfg: &SamplerConfig) -> Self {
        let per = cfg.yaws_deg.len() * cfg.pitches_deg.len();
        SamplerReport {
            floor_height: grid.floor_height,
            iterations: result.iterations,
            coverage_fraction: result.coverage_fraction,
            converged: result.converged,
            points: result
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| SampledPoint {
                    x: p.x,
                    y: p.y,
                    observation_ids: (i * per..(i + 1) * per).collect(),
                })
                .collect(),
            config: cfg.clone(),
        }
    }

    /// Writes `<stem>.json` and the coverage dump `<stem>.pgm`.
    pub fn write(&self, layer: &CoverageLayer, stem: &Path) -> Result<()> {
        let json = stem.with_extension("json");
        std::fs::write(&json, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&json, e))?;
        let pgm = stem.with_extension("pgm");
        std::fs::write(&pgm, layer.to_pgm()).map_err(|e| Error::io(&pgm, e))?;
        Ok(())
    }
}
