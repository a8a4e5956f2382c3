//! Receptacle plane detection by slab-seeded EM fitting, and projected
//! convex hulls of the resulting inlier sets.

use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::perception::SemanticInstance;
use crate::{geom, par, Error, Point2, Point3, Result, Vector3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaneConfig {
    /// Plane thickness ε_t.
    pub eps_t: f64,
    /// Minimum slab and inlier point count ρ_min.
    pub rho_min: usize,
    /// Convergence overlap ε_c.
    pub eps_c: f64,
    pub max_iterations: usize,
    /// Hull IoU above which nearby detections are merged.
    pub merge_iou: f64,
    pub max_tilt_deg: f64,
    /// Minimum share of inliers within `eps_t / 4` of the fitted plane.
    /// Slabs cutting through vertical faces (legs, side panels) spread their
    /// inliers uniformly across the thickness and fall below it.
    pub min_planarity: f64,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        PlaneConfig {
            eps_t: 0.05,
            rho_min: 50,
            eps_c: 0.95,
            max_iterations: 50,
            merge_iou: 0.8,
            max_tilt_deg: 15.0,
            min_planarity: 0.5,
        }
    }
}

impl PlaneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_t > 0.0) {
            return Err(Error::Config("eps_t must be positive".into()));
        }
        if !(self.eps_c > 0.0 && self.eps_c <= 1.0) {
            return Err(Error::Config("eps_c must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Total-least-squares plane through `centroid` with unit `normal`
/// (oriented so that `normal.z >= 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub centroid: Point3,
    pub normal: Vector3,
    pub rms: f64,
}

impl PlaneFit {
    pub fn distance(&self, p: &Point3) -> f64 {
        (p - self.centroid).dot(&self.normal)
    }

    pub fn project(&self, p: &Point3) -> Point3 {
        p - self.normal * self.distance(p)
    }

    /// Plane height above `(x, y)`; falls back to the centroid height for
    /// vertical planes.
    pub fn z_at(&self, x: f64, y: f64) -> f64 {
        if self.normal.z.abs() < 1e-9 {
            return self.centroid.z;
        }
        self.centroid.z - (self.normal.x * (x - self.centroid.x) + self.normal.y * (y - self.centroid.y)) / self.normal.z
    }
}

pub fn fit_plane(points: &[Point3]) -> Option<PlaneFit> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let mut normal: Vector3 = eig.eigenvectors.column(k).into_owned();
    if normal.norm() < 1e-12 {
        return None;
    }
    normal.normalize_mut();
    if normal.z < 0.0 {
        normal = -normal;
    }
    let centroid = Point3::from(c);
    let rms = (points.iter().map(|p| (p - centroid).dot(&normal).powi(2)).sum::<f64>() / n).sqrt();
    Some(PlaneFit { centroid, normal, rms })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectedPlane {
    pub fit: PlaneFit,
    pub inliers: Vec<Point3>,
    pub iterations: usize,
    /// Fit residual RMS per EM iteration.
    pub rms_history: Vec<f64>,
}

/// Slab-seeded EM plane detection. Slabs `[h, h + ε_t]` are scanned
/// bottom-up with stride `ε_t / 2`; each slab holding at least `ρ_min`
/// points seeds a fit / re-collect loop that stops once the re-collected
/// set `P'` keeps `ε_c` of the current set. Only converged fits whose `P'`
/// still holds `ρ_min` points and passes the planarity check are returned,
/// with `P'` as the inlier set.
pub fn em_plane_detect(cloud: &[Point3], cfg: &PlaneConfig) -> Vec<DetectedPlane> {
    let mut out = Vec::new();
    if cloud.is_empty() {
        return out;
    }
    let zmin = cloud.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let zmax = cloud.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    let step = 0.5 * cfg.eps_t;
    let mut member = vec![false; cloud.len()];
    let mut k = 0usize;
    loop {
        let h = zmin + k as f64 * step;
        if h > zmax + 1e-12 {
            break;
        }
        k += 1;
        let mut current: Vec<usize> = (0..cloud.len())
            .filter(|&i| cloud[i].z >= h && cloud[i].z <= h + cfg.eps_t)
            .collect();
        if current.len() < cfg.rho_min {
            continue;
        }
        let mut history = Vec::new();
        let mut converged = None;
        for it in 0..cfg.max_iterations {
            let pts: Vec<Point3> = current.iter().map(|&i| cloud[i]).collect();
            let Some(fit) = fit_plane(&pts) else {
                break;
            };
            history.push(fit.rms);
            let next: Vec<usize> = (0..cloud.len())
                .filter(|&i| fit.distance(&cloud[i]).abs() <= cfg.eps_t)
                .collect();
            for &i in &current {
                member[i] = true;
            }
            let kept = next.iter().filter(|&&i| member[i]).count();
            for &i in &current {
                member[i] = false;
            }
            if kept as f64 >= cfg.eps_c * current.len() as f64 {
                converged = Some((fit, next, it + 1));
                break;
            }
            if next.len() < 3 {
                break;
            }
            current = next;
        }
        let Some((fit, inliers, iterations)) = converged else {
            continue;
        };
        if inliers.len() < cfg.rho_min {
            continue;
        }
        let inliers: Vec<Point3> = inliers.iter().map(|&i| cloud[i]).collect();
        let tight = inliers.iter().filter(|p| fit.distance(p).abs() <= cfg.eps_t / 4.0).count();
        if (tight as f64) < cfg.min_planarity * inliers.len() as f64 {
            continue;
        }
        out.push(DetectedPlane {
            fit,
            inliers,
            iterations,
            rms_history: history,
        });
    }
    out
}

/// Projected hull of a plane: CCW vertices in the world XY plane and the
/// mean height of the projected inliers.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedHull {
    pub hull: Vec<Point2>,
    pub height: f64,
}

pub fn convex_projected_hull(inliers: &[Point3], fit: &PlaneFit) -> Result<ProjectedHull> {
    if inliers.len() < 3 {
        return Err(Error::Degenerate("fewer than three inliers".into()));
    }
    let projected: Vec<Point3> = inliers.iter().map(|p| fit.project(p)).collect();
    let hull = geom::convex_hull(&projected.iter().map(|p| p.xy()).collect::<Vec<_>>());
    if hull.len() < 3 || geom::area(&hull) < 1e-9 {
        return Err(Error::Degenerate("inliers are collinear".into()));
    }
    let height = projected.iter().map(|p| p.z).sum::<f64>() / projected.len() as f64;
    Ok(ProjectedHull { hull, height })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptaclePlane {
    pub plane_id: String,
    pub receptacle_label: String,
    /// Filled in by the region map; empty until then.
    pub region_label: String,
    pub height: f64,
    pub normal: Vector3,
    pub centroid: Point3,
    /// CCW hull in world XY.
    pub hull: Vec<Point2>,
    pub inlier_count: usize,
    /// Index of the source instance in the store.
    pub instance: usize,
}

impl ReceptaclePlane {
    pub fn is_horizontal(&self, max_tilt_deg: f64) -> bool {
        self.normal.z >= max_tilt_deg.to_radians().cos()
    }

    pub fn area(&self) -> f64 {
        geom::area(&self.hull)
    }

    pub fn fit(&self) -> PlaneFit {
        PlaneFit {
            centroid: self.centroid,
            normal: self.normal,
            rms: 0.0,
        }
    }

    pub fn world_hull(&self) -> Vec<Point3> {
        let f = self.fit();
        self.hull.iter().map(|p| Point3::new(p.x, p.y, f.z_at(p.x, p.y))).collect()
    }
}

/// Instances whose label is in `labels` (case-insensitive exact match).
pub fn identify_receptacles(instances: &[SemanticInstance], labels: &[String]) -> Vec<usize> {
    let wanted: std::collections::BTreeSet<String> = labels.iter().map(|l| l.trim().to_lowercase()).collect();
    (0..instances.len())
        .filter(|&i| wanted.contains(&instances[i].label.trim().to_lowercase()))
        .collect()
}

/// Merges detections closer than `ε_t` in height whose hulls overlap by at
/// least `merge_iou`, keeping the one with more inliers.
pub fn dedupe_planes(mut planes: Vec<ReceptaclePlane>, cfg: &PlaneConfig) -> Vec<ReceptaclePlane> {
    planes.sort_by(|a, b| b.inlier_count.cmp(&a.inlier_count).then(a.plane_id.cmp(&b.plane_id)));
    let mut kept: Vec<ReceptaclePlane> = Vec::new();
    for p in planes {
        let dup = kept
            .iter()
            .any(|k| (k.height - p.height).abs() <= cfg.eps_t && geom::convex_iou(&k.hull, &p.hull) >= cfg.merge_iou);
        if !dup {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.plane_id.cmp(&b.plane_id));
    kept
}

/// Planes of one receptacle instance, after deduplication.
pub fn planes_of_instance(inst: &SemanticInstance, index: usize, cfg: &PlaneConfig) -> Vec<ReceptaclePlane> {
    let cloud = inst.absolute_points();
    let mut planes = Vec::new();
    for (k, det) in em_plane_detect(&cloud, cfg).into_iter().enumerate() {
        let Ok(h) = convex_projected_hull(&det.inliers, &det.fit) else {
            continue;
        };
        planes.push(ReceptaclePlane {
            plane_id: format!("r{index:03}_s{k:03}"),
            receptacle_label: inst.label.clone(),
            region_label: String::new(),
            height: h.height,
            normal: det.fit.normal,
            centroid: det.fit.centroid,
            hull: h.hull,
            inlier_count: det.inliers.len(),
            instance: index,
        });
    }
    dedupe_planes(planes, cfg)
}

/// Receptacle identification followed by per-instance plane extraction.
/// Plane ids are renumbered `plane_000`, `plane_001`, ... in instance
/// order then height.
pub fn extract_planes(
    instances: &[SemanticInstance],
    receptacle_labels: &[String],
    cfg: &PlaneConfig,
    exec: par::Exec,
) -> Vec<ReceptaclePlane> {
    let idx = identify_receptacles(instances, receptacle_labels);
    let per = par::map(exec, &idx, |&i| planes_of_instance(&instances[i], i, cfg));
    let mut out: Vec<ReceptaclePlane> = Vec::new();
    for mut group in per {
        group.sort_by(|a, b| a.height.total_cmp(&b.height));
        out.extend(group);
    }
    for (k, p) in out.iter_mut().enumerate() {
        p.plane_id = format!("plane_{k:03}");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneRecord {
    pub plane_id: String,
    pub receptacle_label: String,
    pub region_label: String,
    pub height: f64,
    pub normal: [f64; 3],
    pub hull: Vec<[f64; 3]>,
    pub inlier_count: usize,
    pub horizontal: bool,
}

pub fn plane_records(planes: &[ReceptaclePlane], cfg: &PlaneConfig) -> Vec<PlaneRecord> {
    planes
        .iter()
        .map(|p| PlaneRecord {
            plane_id: p.plane_id.clone(),
            receptacle_label: p.receptacle_label.clone(),
            region_label: p.region_label.clone(),
            height: p.height,
            normal: [p.normal.x, p.normal.y, p.normal.z],
            hull: p.world_hull().iter().map(|v| [v.x, v.y, v.z]).collect(),
            inlier_count: p.inlier_count,
            horizontal: p.is_horizontal(cfg.max_tilt_deg),
        })
        .collect()
}

pub fn write_planes_json(planes: &[ReceptaclePlane], cfg: &PlaneConfig, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&plane_records(planes, cfg))? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
