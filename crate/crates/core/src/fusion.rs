//! Multi-view association and fusion of semantic instances, with
//! bounding-box overlap error correction.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::perception::{cosine, PointCloud, SemanticInstance};
use crate::{Error, Point3, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub k_sem: f64,
    pub k_geo: f64,
    pub phi_min: f64,
    pub iou_min: f64,
    /// Downsampling cell and point-overlap radius.
    pub voxel: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            k_sem: 0.4,
            k_geo: 1.6,
            phi_min: 0.8,
            iou_min: 0.9,
            voxel: 0.02,
        }
    }
}

type Key = (i64, i64, i64);

fn voxel_key(p: &Point3, voxel: f64) -> Key {
    (
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    )
}

fn voxel_set(points: &[Point3], voxel: f64) -> HashMap<Key, Vec<Point3>> {
    let mut m: HashMap<Key, Vec<Point3>> = HashMap::new();
    for p in points {
        m.entry(voxel_key(p, voxel)).or_default().push(*p);
    }
    m
}

/// Fraction of `a` with a point of `b` within `radius`.
fn overlap_fraction(a: &[Point3], b_index: &HashMap<Key, Vec<Point3>>, radius: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let r2 = radius * radius;
    let hit = a
        .iter()
        .filter(|p| {
            let (kx, ky, kz) = voxel_key(p, radius);
            (-1..=1).any(|dx| {
                (-1..=1).any(|dy| {
                    (-1..=1).any(|dz| {
                        b_index
                            .get(&(kx + dx, ky + dy, kz + dz))
                            .is_some_and(|v| v.iter().any(|q| (q - *p).norm_squared() <= r2))
                    })
                })
            })
        })
        .count();
    hit as f64 / a.len() as f64
}

fn aabb_overlap(a: &(Point3, Point3), b: &(Point3, Point3), pad: f64) -> bool {
    (0..3).all(|i| a.0[i] - pad <= b.1[i] && b.0[i] - pad <= a.1[i])
}

/// Point-overlap similarity, symmetrised by the max of both directions.
pub fn geometric_similarity(a: &SemanticInstance, b: &SemanticInstance, voxel: f64) -> f64 {
    if !aabb_overlap(&a.aabb(), &b.aabb(), voxel) {
        return 0.0;
    }
    let pa = a.absolute_points();
    let pb = b.absolute_points();
    let ia = voxel_set(&pa, voxel);
    let ib = voxel_set(&pb, voxel);
    overlap_fraction(&pa, &ib, voxel).max(overlap_fraction(&pb, &ia, voxel))
}

/// Cosine similarity of the label embeddings mapped to `[0, 1]`.
pub fn semantic_similarity(a: &SemanticInstance, b: &SemanticInstance) -> f64 {
    (1.0 + cosine(&a.label_embedding, &b.label_embedding)) / 2.0
}

/// `k_sem φ_sem + k_geo φ_geo`.
pub fn similarity(a: &SemanticInstance, b: &SemanticInstance, cfg: &FusionConfig) -> f64 {
    cfg.k_sem * semantic_similarity(a, b) + cfg.k_geo * geometric_similarity(a, b, cfg.voxel)
}

/// Keeps one point (the mean) per occupied voxel.
pub fn voxel_downsample(points: &[Point3], voxel: f64) -> Vec<Point3> {
    let mut acc: HashMap<Key, (nalgebra::Vector3<f64>, usize)> = HashMap::new();
    let mut order: Vec<Key> = Vec::new();
    for p in points {
        let k = voxel_key(p, voxel);
        let e = acc.entry(k).or_insert_with(|| {
            order.push(k);
            (nalgebra::Vector3::zeros(), 0)
        });
        e.0 += p.coords;
        e.1 += 1;
    }
    order.sort_unstable();
    order
        .iter()
        .map(|k| {
            let (s, n) = acc[k];
            Point3::from(s / n as f64)
        })
        .collect()
}

pub fn aabb_iou(a: &(Point3, Point3), b: &(Point3, Point3)) -> f64 {
    let vol = |lo: &Point3, hi: &Point3| (0..3).map(|i| (hi[i] - lo[i]).max(0.0)).product::<f64>();
    let ilo = a.0.sup(&b.0);
    let ihi = a.1.inf(&b.1);
    let inter = vol(&ilo, &ihi);
    let union = vol(&a.0, &a.1) + vol(&b.0, &b.1) - inter;
    if union <= 0.0 {
        // degenerate boxes: identical boxes still count as full overlap
        return if a == b { 1.0 } else { 0.0 };
    }
    inter / union
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FusedInstanceStore {
    pub instances: Vec<SemanticInstance>,
    pub config: FusionConfig,
}

impl FusedInstanceStore {
    pub fn new(config: FusionConfig) -> Self {
        FusedInstanceStore {
            instances: Vec::new(),
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Merges `incoming` into its best match when the similarity reaches
    /// `φ_min`, otherwise stores it as a new instance. Returns the index of
    /// the instance that absorbed it.
    pub fn associate_and_fuse(&mut self, incoming: SemanticInstance) -> usize {
        let best = self
            .instances
            .iter()
            .enumerate()
            .map(|(i, f)| (i, similarity(&incoming, f, &self.config)))
            .filter(|(_, s)| *s >= self.config.phi_min)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            None => {
                let pts = voxel_downsample(&incoming.absolute_points(), self.config.voxel);
                let cloud = PointCloud::new(pts);
                let mut inst = incoming;
                if let Some(c) = cloud.centroid() {
                    inst.relative_points = PointCloud::new(cloud.points.iter().map(|p| p - c.coords).collect());
                    inst.centroid = c;
                }
                self.instances.push(inst);
                self.instances.len() - 1
            }
            Some((i, _)) => {
                let target = &mut self.instances[i];
                let mut pts = target.absolute_points();
                pts.extend(incoming.absolute_points());
                let pts = voxel_downsample(&pts, self.config.voxel);
                let cloud = PointCloud::new(pts);
                let centroid = cloud.centroid().expect("merged cloud is non-empty");
                target.relative_points = PointCloud::new(cloud.points.iter().map(|p| p - centroid.coords).collect());
                target.centroid = centroid;
                target.detection_confidences.extend(incoming.detection_confidences);
                target.view_count += incoming.view_count;
                i
            }
        }
    }

    /// Removes instances that overlap a more confident one with AABB IoU at
    /// least `IoU_min`. Instances are processed in decreasing mean confidence
    /// and the comparison uses the mean of the top `min(view counts)`
    /// confidences; on ties the later-created instance is dropped. Repeats
    /// until stable, so it is idempotent.
    pub fn dedupe_overlaps(&mut self) {
        loop {
            let n = self.instances.len();
            let boxes: Vec<_> = self.instances.iter().map(|i| i.aabb()).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                self.instances[b]
                    .mean_confidence()
                    .total_cmp(&self.instances[a].mean_confidence())
                    .then(a.cmp(&b))
            });
            let mut removed: HashSet<usize> = HashSet::new();
            for (oi, &a) in order.iter().enumerate() {
                if removed.contains(&a) {
                    continue;
                }
                for &b in &order[oi + 1..] {
                    if removed.contains(&b) || aabb_iou(&boxes[a], &boxes[b]) < self.config.iou_min {
                        continue;
                    }
                    let (ia, ib) = (&self.instances[a], &self.instances[b]);
                    let k = ia.view_count.min(ib.view_count);
                    let (ca, cb) = (ia.top_k_confidence(k), ib.top_k_confidence(k));
                    let loser = if ca > cb {
                        b
                    } else if cb > ca {
                        a
                    } else {
                        a.max(b)
                    };
                    removed.insert(loser);
                    if loser == a {
                        break;
                    }
                }
            }
            if removed.is_empty() {
                return;
            }
            let mut k = 0;
            self.instances.retain(|_| {
                let keep = !removed.contains(&k);
                k += 1;
                keep
            });
        }
    }

    pub fn summary(&self) -> StoreSummary {
        StoreSummary {
            config: self.config,
            instances: self
                .instances
                .iter()
                .map(|i| {
                    let (lo, hi) = i.aabb();
                    InstanceSummary {
                        label: i.label.clone(),
                        centroid: [i.centroid.x, i.centroid.y, i.centroid.z],
                        aabb: [[lo.x, lo.y, lo.z], [hi.x, hi.y, hi.z]],
                        view_count: i.view_count,
                        confidences: i.detection_confidences.clone(),
                        points: i.relative_points.len(),
                    }
                })
                .collect(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary())? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Checkpoint view of a store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreSummary {
    pub config: FusionConfig,
    pub instances: Vec<InstanceSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub label: String,
    pub centroid: [f64; 3],
    pub aabb: [[f64; 3]; 2],
    pub view_count: usize,
    pub confidences: Vec<f64>,
    pub points: usize,
}
