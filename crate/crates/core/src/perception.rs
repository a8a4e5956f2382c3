//! Detectors, label embeddings and lifting of 2D masks to 3D instances.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::{Observation, Raster};
use crate::http::Transport;
use crate::scene::Scene;
use crate::{rng, Error, Point3, Result, Vector3};

pub const DEFAULT_ETA_GT: f64 = 1e-4;
pub const EMBEDDING_DIM: usize = 64;

pub type Mask = Raster<bool>;

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub mask: Mask,
    pub label: String,
    pub confidence: f64,
}

pub trait Detector: Send + Sync {
    /// Detections in one observation. `vocabulary` restricts labels for
    /// detectors that honour prompts.
    fn detect(&self, obs: &Observation, vocabulary: Option<&[String]>) -> Result<Vec<Detection>>;
}

/// Oracle detector over the rendered instance raster.
#[derive(Clone, Debug)]
pub struct GtDetector {
    labels: Vec<String>,
    pub eta_gt: f64,
}

impl GtDetector {
    pub fn new(scene: &Scene, eta_gt: f64) -> Self {
        GtDetector {
            labels: scene.instances.iter().map(|i| i.label.clone()).collect(),
            eta_gt,
        }
    }

    /// Instance ids visible with pixel ratio at least `eta_gt`, with their
    /// pixel counts, ascending by id.
    pub fn visible(&self, obs: &Observation) -> Result<Vec<(u32, usize)>> {
        let sem = obs
            .semantic
            .as_ref()
            .ok_or_else(|| Error::Backend("ground-truth detector needs a semantic raster".into()))?;
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &s in &sem.data {
            if s > 0 {
                *counts.entry(s - 1).or_default() += 1;
            }
        }
        let total = (sem.width * sem.height) as f64;
        Ok(counts
            .into_iter()
            .filter(|(id, n)| (*id as usize) < self.labels.len() && *n as f64 / total >= self.eta_gt)
            .collect())
    }
}

impl Detector for GtDetector {
    fn detect(&self, obs: &Observation, _vocabulary: Option<&[String]>) -> Result<Vec<Detection>> {
        let visible = self.visible(obs)?;
        let sem = obs.semantic.as_ref().expect("checked by visible");
        Ok(visible
            .into_iter()
            .map(|(id, _)| Detection {
                mask: Raster {
                    width: sem.width,
                    height: sem.height,
                    data: sem.data.iter().map(|&s| s == id + 1).collect(),
                },
                label: self.labels[id as usize].clone(),
                confidence: 1.0,
            })
            .collect())
    }
}

/// Ground truth degraded to a target precision and recall. Decisions are
/// hashed from the seed, camera pose and label, so repeated calls agree.
#[derive(Clone, Debug)]
pub struct NoisyDetector {
    pub gt: GtDetector,
    pub precision: f64,
    pub recall: f64,
    pub seed: u64,
    /// Labels used for false positives.
    pub confusion_labels: Vec<String>,
}

impl Detector for NoisyDetector {
    fn detect(&self, obs: &Observation, vocabulary: Option<&[String]>) -> Result<Vec<Detection>> {
        let eye = obs.camera.eye();
        let fwd = obs.camera.pose.rotation.inverse_transform_vector(&Vector3::z());
        let pose_key = format!("{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}", eye.x, eye.y, eye.z, fwd.x, fwd.y, fwd.z);
        let mut out = Vec::new();
        let allowed = |l: &str| vocabulary.is_none_or(|v| v.iter().any(|x| x == l));
        let fp_rate = if self.precision > 0.0 {
            ((1.0 - self.precision) / self.precision).min(1.0)
        } else {
            1.0
        };
        for det in self.gt.detect(obs, None)? {
            let key = format!("{pose_key}|{}", det.label);
            if rng::unit_hash(self.seed, &format!("recall|{key}")) >= self.recall {
                continue;
            }
            let conf = 0.5 + 0.5 * rng::unit_hash(self.seed, &format!("conf|{key}"));
            if !self.confusion_labels.is_empty() && rng::unit_hash(self.seed, &format!("fp|{key}")) < fp_rate {
                let k = (rng::unit_hash(self.seed, &format!("fpl|{key}")) * self.confusion_labels.len() as f64) as usize;
                let wrong = &self.confusion_labels[k.min(self.confusion_labels.len() - 1)];
                if wrong != &det.label && allowed(wrong) {
                    out.push(Detection {
                        mask: det.mask.clone(),
                        label: wrong.clone(),
                        confidence: conf * 0.8,
                    });
                }
            }
            if allowed(&det.label) {
                out.push(Detection {
                    confidence: conf,
                    ..det
                });
            }
        }
        Ok(out)
    }
}

pub trait Embedder: Send + Sync {
    /// Unit-norm embedding of a label.
    fn embed(&self, label: &str) -> Vec<f64>;
}

/// Signed character-trigram hashing into a fixed-size unit vector.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrigramEmbedder;

impl Embedder for TrigramEmbedder {
    fn embed(&self, label: &str) -> Vec<f64> {
        trigram_embedding(label)
    }
}

pub fn trigram_embedding(label: &str) -> Vec<f64> {
    let text: Vec<char> = format!("  {} ", label.trim().to_lowercase()).chars().collect();
    let mut v = vec![0.0; EMBEDDING_DIM];
    for w in text.windows(3) {
        let tri: String = w.iter().collect();
        let h = Sha256::digest(tri.as_bytes());
        let idx = h[0] as usize % EMBEDDING_DIM;
        v[idx] += if h[1] & 1 == 0 { 1.0 } else { -1.0 };
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v[0] = 1.0;
        return v;
    }
    v.iter().map(|x| x / n).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud { points }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    pub fn aabb(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }
}

/// Geometry relative to its centroid plus label and detection history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticInstance {
    pub relative_points: PointCloud,
    pub centroid: Point3,
    pub label: String,
    pub label_embedding: Vec<f64>,
    pub detection_confidences: Vec<f64>,
    pub view_count: usize,
}

impl SemanticInstance {
    pub fn absolute_points(&self) -> Vec<Point3> {
        self.relative_points.points.iter().map(|p| p + self.centroid.coords).collect()
    }

    pub fn aabb(&self) -> (Point3, Point3) {
        let (lo, hi) = self.relative_points.aabb().unwrap_or((Point3::origin(), Point3::origin()));
        (lo + self.centroid.coords, hi + self.centroid.coords)
    }

    pub fn mean_confidence(&self) -> f64 {
        if self.detection_confidences.is_empty() {
            return 0.0;
        }
        self.detection_confidences.iter().sum::<f64>() / self.detection_confidences.len() as f64
    }

    /// Mean of the `k` highest confidences.
    pub fn top_k_confidence(&self, k: usize) -> f64 {
        let mut c = self.detection_confidences.clone();
        c.sort_by(|a, b| b.total_cmp(a));
        let k = k.clamp(1, c.len().max(1));
        c.iter().take(k).sum::<f64>() / k as f64
    }
}

/// World-frame points for masked pixels with valid depth.
pub fn reproject_to_points(obs: &Observation, mask: &Mask) -> PointCloud {
    let k = &obs.camera.intrinsics;
    let mut points = Vec::new();
    for v in 0..mask.height {
        for u in 0..mask.width {
            if !*mask.get(u, v) {
                continue;
            }
            if let Some(z) = obs.depth_at(u, v) {
                let pc = k.unproject(u as f64, v as f64, z);
                points.push(obs.camera.camera_to_world(&pc));
            }
        }
    }
    PointCloud { points }
}

/// Splits a cloud into centroid and centred geometry.
pub fn decompose_instance(points: &PointCloud, label: &str, confidence: f64, embedder: &dyn Embedder) -> Result<SemanticInstance> {
    let centroid = points.centroid().ok_or(Error::Empty("point cloud"))?;
    if label.trim().is_empty() {
        return Err(Error::Degenerate("instance label is empty".into()));
    }
    Ok(SemanticInstance {
        relative_points: PointCloud::new(points.points.iter().map(|p| p - centroid.coords).collect()),
        centroid,
        label: label.to_string(),
        label_embedding: embedder.embed(label),
        detection_confidences: vec![confidence.clamp(0.0, 1.0)],
        view_count: 1,
    })
}

/// Detects and lifts every instance in one observation, skipping detections
/// whose mask has no valid depth.
pub fn extract_instances(
    obs: &Observation,
    detector: &dyn Detector,
    vocabulary: Option<&[String]>,
    embedder: &dyn Embedder,
) -> Result<Vec<SemanticInstance>> {
    let mut out = Vec::new();
    for det in detector.detect(obs, vocabulary)? {
        let cloud = reproject_to_points(obs, &det.mask);
        if cloud.is_empty() {
            continue;
        }
        out.push(decompose_instance(&cloud, &det.label, det.confidence, embedder)?);
    }
    Ok(out)
}

/// Run-length encoded mask: row-major, alternating runs starting with
/// `false`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    /// `[height, width]`
    pub size: [usize; 2],
    pub counts: Vec<usize>,
}

impl RleMask {
    pub fn encode(mask: &Mask) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0;
        for &b in &mask.data {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        RleMask {
            size: [mask.height, mask.width],
            counts,
        }
    }

    pub fn decode(&self) -> Result<Mask> {
        let [h, w] = self.size;
        let mut data = Vec::with_capacity(w * h);
        let mut value = false;
        for &c in &self.counts {
            data.extend(std::iter::repeat_n(value, c));
            value = !value;
        }
        if data.len() != w * h {
            return Err(Error::Schema(format!("mask runs cover {} pixels, expected {}", data.len(), w * h)));
        }
        Ok(Raster { width: w, height: h, data })
    }
}

pub const DETECTOR_SCHEMA: u32 = 1;

/// Request body for the remote detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub schema: u32,
    pub width: usize,
    pub height: usize,
    /// Row-major RGB8 pixels, hex encoded.
    pub image_rgb8_hex: String,
    pub vocabulary: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteDetection {
    pub label: String,
    pub confidence: f64,
    pub mask: RleMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub schema: u32,
    pub detections: Vec<RemoteDetection>,
}

/// Detector behind an HTTP endpoint speaking [`DetectRequest`] /
/// [`DetectResponse`].
pub struct RemoteDetector {
    pub endpoint: String,
    pub transport: Arc<dyn Transport>,
    pub default_vocabulary: Vec<String>,
}

impl Detector for RemoteDetector {
    fn detect(&self, obs: &Observation, vocabulary: Option<&[String]>) -> Result<Vec<Detection>> {
        let color = obs
            .color
            .as_ref()
            .ok_or_else(|| Error::Backend("remote detector needs a colour image".into()))?;
        let bytes: Vec<u8> = color.data.iter().flat_map(|p| p.iter().copied()).collect();
        let req = DetectRequest {
            schema: DETECTOR_SCHEMA,
            width: color.width,
            height: color.height,
            image_rgb8_hex: hex::encode(bytes),
            vocabulary: vocabulary.map(<[String]>::to_vec).unwrap_or_else(|| self.default_vocabulary.clone()),
        };
        let body = serde_json::to_string(&req)?;
        let text = self.transport.post_json(&self.endpoint, &[], &body)?;
        let resp: DetectResponse =
            serde_json::from_str(&text).map_err(|e| Error::Backend(format!("detector response: {e}")))?;
        if resp.schema != DETECTOR_SCHEMA {
            return Err(Error::Backend(format!("detector schema {} unsupported", resp.schema)));
        }
        resp.detections
            .into_iter()
            .map(|d| {
                let mask = d.mask.decode()?;
                if mask.width != color.width || mask.height != color.height {
                    return Err(Error::Backend("detector mask size differs from the image".into()));
                }
                if !(0.0..=1.0).contains(&d.confidence) {
                    return Err(Error::Backend(format!("confidence {} outside [0, 1]", d.confidence)));
                }
                Ok(Detection {
                    mask,
                    label: d.label,
                    confidence: d.confidence,
                })
            })
            .filter(|d| d.as_ref().map_or(true, |d| d.mask.count() > 0))
            .collect()
    }
}
