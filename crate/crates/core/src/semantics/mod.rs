//! Region semantics, object relevance scoring and the providers behind them.
//!
//! A [`RelevanceProvider`] answers the four questions the pipeline asks:
//! which labels are receptacles, what a set of objects says about a region,
//! and how relevant an object is to a list of regions or receptacles. The
//! [`OfflineProvider`] answers from a shipped table, the [`RemoteProvider`]
//! from a chat-completion endpoint.

mod llm;
mod offline;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::navgrid::NavGrid;
use crate::perception::SemanticInstance;
use crate::{par, Error, Point2, Result};

pub use llm::{llm_json_call, LlmClient, LlmConfig, Prompt, RemoteProvider, PROMPT_VERSION, TEMPERATURE};
pub use offline::{CuratedTable, OfflineProvider, FALLBACK_MAX};

pub const UNKNOWN_REGION: &str = "unknown";
pub const DEFAULT_WINDOW_RADIUS: f64 = 2.0;
pub const DEFAULT_WINDOW_STEP: f64 = 0.5;

/// Canonical form used for every label comparison.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Region,
    Receptacle,
}

pub trait RelevanceProvider: Send + Sync {
    /// Labels among `objects` that offer a surface to put things on.
    fn propose_receptacles(&self, objects: &[String]) -> Result<Vec<String>>;
    /// Region candidates for a set of co-located objects, best first. An
    /// empty answer means the objects say nothing about the region.
    fn propose_regions(&self, objects: &[String]) -> Result<Vec<String>>;
    /// Relevance in `[0, 1]` of `object` to each target.
    fn score(&self, object: &str, targets: &[String], kind: TargetKind) -> Result<BTreeMap<String, f64>>;
}

/// Per-cell region labels aligned with a [`NavGrid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub width: usize,
    pub height: usize,
    pub origin: Point2,
    pub resolution: f64,
    /// `vocabulary[0]` is always `"unknown"`.
    pub vocabulary: Vec<String>,
    pub labels: Vec<u32>,
}

impl RegionMap {
    pub fn unknown(grid: &NavGrid) -> Self {
        RegionMap {
            width: grid.width,
            height: grid.height,
            origin: grid.origin,
            resolution: grid.resolution,
            vocabulary: vec![UNKNOWN_REGION.to_string()],
            labels: vec![0; grid.width * grid.height],
        }
    }

    pub fn label(&self, ix: usize, iy: usize) -> &str {
        &self.vocabulary[self.labels[iy * self.width + ix] as usize]
    }

    pub fn label_at(&self, p: &Point2) -> &str {
        let ix = ((p.x - self.origin.x) / self.resolution).floor();
        let iy = ((p.y - self.origin.y) / self.resolution).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.width as f64 || iy >= self.height as f64 {
            return UNKNOWN_REGION;
        }
        self.label(ix as usize, iy as usize)
    }

    /// Cell counts per label, sorted by label.
    pub fn histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for &l in &self.labels {
            *h.entry(self.vocabulary[l as usize].clone()).or_insert(0) += 1;
        }
        h
    }
}

/// Sweeps a circular window of radius `r` over the grid in steps of `step`.
/// Each window asks the provider about the de-duplicated labels of the
/// instances whose centroid falls inside it, and every cell under the window
/// votes for the top proposal. Cells take their most voted label (ties go to
/// the alphabetically first); cells without votes stay `"unknown"`.
pub fn sliding_window_regions(
    instances: &[SemanticInstance],
    grid: &NavGrid,
    r: f64,
    step: f64,
    provider: &dyn RelevanceProvider,
    exec: par::Exec,
) -> Result<RegionMap> {
    if !(r > 0.0 && step > 0.0) {
        return Err(Error::Config("window radius and step must be positive".into()));
    }
    let centroids: Vec<(Point2, String)> = instances
        .iter()
        .map(|i| (i.centroid.xy(), normalize_label(&i.label)))
        .collect();
    let lo = grid.origin;
    let hi = Point2::new(
        lo.x + grid.width as f64 * grid.resolution,
        lo.y + grid.height as f64 * grid.resolution,
    );
    let mut windows: Vec<(Point2, Vec<String>)> = Vec::new();
    for yw in (lo.y / step).floor() as i64..=(hi.y / step).ceil() as i64 {
        for xw in (lo.x / step).floor() as i64..=(hi.x / step).ceil() as i64 {
            let c = Point2::new(xw as f64 * step, yw as f64 * step);
            let labels: BTreeSet<String> = centroids
                .iter()
                .filter(|(p, _)| (p - c).norm_squared() <= r * r)
                .map(|(_, l)| l.clone())
                .collect();
            if !labels.is_empty() {
                windows.push((c, labels.into_iter().collect()));
            }
        }
    }
    let queries: Vec<Vec<String>> = windows
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let answers = par::map(exec, &queries, |q| provider.propose_regions(q));
    let mut top: BTreeMap<&Vec<String>, Option<String>> = BTreeMap::new();
    for (q, a) in queries.iter().zip(answers) {
        top.insert(q, a?.first().map(|s| normalize_label(s)));
    }

    let mut votes: Vec<BTreeMap<String, u32>> = vec![BTreeMap::new(); grid.width * grid.height];
    let reach = (r / grid.resolution).ceil() as i64 + 1;
    for (c, labels) in &windows {
        let Some(Some(region)) = top.get(labels) else {
            continue;
        };
        let cx = ((c.x - lo.x) / grid.resolution).floor() as i64;
        let cy = ((c.y - lo.y) / grid.resolution).floor() as i64;
        for iy in (cy - reach).max(0)..=(cy + reach).min(grid.height as i64 - 1) {
            for ix in (cx - reach).max(0)..=(cx + reach).min(grid.width as i64 - 1) {
                let q = grid.cell_center(ix as usize, iy as usize);
                if (q - c).norm_squared() <= r * r {
                    *votes[iy as usize * grid.width + ix as usize].entry(region.clone()).or_insert(0) += 1;
                }
            }
        }
    }

    let mut map = RegionMap::unknown(grid);
    let mut index: BTreeMap<String, u32> = BTreeMap::new();
    for (k, v) in votes.iter().enumerate() {
        // alphabetical iteration: only a strictly larger count replaces
        // the current best
        let best = v.iter().fold(None::<(&String, u32)>, |acc, (l, &n)| match acc {
            Some((_, m)) if m >= n => acc,
            _ => Some((l, n)),
        });
        if let Some((label, _)) = best {
            let next = map.vocabulary.len() as u32;
            let id = *index.entry(label.clone()).or_insert_with(|| {
                map.vocabulary.push(label.clone());
                next
            });
            map.labels[k] = id;
        }
    }
    Ok(map)
}

/// Normalised relevance scores `P(obj | region)` and `P(obj | receptacle)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelevanceTable {
    pub obj_given_rgn: BTreeMap<String, BTreeMap<String, f64>>,
    pub obj_given_rec: BTreeMap<String, BTreeMap<String, f64>>,
}

impl RelevanceTable {
    /// Queries the provider for every object against the given regions and
    /// receptacles.
    pub fn build(
        provider: &dyn RelevanceProvider,
        objects: &[String],
        regions: &[String],
        receptacles: &[String],
        exec: par::Exec,
    ) -> Result<Self> {
        let uniq = |xs: &[String]| -> Vec<String> {
            xs.iter().map(|s| normalize_label(s)).collect::<BTreeSet<_>>().into_iter().collect()
        };
        let objects = uniq(objects);
        let regions = uniq(regions);
        let receptacles = uniq(receptacles);
        let rows = par::map(exec, &objects, |o| -> Result<_> {
            let rg = if regions.is_empty() {
                BTreeMap::new()
            } else {
                provider.score(o, &regions, TargetKind::Region)?
            };
            let rc = if receptacles.is_empty() {
                BTreeMap::new()
            } else {
                provider.score(o, &receptacles, TargetKind::Receptacle)?
            };
            Ok((rg, rc))
        });
        let mut t = RelevanceTable::default();
        for (o, row) in objects.iter().zip(rows) {
            let (rg, rc) = row?;
            t.obj_given_rgn.insert(o.clone(), clamp_row(rg));
            t.obj_given_rec.insert(o.clone(), clamp_row(rc));
        }
        Ok(t)
    }

    pub fn set(&mut self, kind: TargetKind, object: &str, target: &str, value: f64) {
        let m = match kind {
            TargetKind::Region => &mut self.obj_given_rgn,
            TargetKind::Receptacle => &mut self.obj_given_rec,
        };
        m.entry(normalize_label(object))
            .or_default()
            .insert(normalize_label(target), value.clamp(0.0, 1.0));
    }

    pub fn get(&self, kind: TargetKind, object: &str, target: &str) -> f64 {
        let m = match kind {
            TargetKind::Region => &self.obj_given_rgn,
            TargetKind::Receptacle => &self.obj_given_rec,
        };
        m.get(&normalize_label(object))
            .and_then(|row| row.get(&normalize_label(target)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn objects(&self) -> Vec<String> {
        self.obj_given_rgn.keys().chain(self.obj_given_rec.keys()).cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Multiplies every receptacle score by `c`. The result may leave `[0, 1]`
    /// and is meant for order-invariance checks.
    pub fn scale_receptacle_scores(&self, c: f64) -> Self {
        let mut t = self.clone();
        for row in t.obj_given_rec.values_mut() {
            for v in row.values_mut() {
                *v *= c;
            }
        }
        t
    }
}

fn clamp_row(row: BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    row.into_iter().map(|(k, v)| (normalize_label(&k), v.clamp(0.0, 1.0))).collect()
}

/// `P(obj | region) * P(obj | receptacle)`; missing entries count as zero.
pub fn joint_relevance(table: &RelevanceTable, object: &str, region: &str, receptacle: &str) -> f64 {
    table.get(TargetKind::Region, object, region) * table.get(TargetKind::Receptacle, object, receptacle)
}
