use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize_label, RelevanceProvider, TargetKind};
use crate::{rng, Result};

const CURATED: &str = include_str!("../../resources/relevance.json");

/// Upper bound of the hashed score given to pairs the table does not know.
pub const FALLBACK_MAX: f64 = 0.2;

/// Commonsense relevance table. Scores are integers on the 0 to 10 scale
/// the remote prompts use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuratedTable {
    pub version: u32,
    pub regions: Vec<String>,
    pub receptacles: Vec<String>,
    pub object_region: BTreeMap<String, BTreeMap<String, u32>>,
    pub object_receptacle: BTreeMap<String, BTreeMap<String, u32>>,
}

impl CuratedTable {
    pub fn shipped() -> Self {
        serde_json::from_str(CURATED).expect("shipped relevance table is valid")
    }

    fn lookup(&self, kind: TargetKind, object: &str, target: &str) -> Option<u32> {
        let m = match kind {
            TargetKind::Region => &self.object_region,
            TargetKind::Receptacle => &self.object_receptacle,
        };
        m.get(object)?.get(target).copied()
    }
}

/// Deterministic provider backed by a [`CuratedTable`]. Pairs missing from
/// the table get a seeded hash value in `[0, FALLBACK_MAX]`.
#[derive(Clone, Debug)]
pub struct OfflineProvider {
    pub seed: u64,
    pub table: CuratedTable,
    /// Region candidates offered by `propose_regions`.
    pub region_vocabulary: Vec<String>,
}

impl OfflineProvider {
    /// `vocabulary` extends the table's region candidates.
    pub fn new(seed: u64, vocabulary: &[String]) -> Self {
        let table = CuratedTable::shipped();
        let mut region_vocabulary: Vec<String> = table.regions.iter().map(|s| normalize_label(s)).collect();
        for v in vocabulary {
            let v = normalize_label(v);
            if !region_vocabulary.contains(&v) {
                region_vocabulary.push(v);
            }
        }
        OfflineProvider {
            seed,
            table,
            region_vocabulary,
        }
    }

    pub fn with_table(seed: u64, table: CuratedTable) -> Self {
        let region_vocabulary = table.regions.iter().map(|s| normalize_label(s)).collect();
        OfflineProvider {
            seed,
            table,
            region_vocabulary,
        }
    }

    pub fn relevance(&self, object: &str, target: &str, kind: TargetKind) -> f64 {
        let (o, t) = (normalize_label(object), normalize_label(target));
        match self.table.lookup(kind, &o, &t) {
            Some(s) => f64::from(s.min(10)) / 10.0,
            None => {
                let tag = match kind {
                    TargetKind::Region => "region",
                    TargetKind::Receptacle => "receptacle",
                };
                FALLBACK_MAX * rng::unit_hash(self.seed, &format!("relevance/{tag}/{o}/{t}"))
            }
        }
    }
}

impl RelevanceProvider for OfflineProvider {
    fn propose_receptacles(&self, objects: &[String]) -> Result<Vec<String>> {
        let mut out: Vec<String> = Vec::new();
        for o in objects {
            let o = normalize_label(o);
            if self.table.receptacles.contains(&o) && !out.contains(&o) {
                out.push(o);
            }
        }
        Ok(out)
    }

    fn propose_regions(&self, objects: &[String]) -> Result<Vec<String>> {
        let mut scored: Vec<(u32, &String)> = self
            .region_vocabulary
            .iter()
            .map(|r| {
                let s = objects
                    .iter()
                    .map(|o| self.table.lookup(TargetKind::Region, &normalize_label(o), r).unwrap_or(0))
                    .sum::<u32>();
                (s, r)
            })
            .collect();
        if scored.iter().all(|(s, _)| *s == 0) {
            return Ok(Vec::new());
        }
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        Ok(scored.into_iter().map(|(_, r)| r.clone()).collect())
    }

    fn score(&self, object: &str, targets: &[String], kind: TargetKind) -> Result<BTreeMap<String, f64>> {
        Ok(targets
            .iter()
            .map(|t| (normalize_label(t), self.relevance(object, t, kind)))
            .collect())
    }
}
