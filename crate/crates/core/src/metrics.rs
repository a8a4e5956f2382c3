//! Success rate, SPL, SoftSPL and distance to goal.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Travelled length `p`.
    pub path_length: f64,
    /// Shortest start-to-goal length `l`.
    pub shortest_path: f64,
    /// Geodesic distances to the nearest goal viewpoint at start and end.
    pub d_init: f64,
    pub d_final: f64,
}

impl EpisodeResult {
    fn efficiency(&self) -> f64 {
        let l = self.shortest_path;
        if l <= 0.0 {
            return 1.0;
        }
        l / self.path_length.max(l)
    }

    pub fn spl(&self) -> f64 {
        if self.success {
            self.efficiency()
        } else {
            0.0
        }
    }

    pub fn soft_spl(&self) -> f64 {
        let progress = if self.d_init > 0.0 && self.d_final.is_finite() {
            (1.0 - self.d_final / self.d_init).max(0.0)
        } else if self.d_final <= 0.0 {
            1.0
        } else {
            0.0
        };
        progress * self.efficiency()
    }
}

fn mean(results: &[EpisodeResult], f: impl Fn(&EpisodeResult) -> f64) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Empty("no episode results"));
    }
    Ok(results.iter().map(f).sum::<f64>() / results.len() as f64)
}

pub fn success_rate(results: &[EpisodeResult]) -> Result<f64> {
    mean(results, |r| if r.success { 1.0 } else { 0.0 })
}

pub fn spl(results: &[EpisodeResult]) -> Result<f64> {
    mean(results, EpisodeResult::spl)
}

pub fn soft_spl(results: &[EpisodeResult]) -> Result<f64> {
    mean(results, EpisodeResult::soft_spl)
}

/// Mean final geodesic distance. Unreachable end positions count as their
/// starting distance.
pub fn dist_to_goal(results: &[EpisodeResult]) -> Result<f64> {
    mean(results, |r| if r.d_final.is_finite() { r.d_final } else { r.d_init })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub soft_spl: f64,
    pub dist_to_goal: f64,
}

pub fn summarize(results: &[EpisodeResult]) -> Result<Summary> {
    Ok(Summary {
        episodes: results.len(),
        sr: success_rate(results)?,
        spl: spl(results)?,
        soft_spl: soft_spl(results)?,
        dist_to_goal: dist_to_goal(results)?,
    })
}
