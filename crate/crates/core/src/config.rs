//! Layered configuration: built-in defaults, then the shipped
//! hyperparameter file, then a user file (TOML or JSON), then `key=value`
//! overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::AgentConfig;
use crate::coverage::SamplerConfig;
use crate::episodes::EpisodeConfig;
use crate::fusion::FusionConfig;
use crate::par::Exec;
use crate::pipeline::{PerceptionConfig, SemanticsConfig};
use crate::placement::PlacementConfig;
use crate::planes::PlaneConfig;
use crate::{Error, Result};

pub const HYPERPARAMETERS: &str = include_str!("../resources/hyperparameters.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavmapConfig {
    /// Slice height above each floor.
    pub slice_height: f64,
    pub resolution: f64,
    /// Agent radius used to erode the map for planning.
    pub erosion: f64,
}

impl Default for NavmapConfig {
    fn default() -> Self {
        NavmapConfig {
            slice_height: 0.3,
            resolution: 0.05,
            erosion: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub variants_per_scene: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { variants_per_scene: 2 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub exec: Exec,
    pub workers: Option<usize>,
    pub navmap: NavmapConfig,
    pub sampler: SamplerConfig,
    pub perception: PerceptionConfig,
    pub fusion: FusionConfig,
    pub planes: PlaneConfig,
    pub semantics: SemanticsConfig,
    pub placement: PlacementConfig,
    pub dataset: DatasetConfig,
    pub episodes: EpisodeConfig,
    pub agent: AgentConfig,
}

/// Recursively overlays `top` onto `base`. Tables merge; everything else
/// replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn toml_to_json(text: &str, source: &str) -> Result<Value> {
    let t: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {e}")))?;
    serde_json::to_value(t).map_err(|e| Error::Config(format!("{source}: {e}")))
}

/// Parses a config file by extension; `.json` is JSON, anything else TOML.
pub fn parse_layer(text: &str, source: &str) -> Result<Value> {
    if source.ends_with(".json") {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("{source}: {e}")))
    } else {
        toml_to_json(text, source)
    }
}

/// `a.b.c=value` as a nested object. The value is read as a TOML literal,
/// falling back to a bare string.
pub fn parse_override(spec: &str) -> Result<Value> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .map(|v| serde_json::to_value(v).expect("toml values are json-representable"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok(path.rsplit('.').fold(value, |acc, k| {
        let mut m = serde_json::Map::new();
        m.insert(k.to_string(), acc);
        Value::Object(m)
    }))
}

impl Config {
    /// Built-in defaults overlaid with the shipped hyperparameters.
    pub fn base() -> Value {
        let mut v = serde_json::to_value(Config::default()).expect("config serializes");
        merge(&mut v, toml_to_json(HYPERPARAMETERS, "hyperparameters.toml").expect("shipped defaults parse"));
        v
    }

    pub fn defaults() -> Config {
        Config::from_value(Config::base()).expect("shipped defaults are valid")
    }

    pub fn from_value(v: Value) -> Result<Config> {
        let mut cfg: Config = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.episodes.eta_gt = cfg.perception.eta_gt;
        cfg.sampler.erosion_radius = cfg.navmap.erosion;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full layering: defaults, hyperparameters, optional file, overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut v = Config::base();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            merge(&mut v, parse_layer(&text, &path.display().to_string())?);
        }
        for o in overrides {
            merge(&mut v, parse_override(o)?);
        }
        Config::from_value(v)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("navmap.slice_height", self.navmap.slice_height),
            ("navmap.resolution", self.navmap.resolution),
            ("agent.step_length", self.agent.step_length),
            ("agent.navpoint_stride", self.agent.navpoint_stride),
            ("episodes.viewpoint_stride", self.episodes.viewpoint_stride),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let nonneg = [
            ("navmap.erosion", self.navmap.erosion),
            ("agent.eps_nav", self.agent.eps_nav),
            ("agent.d_next", self.agent.d_next),
            ("placement.h_spawn", self.placement.h_spawn),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if !(self.perception.eta_gt > 0.0 && self.perception.eta_gt <= 1.0) {
            return Err(Error::Config("perception.eta_gt must lie in (0, 1]".into()));
        }
        let f = &self.fusion;
        if !(f.phi_min >= 0.0 && f.iou_min >= 0.0 && f.iou_min <= 1.0 && f.k_sem >= 0.0 && f.k_geo >= 0.0 && f.voxel > 0.0) {
            return Err(Error::Config("fusion parameters out of range".into()));
        }
        if self.agent.navpoint_ring[0] > self.agent.navpoint_ring[1] || self.episodes.viewpoint_ring[0] > self.episodes.viewpoint_ring[1] {
            return Err(Error::Config("ring bounds must be ordered".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.sampler.validate()?;
        self.planes.validate()?;
        self.agent.camera.validate()?;
        self.episodes.camera.validate()?;
        Ok(())
    }

    /// Snapshot for reports and manifests.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
