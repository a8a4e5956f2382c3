//! Evaluation of navigation baselines over an episode dataset and the
//! report formats.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{build_memory, run_episode, AgentKind, AgentMemory, EpisodeWorld, NavDetector, SceneMemory, Trajectory};
use crate::config::Config;
use crate::episodes::{read_json, write_json, Dataset, Episode};
use crate::http::Transport;
use crate::metrics::{summarize, EpisodeResult, Summary};
use crate::navgrid::{build_floor_maps, FloorMap};
use crate::pipeline::UnderstandInputs;
use crate::scene::{ObjectLibrary, Scene, SceneDescription, SceneVariant};
use crate::semantics::{normalize_label, RelevanceTable};
use crate::{par, rng, Error, Result};

pub const REPORT_SCHEMA: u32 = 1;
/// Categories listed in the per-baseline top table.
pub const TOP_CATEGORIES: usize = 5;
/// Successes a category needs to enter the top table.
pub const TOP_MIN_SUCCESSES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub agent: AgentKind,
    pub use_fn: bool,
}

impl BaselineSpec {
    pub fn name(&self) -> String {
        format!("{}{}", self.agent.name(), if self.use_fn { "" } else { "_nofn" })
    }

    /// `random`, `semantic`, `random-nofn` or `semantic-nofn`.
    pub fn parse(s: &str) -> Result<Self> {
        let (agent, use_fn) = match s.strip_suffix("-nofn") {
            Some(a) => (a, false),
            None => (s, true),
        };
        let agent = match agent {
            "random" => AgentKind::Random,
            "semantic" => AgentKind::Semantic,
            _ => return Err(Error::Config(format!("unknown baseline `{s}`"))),
        };
        Ok(BaselineSpec { agent, use_fn })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: String,
    pub episodes: usize,
    pub successes: usize,
    pub sr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub name: String,
    pub agent: AgentKind,
    pub use_fn: bool,
    pub summary: Summary,
    pub per_category: BTreeMap<String, CategoryStats>,
    pub top_categories: Vec<CategoryStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub scene_id: String,
    pub floor: usize,
    pub planes: usize,
    pub navpoints: usize,
    pub known_reachable_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub dataset_seed: u64,
    pub seed: u64,
    pub episodes: usize,
    pub memory: Vec<MemoryStats>,
    pub baselines: Vec<BaselineReport>,
    pub config: Value,
}

pub fn category_table(episodes: &[Episode], results: &[EpisodeResult]) -> BTreeMap<String, CategoryStats> {
    let mut out: BTreeMap<String, CategoryStats> = BTreeMap::new();
    for (e, r) in episodes.iter().zip(results) {
        let c = out.entry(e.goal_category.clone()).or_insert_with(|| CategoryStats {
            category: e.goal_category.clone(),
            episodes: 0,
            successes: 0,
            sr: 0.0,
        });
        c.episodes += 1;
        c.successes += r.success as usize;
    }
    for c in out.values_mut() {
        c.sr = c.successes as f64 / c.episodes as f64;
    }
    out
}

/// Highest success rates among categories with enough successes; ties by
/// name.
pub fn top_categories(table: &BTreeMap<String, CategoryStats>, k: usize, min_successes: usize) -> Vec<CategoryStats> {
    let mut v: Vec<CategoryStats> = table.values().filter(|c| c.successes >= min_successes).cloned().collect();
    v.sort_by(|a, b| b.sr.total_cmp(&a.sr).then_with(|| a.category.cmp(&b.category)));
    v.truncate(k);
    v
}

pub fn baseline_report(spec: BaselineSpec, episodes: &[Episode], results: &[EpisodeResult]) -> Result<BaselineReport> {
    let per_category = category_table(episodes, results);
    Ok(BaselineReport {
        name: spec.name(),
        agent: spec.agent,
        use_fn: spec.use_fn,
        summary: summarize(results)?,
        top_categories: top_categories(&per_category, TOP_CATEGORIES, TOP_MIN_SUCCESSES),
        per_category,
    })
}

struct SceneData {
    scene: Scene,
    floors: Vec<FloorMap>,
}

fn load_scene(ds: &Dataset, file: &str, cfg: &Config) -> Result<SceneData> {
    let desc: SceneDescription = read_json(&ds.root.join(file))?;
    let scene = desc.build().map_err(|e| Error::Dataset(format!("{file}: {e}")))?;
    let nav = &cfg.navmap;
    let floors = build_floor_maps(&scene.mesh, nav.slice_height, nav.resolution, nav.erosion)?;
    Ok(SceneData { scene, floors })
}

/// Runs each baseline on every episode of the dataset. Memories are built
/// once per scene floor from the static scene and reused through `memory`.
/// Trajectories are written under `trajectories/<baseline>/` when a
/// directory is given.
pub fn run_benchmark(
    ds: &Dataset,
    baselines: &[BaselineSpec],
    cfg: &Config,
    library: &ObjectLibrary,
    seed: u64,
    transport: Arc<dyn Transport>,
    memory: &AgentMemory,
    trajectories: Option<&Path>,
) -> Result<BenchmarkReport> {
    if baselines.is_empty() {
        return Err(Error::Config("no baselines to evaluate".into()));
    }
    let m = &ds.manifest;
    let exec = cfg.exec;
    let mut scenes: BTreeMap<String, SceneData> = BTreeMap::new();
    for s in &m.scenes {
        scenes.insert(s.scene_id.clone(), load_scene(ds, &s.file, cfg)?);
    }
    let mut variants: Vec<(SceneVariant, Scene, Vec<Episode>)> = Vec::new();
    for v in &m.variants {
        let base = scenes
            .get(&v.scene_id)
            .ok_or_else(|| Error::Dataset(format!("variant {} names unknown scene {}", v.variant_id, v.scene_id)))?;
        let variant = ds.variant(v)?;
        let vs = base.scene.with_variant(&variant, library)?;
        variants.push((variant, vs, ds.episodes(v)?));
    }
    let total: usize = variants.iter().map(|v| v.2.len()).sum();
    if total == 0 {
        return Err(Error::Dataset("dataset has no episodes".into()));
    }

    // first visits, one floor at a time
    let mut memories: BTreeMap<(String, usize), Arc<SceneMemory>> = BTreeMap::new();
    let needed: BTreeSet<(String, usize)> = variants
        .iter()
        .flat_map(|(_, _, eps)| eps.iter().map(|e| (e.scene_id.clone(), e.floor)))
        .collect();
    for (scene_id, floor) in &needed {
        let sd = &scenes[scene_id];
        let fm = sd
            .floors
            .get(*floor)
            .ok_or_else(|| Error::Dataset(format!("scene {scene_id} has no floor {floor}")))?;
        let mem = memory.get_or_build(scene_id, *floor, || {
            let scene_seed = rng::derive_seed(seed, &format!("memory/{scene_id}"));
            let detector = cfg.perception.detector(&sd.scene, rng::derive_seed(scene_seed, "detector"), transport.clone());
            let provider = cfg.semantics.provider(scene_seed, transport.clone());
            let inputs = UnderstandInputs {
                fusion: &cfg.fusion,
                planes: &cfg.planes,
                semantics: &cfg.semantics,
                detector: detector.as_ref(),
                provider: provider.as_ref(),
            };
            build_memory(&sd.scene, fm, &inputs, &cfg.agent, exec)
        })?;
        log::info!("memory {scene_id}/{floor}: {} planes", mem.entries.len());
        memories.insert((scene_id.clone(), *floor), mem);
    }

    let mut tables: BTreeMap<String, RelevanceTable> = BTreeMap::new();
    if baselines.iter().any(|b| b.agent == AgentKind::Semantic) {
        let provider = cfg.semantics.provider(rng::derive_seed(seed, "relevance"), transport.clone());
        for scene_id in scenes.keys() {
            let mems: Vec<&Arc<SceneMemory>> = memories.iter().filter(|(k, _)| &k.0 == scene_id).map(|(_, v)| v).collect();
            let regions: Vec<String> = mems.iter().flat_map(|m| m.regions()).collect();
            let receptacles: Vec<String> = mems.iter().flat_map(|m| m.receptacles()).collect();
            let goals: Vec<String> = variants
                .iter()
                .flat_map(|(_, _, eps)| eps.iter().filter(|e| &e.scene_id == scene_id).map(|e| normalize_label(&e.goal_category)))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let table = RelevanceTable::build(provider.as_ref(), &goals, &regions, &receptacles, exec)?;
            tables.insert(scene_id.clone(), table);
        }
    }

    let mut jobs: Vec<(usize, &Episode)> = Vec::new();
    for (vi, (_, _, eps)) in variants.iter().enumerate() {
        jobs.extend(eps.iter().map(|e| (vi, e)));
    }
    let detectors: Vec<NavDetector> = variants
        .iter()
        .map(|(v, vs, _)| {
            if cfg.perception.is_ground_truth() {
                NavDetector::GroundTruth {
                    eta_gt: cfg.perception.eta_gt,
                }
            } else {
                let s = rng::derive_seed(seed, &format!("detector/{}", v.variant_id));
                NavDetector::Model(cfg.perception.detector(vs, s, transport.clone()))
            }
        })
        .collect();

    let mut reports = Vec::new();
    let episodes: Vec<Episode> = jobs.iter().map(|(_, e)| (*e).clone()).collect();
    for spec in baselines {
        let mut agent = cfg.agent.clone();
        agent.use_fn = spec.use_fn;
        let runs: Vec<Result<Trajectory>> = par::with_workers(exec, cfg.workers, || {
            par::map(exec, &jobs, |(vi, e)| {
                let (variant, vs, _) = &variants[*vi];
                let sd = &scenes[&e.scene_id];
                let mem = &memories[&(e.scene_id.clone(), e.floor)];
                let world = EpisodeWorld {
                    scene: vs,
                    variant,
                    library,
                    floor: &sd.floors[e.floor],
                };
                run_episode(spec.agent, e, mem, tables.get(&e.scene_id), &world, &agent, &detectors[*vi], seed)
            })
        });
        let runs: Vec<Trajectory> = runs.into_iter().collect::<Result<_>>()?;
        if let Some(dir) = trajectories {
            for t in &runs {
                write_json(&dir.join(spec.name()).join(format!("{}.json", t.episode_id)), t)?;
            }
        }
        log::info!("{} done", spec.name());
        let results: Vec<EpisodeResult> = runs.into_iter().map(|t| t.result).collect();
        reports.push(baseline_report(*spec, &episodes, &results)?);
    }

    Ok(BenchmarkReport {
        schema: REPORT_SCHEMA,
        dataset_seed: m.seed,
        seed,
        episodes: total,
        memory: memories
            .values()
            .map(|m| MemoryStats {
                scene_id: m.scene_id.clone(),
                floor: m.floor,
                planes: m.entries.len(),
                navpoints: m.entries.iter().map(|e| e.navpoints.len()).sum(),
                known_reachable_fraction: m.explore.known_reachable_fraction,
            })
            .collect(),
        baselines: reports,
        config: cfg.to_json(),
    })
}

pub fn report_json(report: &BenchmarkReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// One row per baseline, prefixed with the report's label.
pub fn summary_csv(reports: &[(String, BenchmarkReport)]) -> String {
    let rows = reports
        .iter()
        .flat_map(|(label, r)| {
            r.baselines.iter().map(move |b| {
                vec![
                    label.clone(),
                    b.name.clone(),
                    b.summary.episodes.to_string(),
                    format!("{:.4}", b.summary.sr),
                    format!("{:.4}", b.summary.spl),
                    format!("{:.4}", b.summary.soft_spl),
                    format!("{:.4}", b.summary.dist_to_goal),
                ]
            })
        })
        .collect();
    csv_text(&["report", "baseline", "episodes", "sr", "spl", "soft_spl", "dist_to_goal"], rows)
}

pub fn category_csv(reports: &[(String, BenchmarkReport)]) -> String {
    let rows = reports
        .iter()
        .flat_map(|(label, r)| {
            r.baselines.iter().flat_map(move |b| {
                b.per_category.values().map(move |c| {
                    vec![
                        label.clone(),
                        b.name.clone(),
                        c.category.clone(),
                        c.episodes.to_string(),
                        c.successes.to_string(),
                        format!("{:.4}", c.sr),
                    ]
                })
            })
        })
        .collect();
    csv_text(&["report", "baseline", "category", "episodes", "successes", "sr"], rows)
}

pub fn markdown(reports: &[(String, BenchmarkReport)]) -> String {
    let mut s = String::from("| Report | Baseline | Episodes | SR | SPL | SoftSPL | Dist2Goal |\n|---|---|---:|---:|---:|---:|---:|\n");
    for (label, r) in reports {
        for b in &r.baselines {
            let m = &b.summary;
            s += &format!(
                "| {label} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                b.name, m.episodes, m.sr, m.spl, m.soft_spl, m.dist_to_goal
            );
        }
    }
    for (label, r) in reports {
        for b in &r.baselines {
            s += &format!("\nTop categories, {label} / {}:\n\n| Category | SR | Successes |\n|---|---:|---:|\n", b.name);
            for c in &b.top_categories {
                s += &format!("| {} | {:.4} | {}/{} |\n", c.category, c.sr, c.successes, c.episodes);
            }
        }
    }
    s
}

/// Plot-ready data: per report and baseline, the summary and the category
/// success rates.
pub fn plot_data(reports: &[(String, BenchmarkReport)]) -> Value {
    let mut out = serde_json::Map::new();
    for (label, r) in reports {
        let mut bs = serde_json::Map::new();
        for b in &r.baselines {
            let cats: BTreeMap<&str, f64> = b.per_category.values().map(|c| (c.category.as_str(), c.sr)).collect();
            bs.insert(b.name.clone(), serde_json::json!({ "summary": b.summary, "category_sr": cats }));
        }
        out.insert(label.clone(), Value::Object(bs));
    }
    Value::Object(out)
}
