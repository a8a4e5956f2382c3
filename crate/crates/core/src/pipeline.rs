//! Scene understanding (perception, fusion, planes, regions) and end-to-end
//! dataset generation.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::camera::Observation;
use crate::config::Config;
use crate::coverage::{generate_observations, CoverageLayer, sample_observation_points, SamplerReport};
use crate::episodes::{
    dataset_manifest, generate_episodes, valid_categories, write_json, EpisodeFile, Manifest, SceneEntry, VariantEntry,
    DATASET_SCHEMA, SD_OVON_3K,
};
use crate::fusion::{FusedInstanceStore, FusionConfig};
use crate::http::{HttpTransport, Transport};
use crate::navgrid::{build_floor_maps, FloorMap};
use crate::perception::{extract_instances, Detector, GtDetector, NoisyDetector, RemoteDetector, SemanticInstance, TrigramEmbedder};
use crate::placement::generate_variants;
use crate::planes::{extract_planes, plane_records, PlaneConfig, ReceptaclePlane};
use crate::scene::{ObjectLibrary, Scene};
use crate::semantics::{
    normalize_label, sliding_window_regions, LlmClient, LlmConfig, OfflineProvider, RegionMap, RelevanceProvider,
    RelevanceTable, RemoteProvider,
};
use crate::{par, rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetectorSpec {
    Gt,
    Noisy { precision: f64, recall: f64 },
    Remote { endpoint: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub detector: DetectorSpec,
    pub eta_gt: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            detector: DetectorSpec::Gt,
            eta_gt: crate::perception::DEFAULT_ETA_GT,
        }
    }
}

impl PerceptionConfig {
    pub fn is_ground_truth(&self) -> bool {
        self.detector == DetectorSpec::Gt
    }

    /// Detector over `scene` (the scene being observed).
    pub fn detector(&self, scene: &Scene, seed: u64, transport: Arc<dyn Transport>) -> Arc<dyn Detector> {
        let gt = GtDetector::new(scene, self.eta_gt);
        match &self.detector {
            DetectorSpec::Gt => Arc::new(gt),
            DetectorSpec::Noisy { precision, recall } => {
                let confusion_labels = scene
                    .instances
                    .iter()
                    .map(|i| i.label.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                Arc::new(NoisyDetector {
                    gt,
                    precision: *precision,
                    recall: *recall,
                    seed,
                    confusion_labels,
                })
            }
            DetectorSpec::Remote { endpoint } => Arc::new(RemoteDetector {
                endpoint: endpoint.clone(),
                transport,
                default_vocabulary: scene
                    .instances
                    .iter()
                    .map(|i| i.label.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Offline,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemanticsConfig {
    pub window_radius: f64,
    pub window_step: f64,
    pub provider: ProviderKind,
    pub llm: LlmConfig,
    /// Prespecified receptacle labels; asked from the provider when absent.
    pub receptacles: Option<Vec<String>>,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        SemanticsConfig {
            window_radius: crate::semantics::DEFAULT_WINDOW_RADIUS,
            window_step: crate::semantics::DEFAULT_WINDOW_STEP,
            provider: ProviderKind::Offline,
            llm: LlmConfig::default(),
            receptacles: None,
        }
    }
}

impl SemanticsConfig {
    pub fn provider(&self, seed: u64, transport: Arc<dyn Transport>) -> Arc<dyn RelevanceProvider> {
        match self.provider {
            ProviderKind::Offline => Arc::new(OfflineProvider::new(seed, &[])),
            ProviderKind::Remote => Arc::new(RemoteProvider::new(LlmClient::new(self.llm.clone(), transport))),
        }
    }
}

pub fn default_transport() -> Arc<dyn Transport> {
    Arc::new(HttpTransport::default())
}

/// What the pipeline learns about one floor from a set of observations.
#[derive(Clone, Debug)]
pub struct FloorUnderstanding {
    pub floor: usize,
    pub instances: Vec<SemanticInstance>,
    pub receptacle_labels: Vec<String>,
    pub planes: Vec<ReceptaclePlane>,
    pub regions: RegionMap,
}

pub struct UnderstandInputs<'a> {
    pub fusion: &'a FusionConfig,
    pub planes: &'a PlaneConfig,
    pub semantics: &'a SemanticsConfig,
    pub detector: &'a dyn Detector,
    pub provider: &'a dyn RelevanceProvider,
}

/// Per-observation instance extraction, sequential fusion in observation
/// order, overlap correction, receptacle identification, plane extraction
/// and the region sweep. Plane ids are prefixed with `prefix`.
pub fn understand_floor(
    floor: &FloorMap,
    observations: &[Observation],
    inputs: &UnderstandInputs<'_>,
    prefix: &str,
    exec: par::Exec,
) -> Result<FloorUnderstanding> {
    let embedder = TrigramEmbedder;
    let per_view = par::map(exec, observations, |o| extract_instances(o, inputs.detector, None, &embedder));
    let mut store = FusedInstanceStore::new(*inputs.fusion);
    for view in per_view {
        for inst in view? {
            store.associate_and_fuse(inst);
        }
    }
    store.dedupe_overlaps();
    let labels: Vec<String> = store
        .instances
        .iter()
        .map(|i| normalize_label(&i.label))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let receptacle_labels = match &inputs.semantics.receptacles {
        Some(r) => r.iter().map(|s| normalize_label(s)).collect(),
        None if labels.is_empty() => Vec::new(),
        None => inputs.provider.propose_receptacles(&labels)?,
    };
    let mut planes = extract_planes(&store.instances, &receptacle_labels, inputs.planes, exec);
    let regions = sliding_window_regions(
        &store.instances,
        &floor.grid,
        inputs.semantics.window_radius,
        inputs.semantics.window_step,
        inputs.provider,
        exec,
    )?;
    for p in planes.iter_mut() {
        p.region_label = regions.label_at(&p.centroid.xy()).to_string();
        p.plane_id = format!("{prefix}{}", p.plane_id);
    }
    Ok(FloorUnderstanding {
        floor: floor.index,
        instances: store.instances,
        receptacle_labels,
        planes,
        regions,
    })
}

/// Everything generation derives from one static scene.
pub struct SceneArtifacts {
    pub floors: Vec<FloorMap>,
    pub understanding: Vec<FloorUnderstanding>,
    pub samplers: Vec<SamplerReport>,
    pub layers: Vec<CoverageLayer>,
    pub table: RelevanceTable,
}

impl SceneArtifacts {
    pub fn planes(&self) -> Vec<ReceptaclePlane> {
        self.understanding.iter().flat_map(|u| u.planes.iter().cloned()).collect()
    }
}

/// Relevance of every library category to the given regions and receptacles.
pub fn build_table(
    provider: &dyn RelevanceProvider,
    library: &ObjectLibrary,
    planes: &[ReceptaclePlane],
    exec: par::Exec,
) -> Result<RelevanceTable> {
    let regions: Vec<String> = planes.iter().map(|p| p.region_label.clone()).collect();
    let receptacles: Vec<String> = planes.iter().map(|p| p.receptacle_label.clone()).collect();
    RelevanceTable::build(provider, &library.categories(), &regions, &receptacles, exec)
}

/// Coverage sampling, observation rendering and understanding for each floor
/// of a static scene.
pub fn analyze_scene(
    scene: &Scene,
    cfg: &Config,
    library: &ObjectLibrary,
    seed: u64,
    transport: Arc<dyn Transport>,
) -> Result<SceneArtifacts> {
    let exec = cfg.exec;
    let nav = &cfg.navmap;
    let floors = build_floor_maps(&scene.mesh, nav.slice_height, nav.resolution, nav.erosion)?;
    let detector = cfg.perception.detector(scene, rng::derive_seed(seed, "detector"), transport.clone());
    let provider = cfg.semantics.provider(seed, transport);
    let mut sampler_cfg = cfg.sampler.clone();
    sampler_cfg.erosion_radius = nav.erosion;
    let mut understanding = Vec::new();
    let mut samplers = Vec::new();
    let mut layers = Vec::new();
    for f in &floors {
        let s = sample_observation_points(&f.grid, &sampler_cfg, rng::derive_seed(seed, &format!("{}/floor{}", scene.id, f.index)))?;
        let obs: Vec<Observation> = par::map(exec, &s.points, |p| generate_observations(p, f.height, &sampler_cfg, scene))
            .into_iter()
            .flatten()
            .collect();
        let inputs = UnderstandInputs {
            fusion: &cfg.fusion,
            planes: &cfg.planes,
            semantics: &cfg.semantics,
            detector: detector.as_ref(),
            provider: provider.as_ref(),
        };
        understanding.push(understand_floor(f, &obs, &inputs, &format!("f{}_", f.index), exec)?);
        samplers.push(SamplerReport::new(&s, &f.grid, &sampler_cfg));
        layers.push(s.layer);
    }
    let planes: Vec<ReceptaclePlane> = understanding.iter().flat_map(|u| u.planes.iter().cloned()).collect();
    let table = build_table(provider.as_ref(), library, &planes, exec)?;
    Ok(SceneArtifacts {
        floors,
        understanding,
        samplers,
        layers,
        table,
    })
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Generates `k_v` variants per scene and their episodes, writing the
/// dataset under `out`. Scenes must come from scene descriptions so that
/// evaluation can rebuild them.
pub fn generate_dataset(
    scenes: &[Scene],
    library: &ObjectLibrary,
    cfg: &Config,
    seed: u64,
    out: &Path,
    transport: Arc<dyn Transport>,
) -> Result<Manifest> {
    if scenes.is_empty() {
        return Err(Error::Dataset("no scenes to generate from".into()));
    }
    let exec = cfg.exec;
    let mut scene_entries = Vec::new();
    let mut variant_entries = Vec::new();
    let mut all = Vec::new();
    for scene in scenes {
        let desc = scene
            .description
            .as_ref()
            .ok_or_else(|| Error::Dataset(format!("scene {} has no description to store", scene.id)))?;
        let stem = file_stem(&scene.id);
        let scene_file = format!("scenes/{stem}.json");
        write_json(&out.join(&scene_file), desc)?;
        let scene_seed = rng::derive_seed(seed, &format!("scene/{}", scene.id));
        let art = analyze_scene(scene, cfg, library, scene_seed, transport.clone())?;
        for (f, s) in art.floors.iter().zip(&art.samplers) {
            let base = out.join(format!("maps/{stem}_floor{}", f.index));
            std::fs::create_dir_all(out.join("maps")).map_err(|e| Error::io(out.join("maps"), e))?;
            f.grid.export(&base.with_extension("nav"))?;
            s.write(&art.layers[f.index], &base.with_extension("coverage"))?;
        }
        let planes = art.planes();
        write_json(&out.join(format!("planes/{stem}.json")), &plane_records(&planes, &cfg.planes))?;
        write_json(&out.join(format!("relevance/{stem}.json")), &art.table)?;
        scene_entries.push(SceneEntry {
            scene_id: scene.id.clone(),
            file: scene_file,
            floors: art.floors.iter().map(|f| f.height).collect(),
        });
        let variants = generate_variants(
            &scene.id,
            scene_seed,
            cfg.dataset.variants_per_scene,
            &planes,
            &art.table,
            library,
            &cfg.placement,
            exec,
        )?;
        let episodes = par::map(exec, &variants, |v| -> Result<_> {
            let vs = scene.with_variant(v, library)?;
            let s = rng::derive_seed(scene_seed, &format!("episodes/{}", v.variant_id));
            // parallelism is spent across variants, viewpoint checks stay sequential
            generate_episodes(&vs, v, library, &art.floors, &cfg.episodes, s, par::Exec::Sequential)
        });
        for (v, eps) in variants.iter().zip(episodes) {
            let eps = eps?;
            let vstem = file_stem(&v.variant_id);
            let variant_file = format!("variants/{vstem}.json");
            let episode_file = format!("episodes/{vstem}.json");
            write_json(&out.join(&variant_file), v)?;
            write_json(
                &out.join(&episode_file),
                &EpisodeFile {
                    schema: DATASET_SCHEMA,
                    scene_id: v.scene_id.clone(),
                    variant_id: v.variant_id.clone(),
                    episodes: eps.clone(),
                },
            )?;
            variant_entries.push(VariantEntry {
                scene_id: v.scene_id.clone(),
                variant_id: v.variant_id.clone(),
                variant_file,
                episode_file,
                valid_categories: valid_categories(&eps),
                episodes: eps.len(),
            });
            all.extend(eps);
        }
    }
    let total_valid: usize = variant_entries.iter().map(|v| v.valid_categories.len()).sum();
    let n_variants = variant_entries.len();
    let manifest = Manifest {
        schema: DATASET_SCHEMA,
        seed,
        scenes_count: scenes.len(),
        variants_per_scene: cfg.dataset.variants_per_scene,
        episodes_per_category: cfg.episodes.episodes_per_category,
        mean_valid_categories: if n_variants == 0 { 0.0 } else { total_valid as f64 / n_variants as f64 },
        total_episodes: all.len(),
        scenes: scene_entries,
        variants: variant_entries,
        summary: dataset_manifest(&all),
        reference: SD_OVON_3K,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

