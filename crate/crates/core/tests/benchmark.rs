use std::collections::BTreeMap;
use std::sync::OnceLock;

use scenevar_core::agents::{AgentKind, AgentMemory};
use scenevar_core::benchmark::{
    baseline_report, category_csv, category_table, markdown, plot_data, report_json, run_benchmark, summary_csv,
    top_categories, BaselineSpec, BenchmarkReport, CategoryStats,
};
use scenevar_core::config::Config;
use scenevar_core::episodes::{write_json, Dataset, Episode, StartPose};
use scenevar_core::metrics::EpisodeResult;
use scenevar_core::pipeline::{default_transport, generate_dataset};
use scenevar_core::scene::{presets, ObjectLibrary};
use scenevar_core::Error;

fn episode(cat: &str) -> Episode {
    Episode {
        episode_id: format!("e_{cat}"),
        scene_id: "s".into(),
        variant_id: "v".into(),
        floor: 0,
        start: StartPose { position: [0.0, 0.0], heading: 0.0 },
        goal_category: cat.into(),
        goal_instances: vec![],
        shortest_path_length: 1.0,
    }
}

fn result(success: bool) -> EpisodeResult {
    EpisodeResult {
        success,
        path_length: 2.0,
        shortest_path: 1.0,
        d_init: 1.0,
        d_final: if success { 0.0 } else { 1.0 },
    }
}

#[test]
fn baseline_names_round_trip() {
    for (s, agent, use_fn, name) in [
        ("random", AgentKind::Random, true, "random_astar"),
        ("semantic", AgentKind::Semantic, true, "semantic_astar"),
        ("random-nofn", AgentKind::Random, false, "random_astar_nofn"),
        ("semantic-nofn", AgentKind::Semantic, false, "semantic_astar_nofn"),
    ] {
        let b = BaselineSpec::parse(s).unwrap();
        assert_eq!(b, BaselineSpec { agent, use_fn });
        assert_eq!(b.name(), name);
    }
    assert!(matches!(BaselineSpec::parse("vlfm"), Err(Error::Config(_))));
}

#[test]
fn category_tables_and_top_five() {
    let cats = ["cup", "cup", "cup", "bed", "bed", "mug", "mug", "mug", "vase"];
    let wins = [true, true, false, true, true, true, true, true, true];
    let eps: Vec<_> = cats.iter().map(|c| episode(c)).collect();
    let rs: Vec<_> = wins.iter().map(|&w| result(w)).collect();
    let t = category_table(&eps, &rs);
    assert_eq!(t["cup"], CategoryStats { category: "cup".into(), episodes: 3, successes: 2, sr: 2.0 / 3.0 });
    assert_eq!(t.values().map(|c| c.episodes).sum::<usize>(), cats.len());
    // vase has a single success and stays out
    let top: Vec<_> = top_categories(&t, 5, 2).into_iter().map(|c| c.category).collect();
    assert_eq!(top, vec!["bed", "mug", "cup"]);
    assert_eq!(top_categories(&t, 1, 2).len(), 1);

    let r = baseline_report(BaselineSpec::parse("semantic").unwrap(), &eps, &rs).unwrap();
    assert!((r.summary.sr - 8.0 / 9.0).abs() < 1e-12);
    assert!(r.summary.spl <= r.summary.sr);
    assert!(baseline_report(BaselineSpec::parse("random").unwrap(), &[], &[]).is_err());
}

struct Fixture {
    _dir: tempfile::TempDir,
    ds: Dataset,
    reports: [BenchmarkReport; 2],
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = Config::defaults();
        cfg.dataset.variants_per_scene = 2;
        let scenes = vec![presets::two_room().build().unwrap()];
        let lib = ObjectLibrary::default_library();
        generate_dataset(&scenes, &lib, &cfg, 4, dir.path(), default_transport()).unwrap();
        let ds = Dataset::open(dir.path()).unwrap();
        let specs: Vec<_> = ["random", "semantic", "random-nofn", "semantic-nofn"]
            .iter()
            .map(|s| BaselineSpec::parse(s).unwrap())
            .collect();
        // separate memories so both runs build from scratch
        let run = || run_benchmark(&ds, &specs, &cfg, &lib, 8, default_transport(), &AgentMemory::new(), None).unwrap();
        let reports = [run(), run()];
        Fixture { _dir: dir, ds, reports }
    })
}

#[test]
fn reports_are_deterministic() {
    let f = fixture();
    assert_eq!(report_json(&f.reports[0]), report_json(&f.reports[1]));
}

#[test]
fn report_metrics_are_consistent() {
    let f = fixture();
    let r = &f.reports[0];
    assert_eq!(r.episodes, f.ds.all_episodes().unwrap().len());
    assert_eq!(r.baselines.len(), 4);
    for b in &r.baselines {
        let s = &b.summary;
        assert!(s.spl <= s.sr + 1e-15, "{}", b.name);
        for v in [s.sr, s.spl, s.soft_spl] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(s.dist_to_goal >= 0.0);
        assert_eq!(b.per_category.values().map(|c| c.episodes).sum::<usize>(), r.episodes);
    }
    let by: BTreeMap<_, _> = r.baselines.iter().map(|b| (b.name.as_str(), b.summary.sr)).collect();
    assert!(by["random_astar"] >= by["random_astar_nofn"]);
    assert!(by["semantic_astar"] >= by["semantic_astar_nofn"]);
    assert_eq!(r.memory.len(), 1);
    assert!(r.memory[0].planes >= 4);
}

#[test]
fn text_formats_cover_every_baseline() {
    let f = fixture();
    let labelled = vec![("run".to_string(), f.reports[0].clone())];
    let csv = summary_csv(&labelled);
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.starts_with("report,baseline,episodes,sr,spl,soft_spl,dist_to_goal"));
    let cats = category_csv(&labelled);
    let n_cat: usize = f.reports[0].baselines.iter().map(|b| b.per_category.len()).sum();
    assert_eq!(cats.lines().count(), 1 + n_cat);
    let md = markdown(&labelled);
    for b in &f.reports[0].baselines {
        assert!(md.contains(&format!("| run | {} |", b.name)));
    }
    let plot = plot_data(&labelled);
    assert!(plot["run"]["semantic_astar"]["summary"]["sr"].is_number());
    let back: BenchmarkReport = serde_json::from_str(&report_json(&f.reports[0])).unwrap();
    assert_eq!(back, f.reports[0]);
}

#[test]
fn empty_dataset_is_rejected() {
    let src = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut m = src.ds.manifest.clone();
    for v in &m.variants {
        let ep_path = dir.path().join(&v.episode_file);
        write_json(
            &ep_path,
            &serde_json::json!({"schema": 1, "scene_id": v.scene_id, "variant_id": v.variant_id, "episodes": []}),
        )
        .unwrap();
        std::fs::create_dir_all(dir.path().join("variants")).unwrap();
        std::fs::copy(src.ds.root.join(&v.variant_file), dir.path().join(&v.variant_file)).unwrap();
    }
    std::fs::create_dir_all(dir.path().join("scenes")).unwrap();
    for s in &m.scenes {
        std::fs::copy(src.ds.root.join(&s.file), dir.path().join(&s.file)).unwrap();
    }
    m.total_episodes = 0;
    write_json(&dir.path().join("manifest.json"), &m).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    let cfg = Config::defaults();
    let lib = ObjectLibrary::default_library();
    let err = run_benchmark(&ds, &[BaselineSpec::parse("random").unwrap()], &cfg, &lib, 0, default_transport(), &AgentMemory::new(), None);
    assert!(matches!(err, Err(Error::Dataset(_))));
    let err = run_benchmark(&src.ds, &[], &cfg, &lib, 0, default_transport(), &AgentMemory::new(), None);
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn missing_manifest_is_a_dataset_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Dataset::open(dir.path()), Err(Error::Dataset(_))));
}
