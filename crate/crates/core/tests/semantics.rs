use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use scenevar_core::http::Transport;
use scenevar_core::navgrid::{Cell, NavGrid};
use scenevar_core::par::Exec;
use scenevar_core::perception::{PointCloud, SemanticInstance};
use scenevar_core::semantics::{
    joint_relevance, llm_json_call, normalize_label, sliding_window_regions, LlmClient, LlmConfig, OfflineProvider, FALLBACK_MAX,
    Prompt, RegionMap, RelevanceProvider, RelevanceTable, RemoteProvider, TargetKind, UNKNOWN_REGION,
};
use scenevar_core::{Error, Point2, Point3, Result};
use serde_json::{json, Value};

#[derive(Default)]
struct MockTransport {
    replies: Mutex<VecDeque<Result<String>>>,
    bodies: Mutex<Vec<String>>,
    headers: Mutex<Vec<Vec<(String, String)>>>,
}

impl MockTransport {
    fn with(replies: Vec<Result<String>>) -> Arc<Self> {
        Arc::new(MockTransport {
            replies: Mutex::new(replies.into()),
            ..Default::default()
        })
    }

    fn calls(&self) -> usize {
        self.bodies.lock().unwrap().len()
    }
}

impl Transport for MockTransport {
    fn post_json(&self, _url: &str, headers: &[(String, String)], body: &str) -> Result<String> {
        self.bodies.lock().unwrap().push(body.to_string());
        self.headers.lock().unwrap().push(headers.to_vec());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(Error::Backend("no reply queued".into())))
    }
}

fn completion(content: &str) -> Result<String> {
    Ok(json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn client(t: Arc<MockTransport>, cache: Option<std::path::PathBuf>) -> LlmClient {
    let config = LlmConfig {
        api_key_env: "SCENEVAR_TEST_UNSET_KEY".into(),
        cache_dir: cache,
        ..LlmConfig::default()
    };
    LlmClient::new(config, t)
}

fn regions_field(v: &Value) -> Result<Vec<String>> {
    v.get("regions")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .ok_or_else(|| Error::Schema("no regions".into()))
}

fn instance(label: &str, at: Point3) -> SemanticInstance {
    SemanticInstance {
        relative_points: PointCloud::new(vec![Point3::origin()]),
        centroid: at,
        label: label.into(),
        label_embedding: Vec::new(),
        detection_confidences: vec![1.0],
        view_count: 1,
    }
}

#[test]
fn labels_normalize() {
    assert_eq!(normalize_label("  Living   Room "), "living room");
    assert_eq!(normalize_label("BED"), "bed");
    assert_eq!(normalize_label(""), "");
}

#[test]
fn joint_is_product_and_defaults_to_zero() {
    let mut t = RelevanceTable::default();
    t.set(TargetKind::Region, "cup", "kitchen", 0.8);
    t.set(TargetKind::Receptacle, "cup", "counter", 0.5);
    assert!((joint_relevance(&t, "cup", "kitchen", "counter") - 0.4).abs() < 1e-12);
    assert_eq!(joint_relevance(&t, "cup", "bedroom", "counter"), 0.0);
    assert_eq!(joint_relevance(&t, "plate", "kitchen", "counter"), 0.0);
    assert!((joint_relevance(&t, " CUP ", "Kitchen", "counter  ") - 0.4).abs() < 1e-12);
}

#[test]
fn set_clamps_to_unit_interval() {
    let mut t = RelevanceTable::default();
    t.set(TargetKind::Receptacle, "cup", "counter", 3.0);
    t.set(TargetKind::Region, "cup", "kitchen", -1.0);
    assert_eq!(t.get(TargetKind::Receptacle, "cup", "counter"), 1.0);
    assert_eq!(t.get(TargetKind::Region, "cup", "kitchen"), 0.0);
    let scaled = t.scale_receptacle_scores(2.5);
    assert_eq!(scaled.get(TargetKind::Receptacle, "cup", "counter"), 2.5);
    assert_eq!(scaled.get(TargetKind::Region, "cup", "kitchen"), 0.0);
}

#[test]
fn table_build_matches_provider() {
    let p = OfflineProvider::new(4, &[]);
    let objects = vec!["Cup".to_string(), "pillow".into(), "cup".into(), "gizmo".into()];
    let regions = vec!["kitchen".to_string(), "bedroom".into()];
    let recs = vec!["bed".to_string(), "counter".into()];
    let seq = RelevanceTable::build(&p, &objects, &regions, &recs, Exec::Sequential).unwrap();
    let par = RelevanceTable::build(&p, &objects, &regions, &recs, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.objects(), vec!["cup", "gizmo", "pillow"]);
    for o in seq.objects() {
        for r in &regions {
            assert_eq!(seq.get(TargetKind::Region, &o, r), p.relevance(&o, r, TargetKind::Region));
        }
        for r in &recs {
            assert_eq!(seq.get(TargetKind::Receptacle, &o, r), p.relevance(&o, r, TargetKind::Receptacle));
        }
    }
    // curated integers on the 0..10 scale
    assert_eq!(seq.get(TargetKind::Receptacle, "pillow", "bed"), 1.0);
    assert_eq!(seq.get(TargetKind::Region, "cup", "kitchen"), 0.9);
}

#[test]
fn bedroom_window_leads_with_bedroom() {
    let p = OfflineProvider::new(0, &[]);
    let objs: Vec<String> = ["headboard", "bed", "pillow", "curtain", "stool", "carpet"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(p.propose_regions(&objs).unwrap()[0], "bedroom");
    assert!(p.propose_regions(&["zzz".to_string()]).unwrap().is_empty());
}

#[test]
fn receptacle_proposals_keep_known_surfaces() {
    let p = OfflineProvider::new(0, &[]);
    let objs: Vec<String> = ["Bed", "pillow", "counter", "bed", "cup"].iter().map(|s| s.to_string()).collect();
    assert_eq!(p.propose_receptacles(&objs).unwrap(), vec!["bed", "counter"]);
}

#[test]
fn extra_vocabulary_is_offered() {
    let p = OfflineProvider::new(0, &["Garage".to_string(), "kitchen".into()]);
    assert_eq!(p.region_vocabulary.iter().filter(|r| *r == "kitchen").count(), 1);
    assert!(p.region_vocabulary.contains(&"garage".to_string()));
}

#[test]
fn fallback_is_bounded_and_stable() {
    let a = OfflineProvider::new(9, &[]).relevance("gizmo", "bed", TargetKind::Receptacle);
    let b = OfflineProvider::new(9, &[]).relevance("gizmo", "bed", TargetKind::Receptacle);
    assert_eq!(a, b);
    assert!((0.0..=FALLBACK_MAX).contains(&a));
}

#[test]
fn unknown_map_and_out_of_bounds() {
    let g = NavGrid::new(0.1, Point2::new(-1.0, -1.0), 20, 10, 0.0, Cell::Navigable).unwrap();
    let m = RegionMap::unknown(&g);
    assert_eq!(m.label_at(&Point2::new(0.0, -0.5)), UNKNOWN_REGION);
    assert_eq!(m.label_at(&Point2::new(50.0, 0.0)), UNKNOWN_REGION);
    assert_eq!(m.histogram(), BTreeMap::from([(UNKNOWN_REGION.to_string(), 200)]));
}

/// Brute-force window vote: every window centre on the step lattice spanning
/// the grid extent that covers an instance centroid votes its provider label onto every cell
/// centre within `r`.
fn oracle_regions(insts: &[SemanticInstance], g: &NavGrid, r: f64, step: f64, p: &OfflineProvider) -> Vec<String> {
    let mut votes: Vec<BTreeMap<String, u32>> = vec![BTreeMap::new(); g.width * g.height];
    let xs = (g.origin.x / step).floor() as i64..=((g.origin.x + g.width as f64 * g.resolution) / step).ceil() as i64;
    let ys = (g.origin.y / step).floor() as i64..=((g.origin.y + g.height as f64 * g.resolution) / step).ceil() as i64;
    for yw in ys {
        for xw in xs.clone() {
            let c = Point2::new(xw as f64 * step, yw as f64 * step);
            let mut labels: Vec<String> = insts
                .iter()
                .filter(|i| (i.centroid.xy() - c).norm() <= r)
                .map(|i| normalize_label(&i.label))
                .collect();
            labels.sort();
            labels.dedup();
            if labels.is_empty() {
                continue;
            }
            let Some(top) = p.propose_regions(&labels).unwrap().into_iter().next() else {
                continue;
            };
            for iy in 0..g.height {
                for ix in 0..g.width {
                    if (g.cell_center(ix, iy) - c).norm() <= r {
                        *votes[iy * g.width + ix].entry(top.clone()).or_default() += 1;
                    }
                }
            }
        }
    }
    votes
        .into_iter()
        .map(|v| {
            let max = v.values().copied().max().unwrap_or(0);
            v.into_iter()
                .find(|(_, n)| *n == max)
                .map(|(l, _)| l)
                .unwrap_or_else(|| UNKNOWN_REGION.to_string())
        })
        .collect()
}

#[test]
fn sliding_window_matches_brute_force() {
    let g = NavGrid::new(0.1, Point2::origin(), 45, 40, 0.0, Cell::Navigable).unwrap();
    let insts = vec![
        instance("bed", Point3::new(0.8, 0.8, 0.5)),
        instance("Pillow", Point3::new(1.1, 0.7, 0.6)),
        instance("cup", Point3::new(3.4, 3.1, 0.9)),
        instance("zzz", Point3::new(0.4, 3.6, 0.2)),
    ];
    let p = OfflineProvider::new(1, &[]);
    for (r, step) in [(0.6, 0.5), (1.0, 0.3), (2.0, 0.5)] {
        let m = sliding_window_regions(&insts, &g, r, step, &p, Exec::Sequential).unwrap();
        let expected = oracle_regions(&insts, &g, r, step, &p);
        for iy in 0..g.height {
            for ix in 0..g.width {
                assert_eq!(m.label(ix, iy), expected[iy * g.width + ix], "r {r} cell ({ix}, {iy})");
            }
        }
        let par = sliding_window_regions(&insts, &g, r, step, &p, Exec::Parallel).unwrap();
        assert_eq!(m, par);
    }
    let m = sliding_window_regions(&insts, &g, 0.6, 0.5, &p, Exec::Sequential).unwrap();
    assert_eq!(m.label_at(&Point2::new(0.9, 0.9)), "bedroom");
    assert_eq!(m.label_at(&Point2::new(3.4, 3.1)), "kitchen");
    assert_eq!(m.label_at(&Point2::new(0.4, 3.6)), UNKNOWN_REGION);
}

#[test]
fn window_parameters_must_be_positive() {
    let g = NavGrid::new(0.1, Point2::origin(), 4, 4, 0.0, Cell::Navigable).unwrap();
    let p = OfflineProvider::new(0, &[]);
    assert!(matches!(sliding_window_regions(&[], &g, 0.0, 0.5, &p, Exec::Sequential), Err(Error::Config(_))));
    assert!(matches!(sliding_window_regions(&[], &g, 1.0, -0.5, &p, Exec::Sequential), Err(Error::Config(_))));
}

#[test]
fn request_is_deterministic_chat_completion() {
    let t = MockTransport::with(vec![completion(r#"{"regions": ["kitchen"]}"#)]);
    let c = client(t.clone(), None);
    let out = llm_json_call(&c, Prompt::RegionProposals, r#"{"objects": ["cup"]}"#, regions_field).unwrap();
    assert_eq!(out, vec!["kitchen"]);
    let body: Value = serde_json::from_str(&t.bodies.lock().unwrap()[0]).unwrap();
    assert_eq!(body["temperature"], json!(0.0));
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], Prompt::RegionProposals.system());
    assert_eq!(body["messages"][1]["content"], r#"{"objects": ["cup"]}"#);
    assert!(t.headers.lock().unwrap()[0].is_empty());
}

#[test]
fn api_key_comes_from_environment() {
    std::env::set_var("SCENEVAR_TEST_KEY_PRESENT", "sekrit");
    let t = MockTransport::with(vec![completion(r#"{"regions": []}"#)]);
    let config = LlmConfig {
        api_key_env: "SCENEVAR_TEST_KEY_PRESENT".into(),
        ..LlmConfig::default()
    };
    LlmClient::new(config, t.clone()).json_call("s", "u", regions_field).unwrap();
    let h = &t.headers.lock().unwrap()[0];
    assert_eq!(h, &vec![("authorization".to_string(), "Bearer sekrit".to_string())]);
}

#[test]
fn malformed_output_is_retried_three_times() {
    let t = MockTransport::with(vec![
        completion("not json"),
        completion("```json\n{\"regions\": [\"x\"]}\n```"),
        completion("[\"kitchen\"]"),
        completion(r#"{"regions": ["kitchen"]}"#),
    ]);
    let c = client(t.clone(), None);
    assert_eq!(c.json_call("s", "u", regions_field).unwrap(), vec!["kitchen"]);
    assert_eq!(t.calls(), 4);
    let bodies = t.bodies.lock().unwrap();
    assert!(bodies.iter().all(|b| *b == bodies[0]));
}

#[test]
fn retries_exhaust_after_four_attempts() {
    let t = MockTransport::with((0..6).map(|_| completion("{broken")).collect());
    let err = client(t.clone(), None).json_call("s", "u", regions_field).unwrap_err();
    assert!(matches!(err, Error::RetriesExhausted { attempts: 4, .. }), "{err:?}");
    assert_eq!(t.calls(), 4);
}

#[test]
fn validation_failures_count_as_retries() {
    let t = MockTransport::with(vec![completion(r#"{"other": 1}"#), completion(r#"{"regions": ["office"]}"#)]);
    assert_eq!(client(t.clone(), None).json_call("s", "u", regions_field).unwrap(), vec!["office"]);
    assert_eq!(t.calls(), 2);
}

#[test]
fn transport_errors_are_not_retried() {
    let t = MockTransport::with(vec![Err(Error::Backend("refused".into())), completion(r#"{"regions": []}"#)]);
    let err = client(t.clone(), None).json_call("s", "u", regions_field).unwrap_err();
    assert!(matches!(err, Error::Backend(_)));
    assert_eq!(t.calls(), 1);
}

#[test]
fn disk_cache_short_circuits_transport() {
    let dir = tempfile::tempdir().unwrap();
    let first = MockTransport::with(vec![completion(r#"{"regions": ["bathroom"]}"#)]);
    let c = client(first.clone(), Some(dir.path().to_path_buf()));
    assert_eq!(c.json_call("s", "u", regions_field).unwrap(), vec!["bathroom"]);
    let key = c.cache_key("s", "u");
    assert!(dir.path().join(format!("{key}.json")).exists());

    let second = MockTransport::with(vec![]);
    let c2 = client(second.clone(), Some(dir.path().to_path_buf()));
    assert_eq!(c2.json_call("s", "u", regions_field).unwrap(), vec!["bathroom"]);
    assert_eq!(second.calls(), 0);
    // a different prompt misses the cache
    assert!(c2.json_call("s", "other", regions_field).is_err());
    assert_eq!(second.calls(), 1);
}

#[test]
fn cache_key_is_sha256_of_body() {
    use sha2::{Digest, Sha256};
    let c = client(MockTransport::with(vec![]), None);
    let expected = hex::encode(Sha256::digest(c.request_body("a", "b").as_bytes()));
    assert_eq!(c.cache_key("a", "b"), expected);
    assert_ne!(c.cache_key("a", "b"), c.cache_key("a", "c"));
}

#[test]
fn remote_scores_are_rescaled_and_complete() {
    let t = MockTransport::with(vec![
        completion(r#"{"relevances": {"Bed": 7}}"#),
        completion(r#"{"relevances": {"bed": 11, "sofa": 2}}"#),
        completion(r#"{"relevances": {"bed": 7, "Sofa ": 2.5}}"#),
    ]);
    let p = RemoteProvider::new(client(t.clone(), None));
    let s = p.score("pillow", &["bed".to_string(), "sofa".into()], TargetKind::Receptacle).unwrap();
    assert_eq!(t.calls(), 3);
    assert!((s["bed"] - 0.7).abs() < 1e-12);
    assert!((s["sofa"] - 0.25).abs() < 1e-12);
    let body: Value = serde_json::from_str(&t.bodies.lock().unwrap()[0]).unwrap();
    assert_eq!(body["messages"][0]["content"], Prompt::ReceptacleRelevance.system());
}

#[test]
fn remote_region_proposals_require_one_answer() {
    let t = MockTransport::with(vec![completion(r#"{"regions": []}"#), completion(r#"{"regions": [" Living Room"]}"#)]);
    let p = RemoteProvider::new(client(t.clone(), None));
    assert_eq!(p.propose_regions(&["sofa".to_string()]).unwrap(), vec!["living room"]);
    assert_eq!(t.calls(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_is_idempotent(s in "[ A-Za-z]{0,24}") {
        let n = normalize_label(&s);
        prop_assert_eq!(normalize_label(&n), n.clone());
        prop_assert!(!n.starts_with(' ') && !n.ends_with(' ') && !n.contains("  "));
    }

    #[test]
    fn offline_scores_stay_in_unit_interval(seed in 0u64..1000, o in "[a-z]{1,8}", t in "[a-z]{1,8}") {
        let p = OfflineProvider::new(seed, &[]);
        for kind in [TargetKind::Region, TargetKind::Receptacle] {
            let v = p.relevance(&o, &t, kind);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn joint_is_symmetric_product(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let mut t = RelevanceTable::default();
        t.set(TargetKind::Region, "o", "r", a);
        t.set(TargetKind::Receptacle, "o", "c", b);
        prop_assert!((joint_relevance(&t, "o", "r", "c") - a * b).abs() < 1e-15);
    }
}
