use std::collections::BTreeSet;

use proptest::prelude::*;
use scenevar_core::camera::{render, RenderOptions};
use scenevar_core::config::Config;
use scenevar_core::episodes::{
    dataset_manifest, generate_episodes, goal_candidates, placement_bounds, sample_viewpoints, valid_categories, Dataset,
    EpisodeConfig, SD_OVON_3K,
};
use scenevar_core::navgrid::{astar_multi, build_floor_maps, geodesic_distance, Cell, FloorMap};
use scenevar_core::par::Exec;
use scenevar_core::pipeline::{default_transport, generate_dataset};
use scenevar_core::scene::{mesh, presets, InstanceKind, ObjectLibrary, Placement, Scene, SceneVariant};
use scenevar_core::{Point2, Point3};

fn floors(scene: &Scene) -> Vec<FloorMap> {
    let nav = Config::defaults().navmap;
    build_floor_maps(&scene.mesh, nav.slice_height, nav.resolution, nav.erosion).unwrap()
}

fn put(object_id: &str, category: &str, at: [f64; 3], index: usize) -> Placement {
    Placement {
        object_id: object_id.into(),
        category: category.into(),
        position: at,
        yaw: 0.3,
        pitch: 0.0,
        roll: 0.0,
        plane_id: "p".into(),
        region: "r".into(),
        index,
    }
}

fn variant(scene: &str, placements: Vec<Placement>) -> SceneVariant {
    SceneVariant {
        scene_id: scene.into(),
        variant_id: format!("{scene}_v000"),
        seed: 0,
        placements,
    }
}

fn object_id(scene: &Scene, key: &str) -> u32 {
    scene
        .instances
        .iter()
        .find(|i| i.kind == InstanceKind::Object && i.key.as_deref() == Some(key))
        .unwrap()
        .id
}

/// Cup on the single-room table.
fn table_fixture() -> (Scene, SceneVariant, ObjectLibrary) {
    let lib = ObjectLibrary::default_library();
    let base = presets::single_room().build().unwrap();
    let v = variant("single_room", vec![put("cup_0", "cup", [2.5, 2.5, 0.75], 0)]);
    (base.with_variant(&v, &lib).unwrap(), v, lib)
}

#[test]
fn open_table_object_has_validated_viewpoints() {
    let (scene, v, lib) = table_fixture();
    let fl = floors(&scene);
    let cfg = EpisodeConfig::default();
    let p = &v.placements[0];
    let id = object_id(&scene, &p.instance_key());
    let bounds = placement_bounds(p, &lib).unwrap();
    let center = Point2::new(2.5, 2.5);
    let vps = sample_viewpoints(&scene, &fl[0].eroded, id, &center, bounds, &cfg, Exec::Sequential);
    assert!(vps.len() >= 4, "{} viewpoints", vps.len());
    let target = Point3::from((bounds.0.coords + bounds.1.coords) / 2.0);
    let need = (cfg.eta_gt * (cfg.camera.width * cfg.camera.height) as f64).ceil().max(1.0) as usize;
    for vp in &vps {
        let d = (vp - center).norm();
        assert!(d >= cfg.viewpoint_ring[0] - 1e-9 && d <= cfg.viewpoint_ring[1] + 1e-9);
        assert!(fl[0].eroded.navigable_at(vp));
        // full render as the visibility oracle
        let cam = cfg.camera.look_at(Point3::new(vp.x, vp.y, cfg.camera_height), target);
        let obs = render(&scene, &cam, RenderOptions { semantic: true, color: false });
        let px = obs.semantic.unwrap().data.iter().filter(|&&s| s == id + 1).count();
        assert!(px >= need, "viewpoint {vp:?} sees {px} pixels");
    }
    let par = sample_viewpoints(&scene, &fl[0].eroded, id, &center, bounds, &cfg, Exec::Parallel);
    assert_eq!(vps, par);
}

#[test]
fn walled_in_object_has_no_viewpoint() {
    let (scene, v, lib) = table_fixture();
    let fl = floors(&scene);
    let p = &v.placements[0];
    let crate_id = scene.instances.len() as u32;
    let mut m = scene.mesh.clone();
    m.add_box(Point3::new(2.3, 2.3, 0.7), Point3::new(2.7, 2.7, 1.0), Some(crate_id));
    let key = p.instance_key();
    let text = mesh::write_ascii(&m, |i| match scene.instances.get(i as usize) {
        Some(inst) if inst.kind == InstanceKind::Object => format!("object/{}", key),
        Some(inst) => format!("{}/{}#{}", inst.kind.as_str(), inst.label, inst.id),
        None => "decor/crate#0".into(),
    });
    let walled = Scene::from_ascii(&text, "walled.txt", "walled").unwrap();
    let id = walled.instances.iter().find(|i| i.kind == InstanceKind::Object).unwrap().id;
    let bounds = placement_bounds(p, &lib).unwrap();
    let vps = sample_viewpoints(&walled, &fl[0].eroded, id, &Point2::new(2.5, 2.5), bounds, &EpisodeConfig::default(), Exec::Sequential);
    assert!(vps.is_empty(), "{vps:?}");
}

#[test]
fn ring_inside_blocked_zone_is_empty() {
    let (scene, v, lib) = table_fixture();
    let mut grid = floors(&scene)[0].eroded.clone();
    let center = Point2::new(2.5, 2.5);
    for iy in 0..grid.height {
        for ix in 0..grid.width {
            if (grid.cell_center(ix, iy) - center).norm() <= 1.2 {
                grid.set(ix, iy, Cell::Obstacle);
            }
        }
    }
    let p = &v.placements[0];
    let id = object_id(&scene, &p.instance_key());
    let vps = sample_viewpoints(&scene, &grid, id, &center, placement_bounds(p, &lib).unwrap(), &EpisodeConfig::default(), Exec::Sequential);
    assert!(vps.is_empty());
}

#[test]
fn episodes_are_solvable_and_counted() {
    let lib = ObjectLibrary::default_library();
    let base = presets::two_room().build().unwrap();
    let v = variant(
        "two_room",
        vec![
            put("cup_0", "cup", [6.9, 2.0, 0.75], 0),
            put("bowl_0", "bowl", [6.6, 1.8, 0.75], 1),
            put("pillow_0", "pillow", [1.5, 3.05, 0.5], 2),
            put("laptop_0", "laptop", [3.6, 0.4, 0.75], 3),
            put("apple_0", "apple", [8.9, 2.0, 0.9], 4),
            put("cup_1", "cup", [8.9, 3.0, 0.9], 5),
        ],
    );
    let scene = base.with_variant(&v, &lib).unwrap();
    let fl = floors(&base);
    let cfg = EpisodeConfig { episodes_per_category: 3, ..Default::default() };
    let eps = generate_episodes(&scene, &v, &lib, &fl, &cfg, 11, Exec::Sequential).unwrap();
    let cats = valid_categories(&eps);
    assert_eq!(cats, vec!["apple", "bowl", "cup", "laptop", "pillow"]);
    assert_eq!(eps.len(), cats.len() * 3);
    let ids: BTreeSet<_> = eps.iter().map(|e| e.episode_id.clone()).collect();
    assert_eq!(ids.len(), eps.len());
    for e in &eps {
        let grid = &fl[e.floor].eroded;
        let start = e.start_point();
        assert!(grid.navigable_at(&start));
        let vps = e.viewpoints();
        assert!(!vps.is_empty());
        let plan = astar_multi(grid, &start, &vps, 0.0).unwrap();
        assert!(plan.length.is_finite());
        assert!((plan.length - e.shortest_path_length).abs() < 1e-9);
        let nearest = vps
            .iter()
            .map(|q| geodesic_distance(grid, &start, q))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest >= cfg.min_start_distance - 1e-9, "start {nearest} m from goal");
        assert!(e.goal_instances.iter().all(|g| !g.viewpoints.is_empty()));
    }
    let cups = eps.iter().find(|e| e.goal_category == "cup").unwrap();
    assert_eq!(cups.goal_instances.len(), 2);

    let again = generate_episodes(&scene, &v, &lib, &fl, &cfg, 11, Exec::Parallel).unwrap();
    assert_eq!(serde_json::to_string(&eps).unwrap(), serde_json::to_string(&again).unwrap());
}

#[test]
fn category_without_viewpoints_is_excluded() {
    let lib = ObjectLibrary::default_library();
    let base = presets::single_room().build().unwrap();
    // underneath the room floor cannot be seen from anywhere
    let v = variant(
        "single_room",
        vec![put("cup_0", "cup", [2.5, 2.5, 0.75], 0), put("apple_0", "apple", [2.5, 2.5, -0.5], 1)],
    );
    let scene = base.with_variant(&v, &lib).unwrap();
    let fl = floors(&base);
    let cands = goal_candidates(&scene, &v, &lib, &fl, &EpisodeConfig::default(), Exec::Sequential).unwrap();
    assert!(cands[1].2.is_empty());
    let eps = generate_episodes(&scene, &v, &lib, &fl, &EpisodeConfig::default(), 0, Exec::Sequential).unwrap();
    assert_eq!(valid_categories(&eps), vec!["cup"]);

    let none = variant("single_room", vec![put("apple_0", "apple", [2.5, 2.5, -0.5], 0)]);
    let scene = base.with_variant(&none, &lib).unwrap();
    assert!(generate_episodes(&scene, &none, &lib, &fl, &EpisodeConfig::default(), 0, Exec::Sequential).unwrap().is_empty());
}

#[test]
fn manifest_summary_shapes() {
    let empty = dataset_manifest(&[]);
    assert_eq!(empty.episodes, 0);
    assert_eq!(empty.categories, 0);
    assert!(empty.per_category.is_empty());
    assert_eq!((SD_OVON_3K.categories, SD_OVON_3K.scenes, SD_OVON_3K.variants, SD_OVON_3K.episodes), (73, 8, 363, 2897));
}

#[test]
fn generated_dataset_satisfies_count_identity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::defaults();
    cfg.dataset.variants_per_scene = 3;
    let scenes: Vec<Scene> = [presets::two_room(), presets::random_layout(1), presets::random_layout(2)]
        .into_iter()
        .map(|d| d.build().unwrap())
        .collect();
    let lib = ObjectLibrary::default_library();
    let m = generate_dataset(&scenes, &lib, &cfg, 5, dir.path(), default_transport()).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    assert_eq!(ds.manifest, m);

    // recount from the files on disk
    let (k_s, k_v, k_e) = (3usize, 3usize, cfg.episodes.episodes_per_category);
    assert_eq!(m.variants.len(), k_s * k_v);
    let mut total = 0usize;
    let mut valid = 0usize;
    for entry in &m.variants {
        let eps = ds.episodes(entry).unwrap();
        let cats: BTreeSet<_> = eps.iter().map(|e| e.goal_category.clone()).collect();
        assert_eq!(cats.len(), entry.valid_categories.len());
        for c in &cats {
            assert_eq!(eps.iter().filter(|e| &e.goal_category == c).count(), k_e);
        }
        valid += cats.len();
        total += eps.len();
        let scene = &scenes.iter().find(|s| s.id == entry.scene_id).unwrap();
        let fl = floors(scene);
        for e in &eps {
            let plan = astar_multi(&fl[e.floor].eroded, &e.start_point(), &e.viewpoints(), 0.0).unwrap();
            assert!(plan.length.is_finite());
            assert!((plan.length - e.shortest_path_length).abs() < 1e-9);
        }
    }
    assert!(total > 0);
    let n_c = valid as f64 / m.variants.len() as f64;
    assert_eq!(m.total_episodes, total);
    assert_eq!(m.mean_valid_categories, n_c);
    assert_eq!((k_s * k_v) as f64 * n_c * k_e as f64, total as f64);
    assert!(m.count_identity_holds());
    assert_eq!(m.summary.per_category.values().sum::<usize>(), total);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn opening_cells_never_loses_viewpoints(seed in any::<u64>()) {
        use rand::Rng as _;
        let (scene, v, lib) = table_fixture();
        let open = floors(&scene)[0].eroded.clone();
        let mut closed = open.clone();
        let mut r = scenevar_core::rng::rng_for(seed, "walls");
        for (ix, iy) in open.navigable_cells() {
            if r.random::<f64>() < 0.4 {
                closed.set(ix, iy, Cell::Obstacle);
            }
        }
        let p = &v.placements[0];
        let id = object_id(&scene, &p.instance_key());
        let b = placement_bounds(p, &lib).unwrap();
        let c = Point2::new(2.5, 2.5);
        let cfg = EpisodeConfig::default();
        let few = sample_viewpoints(&scene, &closed, id, &c, b, &cfg, Exec::Sequential);
        let many = sample_viewpoints(&scene, &open, id, &c, b, &cfg, Exec::Sequential);
        prop_assert!(few.len() <= many.len());
        prop_assert!(few.iter().all(|q| many.contains(q)));
    }
}
