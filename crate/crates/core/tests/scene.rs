use scenevar_core::scene::mesh::parse_ascii;
use scenevar_core::scene::{
    make_fixture_scene, parse_scene, presets, InstanceKind, ReceptacleKind, ReceptacleSpec, RoomSpec, Scene,
    SceneDescription, SceneFormat, TriangleMesh,
};
use scenevar_core::{Error, Point3};

fn one_room_desc() -> SceneDescription {
    SceneDescription {
        schema: 1,
        scene_id: "t".into(),
        seed: 0,
        wall_thickness: 0.1,
        rooms: vec![RoomSpec {
            name: "r".into(),
            region: "bedroom".into(),
            min: [0.0, 0.0],
            max: [5.0, 5.0],
            floor_z: 0.0,
            wall_height: 2.5,
        }],
        doors: vec![],
        receptacles: vec![ReceptacleSpec {
            id: "table_0".into(),
            label: "table".into(),
            room: "r".into(),
            kind: ReceptacleKind::Table,
            center: [2.5, 2.5],
            size: [1.2, 0.8],
            height: 0.75,
            levels: vec![],
        }],
        decor: vec![],
    }
}

#[test]
fn box_normals_point_outward() {
    let mut m = TriangleMesh::new();
    m.add_box(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0), None);
    let c = Point3::new(0.5, 1.0, 1.5);
    for i in 0..m.triangles.len() {
        let [a, b, d] = m.triangle(i);
        let mid = Point3::from((a.coords + b.coords + d.coords) / 3.0);
        assert!(m.face_normal(i).dot(&(mid - c)) > 0.0, "face {i} inward");
    }
    let total: f64 = (0..m.triangles.len()).map(|i| m.face_area(i)).sum();
    assert!((total - 2.0 * (2.0 + 3.0 + 6.0)).abs() < 1e-12);
}

#[test]
fn prism_area_matches_polygon_formula() {
    let mut m = TriangleMesh::new();
    let (r, h, n) = (0.4, 0.7, 12);
    m.add_prism(Point3::new(1.0, 1.0, 0.0), r, h, n, 0.3, Some(0));
    let cap = 0.5 * n as f64 * r * r * (2.0 * std::f64::consts::PI / n as f64).sin();
    let side = n as f64 * 2.0 * r * (std::f64::consts::PI / n as f64).sin() * h;
    let total: f64 = (0..m.triangles.len()).map(|i| m.face_area(i)).sum();
    assert!((total - (2.0 * cap + side)).abs() < 1e-9, "{total}");
    let (lo, hi) = m.bounds().unwrap();
    assert!((hi.z - h).abs() < 1e-12 && lo.z.abs() < 1e-12);
}

#[test]
fn ascii_rejects_bad_lines() {
    assert!(matches!(parse_ascii("v 1 2\n", "t"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(parse_ascii("v 0 0 0\nf 1 2 3\n", "t"), Err(Error::Parse { .. })));
    assert!(matches!(parse_ascii("x\n", "t"), Err(Error::Parse { line: 1, .. })));
    let m = parse_ascii("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3 receptacle/dining table#0\n", "t").unwrap();
    assert_eq!(m.face_labels[0].as_deref(), Some("receptacle/dining table#0"));
}

#[test]
fn ascii_round_trip_keeps_geometry_and_labels() {
    let scene = presets::two_room().build().unwrap();
    let text = scene.to_ascii();
    let back = Scene::from_ascii(&text, "two_room.txt", "two_room").unwrap();
    assert_eq!(back.mesh.triangles.len(), scene.mesh.triangles.len());
    for i in 0..scene.mesh.triangles.len() {
        let a = scene.mesh.triangle(i);
        let b = back.mesh.triangle(i);
        for k in 0..3 {
            assert!((a[k] - b[k]).norm() < 1e-9);
        }
        let la = scene.mesh.face_instance[i].map(|id| scene.instances[id as usize].label.clone());
        let lb = back.mesh.face_instance[i].map(|id| back.instances[id as usize].label.clone());
        assert_eq!(la, lb);
    }
    let kinds = |s: &Scene| s.instances.iter().filter(|i| i.kind == InstanceKind::Receptacle).count();
    assert_eq!(kinds(&back), kinds(&scene));
}

#[test]
fn description_json_round_trip() {
    for d in [presets::single_room(), presets::two_room(), presets::two_story(), presets::random_layout(3)] {
        let text = d.to_json();
        let scene = parse_scene(&text, SceneFormat::SceneJson, "x.json").unwrap();
        assert_eq!(scene.description.as_ref(), Some(&d));
        assert_eq!(scene.serialize(), text);
    }
}

#[test]
fn fixture_has_exact_table_top() {
    let scene = make_fixture_scene(&one_room_desc()).unwrap();
    let table_faces: Vec<usize> = (0..scene.mesh.triangles.len())
        .filter(|&i| scene.mesh.face_instance[i] == Some(0))
        .collect();
    let top = table_faces.iter().filter(|&&i| {
        let n = scene.mesh.face_normal(i);
        let [a, b, c] = scene.mesh.triangle(i);
        n.z > 0.0 && n.x == 0.0 && n.y == 0.0 && [a, b, c].iter().all(|p| p.z == 0.75)
    });
    let area: f64 = top.map(|&i| scene.mesh.face_area(i)).sum();
    assert!((area - 0.96).abs() < 1e-12);
}

#[test]
fn rejects_overlap_and_outside() {
    let mut d = one_room_desc();
    d.receptacles[0].center = [4.9, 2.5];
    assert!(matches!(d.build(), Err(Error::InvalidScene(_))));
    let mut d = one_room_desc();
    let mut r2 = d.rooms[0].clone();
    r2.name = "r2".into();
    r2.min = [4.0, 0.0];
    r2.max = [8.0, 5.0];
    d.rooms.push(r2);
    assert!(matches!(d.build(), Err(Error::InvalidScene(_))));
}

#[test]
fn minimal_floor_quad() {
    let text = r#"{"schema":1,"scene_id":"q","wall_thickness":0.1,
        "rooms":[{"name":"a","region":"hall","min":[0,0],"max":[1,1],"wall_height":0.0001}]}"#;
    let scene = parse_scene(text, SceneFormat::SceneJson, "q.json").unwrap();
    let floor = (0..scene.mesh.triangles.len())
        .filter(|&i| scene.mesh.face_normal(i).z > 0.0 && scene.mesh.triangle(i).iter().all(|p| p.z == 0.0))
        .count();
    assert_eq!(floor, 2);
}

#[test]
fn malformed_json_is_parse_error() {
    let err = parse_scene("{\"schema\": 1,\n \"rooms\": [", SceneFormat::SceneJson, "bad.json").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    assert!(matches!("obj".parse::<SceneFormat>(), Err(Error::UnsupportedFormat(_))));
}

#[test]
fn region_lookup_follows_rooms() {
    let d = presets::two_room();
    let scene = d.build().unwrap();
    for room in &d.rooms {
        let c = scenevar_core::Point2::new((room.min[0] + room.max[0]) / 2.0, (room.min[1] + room.max[1]) / 2.0);
        assert_eq!(scene.region_at(&c).map(|r| r.region.as_str()), Some(room.region.as_str()));
    }
}

#[test]
fn presets_validate() {
    for d in [presets::single_room(), presets::two_room(), presets::two_story(), presets::empty_room(5.0, 5.0)] {
        d.validate().unwrap();
    }
    for seed in 0..20 {
        let d = presets::random_layout(seed);
        d.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(d.receptacles.len() >= d.rooms.len(), "seed {seed} sparsely furnished");
    }
}

#[test]
fn random_layout_deterministic() {
    assert_eq!(presets::random_layout(7), presets::random_layout(7));
    assert_ne!(presets::random_layout(7), presets::random_layout(8));
}
