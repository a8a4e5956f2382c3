use proptest::prelude::*;
use scenevar_core::config::Config;
use scenevar_core::coverage::{
    coverage_kernel, draw_candidate, generate_observations, sample_observation_points, CoverageLayer, SamplerConfig,
};
use scenevar_core::navgrid::{build_floor_maps, Cell, NavGrid};
use scenevar_core::scene::{presets, Scene};
use scenevar_core::{rng, Error, Point2};

fn open_room(w: usize, h: usize, res: f64) -> NavGrid {
    let mut g = NavGrid::new(res, Point2::origin(), w, h, 0.0, Cell::Navigable).unwrap();
    for ix in 0..w {
        g.set(ix, 0, Cell::Obstacle);
        g.set(ix, h - 1, Cell::Obstacle);
    }
    for iy in 0..h {
        g.set(0, iy, Cell::Obstacle);
        g.set(w - 1, iy, Cell::Obstacle);
    }
    g
}

/// Distance from `p` to the nearest blocked cell centre, counting the ring
/// of cells just outside the raster as blocked.
fn clearance(g: &NavGrid, p: &Point2) -> f64 {
    let mut best = f64::INFINITY;
    for iy in -1..=g.height as i64 {
        for ix in -1..=g.width as i64 {
            let inside = ix >= 0 && iy >= 0 && ix < g.width as i64 && iy < g.height as i64;
            if inside && g.is_navigable(ix as usize, iy as usize) {
                continue;
            }
            let c = Point2::new(
                g.origin.x + (ix as f64 + 0.5) * g.resolution,
                g.origin.y + (iy as f64 + 0.5) * g.resolution,
            );
            best = best.min((c - p).norm());
        }
    }
    best
}

#[test]
fn kernel_peak_and_invalid_region() {
    let cfg = SamplerConfig { r_min: 0.0, r_max: 2.0, ..Default::default() };
    assert_eq!(coverage_kernel(&Point2::origin(), &Point2::origin(), &cfg), 1.0);
    let cfg = SamplerConfig { r_min: 0.5, ..cfg };
    assert_eq!(coverage_kernel(&Point2::origin(), &Point2::new(0.4, 0.0), &cfg), 0.0);
}

#[test]
fn kernel_matches_closed_form() {
    let cfg = SamplerConfig { r_min: 0.0, r_max: 2.0, ..Default::default() };
    let at = |d: f64| coverage_kernel(&Point2::origin(), &Point2::new(0.0, d), &cfg);
    assert!((at(2.0) - (-0.5f64).exp()).abs() < 1e-12);
    assert!((at(2.0) - 0.6065306597126334).abs() < 1e-12);
    let boundary = 2.0 * (2.0 * 2f64.ln()).sqrt();
    assert!((at(boundary) - 0.5).abs() < 1e-12);
    assert!((cfg.strong_radius() - boundary).abs() < 1e-12);
    assert!((boundary / 2.0 - 1.1774).abs() < 1e-4);
}

#[test]
fn rejects_bad_config() {
    let cfg = SamplerConfig { r_min: 3.0, r_max: 2.0, ..Default::default() };
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let cfg = SamplerConfig { coverage_threshold: 0.0, ..Default::default() };
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

#[test]
fn obstacle_grid_is_an_error() {
    let g = NavGrid::new(0.05, Point2::origin(), 10, 10, 0.0, Cell::Obstacle).unwrap();
    let err = sample_observation_points(&g, &SamplerConfig::default(), 1).unwrap_err();
    assert!(matches!(err, Error::NoNavigableCells));
}

#[test]
fn single_cell_gives_one_point() {
    let mut g = NavGrid::new(0.05, Point2::origin(), 5, 5, 0.0, Cell::Obstacle).unwrap();
    g.set(2, 2, Cell::Navigable);
    let cfg = SamplerConfig { r_min: 0.0, erosion_radius: 0.0, ..Default::default() };
    let res = sample_observation_points(&g, &cfg, 3).unwrap();
    assert_eq!(res.points, vec![g.cell_center(2, 2)]);
    assert!(res.converged);
    assert_eq!(res.iterations, 1);
}

#[test]
fn open_room_converges() {
    // 10 x 10 m at 0.1 m cells
    let g = open_room(100, 100, 0.1);
    let cfg = SamplerConfig { r_max: 2.0, ..Default::default() };
    let res = sample_observation_points(&g, &cfg, 11).unwrap();
    assert!(res.converged, "fraction {}", res.coverage_fraction);
    assert!(res.iterations < cfg.max_iterations);
    assert!(res.coverage_fraction >= 0.9);
    let cells = g.navigable_cells();
    assert!((res.layer.fraction_at_least(&cells, 0.5) - res.coverage_fraction).abs() < 1e-12);
}

#[test]
fn random_layouts_reach_coverage_with_clearance() {
    let cfg = Config::defaults();
    let mut floors = 0;
    for seed in 0..10 {
        let scene = presets::random_layout(seed).build().unwrap();
        let maps = build_floor_maps(&scene.mesh, cfg.navmap.slice_height, cfg.navmap.resolution, cfg.navmap.erosion).unwrap();
        for m in &maps {
            let res = sample_observation_points(&m.grid, &cfg.sampler, seed).unwrap();
            assert!(res.converged, "layout {seed} floor {}: {}", m.index, res.coverage_fraction);
            assert!(res.coverage_fraction >= 0.9);
            assert!(res.iterations <= cfg.sampler.max_iterations);
            for p in &res.points {
                assert!(m.grid.navigable_at(p));
                let c = clearance(&m.grid, p);
                assert!(c > cfg.sampler.erosion_radius, "layout {seed}: point {p:?} clearance {c}");
            }
            floors += 1;
        }
    }
    assert!(floors >= 10);
}

#[test]
fn draws_follow_uncovered_weight() {
    let g = open_room(40, 20, 0.1);
    let cells = g.navigable_cells();
    let mut layer = CoverageLayer::new(&g);
    // left half covered at 0.75: weight 0.25 against 1.0
    for &(ix, iy) in &cells {
        if ix < 20 {
            layer.values[iy * layer.width + ix] = 0.75;
        }
    }
    let covered_cells = cells.iter().filter(|c| c.0 < 20).count() as f64;
    let open_cells = cells.len() as f64 - covered_cells;
    let p = 0.25 * covered_cells / (0.25 * covered_cells + open_cells);
    let n = 10_000;
    let mut r = rng::rng_for(5, "draws");
    let mut covered = 0usize;
    for _ in 0..n {
        let c = draw_candidate(&layer, &cells, &mut r).unwrap();
        if c.0 < 20 {
            covered += 1;
        }
    }
    let uncovered = n - covered;
    assert!(covered as f64 <= 0.5 * uncovered as f64, "{covered} vs {uncovered}");
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((covered as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{covered} expected {}", n as f64 * p);
}

#[test]
fn saturated_layer_yields_no_candidate() {
    let g = open_room(6, 6, 0.1);
    let mut layer = CoverageLayer::new(&g);
    layer.values.iter_mut().for_each(|v| *v = 1.0);
    let mut r = rng::rng_for(0, "x");
    assert_eq!(draw_candidate(&layer, &g.navigable_cells(), &mut r), None);
}

#[test]
fn observation_grid_and_wall_depth() {
    let text = "v 2 -10 -10\nv 2 10 -10\nv 2 10 10\nv 2 -10 10\nf 1 3 2 receptacle/wall#0\nf 1 4 3 receptacle/wall#0\n";
    let scene = Scene::from_ascii(text, "wall.txt", "wall").unwrap();
    let cfg = SamplerConfig::default();
    let obs = generate_observations(&Point2::new(1.0, 0.0), 0.0, &cfg, &scene);
    assert_eq!(obs.len(), 16);
    // yaw 0, pitch 0 faces the wall 1 m ahead
    let o = &obs[0];
    let (u, v) = (o.camera.width / 2, o.camera.height / 2);
    let d = o.depth_at(u, v).unwrap();
    assert!((d - 1.0).abs() < 1e-3, "{d}");
    // yaw 180 looks into empty space beyond r_max
    let back = &obs[4 * cfg.pitches_deg.len()];
    assert!(back.depth.data.iter().all(|&z| z == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn overlay_is_monotone_and_bounded(pts in proptest::collection::vec((0.0f64..3.0, 0.0f64..2.0), 1..8), r_max in 0.3f64..2.0) {
        let g = open_room(30, 20, 0.1);
        let cfg = SamplerConfig { r_min: 0.1, r_max, ..Default::default() };
        let mut layer = CoverageLayer::new(&g);
        prop_assert!(layer.values.iter().all(|&v| v == 0.0));
        for (x, y) in pts {
            let before = layer.values.clone();
            layer.overlay(&g, &Point2::new(x, y), &cfg);
            for (a, b) in before.iter().zip(&layer.values) {
                prop_assert!(b >= a);
                prop_assert!((0.0..=1.0).contains(b));
            }
        }
    }

    #[test]
    fn kernel_in_unit_interval(x in -10.0f64..10.0, y in -10.0f64..10.0, r_min in 0.0f64..1.0, extra in 0.01f64..4.0) {
        let cfg = SamplerConfig { r_min, r_max: r_min + extra, ..Default::default() };
        let g = coverage_kernel(&Point2::origin(), &Point2::new(x, y), &cfg);
        prop_assert!((0.0..=1.0).contains(&g));
    }
}
