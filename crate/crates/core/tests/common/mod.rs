//! Fixtures shared by several test binaries.
#![allow(dead_code)]

use rand::Rng;
use scenevar_core::camera::{render, CameraSpec, RenderOptions};
use scenevar_core::fusion::{FusedInstanceStore, FusionConfig};
use scenevar_core::perception::{decompose_instance, extract_instances, GtDetector, PointCloud, SemanticInstance, TrigramEmbedder};
use scenevar_core::placement::sample_point_in_polygon;
use scenevar_core::scene::mesh::write_ascii;
use scenevar_core::scene::{Scene, TriangleMesh};
use scenevar_core::{rng, Point2, Point3, Vector3};

// ---- polygon sampling

pub fn pentagon() -> Vec<Point2> {
    vec![
        Point2::new(0.0, 0.0),
        Point2::new(4.0, 0.3),
        Point2::new(5.0, 2.5),
        Point2::new(2.2, 4.1),
        Point2::new(-0.8, 2.0),
    ]
}

pub fn tri_area(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs() / 2.0
}

pub fn in_triangle(p: &Point2, a: &Point2, b: &Point2, c: &Point2) -> bool {
    let s = |o: &Point2, u: &Point2, v: &Point2| (u.x - o.x) * (v.y - o.y) - (u.y - o.y) * (v.x - o.x);
    let (d1, d2, d3) = (s(a, b, p), s(b, c, p), s(c, a, p));
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

/// Bins independent of the sampler's triangulation: a fan from the vertex
/// mean, each edge split into `k` pieces.
pub fn centroid_bins(poly: &[Point2], k: usize) -> Vec<[Point2; 3]> {
    let n = poly.len() as f64;
    let c = Point2::new(poly.iter().map(|p| p.x).sum::<f64>() / n, poly.iter().map(|p| p.y).sum::<f64>() / n);
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        for j in 0..k {
            let p = a + (b - a) * (j as f64 / k as f64);
            let q = a + (b - a) * ((j + 1) as f64 / k as f64);
            out.push([c, p, q]);
        }
    }
    out
}

pub fn tri_fan_area(poly: &[Point2]) -> f64 {
    (1..poly.len() - 1).map(|i| tri_area(&poly[0], &poly[i], &poly[i + 1])).sum()
}

pub fn chi_square(poly: &[Point2], samples: &[Point2], bins: &[[Point2; 3]]) -> f64 {
    let areas: Vec<f64> = bins.iter().map(|t| tri_area(&t[0], &t[1], &t[2])).collect();
    let total: f64 = areas.iter().sum();
    assert!((total - tri_fan_area(poly)).abs() < 1e-9);
    let mut counts = vec![0usize; bins.len()];
    for p in samples {
        let k = bins.iter().position(|t| in_triangle(p, &t[0], &t[1], &t[2])).expect("sample inside polygon");
        counts[k] += 1;
    }
    let n = samples.len() as f64;
    counts
        .iter()
        .zip(&areas)
        .map(|(&o, a)| {
            let e = n * a / total;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

pub fn draw(poly: &[Point2], seed: u64, n: usize) -> Vec<Point2> {
    let mut r = rng::rng_for(seed, "pentagon");
    (0..n).map(|_| sample_point_in_polygon(poly, &mut r).unwrap()).collect()
}

// ---- synthetic receptacles

pub fn gauss(r: &mut rng::Rng) -> f64 {
    let u1: f64 = r.random::<f64>().max(1e-300);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn jitter(p: Point3, sigma: f64, r: &mut rng::Rng) -> Point3 {
    p + Vector3::new(gauss(r), gauss(r), gauss(r)) * sigma
}

/// Rotated rectangle footprint, CCW.
pub fn footprint(c: Point2, w: f64, d: f64, yaw: f64) -> Vec<Point2> {
    let (s, co) = yaw.sin_cos();
    [(-w, -d), (w, -d), (w, d), (-w, d)]
        .iter()
        .map(|&(x, y)| Point2::new(c.x + 0.5 * (co * x - s * y), c.y + 0.5 * (s * x + co * y)))
        .collect()
}

fn sample_in(rect: &[Point2], r: &mut rng::Rng) -> Point2 {
    let (a, b, d) = (rect[0], rect[1], rect[3]);
    a + (b - a) * r.random::<f64>() + (d - a) * r.random::<f64>()
}

pub struct Synthetic {
    pub cloud: Vec<Point3>,
    pub heights: Vec<f64>,
    pub hull: Vec<Point2>,
}

/// Receptacle with 1 to 3 boards over one footprint, two vertical side
/// panels, and isotropic noise.
pub fn synthetic_receptacle(seed: u64) -> Synthetic {
    let mut r = rng::rng_for(seed, "receptacle");
    let w = r.random_range(0.5..2.0);
    let d = r.random_range(0.4..1.2);
    let hull = footprint(Point2::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)), w, d, r.random_range(0.0..std::f64::consts::PI));
    let boards = r.random_range(1..=3usize);
    let top = r.random_range(0.4..1.6);
    let heights: Vec<f64> = if boards == 1 {
        vec![top]
    } else {
        let gap = (top - 0.1) / (boards - 1) as f64;
        (0..boards).map(|k| 0.1 + gap * k as f64).collect()
    };
    let sigma = r.random_range(0.0..0.005);
    let mut cloud = Vec::new();
    let per_board = ((w * d * 1500.0) as usize).max(200);
    for &h in &heights {
        for _ in 0..per_board {
            let p = sample_in(&hull, &mut r);
            cloud.push(jitter(Point3::new(p.x, p.y, h), sigma, &mut r));
        }
    }
    // side panels along the short edges, from the floor to the top board
    let ztop = *heights.last().unwrap();
    for (a, b) in [(hull[0], hull[3]), (hull[1], hull[2])] {
        for _ in 0..(ztop * d * 800.0) as usize {
            let p = a + (b - a) * r.random::<f64>();
            cloud.push(jitter(Point3::new(p.x, p.y, r.random_range(0.0..ztop)), sigma, &mut r));
        }
    }
    Synthetic { cloud, heights, hull }
}

pub fn as_instance(cloud: &[Point3], label: &str) -> SemanticInstance {
    decompose_instance(&PointCloud::new(cloud.to_vec()), label, 1.0, &TrigramEmbedder).unwrap()
}

// ---- multi-view fusion

pub type Boxes = Vec<(String, Point3, Point3)>;

/// Five labelled boxes on an arc in front of a camera cluster, none
/// occluding another; two share a label.
pub fn five_object_scene() -> (Scene, Boxes) {
    let specs = [("chair", -50.0, 0.4, 0.5), ("table", -25.0, 0.7, 0.7), ("lamp", 0.0, 0.25, 0.9), ("chair", 25.0, 0.4, 0.5), ("sofa", 50.0, 0.6, 0.6)];
    let objects: Boxes = specs
        .iter()
        .map(|&(label, az, size, h)| {
            let a = f64::to_radians(az);
            let (cx, cy) = (2.5 * a.cos(), 2.5 * a.sin());
            let r = size / 2.0;
            (label.to_string(), Point3::new(cx - r, cy - r, 0.0), Point3::new(cx + r, cy + r, h))
        })
        .collect();
    let mut mesh = TriangleMesh::new();
    for (k, (_, lo, hi)) in objects.iter().enumerate() {
        mesh.add_box(*lo, *hi, Some(k as u32));
    }
    let names: Vec<String> = objects.iter().map(|o| o.0.clone()).collect();
    let text = write_ascii(&mesh, |i| format!("receptacle/{}#{i}", names[i as usize]));
    (Scene::from_ascii(&text, "five.txt", "five").unwrap(), objects)
}

pub fn five_object_views() -> (Vec<Vec<SemanticInstance>>, Boxes) {
    let (scene, objects) = five_object_scene();
    let spec = CameraSpec { width: 400, height: 240, hfov_deg: 135.0, r_min: 0.05, r_max: 8.0 };
    let gt = GtDetector::new(&scene, 1e-4);
    let poses = [(0.0, 0.0), (0.0, 0.15), (0.1, -0.15), (-0.1, 0.05), (0.05, -0.05)];
    let views = poses
        .iter()
        .enumerate()
        .map(|(k, &(dx, dy))| {
            let cam = spec.look_at(Point3::new(dx, dy, 1.4), Point3::new(2.5, 0.02 * k as f64, 0.3));
            let obs = render(&scene, &cam, RenderOptions { semantic: true, color: false });
            extract_instances(&obs, &gt, None, &TrigramEmbedder).unwrap()
        })
        .collect();
    (views, objects)
}

pub fn fuse(views: &[Vec<SemanticInstance>], order: &[usize]) -> FusedInstanceStore {
    let mut store = FusedInstanceStore::new(FusionConfig::default());
    for &v in order {
        for inst in &views[v] {
            store.associate_and_fuse(inst.clone());
        }
    }
    store.dedupe_overlaps();
    store
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Number of fused instances with the given label whose centroid lies in
/// the box grown by `slack`.
pub fn centroids_in_box(store: &FusedInstanceStore, label: &str, lo: &Point3, hi: &Point3, slack: f64) -> usize {
    store
        .instances
        .iter()
        .filter(|i| i.label == label && (0..3).all(|a| i.centroid[a] >= lo[a] - slack && i.centroid[a] <= hi[a] + slack))
        .count()
}
