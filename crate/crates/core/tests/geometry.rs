use proptest::prelude::*;
use scenevar_core::geom::*;
use scenevar_core::Point2;

fn sq(x0: f64, y0: f64, s: f64) -> Vec<Point2> {
    vec![
        Point2::new(x0, y0),
        Point2::new(x0 + s, y0),
        Point2::new(x0 + s, y0 + s),
        Point2::new(x0, y0 + s),
    ]
}

/// Jarvis march, written independently of the library hull.
fn gift_wrap(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let orient = |o: &Point2, a: &Point2, b: &Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let start = pts[0];
    let mut hull = vec![start];
    let mut cur = start;
    loop {
        let mut next = if pts[0] == cur { pts[1] } else { pts[0] };
        for p in &pts {
            if *p == cur {
                continue;
            }
            let o = orient(&cur, &next, p);
            // take the most clockwise candidate, farthest on ties
            if o < 0.0 || (o == 0.0 && (p - cur).norm() > (next - cur).norm()) {
                next = *p;
            }
        }
        if next == start {
            break;
        }
        hull.push(next);
        cur = next;
        if hull.len() > pts.len() {
            break;
        }
    }
    hull
}

fn shoelace(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

#[test]
fn hull_drops_interior_and_collinear() {
    let mut pts = sq(0.0, 0.0, 1.0);
    pts.push(Point2::new(0.5, 0.5));
    pts.push(Point2::new(0.5, 0.0));
    let h = convex_hull(&pts);
    assert_eq!(h.len(), 4);
    assert!((signed_area(&h) - 1.0).abs() < 1e-12);
    assert!(is_convex_ccw(&h));
}

#[test]
fn iou_of_shifted_squares() {
    let a = sq(0.0, 0.0, 1.0);
    let b = sq(0.5, 0.0, 1.0);
    assert!((convex_iou(&a, &b) - 0.5 / 1.5).abs() < 1e-12);
    assert!((convex_iou(&a, &a) - 1.0).abs() < 1e-12);
    assert_eq!(convex_iou(&a, &sq(5.0, 5.0, 1.0)), 0.0);
}

#[test]
fn disk_containment() {
    let a = sq(0.0, 0.0, 1.0);
    assert!(disk_inside_convex(&a, &Point2::new(0.5, 0.5), 0.5));
    assert!(!disk_inside_convex(&a, &Point2::new(0.5, 0.5), 0.51));
    assert!(!disk_inside_convex(&a, &Point2::new(0.9, 0.5), 0.2));
    assert_eq!(distance_to_convex(&a, &Point2::new(2.0, 0.5)), 1.0);
}

#[test]
fn centroid_of_triangle_is_vertex_mean() {
    let t = [Point2::new(0.0, 0.0), Point2::new(3.0, 0.0), Point2::new(0.0, 3.0)];
    let c = centroid(&t);
    assert!((c - Point2::new(1.0, 1.0)).norm() < 1e-12);
}

fn cloud() -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((-50i32..50, -50i32..50), 3..40)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x as f64 * 0.1, y as f64 * 0.1)).collect())
}

proptest! {
    #[test]
    fn hull_matches_gift_wrapping(pts in cloud()) {
        let h = convex_hull(&pts);
        let g = gift_wrap(&pts);
        let ga = shoelace(&g).abs();
        prop_assert!((area(&h) - ga).abs() < 1e-9, "{} vs {}", area(&h), ga);
        if ga > 1e-9 {
            prop_assert_eq!(h.len(), g.len());
            prop_assert!(is_convex_ccw(&h));
            for p in &g {
                prop_assert!(h.contains(p));
            }
            for p in &pts {
                prop_assert!(contains_convex_eps(&h, p, 1e-9));
            }
        }
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in cloud(), b in cloud()) {
        let (ha, hb) = (convex_hull(&a), convex_hull(&b));
        prop_assume!(area(&ha) > 1e-6 && area(&hb) > 1e-6);
        let i1 = convex_iou(&ha, &hb);
        let i2 = convex_iou(&hb, &ha);
        prop_assert!((0.0..=1.0).contains(&i1));
        prop_assert!((i1 - i2).abs() < 1e-9);
        let inter = area(&clip_convex(&ha, &hb));
        prop_assert!(inter <= area(&ha).min(area(&hb)) + 1e-9);
    }

    #[test]
    fn distance_is_zero_inside_and_positive_outside(pts in cloud(), x in -8.0f64..8.0, y in -8.0f64..8.0) {
        let h = convex_hull(&pts);
        prop_assume!(area(&h) > 1e-6);
        let p = Point2::new(x, y);
        let d = distance_to_convex(&h, &p);
        if contains_convex(&h, &p) {
            prop_assert_eq!(d, 0.0);
        } else {
            let brute = (0..h.len())
                .map(|i| point_segment_distance(&p, &h[i], &h[(i + 1) % h.len()]))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(d > 0.0 && (d - brute).abs() < 1e-12);
        }
    }
}
