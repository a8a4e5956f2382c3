//! Bounding-volume hierarchy over mesh triangles and ray casting.

use crate::scene::TriangleMesh;
use crate::{Point3, Vector3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            hi: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    /// Slab test; returns the entry distance when the ray hits within `t_max`.
    fn hit(&self, origin: &Point3, inv_dir: &Vector3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.lo[a] - origin[a]) * inv_dir[a];
            let mut far = (self.hi[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf means the ray lies in the slab plane
            if near.is_nan() || far.is_nan() {
                if origin[a] < self.lo[a] || origin[a] > self.hi[a] {
                    return None;
                }
                continue;
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, count: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Closest ray hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Distance along the (unit) ray direction.
    pub t: f64,
    pub triangle: usize,
    pub instance: Option<u32>,
}

/// Median-split BVH. Triangles are stored as flat vertex triples.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Point3; 3]>,
    tri_index: Vec<usize>,
    instances: Vec<Option<u32>>,
    instance_bounds: Vec<Option<Aabb>>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.triangles.len();
        let all: Vec<[Point3; 3]> = (0..n).map(|i| mesh.triangle(i)).collect();
        let centroids: Vec<Point3> = all
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        if n > 0 {
            build_node(&all, &centroids, &mut order, 0, n, &mut nodes);
        }
        let mut instance_bounds: Vec<Option<Aabb>> = Vec::new();
        for (t, inst) in all.iter().zip(&mesh.face_instance) {
            if let Some(id) = *inst {
                let id = id as usize;
                if instance_bounds.len() <= id {
                    instance_bounds.resize(id + 1, None);
                }
                let b = instance_bounds[id].get_or_insert_with(Aabb::empty);
                t.iter().for_each(|p| b.grow(p));
            }
        }
        // pad so flat instances survive rounding in the slab test
        for b in instance_bounds.iter_mut().flatten() {
            let pad = Vector3::repeat(1e-7);
            b.lo -= pad;
            b.hi += pad;
        }
        Bvh {
            nodes,
            instance_bounds,
            tris: order.iter().map(|&i| all[i]).collect(),
            instances: order.iter().map(|&i| mesh.face_instance[i]).collect(),
            tri_index: order,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Whether a ray can reach the bounding box of `instance` before
    /// `t_max`. A miss means the instance cannot be the closest hit.
    pub fn may_hit_instance(&self, instance: u32, origin: &Point3, dir: &Vector3, t_max: f64) -> bool {
        let Some(Some(b)) = self.instance_bounds.get(instance as usize) else {
            return false;
        };
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        b.hit(origin, &inv, t_max).is_some()
    }

    /// Closest two-sided intersection with `t` in `(t_min, t_max)`.
    /// `dir` must be unit length for `t` to be a distance.
    pub fn intersect(&self, origin: &Point3, dir: &Vector3, t_min: f64, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut limit = t_max;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds().hit(origin, &inv, limit).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for k in start..start + count {
                        if let Some(t) = ray_triangle(origin, dir, &self.tris[k]) {
                            if t > t_min && t < limit {
                                limit = t;
                                best = Some((t, k));
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().hit(origin, &inv, limit);
                    let dr = self.nodes[right].bounds().hit(origin, &inv, limit);
                    match (dl, dr) {
                        (Some(a), Some(b)) => {
                            // visit the nearer child first
                            if a <= b {
                                stack.push(right);
                                stack.push(left);
                            } else {
                                stack.push(left);
                                stack.push(right);
                            }
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best.map(|(t, k)| Hit {
            t,
            triangle: self.tri_index[k],
            instance: self.instances[k],
        })
    }

    /// Calls `f` for every intersection with `t` in `(t_min, t_max)`, in no
    /// particular order.
    pub fn for_each_hit(&self, origin: &Point3, dir: &Vector3, t_min: f64, t_max: f64, mut f: impl FnMut(Hit)) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds().hit(origin, &inv, t_max).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for k in start..start + count {
                        if let Some(t) = ray_triangle(origin, dir, &self.tris[k]) {
                            if t > t_min && t < t_max {
                                f(Hit {
                                    t,
                                    triangle: self.tri_index[k],
                                    instance: self.instances[k],
                                });
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
    }

    /// Whether anything blocks the open segment `a -> b`.
    pub fn occluded(&self, a: &Point3, b: &Point3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len < 1e-12 {
            return false;
        }
        self.intersect(a, &(d / len), 1e-6, len - 1e-6).is_some()
    }
}

fn build_node(
    tris: &[[Point3; 3]],
    centroids: &[Point3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cb = Aabb::empty();
    for &i in &order[start..end] {
        for p in &tris[i] {
            bounds.grow(p);
        }
        cb.grow(&centroids[i]);
    }
    let idx = nodes.len();
    let count = end - start;
    if count <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, count });
        return idx;
    }
    let ext = cb.hi - cb.lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = start + count / 2;
    order[start..end].select_nth_unstable_by(count / 2, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]));
    nodes.push(Node::Leaf { bounds, start, count: 0 });
    let left = build_node(tris, centroids, order, start, mid, nodes);
    let right = build_node(tris, centroids, order, mid, end, nodes);
    nodes[idx] = Node::Inner { bounds, left, right };
    idx
}

/// Two-sided Möller–Trumbore.
pub fn ray_triangle(origin: &Point3, dir: &Vector3, tri: &[Point3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}
