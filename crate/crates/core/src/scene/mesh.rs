use std::fmt::Write as _;

use crate::{Error, Point3, Result, Vector3};

/// Indexed triangle mesh in metres, +Z up.
///
/// `face_instance[i]` is the index of the scene instance triangle `i` belongs
/// to; unlabeled structure (floors, walls) carries `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub face_instance: Vec<Option<u32>>,
}

impl TriangleMesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.face_instance.len() != self.triangles.len() {
            return Err(Error::InvalidScene("face label count mismatch".into()));
        }
        if let Some(p) = self.vertices.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidScene(format!("non-finite vertex {p:?}")));
        }
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidScene(format!("triangle index out of range: {t:?}")));
        }
        Ok(())
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    /// Unnormalised face normal (length = twice the area).
    pub fn face_normal(&self, i: usize) -> Vector3 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, i: usize) -> f64 {
        0.5 * self.face_normal(i).norm()
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }

    fn push_vertex(&mut self, p: Point3) -> u32 {
        self.vertices.push(p);
        (self.vertices.len() - 1) as u32
    }

    fn push_tri(&mut self, a: u32, b: u32, c: u32, inst: Option<u32>) {
        self.triangles.push([a, b, c]);
        self.face_instance.push(inst);
    }

    /// Planar quad given counter-clockwise (seen from the front) corners.
    pub fn add_quad(&mut self, corners: [Point3; 4], inst: Option<u32>) {
        let i: Vec<u32> = corners.iter().map(|p| self.push_vertex(*p)).collect();
        self.push_tri(i[0], i[1], i[2], inst);
        self.push_tri(i[0], i[2], i[3], inst);
    }

    /// Axis-aligned box with outward-facing triangles.
    pub fn add_box(&mut self, lo: Point3, hi: Point3, inst: Option<u32>) {
        let v = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
        let (x0, y0, z0, x1, y1, z1) = (lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
        // top, bottom, -y, +x, +y, -x
        self.add_quad([v(x0, y0, z1), v(x1, y0, z1), v(x1, y1, z1), v(x0, y1, z1)], inst);
        self.add_quad([v(x0, y0, z0), v(x0, y1, z0), v(x1, y1, z0), v(x1, y0, z0)], inst);
        self.add_quad([v(x0, y0, z0), v(x1, y0, z0), v(x1, y0, z1), v(x0, y0, z1)], inst);
        self.add_quad([v(x1, y0, z0), v(x1, y1, z0), v(x1, y1, z1), v(x1, y0, z1)], inst);
        self.add_quad([v(x1, y1, z0), v(x0, y1, z0), v(x0, y1, z1), v(x1, y1, z1)], inst);
        self.add_quad([v(x0, y1, z0), v(x0, y0, z0), v(x0, y0, z1), v(x0, y1, z1)], inst);
    }

    /// Closed regular prism approximating an upright cylinder.
    pub fn add_prism(&mut self, base: Point3, radius: f64, height: f64, sides: usize, yaw: f64, inst: Option<u32>) {
        let sides = sides.max(3);
        let ring = |z: f64| -> Vec<Point3> {
            (0..sides)
                .map(|k| {
                    let a = yaw + std::f64::consts::TAU * k as f64 / sides as f64;
                    Point3::new(base.x + radius * a.cos(), base.y + radius * a.sin(), z)
                })
                .collect()
        };
        let bottom: Vec<u32> = ring(base.z).into_iter().map(|p| self.push_vertex(p)).collect();
        let top: Vec<u32> = ring(base.z + height).into_iter().map(|p| self.push_vertex(p)).collect();
        let cb = self.push_vertex(base);
        let ct = self.push_vertex(Point3::new(base.x, base.y, base.z + height));
        for k in 0..sides {
            let n = (k + 1) % sides;
            self.push_tri(bottom[k], bottom[n], top[n], inst);
            self.push_tri(bottom[k], top[n], top[k], inst);
            self.push_tri(ct, top[k], top[n], inst);
            self.push_tri(cb, bottom[n], bottom[k], inst);
        }
    }

    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        self.face_instance.extend_from_slice(&other.face_instance);
    }
}

/// Writes the ASCII mesh format:
///
/// ```text
/// # scenevar mesh 1
/// v <x> <y> <z>
/// f <i> <j> <k> [label]
/// ```
///
/// Face indices are 1-based; the optional label is the rest of the line.
pub fn write_ascii(mesh: &TriangleMesh, labels: impl Fn(u32) -> String) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 32 + mesh.triangles.len() * 24);
    out.push_str("# scenevar mesh 1\n");
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for (t, inst) in mesh.triangles.iter().zip(&mesh.face_instance) {
        let _ = write!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        if let Some(i) = inst {
            let _ = write!(out, " {}", labels(*i));
        }
        out.push('\n');
    }
    out
}

/// Parsed ASCII mesh: geometry plus the raw per-face label strings.
pub struct AsciiMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub face_labels: Vec<Option<String>>,
}

pub fn parse_ascii(text: &str, source_name: &str) -> Result<AsciiMesh> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut face_labels = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, char::is_whitespace);
        let tag = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("").trim();
        match tag {
            "v" => {
                let xs: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| err(line_no, format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if xs.len() != 3 || xs.iter().any(|x| !x.is_finite()) {
                    return Err(err(line_no, "vertex needs three finite coordinates".into()));
                }
                vertices.push(Point3::new(xs[0], xs[1], xs[2]));
            }
            "f" => {
                let mut toks = rest.splitn(4, char::is_whitespace);
                let mut idx = [0u32; 3];
                for slot in idx.iter_mut() {
                    let t = toks.next().ok_or_else(|| err(line_no, "face needs three indices".into()))?;
                    let i: u32 = t.parse().map_err(|e| err(line_no, format!("bad index {t:?}: {e}")))?;
                    if i == 0 {
                        return Err(err(line_no, "face indices are 1-based".into()));
                    }
                    *slot = i - 1;
                }
                triangles.push(idx);
                face_labels.push(toks.next().map(str::trim).filter(|s| !s.is_empty()).map(String::from));
            }
            other => return Err(err(line_no, format!("unknown record {other:?}"))),
        }
    }
    let n = vertices.len() as u32;
    if let Some(pos) = triangles.iter().position(|t| t.iter().any(|&i| i >= n)) {
        return Err(err(0, format!("face {} references a missing vertex", pos + 1)));
    }
    Ok(AsciiMesh {
        vertices,
        triangles,
        face_labels,
    })
}
