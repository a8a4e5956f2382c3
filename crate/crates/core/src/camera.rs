//! Pinhole cameras, rasters and depth/semantic rendering by ray casting.
//!
//! Camera frame: x right, y down, z forward. Depth is z-depth in metres;
//! `0.0` marks an invalid pixel (no hit, or outside the camera range).

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::scene::Scene;
use crate::{Error, Point3, Result, Vector3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels, principal point at the image centre.
    pub fn from_hfov(width: usize, height: usize, hfov_deg: f64) -> Self {
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Intrinsics {
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Camera-frame point to pixel coordinates.
    pub fn project(&self, p: &Point3) -> Option<(f64, f64)> {
        (p.z > 1e-9).then(|| (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Pixel plus z-depth to a camera-frame point (`K⁻¹ [u v 1]ᵀ · z`).
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Point3 {
        Point3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    /// World to camera transform.
    pub pose: Isometry3<f64>,
    pub width: usize,
    pub height: usize,
    pub range: [f64; 2],
}

/// Image size, field of view and depth range shared by a family of cameras.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec {
            width: 128,
            height: 128,
            hfov_deg: 90.0,
            r_min: 0.1,
            r_max: 5.0,
        }
    }
}

impl CameraSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera image must be non-empty".into()));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::Config("camera field of view must lie in (0, 180)".into()));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(Error::Config("camera range needs 0 < r_min < r_max".into()));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::from_hfov(self.width, self.height, self.hfov_deg)
    }

    /// Camera at `eye` with heading `yaw` (from +X, counter-clockwise) and
    /// elevation `pitch` (positive looks up), both in radians.
    pub fn at(&self, eye: Point3, yaw: f64, pitch: f64) -> Camera {
        let f = Vector3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin());
        let r = Vector3::new(yaw.sin(), -yaw.cos(), 0.0);
        self.with_axes(eye, r, f)
    }

    pub fn look_at(&self, eye: Point3, target: Point3) -> Camera {
        let d = target - eye;
        let yaw = d.y.atan2(d.x);
        let pitch = d.z.atan2(d.xy().norm());
        self.at(eye, yaw, pitch)
    }

    fn with_axes(&self, eye: Point3, right: Vector3, forward: Vector3) -> Camera {
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
        let t = -(rot * eye.coords);
        Camera {
            intrinsics: self.intrinsics(),
            pose: Isometry3::from_parts(Translation3::from(t), rot),
            width: self.width,
            height: self.height,
            range: [self.r_min, self.r_max],
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            return Err(Error::Config("camera focal lengths must be positive".into()));
        }
        if !(self.range[0] > 0.0 && self.range[0] < self.range[1]) {
            return Err(Error::Config("camera range needs 0 < r_min < r_max".into()));
        }
        Ok(())
    }

    pub fn eye(&self) -> Point3 {
        self.pose.inverse_transform_point(&Point3::origin())
    }

    pub fn world_to_camera(&self, p: &Point3) -> Point3 {
        self.pose.transform_point(p)
    }

    pub fn camera_to_world(&self, p: &Point3) -> Point3 {
        self.pose.inverse_transform_point(p)
    }

    /// World-frame pixel projection.
    pub fn project(&self, p: &Point3) -> Option<(f64, f64)> {
        self.intrinsics.project(&self.world_to_camera(p))
    }

    /// Unit world-frame ray through pixel `(u, v)` and the z-component of
    /// that ray in the camera frame.
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Vector3, f64) {
        let d = self.intrinsics.unproject(u, v, 1.0).coords;
        let n = d.norm();
        (self.pose.rotation.inverse_transform_vector(&(d / n)), 1.0 / n)
    }
}

/// Row-major image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> &T {
        &self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[v * self.width + u] = value;
    }
}

#[derive(Clone, Debug)]
pub struct Observation {
    pub color: Option<Raster<[u8; 3]>>,
    pub depth: Raster<f32>,
    /// Instance id + 1 per pixel, 0 for unlabeled or missed pixels.
    pub semantic: Option<Raster<u32>>,
    pub camera: Camera,
}

impl Observation {
    pub fn depth_at(&self, u: usize, v: usize) -> Option<f64> {
        let d = *self.depth.get(u, v);
        (d > 0.0).then_some(d as f64)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderOptions {
    pub semantic: bool,
    pub color: bool,
}

/// Renders z-depth (and optionally instance ids and shaded gray colour).
pub fn render(scene: &Scene, camera: &Camera, opts: RenderOptions) -> Observation {
    let (w, h) = (camera.width, camera.height);
    let mut depth = Raster::filled(w, h, 0.0f32);
    let mut semantic = opts.semantic.then(|| Raster::filled(w, h, 0u32));
    let mut color = opts.color.then(|| Raster::filled(w, h, [0u8; 3]));
    let eye = camera.eye();
    let light = Vector3::new(0.3, 0.5, 0.8).normalize();
    for v in 0..h {
        for u in 0..w {
            let (dir, zscale) = camera.pixel_ray(u as f64, v as f64);
            let Some(hit) = scene.bvh().intersect(&eye, &dir, 1e-6, camera.range[1] / zscale + 1e-9) else {
                continue;
            };
            let z = hit.t * zscale;
            if let Some(s) = semantic.as_mut() {
                s.set(u, v, hit.instance.map_or(0, |i| i + 1));
            }
            if let Some(c) = color.as_mut() {
                let n = scene.mesh.face_normal(hit.triangle).normalize();
                let g = (60.0 + 180.0 * n.dot(&light).abs()) as u8;
                c.set(u, v, [g, g, g]);
            }
            if z >= camera.range[0] && z <= camera.range[1] {
                depth.set(u, v, z as f32);
            }
        }
    }
    Observation {
        color,
        depth,
        semantic,
        camera: camera.clone(),
    }
}

/// Number of pixels in the window `[u0, u1) x [v0, v1)` whose closest hit is
/// `instance`, scanning only that window.
pub fn count_instance_pixels(scene: &Scene, camera: &Camera, instance: u32, window: [usize; 4]) -> usize {
    let [u0, v0, u1, v1] = window;
    let eye = camera.eye();
    let mut n = 0;
    for v in v0..v1.min(camera.height) {
        for u in u0..u1.min(camera.width) {
            let (dir, zscale) = camera.pixel_ray(u as f64, v as f64);
            let t_max = camera.range[1] / zscale + 1e-9;
            if !scene.bvh().may_hit_instance(instance, &eye, &dir, t_max) {
                continue;
            }
            if let Some(hit) = scene.bvh().intersect(&eye, &dir, 1e-6, t_max) {
                if hit.instance == Some(instance) {
                    n += 1;
                }
            }
        }
    }
    n
}

/// Whether at least `needed` pixels of the window see `instance` first.
/// Stops scanning as soon as the answer is known.
pub fn instance_visible(scene: &Scene, camera: &Camera, instance: u32, window: [usize; 4], needed: usize) -> bool {
    let [u0, v0, u1, v1] = window;
    let (u1, v1) = (u1.min(camera.width), v1.min(camera.height));
    let total = u1.saturating_sub(u0) * v1.saturating_sub(v0);
    if total < needed {
        return false;
    }
    let eye = camera.eye();
    let mut hits = 0;
    let mut left = total;
    for v in v0..v1 {
        for u in u0..u1 {
            left -= 1;
            let (dir, zscale) = camera.pixel_ray(u as f64, v as f64);
            let t_max = camera.range[1] / zscale + 1e-9;
            if !scene.bvh().may_hit_instance(instance, &eye, &dir, t_max) {
                if hits + left < needed {
                    return false;
                }
                continue;
            }
            if let Some(hit) = scene.bvh().intersect(&eye, &dir, 1e-6, t_max) {
                if hit.instance == Some(instance) {
                    hits += 1;
                    if hits >= needed {
                        return true;
                    }
                }
            }
            if hits + left < needed {
                return false;
            }
        }
    }
    false
}

/// World points of the window pixels whose closest hit is `instance` and
/// lies inside the camera range.
pub fn instance_points(scene: &Scene, camera: &Camera, instance: u32, window: [usize; 4]) -> Vec<Point3> {
    let [u0, v0, u1, v1] = window;
    let eye = camera.eye();
    let mut out = Vec::new();
    for v in v0..v1.min(camera.height) {
        for u in u0..u1.min(camera.width) {
            let (dir, zscale) = camera.pixel_ray(u as f64, v as f64);
            let t_max = camera.range[1] / zscale + 1e-9;
            if !scene.bvh().may_hit_instance(instance, &eye, &dir, t_max) {
                continue;
            }
            if let Some(hit) = scene.bvh().intersect(&eye, &dir, 1e-6, t_max) {
                let z = hit.t * zscale;
                if hit.instance == Some(instance) && z >= camera.range[0] {
                    out.push(eye + dir * hit.t);
                }
            }
        }
    }
    out
}

/// Pixel window covering the projection of a world-space box, or `None`
/// when it is entirely behind the camera or off-screen.
pub fn project_box(camera: &Camera, lo: &Point3, hi: &Point3) -> Option<[usize; 4]> {
    let mut umin = f64::INFINITY;
    let mut vmin = f64::INFINITY;
    let mut umax = f64::NEG_INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for k in 0..8 {
        let p = Point3::new(
            if k & 1 == 0 { lo.x } else { hi.x },
            if k & 2 == 0 { lo.y } else { hi.y },
            if k & 4 == 0 { lo.z } else { hi.z },
        );
        let (u, v) = camera.project(&p)?;
        umin = umin.min(u);
        vmin = vmin.min(v);
        umax = umax.max(u);
        vmax = vmax.max(v);
    }
    let clamp = |x: f64, n: usize| x.clamp(0.0, n as f64) as usize;
    let w = [
        clamp(umin.floor(), camera.width),
        clamp(vmin.floor(), camera.height),
        clamp(umax.ceil() + 1.0, camera.width),
        clamp(vmax.ceil() + 1.0, camera.height),
    ];
    (w[2] > w[0] && w[3] > w[1]).then_some(w)
}
