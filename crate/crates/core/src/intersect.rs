//! Closed-form intersection of a LiDAR ray with a 2D Gaussian disk.

use nalgebra::Matrix4x3;

use crate::panocam::{angles_to_dir, ray_planes, RayAngles};
use crate::{Mat4, Vec3, Vec4};

/// Splats whose `|det R|` falls below this are edge-on to the ray.
pub const DET_EPS: f64 = 1e-8;
/// Minimum accepted hit distance, meters.
pub const NEAR_EPS: f64 = 0.05;
/// Footprint truncation `u^2 + v^2 <= 9` (3 sigma).
pub const CUTOFF_SQ: f64 = 9.0;
/// Contributions with `alpha <= 1/255` are ignored.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub weight: f64,
}

/// `G(u, v) = exp(-(u^2 + v^2) / 2)`.
pub fn gaussian_weight(u: f64, v: f64) -> f64 {
    (-0.5 * (u * u + v * v)).exp()
}

/// Solves `[h_x, h_y]^T W H (u, v, 1)^T = 0` for `(u, v)`.
///
/// Returns `None` when the 2x2 block is singular (`|det| < DET_EPS`).
pub fn ray_splat_intersect(hx: &Vec4, hy: &Vec4, pose: &Mat4, basis: &Matrix4x3<f64>) -> Option<(f64, f64)> {
    let m = pose * basis;
    let row0 = hx.transpose() * m;
    let row1 = hy.transpose() * m;
    solve_uv([[row0[0], row0[1]], [row1[0], row1[1]]], [row0[2], row1[2]]).map(|(u, v, _)| (u, v))
}

/// `(u, v) = -R^{-1} h`, plus `det R`.
#[inline]
fn solve_uv(r: [[f64; 2]; 2], h: [f64; 2]) -> Option<(f64, f64, f64)> {
    let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    if !(det.abs() >= DET_EPS) {
        return None;
    }
    let inv = 1.0 / det;
    let u = -(r[1][1] * h[0] - r[0][1] * h[1]) * inv;
    let v = -(-r[1][0] * h[0] + r[0][0] * h[1]) * inv;
    Some((u, v, det))
}

/// Distance from the sensor to the UV point `(u, v)` along the ray `a`.
///
/// Returns `None` when the hit is behind the sensor or closer than [`NEAR_EPS`].
pub fn intersect_depth(u: f64, v: f64, pose: &Mat4, basis: &Matrix4x3<f64>, a: RayAngles) -> Option<f64> {
    let d = angles_to_dir(a);
    let x = pose * basis * nalgebra::Vector3::new(u, v, 1.0);
    let r = Vec4::new(d.x, d.y, d.z, 0.0).dot(&x);
    (r > NEAR_EPS).then_some(r)
}

/// Full intersection for a ray given by angles; `None` if edge-on or behind the sensor.
pub fn intersect(a: RayAngles, pose: &Mat4, basis: &Matrix4x3<f64>) -> Option<Intersection> {
    let (hx, hy) = ray_planes(a);
    let (u, v) = ray_splat_intersect(&hx, &hy, pose, basis)?;
    let r = intersect_depth(u, v, pose, basis, a)?;
    Some(Intersection { u, v, r, weight: gaussian_weight(u, v) })
}

/// A splat already moved into the sensor frame: `x(u, v) = center + u axis_u + v axis_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSplat {
    pub center: Vec3,
    pub axis_u: Vec3,
    pub axis_v: Vec3,
}

/// A pixel ray: direction and its two defining plane normals (all unit, mutually orthogonal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRay {
    pub dir: Vec3,
    pub hx: Vec3,
    pub hy: Vec3,
}

impl PixelRay {
    pub fn new(a: RayAngles) -> Self {
        let (hx, hy) = ray_planes(a);
        PixelRay { dir: angles_to_dir(a), hx: hx.xyz(), hy: hy.xyz() }
    }
}

/// Raw solution before the cutoff tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RawHit {
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

/// Sensor-frame form of the closed-form solve; same algebra as [`ray_splat_intersect`]
/// followed by [`intersect_depth`], without the depth acceptance test.
#[inline]
pub(crate) fn intersect_sensor(ray: &PixelRay, s: &SensorSplat) -> Option<RawHit> {
    let r = [[ray.hx.dot(&s.axis_u), ray.hx.dot(&s.axis_v)], [ray.hy.dot(&s.axis_u), ray.hy.dot(&s.axis_v)]];
    let h = [ray.hx.dot(&s.center), ray.hy.dot(&s.center)];
    let (u, v, _) = solve_uv(r, h)?;
    let depth = ray.dir.dot(&(s.center + s.axis_u * u + s.axis_v * v));
    Some(RawHit { u, v, r: depth })
}
