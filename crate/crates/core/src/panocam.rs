//! Panoramic LiDAR sensor model.
//!
//! Pixel `(xi, eta)` maps to azimuth `phi = (2 xi - W) pi / W` and inclination
//! `theta = eta / H (vfov_max - vfov_min) + vfov_min`. Inclination is measured from
//! the sensor's `-y` axis, so a ray is `(sin(theta) sin(phi), -cos(theta), sin(theta) cos(phi))`:
//! `theta = 0` points along `-y`, `theta = pi/2` is horizontal, and `phi = 0` looks
//! along `+z`. Row `eta = 0` is the `vfov_min` edge. Azimuth is cyclic: columns
//! `xi = 0` and `xi = W` are the same ray.

use std::f64::consts::PI;

use nalgebra::Matrix2x3;
use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Mat4, Result, Vec3, Vec4};

/// Image size and vertical field of view (radians of inclination).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub width: usize,
    pub height: usize,
    pub vfov_min: f64,
    pub vfov_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayAngles {
    pub phi: f64,
    pub theta: f64,
}

impl SensorModel {
    pub fn new(width: usize, height: usize, vfov_min: f64, vfov_max: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract("sensor image must be non-empty"));
        }
        if !(0.0 <= vfov_min && vfov_min < vfov_max && vfov_max <= PI) {
            return Err(Error::contract(format!("invalid vertical FOV [{vfov_min}, {vfov_max}]")));
        }
        Ok(SensorModel { width, height, vfov_min, vfov_max })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn vfov_span(&self) -> f64 {
        self.vfov_max - self.vfov_min
    }

    /// Continuous pixel position to ray angles.
    pub fn pixel_to_angles(&self, xi: f64, eta: f64) -> Result<RayAngles> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(0.0..=w).contains(&xi) || !(0.0..=h).contains(&eta) {
            return Err(Error::contract(format!("pixel ({xi}, {eta}) outside [0,{w}]x[0,{h}]")));
        }
        Ok(self.pixel_to_angles_unchecked(xi, eta))
    }

    pub(crate) fn pixel_to_angles_unchecked(&self, xi: f64, eta: f64) -> RayAngles {
        let (w, h) = (self.width as f64, self.height as f64);
        RayAngles { phi: (2.0 * xi - w) * PI / w, theta: eta / h * self.vfov_span() + self.vfov_min }
    }

    /// Exact algebraic inverse of [`pixel_to_angles`](Self::pixel_to_angles).
    pub fn angles_to_pixel(&self, a: RayAngles) -> (f64, f64) {
        let (w, h) = (self.width as f64, self.height as f64);
        let xi = (a.phi * w / PI + w) / 2.0;
        let eta = (a.theta - self.vfov_min) * h / self.vfov_span();
        (xi, eta)
    }

    /// Ray through the center of integer pixel `(col, row)`.
    pub fn pixel_center_angles(&self, col: usize, row: usize) -> RayAngles {
        self.pixel_to_angles_unchecked(col as f64 + 0.5, row as f64 + 0.5)
    }

    pub fn pixel_ray(&self, col: usize, row: usize) -> crate::intersect::PixelRay {
        crate::intersect::PixelRay::new(self.pixel_center_angles(col, row))
    }

    /// Continuous pixel position of a sensor-frame point (the panoramic projection).
    pub fn project(&self, p: &Vec3) -> Result<(f64, f64)> {
        Ok(self.angles_to_pixel(dir_to_angles(p)?))
    }

    /// Integer pixel `(col, row)` whose cell contains the sensor-frame point, if inside the FOV.
    pub fn pixel_of(&self, p: &Vec3) -> Option<(usize, usize)> {
        let (xi, eta) = self.project(p).ok()?;
        if !(0.0..self.height as f64).contains(&eta) {
            return None;
        }
        let col = (xi.floor() as i64).rem_euclid(self.width as i64) as usize;
        Some((col, eta.floor() as usize))
    }

    /// Jacobian of `(xi, eta)` with respect to the sensor-frame point.
    pub fn pano_jacobian(&self, p: &Vec3) -> Result<Matrix2x3<f64>> {
        let (x, y, z) = (p.x, p.y, p.z);
        let rho2 = x * x + z * z;
        if rho2 <= AXIS_EPS {
            return Err(Error::Degenerate(format!("point {p:?} lies on the vertical axis")));
        }
        let rho = rho2.sqrt();
        let r2 = rho2 + y * y;
        let w = self.width as f64 / (2.0 * PI);
        let h = self.height as f64 / self.vfov_span();
        Ok(Matrix2x3::new(w * z / rho2, 0.0, -w * x / rho2, -h * x * y / (rho * r2), h * rho / r2, -h * y * z / (rho * r2)))
    }
}

/// Squared horizontal radius below which the panoramic projection is treated as singular.
pub const AXIS_EPS: f64 = 1e-12;

pub fn angles_to_dir(a: RayAngles) -> Vec3 {
    let (sp, cp) = a.phi.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    Vec3::new(st * sp, -ct, st * cp)
}

/// `phi = atan2(x, z)`, `theta = atan2(sqrt(x^2 + z^2), -y)`; `atan2(0, 0)` is 0.
pub fn dir_to_angles(p: &Vec3) -> Result<RayAngles> {
    if !(p.norm() > 0.0) {
        return Err(Error::Degenerate("zero direction has no angles".into()));
    }
    let phi = if p.x == 0.0 && p.z == 0.0 { 0.0 } else { p.x.atan2(p.z) };
    let phi = if phi == -PI { PI } else { phi };
    let theta = (p.x * p.x + p.z * p.z).sqrt().atan2(-p.y);
    Ok(RayAngles { phi, theta })
}

/// The two homogeneous planes whose intersection is the ray: `h_x = (cos phi, 0, -sin phi, 0)`,
/// `h_y = (cos theta sin phi, sin theta, cos theta cos phi, 0)`.
pub fn ray_planes(a: RayAngles) -> (Vec4, Vec4) {
    let (sp, cp) = a.phi.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    (Vec4::new(cp, 0.0, -sp, 0.0), Vec4::new(ct * sp, st, ct * cp, 0.0))
}

/// A rigid world-to-sensor transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose(Mat4);

impl Pose {
    pub const RIGID_TOL: f64 = 1e-9;

    pub fn new(m: Mat4) -> Result<Self> {
        let r = m.fixed_view::<3, 3>(0, 0).into_owned();
        let err = (r.transpose() * r - Mat3::identity()).norm();
        let last = m.row(3);
        if !(err < Self::RIGID_TOL) || last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::contract(format!("pose is not rigid (|R^T R - I| = {err:e})")));
        }
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::contract("pose has non-finite entries"));
        }
        Ok(Pose(m))
    }

    pub fn identity() -> Self {
        Pose(Mat4::identity())
    }

    /// Pose of a sensor sitting at world point `origin` with rotation `world_to_sensor`.
    pub fn from_rotation_origin(world_to_sensor: Mat3, origin: Vec3) -> Result<Self> {
        let t = -(world_to_sensor * origin);
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&world_to_sensor);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Pose::new(m)
    }

    /// Sensor translated to `origin`, axes aligned with the world.
    pub fn at(origin: Vec3) -> Self {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-origin));
        Pose(m)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn rotation(&self) -> Mat3 {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vec3 {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Sensor origin in world coordinates.
    pub fn origin(&self) -> Vec3 {
        -(self.rotation().transpose() * self.translation())
    }

    pub fn world_to_sensor(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + self.translation()
    }

    pub fn sensor_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation().transpose() * (p - self.translation())
    }

    pub fn inverse_matrix(&self) -> Mat4 {
        let rt = self.rotation().transpose();
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(rt * self.translation())));
        m
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.0[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(v: &[f64; 16]) -> Result<Self> {
        Pose::new(Mat4::from_row_slice(v))
    }
}
