//! Tile-based panoramic rasterizer with an analytic reverse pass.
//!
//! Splats are binned into square pixel tiles using a conservative angular bound
//! and sorted by center distance. Each pixel then intersects its ray with every
//! splat of its tile and blends front to back with
//! `w_k = alpha_k prod_{j<k} (1 - alpha_j)`, `alpha_k = o_k(t) G(u_k, v_k)`.
//! Tiles are independent, so results do not depend on the number of workers.

mod backward;
mod forward;
mod reference;
mod tiles;

pub use backward::{backward, GradientSet};
pub use forward::{render, render_with_tape, RenderTape};
pub use reference::render_brute_force;
pub use tiles::{bin_splats, TileEntry, TileGrid};

use serde::{Deserialize, Serialize};

use crate::intersect::SensorSplat;
use crate::panocam::Pose;
use crate::scene::Scene;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterConfig {
    pub tile_size: usize,
    /// Blending stops once transmittance falls below this.
    pub transmittance_min: f64,
    /// Decayed opacity is clamped to this before blending.
    pub opacity_max: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig { tile_size: 16, transmittance_min: 1e-4, opacity_max: 0.995 }
    }
}

/// Per-pixel rendered maps, row-major (`row * width + col`).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    pub mean_depth: Vec<f64>,
    pub median_depth: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Ray-drop probability blended from splats only.
    pub raydrop_gs: Vec<f64>,
    /// `prior + (1 - prior) raydrop_gs`.
    pub raydrop: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub accum_alpha: Vec<f64>,
    /// `sum w`, `sum w r`, `sum w r^2`.
    pub distort_a: Vec<f64>,
    pub distort_b: Vec<f64>,
    pub distort_c: Vec<f64>,
}

impl RenderOutput {
    pub(crate) fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        RenderOutput {
            width,
            height,
            mean_depth: vec![0.0; n],
            median_depth: vec![0.0; n],
            intensity: vec![0.0; n],
            raydrop_gs: vec![0.0; n],
            raydrop: vec![0.0; n],
            normal: vec![Vec3::zeros(); n],
            accum_alpha: vec![0.0; n],
            distort_a: vec![0.0; n],
            distort_b: vec![0.0; n],
            distort_c: vec![0.0; n],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// All-ordered-pairs distortion `sum_ij w_i w_j (r_i - r_j)^2 = 2 (A C - B^2)`.
    pub fn distortion(&self, index: usize) -> f64 {
        let (a, b, c) = (self.distort_a[index], self.distort_b[index], self.distort_c[index]);
        2.0 * (a * c - b * b)
    }
}

/// Upstream gradients, one map per [`RenderOutput`] map.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGrads {
    pub width: usize,
    pub height: usize,
    pub mean_depth: Vec<f64>,
    pub median_depth: Vec<f64>,
    pub intensity: Vec<f64>,
    pub raydrop_gs: Vec<f64>,
    pub raydrop: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub accum_alpha: Vec<f64>,
    pub distort_a: Vec<f64>,
    pub distort_b: Vec<f64>,
    pub distort_c: Vec<f64>,
}

impl RenderGrads {
    pub fn zeros(width: usize, height: usize) -> Self {
        let out = RenderOutput::zeros(width, height);
        RenderGrads {
            width,
            height,
            mean_depth: out.mean_depth,
            median_depth: out.median_depth,
            intensity: out.intensity,
            raydrop_gs: out.raydrop_gs,
            raydrop: out.raydrop,
            normal: out.normal,
            accum_alpha: out.accum_alpha,
            distort_a: out.distort_a,
            distort_b: out.distort_b,
            distort_c: out.distort_c,
        }
    }
}

/// A primitive moved to the sensor frame at one timestamp.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Projected {
    pub splat: SensorSplat,
    /// Decayed opacity after clamping.
    pub opacity: f64,
    pub opacity_clamped: bool,
    /// `R (t_u x t_v)` in the sensor frame, unnormalized.
    pub normal_raw: Vec3,
    pub normal_unit: Vec3,
    /// Sort key: distance of the moving center from the sensor origin.
    pub dist: f64,
    /// Radius bounding the 3-sigma disk, meters.
    pub radius: f64,
    pub visible: bool,
}

pub(crate) fn project_scene(scene: &Scene, t: f64, pose: &Pose, cfg: &RasterConfig) -> Vec<Projected> {
    let rot = pose.rotation();
    let trans = pose.translation();
    scene
        .primitives
        .iter()
        .map(|p| {
            let [su, sv] = p.scale();
            let center = rot * p.position_at(t, scene.cycle_length) + trans;
            let decayed = p.opacity_at(t);
            let opacity_clamped = decayed > cfg.opacity_max;
            let normal_raw = rot * p.tu.cross(&p.tv);
            let nn = normal_raw.norm();
            Projected {
                splat: SensorSplat { center, axis_u: rot * p.tu * su, axis_v: rot * p.tv * sv },
                opacity: decayed.min(cfg.opacity_max),
                opacity_clamped,
                normal_raw,
                normal_unit: if nn > 0.0 { normal_raw / nn } else { Vec3::zeros() },
                dist: center.norm(),
                radius: 3.0 * max_stretch(&(rot * p.tu * su), &(rot * p.tv * sv)),
                visible: decayed >= crate::intersect::ALPHA_MIN,
            }
        })
        .collect()
}

/// Largest singular value of the 3x2 matrix `[a b]`.
fn max_stretch(a: &Vec3, b: &Vec3) -> f64 {
    let (g11, g22, g12) = (a.norm_squared(), b.norm_squared(), a.dot(b));
    let half = 0.5 * (g11 - g22);
    (0.5 * (g11 + g22) + (half * half + g12 * g12).sqrt()).sqrt()
}
