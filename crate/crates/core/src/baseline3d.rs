//! Volumetric 3D Gaussians splatted onto the panorama through the linearized
//! projection `Sigma' = J R Sigma R^T J^T`, with one constant depth per splat.
//!
//! This is the forward-only comparison path for the exact ray-splat renderer.

use rayon::prelude::*;

use crate::intersect::{ALPHA_MIN, CUTOFF_SQ, NEAR_EPS};
use crate::panocam::{Pose, SensorModel};
use crate::raster::{RasterConfig, RenderOutput};
use crate::scene::{sigmoid, PriorMap, SplatPrimitive, SH_COEFFS};
use crate::{sh, Error, Mat3, Result, Vec3};
use nalgebra::Matrix2;

/// Screen-space dilation added to every projected covariance, px².
pub const COV_EPS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Splat3D {
    pub mu: Vec3,
    /// World-frame covariance.
    pub cov: Mat3,
    pub opacity: f64,
    pub intensity_sh: [f64; SH_COEFFS],
    pub raydrop_sh: [f64; SH_COEFFS],
}

impl Splat3D {
    /// Flat Gaussian with the disk's center, tangents and scales, frozen at time `t`.
    pub fn from_primitive(p: &SplatPrimitive, t: f64, cycle_length: f64) -> Self {
        let [su, sv] = p.scale();
        let cov = p.tu * p.tu.transpose() * (su * su) + p.tv * p.tv.transpose() * (sv * sv);
        Splat3D { mu: p.position_at(t, cycle_length), cov, opacity: p.opacity_at(t), intensity_sh: p.intensity_sh, raydrop_sh: p.raydrop_sh }
    }

    pub fn validate(&self) -> Result<()> {
        let sym = (self.cov - self.cov.transpose()).norm();
        let eig = self.cov.symmetric_eigen().eigenvalues;
        let scale = self.cov.norm().max(1.0);
        if !self.mu.iter().chain(self.cov.iter()).all(|v| v.is_finite()) || sym > 1e-12 * scale || eig.min() < -1e-12 * scale {
            return Err(Error::contract("3D Gaussian covariance must be finite, symmetric and PSD"));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::contract("opacity must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Scene3D {
    pub splats: Vec<Splat3D>,
    pub raydrop_prior: PriorMap,
}

impl Scene3D {
    pub fn from_scene(scene: &crate::scene::Scene, t: f64) -> Self {
        Scene3D {
            splats: scene.primitives.iter().map(|p| Splat3D::from_primitive(p, t, scene.cycle_length)).collect(),
            raydrop_prior: scene.raydrop_prior.clone(),
        }
    }
}

/// Image-space covariance (without dilation) and pixel center of a splat.
pub fn project_gaussian_3d(splat: &Splat3D, pose: &Pose, sensor: &SensorModel) -> Result<(Matrix2<f64>, (f64, f64))> {
    let p = pose.world_to_sensor(&splat.mu);
    let j = sensor.pano_jacobian(&p)?;
    let r = pose.rotation();
    let cov = j * r * splat.cov * r.transpose() * j.transpose();
    let cov = (cov + cov.transpose()) * 0.5;
    Ok((cov, sensor.project(&p)?))
}

#[derive(Debug, Clone, Copy)]
struct Footprint {
    index: usize,
    center: (f64, f64),
    /// Inverse of the dilated covariance.
    conic: Matrix2<f64>,
    depth: f64,
    opacity: f64,
    normal: Vec3,
}

fn footprints(scene: &Scene3D, sensor: &SensorModel, pose: &Pose, cfg: &RasterConfig) -> Vec<(Footprint, [f64; 4])> {
    let rot = pose.rotation();
    scene
        .splats
        .iter()
        .enumerate()
        .filter_map(|(index, s)| {
            let p = pose.world_to_sensor(&s.mu);
            let depth = p.norm();
            if depth <= NEAR_EPS || s.opacity.min(cfg.opacity_max) <= ALPHA_MIN {
                return None;
            }
            let (cov, center) = project_gaussian_3d(s, pose, sensor).ok()?;
            let cov = cov + Matrix2::identity() * COV_EPS;
            let conic = cov.try_inverse()?;
            let eig = s.cov.symmetric_eigen();
            let normal = rot * eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
            let normal = if normal.dot(&p) > 0.0 { -normal } else { normal };
            let (rx, ry) = (3.0 * cov[(0, 0)].sqrt(), 3.0 * cov[(1, 1)].sqrt());
            let bbox = [center.0 - rx, center.0 + rx, center.1 - ry, center.1 + ry];
            Some((Footprint { index, center, conic, depth, opacity: s.opacity.min(cfg.opacity_max), normal }, bbox))
        })
        .collect()
}

/// Forward render of the 3D baseline. Same compositing rules as the exact
/// renderer, but with screen-space elliptical weights and depth `|mu|`.
pub fn render_baseline(scene: &Scene3D, sensor: &SensorModel, pose: &Pose, cfg: &RasterConfig) -> Result<RenderOutput> {
    let prior = &scene.raydrop_prior;
    if prior.width != sensor.width || prior.height != sensor.height {
        return Err(Error::contract("ray-drop prior does not match the sensor"));
    }
    let (w, h, ts) = (sensor.width, sensor.height, cfg.tile_size.max(1));
    let (tiles_x, tiles_y) = (w.div_ceil(ts), h.div_ceil(ts));
    let prints = footprints(scene, sensor, pose, cfg);
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); tiles_x * tiles_y];
    for (k, (_, b)) in prints.iter().enumerate() {
        let (r0, r1) = (b[2].floor().max(0.0), b[3].floor().min(h as f64 - 1.0));
        if r1 < r0 {
            continue;
        }
        let (ty0, ty1) = (r0 as usize / ts, r1 as usize / ts);
        let cols: Vec<usize> = if b[1] - b[0] >= w as f64 {
            (0..tiles_x).collect()
        } else {
            let (c0, c1) = (b[0].floor() as i64, b[1].floor() as i64);
            let mut v: Vec<usize> = (c0..=c1).map(|c| c.rem_euclid(w as i64) as usize / ts).collect();
            v.dedup();
            v.sort_unstable();
            v.dedup();
            v
        };
        for ty in ty0..=ty1 {
            for &tx in &cols {
                lists[ty * tiles_x + tx].push(k);
            }
        }
    }
    for l in lists.iter_mut() {
        l.sort_by(|&a, &b| prints[a].0.depth.total_cmp(&prints[b].0.depth).then(prints[a].0.index.cmp(&prints[b].0.index)));
    }

    let tiles: Vec<Vec<(usize, [f64; 9], Vec3)>> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|tile| {
            let (tx, ty) = (tile % tiles_x, tile / tiles_x);
            let mut px = Vec::new();
            let mut basis = [0.0; SH_COEFFS];
            for row in ty * ts..((ty + 1) * ts).min(h) {
                for col in tx * ts..((tx + 1) * ts).min(w) {
                    let dir = sensor.pixel_ray(col, row).dir;
                    sh::basis_into(&dir, &mut basis);
                    // mean, median, intensity, drop, t, a, b, c
                    let mut acc = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
                    let mut normal = Vec3::zeros();
                    let mut median: Option<f64> = None;
                    for &k in &lists[tile] {
                        let f = &prints[k].0;
                        let mut dx = col as f64 + 0.5 - f.center.0;
                        dx -= (dx / w as f64).round() * w as f64;
                        let dy = row as f64 + 0.5 - f.center.1;
                        let q = f.conic[(0, 0)] * dx * dx + 2.0 * f.conic[(0, 1)] * dx * dy + f.conic[(1, 1)] * dy * dy;
                        if q > CUTOFF_SQ {
                            continue;
                        }
                        let alpha = f.opacity * (-0.5 * q).exp();
                        if alpha <= ALPHA_MIN {
                            continue;
                        }
                        let s = &scene.splats[f.index];
                        let trans = acc[4];
                        let wgt = alpha * trans;
                        let r = f.depth;
                        acc[0] += wgt * r;
                        acc[2] += wgt * dot(&s.intensity_sh, &basis);
                        acc[3] += wgt * dot(&s.raydrop_sh, &basis).clamp(0.0, 1.0);
                        acc[5] += wgt;
                        acc[6] += wgt * r;
                        acc[7] += wgt * r * r;
                        normal += f.normal * wgt;
                        if trans > 0.5 && median.is_none_or(|m| r > m) {
                            median = Some(r);
                        }
                        acc[4] = trans * (1.0 - alpha);
                        if acc[4] < cfg.transmittance_min {
                            break;
                        }
                    }
                    acc[1] = median.unwrap_or(0.0);
                    px.push((row * w + col, acc, normal));
                }
            }
            px
        })
        .collect();

    let mut out = RenderOutput::zeros(w, h);
    for (i, acc, normal) in tiles.into_iter().flatten() {
        let prior_p = sigmoid(prior.logits[i]);
        out.mean_depth[i] = acc[0];
        out.median_depth[i] = acc[1];
        out.intensity[i] = acc[2];
        out.raydrop_gs[i] = acc[3];
        out.raydrop[i] = prior_p + (1.0 - prior_p) * acc[3];
        out.accum_alpha[i] = 1.0 - acc[4];
        out.distort_a[i] = acc[5];
        out.distort_b[i] = acc[6];
        out.distort_c[i] = acc[7];
        let n = normal.norm();
        out.normal[i] = if n > 0.0 { normal / n } else { Vec3::zeros() };
    }
    Ok(out)
}

fn dot(a: &[f64; SH_COEFFS], b: &[f64; SH_COEFFS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
