use rayon::prelude::*;

use crate::intersect::{intersect_sensor, ALPHA_MIN, CUTOFF_SQ, NEAR_EPS};
use crate::panocam::{Pose, SensorModel};
use crate::scene::{sigmoid, Scene, SH_COEFFS};
use crate::sh;
use crate::{Error, Result, Vec3};

use super::tiles::bin_projected;
use super::{project_scene, Projected, RasterConfig, RenderOutput, TileGrid};

/// One blended splat of one pixel, kept for the reverse pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Contribution {
    /// Position in the tile list.
    pub slot: u32,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub alpha: f64,
    /// Transmittance before this splat.
    pub t_before: f64,
    pub intensity: f64,
    pub raydrop: f64,
    pub raydrop_active: bool,
    /// Oriented unit normal (faces the sensor).
    pub normal: Vec3,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TileTape {
    pub records: Vec<Contribution>,
    /// `(start, len)` into `records` per tile pixel, row-major within the tile.
    pub spans: Vec<(u32, u32)>,
    /// Index into `records` of the median-depth splat per tile pixel.
    pub median: Vec<Option<u32>>,
}

/// Everything the reverse pass needs from a forward render.
#[derive(Debug, Clone)]
pub struct RenderTape {
    pub(crate) sensor: SensorModel,
    pub(crate) pose: Pose,
    pub(crate) time: f64,
    pub(crate) grid: TileGrid,
    pub(crate) projected: Vec<Projected>,
    pub(crate) tiles: Vec<TileTape>,
    /// Unnormalized blended normal per pixel.
    pub(crate) normal_sum: Vec<Vec3>,
    pub(crate) t_final: Vec<f64>,
    pub(crate) prior: Vec<f64>,
    pub(crate) raydrop_gs: Vec<f64>,
    pub(crate) primitive_count: usize,
}

impl RenderTape {
    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PixelResult {
    mean_depth: f64,
    median_depth: f64,
    intensity: f64,
    raydrop_gs: f64,
    normal_sum: Vec3,
    t_final: f64,
    a: f64,
    b: f64,
    c: f64,
}

struct TileResult {
    pixels: Vec<PixelResult>,
    tape: TileTape,
}

/// Renders the scene at time `t` from `pose`.
pub fn render(scene: &Scene, t: f64, sensor: &SensorModel, pose: &Pose, cfg: &RasterConfig) -> Result<RenderOutput> {
    render_impl(scene, t, sensor, pose, cfg, false).map(|(out, _)| out)
}

/// Renders and keeps the per-pixel contribution lists for [`backward`](super::backward).
pub fn render_with_tape(scene: &Scene, t: f64, sensor: &SensorModel, pose: &Pose, cfg: &RasterConfig) -> Result<(RenderOutput, RenderTape)> {
    render_impl(scene, t, sensor, pose, cfg, true).map(|(out, tape)| (out, tape.expect("tape requested")))
}

fn render_impl(scene: &Scene, t: f64, sensor: &SensorModel, pose: &Pose, cfg: &RasterConfig, keep: bool) -> Result<(RenderOutput, Option<RenderTape>)> {
    let prior = &scene.raydrop_prior;
    if prior.width != sensor.width || prior.height != sensor.height {
        return Err(Error::contract(format!("ray-drop prior is {}x{} but the sensor is {}x{}", prior.width, prior.height, sensor.width, sensor.height)));
    }
    let projected = project_scene(scene, t, pose, cfg);
    let grid = bin_projected(&projected, sensor, cfg.tile_size);

    let results: Vec<TileResult> = (0..grid.tile_count()).into_par_iter().map(|tile| render_tile(tile, &grid, &projected, scene, sensor, cfg, keep)).collect();

    let (w, h) = (sensor.width, sensor.height);
    let mut out = RenderOutput::zeros(w, h);
    let mut normal_sum = vec![Vec3::zeros(); w * h];
    let mut t_final = vec![1.0; w * h];
    let prior_p: Vec<f64> = prior.logits.iter().map(|&l| sigmoid(l)).collect();
    for (tile, res) in results.iter().enumerate() {
        let (c0, c1, r0, r1) = grid.tile_pixels(tile);
        let mut k = 0;
        for row in r0..r1 {
            for col in c0..c1 {
                let px = &res.pixels[k];
                k += 1;
                let i = row * w + col;
                out.mean_depth[i] = px.mean_depth;
                out.median_depth[i] = px.median_depth;
                out.intensity[i] = px.intensity;
                out.raydrop_gs[i] = px.raydrop_gs;
                out.raydrop[i] = prior_p[i] + (1.0 - prior_p[i]) * px.raydrop_gs;
                let n = px.normal_sum.norm();
                out.normal[i] = if n > 0.0 { px.normal_sum / n } else { Vec3::zeros() };
                out.accum_alpha[i] = 1.0 - px.t_final;
                out.distort_a[i] = px.a;
                out.distort_b[i] = px.b;
                out.distort_c[i] = px.c;
                normal_sum[i] = px.normal_sum;
                t_final[i] = px.t_final;
            }
        }
    }
    let tape = keep.then(|| RenderTape {
        sensor: *sensor,
        pose: *pose,
        time: t,
        grid,
        projected,
        tiles: results.into_iter().map(|r| r.tape).collect(),
        normal_sum,
        t_final,
        prior: prior_p,
        raydrop_gs: out.raydrop_gs.clone(),
        primitive_count: scene.len(),
    });
    Ok((out, tape))
}

fn render_tile(tile: usize, grid: &TileGrid, projected: &[Projected], scene: &Scene, sensor: &SensorModel, cfg: &RasterConfig, keep: bool) -> TileResult {
    let (c0, c1, r0, r1) = grid.tile_pixels(tile);
    let list = &grid.lists[tile];
    let n_pix = (c1 - c0) * (r1 - r0);
    let mut pixels = Vec::with_capacity(n_pix);
    let mut tape = TileTape::default();
    if keep {
        tape.spans.reserve(n_pix);
        tape.median.reserve(n_pix);
    }
    let mut basis = [0.0; SH_COEFFS];
    for row in r0..r1 {
        for col in c0..c1 {
            let ray = sensor.pixel_ray(col, row);
            sh::basis_into(&ray.dir, &mut basis);
            let start = tape.records.len();
            let mut px = PixelResult { t_final: 1.0, ..PixelResult::default() };
            let mut trans = 1.0;
            let mut median: Option<(f64, usize)> = None;
            for (slot, entry) in list.iter().enumerate() {
                let p = &projected[entry.index as usize];
                let Some(hit) = intersect_sensor(&ray, &p.splat) else { continue };
                let q = hit.u * hit.u + hit.v * hit.v;
                if q > CUTOFF_SQ || hit.r <= NEAR_EPS {
                    continue;
                }
                let alpha = p.opacity * (-0.5 * q).exp();
                if alpha <= ALPHA_MIN {
                    continue;
                }
                let prim = &scene.primitives[entry.index as usize];
                let intensity = dot9(&prim.intensity_sh, &basis);
                let raw_drop = dot9(&prim.raydrop_sh, &basis);
                let raydrop = raw_drop.clamp(0.0, 1.0);
                let normal = if p.normal_unit.dot(&ray.dir) > 0.0 { -p.normal_unit } else { p.normal_unit };

                let w = alpha * trans;
                px.mean_depth += w * hit.r;
                px.intensity += w * intensity;
                px.raydrop_gs += w * raydrop;
                px.normal_sum += normal * w;
                px.a += w;
                px.b += w * hit.r;
                px.c += w * hit.r * hit.r;
                if trans > 0.5 && median.is_none_or(|(best, _)| hit.r > best) {
                    median = Some((hit.r, tape.records.len()));
                }
                if keep {
                    tape.records.push(Contribution {
                        slot: slot as u32,
                        u: hit.u,
                        v: hit.v,
                        r: hit.r,
                        alpha,
                        t_before: trans,
                        intensity,
                        raydrop,
                        raydrop_active: (0.0..=1.0).contains(&raw_drop),
                        normal,
                    });
                }
                trans *= 1.0 - alpha;
                if trans < cfg.transmittance_min {
                    break;
                }
            }
            px.t_final = trans;
            if let Some((r, _)) = median {
                px.median_depth = r;
            }
            if keep {
                tape.spans.push((start as u32, (tape.records.len() - start) as u32));
                tape.median.push(median.map(|(_, k)| k as u32));
            }
            pixels.push(px);
        }
    }
    TileResult { pixels, tape }
}

#[inline]
pub(crate) fn dot9(a: &[f64; SH_COEFFS], b: &[f64; SH_COEFFS]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
