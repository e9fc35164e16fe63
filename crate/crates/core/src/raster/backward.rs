use std::f64::consts::PI;

use rayon::prelude::*;

use crate::scene::{ParamSlot, Scene, PARAM_COUNT, SH_COEFFS};
use crate::sh;
use crate::{Error, Result, Vec3};

use super::forward::{RenderTape, TileTape};
use super::{Projected, RenderGrads};

/// Gradients with the same layout as the scene: one flat parameter block per
/// primitive (see [`ParamSlot`]) plus the ray-drop prior logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub primitives: Vec<[f64; PARAM_COUNT]>,
    pub prior_logits: Vec<f64>,
}

impl GradientSet {
    pub fn zeros(primitives: usize, pixels: usize) -> Self {
        GradientSet { primitives: vec![[0.0; PARAM_COUNT]; primitives], prior_logits: vec![0.0; pixels] }
    }

    pub fn slot(&self, primitive: usize, slot: ParamSlot) -> &[f64] {
        &self.primitives[primitive][slot.range()]
    }

    pub fn is_zero(&self) -> bool {
        self.primitives.iter().all(|p| p.iter().all(|&g| g == 0.0)) && self.prior_logits.iter().all(|&g| g == 0.0)
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.primitives.iter_mut().zip(&other.primitives) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.prior_logits.iter_mut().zip(&other.prior_logits) {
            *a += b;
        }
    }
}

/// Sensor-frame gradient of one splat accumulated over a tile's pixels.
#[derive(Debug, Clone, Copy)]
struct SplatGrad {
    center: Vec3,
    axis_u: Vec3,
    axis_v: Vec3,
    normal_raw: Vec3,
    opacity: f64,
    intensity_sh: [f64; SH_COEFFS],
    raydrop_sh: [f64; SH_COEFFS],
    touched: bool,
}

impl Default for SplatGrad {
    fn default() -> Self {
        SplatGrad {
            center: Vec3::zeros(),
            axis_u: Vec3::zeros(),
            axis_v: Vec3::zeros(),
            normal_raw: Vec3::zeros(),
            opacity: 0.0,
            intensity_sh: [0.0; SH_COEFFS],
            raydrop_sh: [0.0; SH_COEFFS],
            touched: false,
        }
    }
}

impl SplatGrad {
    fn add(&mut self, o: &SplatGrad) {
        self.center += o.center;
        self.axis_u += o.axis_u;
        self.axis_v += o.axis_v;
        self.normal_raw += o.normal_raw;
        self.opacity += o.opacity;
        for k in 0..SH_COEFFS {
            self.intensity_sh[k] += o.intensity_sh[k];
            self.raydrop_sh[k] += o.raydrop_sh[k];
        }
        self.touched |= o.touched;
    }
}

/// Upstream gradients folded per pixel: splat-side ray-drop gradient after the
/// prior composition, and the blended-normal gradient before normalization.
struct PixelUpstream {
    raydrop_gs: Vec<f64>,
    normal_sum: Vec<Vec3>,
}

/// Reverse pass: exact gradients of `sum <d_out, RenderOutput>` with respect to every
/// primitive parameter and prior logit. The median-depth selection passes its gradient
/// straight to the selected splat's depth.
pub fn backward(tape: &RenderTape, scene: &Scene, d_out: &RenderGrads) -> Result<GradientSet> {
    let sensor = &tape.sensor;
    let n_pix = sensor.pixel_count();
    if d_out.width != sensor.width || d_out.height != sensor.height {
        return Err(Error::contract("upstream gradient size does not match the render"));
    }
    if scene.len() != tape.primitive_count {
        return Err(Error::contract("scene changed between render and backward"));
    }

    let mut grads = GradientSet::zeros(scene.len(), n_pix);
    let mut upstream = PixelUpstream { raydrop_gs: vec![0.0; n_pix], normal_sum: vec![Vec3::zeros(); n_pix] };
    for i in 0..n_pix {
        let p = tape.prior[i];
        let blended_gs = tape.raydrop_gs[i];
        upstream.raydrop_gs[i] = d_out.raydrop_gs[i] + d_out.raydrop[i] * (1.0 - p);
        grads.prior_logits[i] = d_out.raydrop[i] * (1.0 - blended_gs) * p * (1.0 - p);
        let s = tape.normal_sum[i];
        let n = s.norm();
        if n > 0.0 {
            let g = d_out.normal[i];
            let unit = s / n;
            upstream.normal_sum[i] = (g - unit * unit.dot(&g)) / n;
        }
    }

    let per_tile: Vec<Vec<SplatGrad>> = (0..tape.grid.tile_count()).into_par_iter().map(|tile| backward_tile(tile, tape, d_out, &upstream)).collect();

    // fixed tile order keeps the reduction deterministic
    let mut accum = vec![SplatGrad::default(); scene.len()];
    for (tile, buf) in per_tile.iter().enumerate() {
        for (slot, g) in buf.iter().enumerate() {
            if g.touched {
                accum[tape.grid.lists[tile][slot].index as usize].add(g);
            }
        }
    }

    let rot = tape.pose.rotation();
    let rot_t = rot.transpose();
    let t = tape.time;
    let l = scene.cycle_length;
    for (i, (prim, g)) in scene.primitives.iter().zip(&accum).enumerate() {
        if !g.touched {
            continue;
        }
        let out = &mut grads.primitives[i];
        let proj: &Projected = &tape.projected[i];
        let [su, sv] = prim.scale();

        let g_mu = rot_t * g.center;
        out[0..3].copy_from_slice(g_mu.as_slice());
        let phase = 2.0 * PI * (t - prim.life_peak) / l;
        let g_vib = g_mu * (l / (2.0 * PI) * phase.sin());
        out[12..15].copy_from_slice(g_vib.as_slice());
        let mut g_tau = -phase.cos() * g_mu.dot(&prim.vib_dir);

        let bu = rot_t * g.axis_u;
        let bv = rot_t * g.axis_v;
        let gw = rot_t * g.normal_raw;
        let g_tu = bu * su + prim.tv.cross(&gw);
        let g_tv = bv * sv + gw.cross(&prim.tu);
        out[3..6].copy_from_slice(g_tu.as_slice());
        out[6..9].copy_from_slice(g_tv.as_slice());
        out[9] = su * prim.tu.dot(&bu);
        out[10] = sv * prim.tv.dot(&bv);

        if !proj.opacity_clamped {
            let o = prim.opacity();
            let beta = prim.decay_rate();
            let dt = t - prim.life_peak;
            let go = g.opacity * proj.opacity;
            out[11] = go * (1.0 - o);
            g_tau += go * dt / (beta * beta);
            out[16] = go * dt * dt / (beta * beta);
        }
        out[15] = g_tau;
        out[ParamSlot::IntensitySh.range()].copy_from_slice(&g.intensity_sh);
        out[ParamSlot::RaydropSh.range()].copy_from_slice(&g.raydrop_sh);
    }

    for (i, p) in grads.primitives.iter().enumerate() {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { index: i });
        }
    }
    if let Some(pixel) = grads.prior_logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::contract(format!("non-finite ray-drop prior gradient at pixel {pixel}")));
    }
    Ok(grads)
}

fn backward_tile(tile: usize, tape: &RenderTape, d: &RenderGrads, up: &PixelUpstream) -> Vec<SplatGrad> {
    let grid = &tape.grid;
    let list = &grid.lists[tile];
    let mut buf = vec![SplatGrad::default(); list.len()];
    if list.is_empty() {
        return buf;
    }
    let tt: &TileTape = &tape.tiles[tile];
    let (c0, c1, r0, r1) = grid.tile_pixels(tile);
    let w = tape.sensor.width;
    let mut basis = [0.0; SH_COEFFS];
    let mut local = 0;
    for row in r0..r1 {
        for col in c0..c1 {
            let (start, len) = tt.spans[local];
            let median = tt.median[local];
            local += 1;
            if len == 0 {
                continue;
            }
            let i = row * w + col;
            let ray = tape.sensor.pixel_ray(col, row);
            sh::basis_into(&ray.dir, &mut basis);

            let g_depth = d.mean_depth[i];
            let g_int = d.intensity[i];
            let g_drop = up.raydrop_gs[i];
            let g_n = up.normal_sum[i];
            let (g_a, g_b, g_c) = (d.distort_a[i], d.distort_b[i], d.distort_c[i]);
            let g_acc = d.accum_alpha[i];
            let t_final = tape.t_final[i];

            // sum over later splats of w_j * c_j
            let mut after = 0.0;
            let recs = &tt.records[start as usize..(start + len) as usize];
            for (k, rec) in recs.iter().enumerate().rev() {
                let weight = rec.alpha * rec.t_before;
                let feat = g_depth * rec.r + g_int * rec.intensity + g_drop * rec.raydrop + g_n.dot(&rec.normal) + g_a + g_b * rec.r + g_c * rec.r * rec.r;
                let one_minus = 1.0 - rec.alpha;
                let g_alpha = rec.t_before * feat - after / one_minus + g_acc * t_final / one_minus;
                after += weight * feat;

                let mut g_r = weight * (g_depth + g_b + 2.0 * g_c * rec.r);
                if median == Some(start + k as u32) {
                    g_r += d.median_depth[i];
                }

                let entry = list[rec.slot as usize];
                let p = &tape.projected[entry.index as usize];
                let sg = &mut buf[rec.slot as usize];
                sg.touched = true;

                // alpha = o * exp(-(u^2 + v^2) / 2)
                let gauss = rec.alpha / p.opacity;
                sg.opacity += g_alpha * gauss;
                let mut g_u = -g_alpha * rec.alpha * rec.u;
                let mut g_v = -g_alpha * rec.alpha * rec.v;

                // r = d . (c + u a_u + v a_v)
                let s = &p.splat;
                sg.center += ray.dir * g_r;
                sg.axis_u += ray.dir * (g_r * rec.u);
                sg.axis_v += ray.dir * (g_r * rec.v);
                g_u += g_r * ray.dir.dot(&s.axis_u);
                g_v += g_r * ray.dir.dot(&s.axis_v);

                // (u, v) = -R^{-1} h with R_ij = h_i . a_j, h_i = h_i . c
                let r00 = ray.hx.dot(&s.axis_u);
                let r01 = ray.hx.dot(&s.axis_v);
                let r10 = ray.hy.dot(&s.axis_u);
                let r11 = ray.hy.dot(&s.axis_v);
                let det = r00 * r11 - r01 * r10;
                let lam0 = (r11 * g_u - r10 * g_v) / det;
                let lam1 = (-r01 * g_u + r00 * g_v) / det;
                let plane_grad = ray.hx * lam0 + ray.hy * lam1;
                sg.center -= plane_grad;
                sg.axis_u -= plane_grad * rec.u;
                sg.axis_v -= plane_grad * rec.v;

                // n = sign * m / |m|
                let g_normal = g_n * weight;
                let m_norm = p.normal_raw.norm();
                if m_norm > 0.0 {
                    let sign = if rec.normal.dot(&p.normal_unit) < 0.0 { -1.0 } else { 1.0 };
                    sg.normal_raw += (g_normal - rec.normal * rec.normal.dot(&g_normal)) * (sign / m_norm);
                }

                let g_lambda = weight * g_int;
                let g_rho = if rec.raydrop_active { weight * g_drop } else { 0.0 };
                for kk in 0..SH_COEFFS {
                    sg.intensity_sh[kk] += g_lambda * basis[kk];
                    sg.raydrop_sh[kk] += g_rho * basis[kk];
                }
            }
        }
    }
    buf
}
