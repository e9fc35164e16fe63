use crate::intersect::{intersect, ALPHA_MIN, CUTOFF_SQ};
use crate::panocam::{Pose, SensorModel};
use crate::scene::Scene;
use crate::{sh, Error, Result, Vec3};

use super::{RasterConfig, RenderOutput};

/// Untiled reference renderer: every primitive against every pixel through the
/// matrix form of the intersection.
pub fn render_brute_force(scene: &Scene, t: f64, s: &SensorModel, pose: &Pose, cfg: &RasterConfig) -> Result<RenderOutput> {
    let prior = &scene.raydrop_prior;
    if prior.width != s.width || prior.height != s.height {
        return Err(Error::contract("ray-drop prior does not match the sensor"));
    }
    let mut order: Vec<usize> = (0..scene.len()).collect();
    let origin = pose.origin();
    let keys: Vec<f64> = scene.primitives.iter().map(|p| (p.position_at(t, scene.cycle_length) - origin).norm()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    let mut out = RenderOutput::zeros(s.width, s.height);
    for row in 0..s.height {
        for col in 0..s.width {
            let i = row * s.width + col;
            let a = s.pixel_center_angles(col, row);
            let dir = crate::panocam::angles_to_dir(a);
            let mut basis = [0.0; 9];
            sh::basis_into(&dir, &mut basis);
            let mut trans = 1.0;
            let mut nsum = Vec3::zeros();
            let mut median: Option<f64> = None;
            for &k in &order {
                let p = &scene.primitives[k];
                let op = p.opacity_at(t);
                if op < ALPHA_MIN {
                    continue;
                }
                let Some(hit) = intersect(a, pose.matrix(), &p.basis(t, scene.cycle_length)) else { continue };
                if hit.u * hit.u + hit.v * hit.v > CUTOFF_SQ {
                    continue;
                }
                let alpha = op.min(cfg.opacity_max) * hit.weight;
                if alpha <= ALPHA_MIN {
                    continue;
                }
                let w = alpha * trans;
                let lam: f64 = p.intensity_sh.iter().zip(&basis).map(|(c, y)| c * y).sum();
                let rho: f64 = p.raydrop_sh.iter().zip(&basis).map(|(c, y)| c * y).sum::<f64>().clamp(0.0, 1.0);
                let mut n = pose.rotation() * p.tu.cross(&p.tv).normalize();
                if n.dot(&dir) > 0.0 {
                    n = -n;
                }
                out.mean_depth[i] += w * hit.r;
                out.intensity[i] += w * lam;
                out.raydrop_gs[i] += w * rho;
                nsum += n * w;
                out.distort_a[i] += w;
                out.distort_b[i] += w * hit.r;
                out.distort_c[i] += w * hit.r * hit.r;
                if trans > 0.5 && median.is_none_or(|m| hit.r > m) {
                    median = Some(hit.r);
                }
                trans *= 1.0 - alpha;
                if trans < cfg.transmittance_min {
                    break;
                }
            }
            out.median_depth[i] = median.unwrap_or(0.0);
            out.accum_alpha[i] = 1.0 - trans;
            if nsum.norm() > 0.0 {
                out.normal[i] = nsum.normalize();
            }
            let pr = scene.raydrop_prior.probability(i);
            out.raydrop[i] = pr + (1.0 - pr) * out.raydrop_gs[i];
        }
    }
    Ok(out)
}
