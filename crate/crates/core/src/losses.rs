//! Supervision and regularization terms over rendered maps, each with a reverse
//! pass that writes into [`RenderGrads`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::panocam::SensorModel;
use crate::raster::{RenderGrads, RenderOutput};
use crate::spatial::PointIndex;
use crate::{Error, Result, Vec3};

pub const BCE_EPS: f64 = 1e-6;
pub const CHAMFER_SAMPLES: usize = 16384;
/// Per-pixel distortion below `-DISTORTION_TOL * (1 + A C)` is reported as a numerical fault.
pub const DISTORTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub depth: f64,
    pub intensity: f64,
    pub raydrop: f64,
    pub distortion: f64,
    pub normal: f64,
    pub chamfer: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { depth: 10.0, intensity: 0.05, raydrop: 0.05, distortion: 0.1, normal: 0.1, chamfer: 0.1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.depth, self.intensity, self.raydrop, self.distortion, self.normal, self.chamfer];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::contract("loss weights must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Unweighted value of each loss term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub depth: f64,
    pub intensity: f64,
    pub raydrop: f64,
    pub distortion: f64,
    pub normal: f64,
    pub chamfer: f64,
}

pub fn total_loss(terms: &LossTerms, w: &LossWeights) -> f64 {
    w.depth * terms.depth
        + w.intensity * terms.intensity
        + w.raydrop * terms.raydrop
        + w.distortion * terms.distortion
        + w.normal * terms.normal
        + w.chamfer * terms.chamfer
}

/// A mean over masked pixels. `count == 0` flags an empty mask, in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedMean {
    pub value: f64,
    pub count: usize,
}

impl MaskedMean {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

fn check_len(n: usize, maps: &[usize]) -> Result<()> {
    if maps.iter().any(|&m| m != n) {
        return Err(Error::contract("map sizes do not match"));
    }
    Ok(())
}

fn masked_l1(x: &[f64], gt: &[f64], mask: &[bool]) -> MaskedMean {
    let mut sum = 0.0;
    let mut count = 0;
    for ((a, b), &m) in x.iter().zip(gt).zip(mask) {
        if m {
            sum += (a - b).abs();
            count += 1;
        }
    }
    MaskedMean { value: if count > 0 { sum / count as f64 } else { 0.0 }, count }
}

fn masked_l1_grad(x: &[f64], gt: &[f64], mask: &[bool], count: usize, scale: f64, out: &mut [f64]) {
    if count == 0 {
        return;
    }
    let k = scale / count as f64;
    for i in 0..x.len() {
        if mask[i] {
            let d = x[i] - gt[i];
            if d != 0.0 {
                out[i] += k * d.signum();
            }
        }
    }
}

/// `mean |R_mean - R_gt| + mean |R_median - R_gt|` over the hit mask.
pub fn loss_depth(mean: &[f64], median: &[f64], gt: &[f64], mask: &[bool]) -> Result<MaskedMean> {
    check_len(gt.len(), &[mean.len(), median.len(), mask.len()])?;
    let a = masked_l1(mean, gt, mask);
    let b = masked_l1(median, gt, mask);
    Ok(MaskedMean { value: a.value + b.value, count: a.count })
}

pub fn loss_intensity(intensity: &[f64], gt: &[f64], mask: &[bool]) -> Result<MaskedMean> {
    check_len(gt.len(), &[intensity.len(), mask.len()])?;
    Ok(masked_l1(intensity, gt, mask))
}

/// Mean binary cross-entropy over every pixel; `p` is clamped to `[BCE_EPS, 1 - BCE_EPS]`.
pub fn loss_raydrop(p: &[f64], gt: &[f64]) -> Result<f64> {
    check_len(gt.len(), &[p.len()])?;
    if p.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = p
        .iter()
        .zip(gt)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / p.len() as f64)
}

fn loss_raydrop_grad(p: &[f64], gt: &[f64], scale: f64, out: &mut [f64]) {
    let k = scale / p.len() as f64;
    for i in 0..p.len() {
        let pi = p[i];
        if pi > BCE_EPS && pi < 1.0 - BCE_EPS {
            out[i] += k * (pi - gt[i]) / (pi * (1.0 - pi));
        }
    }
}

/// Mean over pixels of `2 (A C - B^2)`.
pub fn loss_distortion(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    check_len(a.len(), &[b.len(), c.len()])?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..a.len() {
        let d = 2.0 * (a[i] * c[i] - b[i] * b[i]);
        if d < -DISTORTION_TOL * (1.0 + a[i] * c[i]) {
            return Err(Error::Degenerate(format!("negative distortion {d} at pixel {i}")));
        }
        sum += d;
    }
    Ok(sum / a.len() as f64)
}

fn loss_distortion_grad(out: &RenderOutput, scale: f64, g: &mut RenderGrads) {
    let k = 2.0 * scale / out.pixel_count() as f64;
    for i in 0..out.pixel_count() {
        g.distort_a[i] += k * out.distort_c[i];
        g.distort_b[i] -= 2.0 * k * out.distort_b[i];
        g.distort_c[i] += k * out.distort_a[i];
    }
}

/// Normals from finite differences of a range map, in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub normals: Vec<Vec3>,
    pub valid: Vec<bool>,
}

fn neighbors(sensor: &SensorModel, i: usize) -> Option<[usize; 4]> {
    let (w, h) = (sensor.width, sensor.height);
    let (row, col) = (i / w, i % w);
    if row == 0 || row + 1 >= h {
        return None;
    }
    let right = row * w + (col + 1) % w;
    let left = row * w + (col + w - 1) % w;
    Some([right, left, i + w, i - w])
}

fn pixel_dirs(sensor: &SensorModel) -> Vec<Vec3> {
    let mut dirs = Vec::with_capacity(sensor.pixel_count());
    for row in 0..sensor.height {
        for col in 0..sensor.width {
            dirs.push(sensor.pixel_ray(col, row).dir);
        }
    }
    dirs
}

/// `normalize((p(x+1) - p(x-1)) x (p(y+1) - p(y-1)))` with `p = R dir`, cyclic in
/// azimuth, turned to face the sensor. Pixels on the top and bottom rows, with a
/// masked-out neighbor, or with a vanishing cross product are invalid.
pub fn pseudo_normal(depth: &[f64], mask: &[bool], sensor: &SensorModel) -> Result<NormalMap> {
    let n = sensor.pixel_count();
    check_len(n, &[depth.len(), mask.len()])?;
    let dirs = pixel_dirs(sensor);
    let mut map = NormalMap { normals: vec![Vec3::zeros(); n], valid: vec![false; n] };
    for i in 0..n {
        if let Some((m, _, _)) = raw_normal(depth, mask, &dirs, sensor, i) {
            let mut nrm = m.normalize();
            if nrm.dot(&dirs[i]) > 0.0 {
                nrm = -nrm;
            }
            map.normals[i] = nrm;
            map.valid[i] = true;
        }
    }
    Ok(map)
}

#[allow(clippy::type_complexity)]
fn raw_normal(depth: &[f64], mask: &[bool], dirs: &[Vec3], sensor: &SensorModel, i: usize) -> Option<(Vec3, Vec3, Vec3)> {
    if !mask[i] {
        return None;
    }
    let nb = neighbors(sensor, i)?;
    if nb.iter().any(|&j| !mask[j]) {
        return None;
    }
    let p = |j: usize| dirs[j] * depth[j];
    let dx = p(nb[0]) - p(nb[1]);
    let dy = p(nb[2]) - p(nb[3]);
    let m = dx.cross(&dy);
    let scale = dx.norm() * dy.norm();
    if !(m.norm() > 1e-12 * scale) || scale == 0.0 {
        return None;
    }
    Some((m, dx, dy))
}

/// Adds `d(sum <g, pseudo_normal>) / d depth` into `d_depth`.
fn pseudo_normal_backward(depth: &[f64], mask: &[bool], sensor: &SensorModel, g_normal: &[Vec3], d_depth: &mut [f64]) {
    let dirs = pixel_dirs(sensor);
    for i in 0..depth.len() {
        let g = g_normal[i];
        if g == Vec3::zeros() {
            continue;
        }
        let Some((m, dx, dy)) = raw_normal(depth, mask, &dirs, sensor, i) else { continue };
        let len = m.norm();
        let unit = m / len;
        let sign = if unit.dot(&dirs[i]) > 0.0 { -1.0 } else { 1.0 };
        let nrm = unit * sign;
        let g_m = (g - nrm * nrm.dot(&g)) * (sign / len);
        let g_dx = dy.cross(&g_m);
        let g_dy = g_m.cross(&dx);
        let nb = neighbors(sensor, i).expect("valid pixel has neighbors");
        d_depth[nb[0]] += dirs[nb[0]].dot(&g_dx);
        d_depth[nb[1]] -= dirs[nb[1]].dot(&g_dx);
        d_depth[nb[2]] += dirs[nb[2]].dot(&g_dy);
        d_depth[nb[3]] -= dirs[nb[3]].dot(&g_dy);
    }
}

/// Mean over valid pixels of `1 - N . N~`.
pub fn loss_normal(rendered: &[Vec3], pseudo: &[Vec3], valid: &[bool]) -> Result<MaskedMean> {
    check_len(valid.len(), &[rendered.len(), pseudo.len()])?;
    let mut sum = 0.0;
    let mut count = 0;
    for i in 0..valid.len() {
        if valid[i] {
            sum += 1.0 - rendered[i].dot(&pseudo[i]);
            count += 1;
        }
    }
    Ok(MaskedMean { value: if count > 0 { sum / count as f64 } else { 0.0 }, count })
}

/// Index of and distance to the nearest indexed point for every query.
fn nearest_all(index: &PointIndex, queries: &[Vec3]) -> Vec<(usize, f64)> {
    queries.iter().map(|q| index.nearest(q).expect("index is non-empty")).collect()
}

/// `mean_a min_b |a - b| + mean_b min_a |b - a|`.
pub fn chamfer_distance(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("point set for the chamfer distance"));
    }
    let (ta, tb) = (PointIndex::new(a), PointIndex::new(b));
    let ab: f64 = nearest_all(&tb, a).iter().map(|x| x.1).sum::<f64>() / a.len() as f64;
    let ba: f64 = nearest_all(&ta, b).iter().map(|x| x.1).sum::<f64>() / b.len() as f64;
    Ok(ab + ba)
}

/// Chamfer loss with subgradients with respect to the first set.
pub fn loss_chamfer(a: &[Vec3], b: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("point set for the chamfer loss"));
    }
    let (ta, tb) = (PointIndex::new(a), PointIndex::new(b));
    let mut grad = vec![Vec3::zeros(); a.len()];
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut value = 0.0;
    for (i, (j, d)) in nearest_all(&tb, a).into_iter().enumerate() {
        value += d / na;
        if d > 0.0 {
            grad[i] += (a[i] - b[j]) / (d * na);
        }
    }
    for (j, (i, d)) in nearest_all(&ta, b).into_iter().enumerate() {
        value += d / nb;
        if d > 0.0 {
            grad[i] += (a[i] - b[j]) / (d * nb);
        }
    }
    Ok((value, grad))
}

/// Uniform sub-sample of at most `limit` indices, in increasing order.
fn subsample(n: usize, limit: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= limit {
        return (0..n).collect();
    }
    let mut idx = rand::seq::index::sample(rng, n, limit).into_vec();
    idx.sort_unstable();
    idx
}

/// Ground truth for one frame in double precision, sensor frame.
#[derive(Debug, Clone)]
pub struct Target {
    pub sensor: SensorModel,
    pub range: Vec<f64>,
    pub intensity: Vec<f64>,
    pub hit: Vec<bool>,
    /// 1 where the ray was dropped.
    pub drop: Vec<f64>,
    pub points: Vec<Vec3>,
}

impl Target {
    pub fn new(sensor: SensorModel, range: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        check_len(sensor.pixel_count(), &[range.len(), intensity.len()])?;
        let hit: Vec<bool> = range.iter().map(|&r| r > 0.0).collect();
        let drop = hit.iter().map(|&h| if h { 0.0 } else { 1.0 }).collect();
        let dirs = pixel_dirs(&sensor);
        let points = (0..range.len()).filter(|&i| hit[i]).map(|i| dirs[i] * range[i]).collect();
        Ok(Target { sensor, range, intensity, hit, drop, points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossOptions {
    /// Points per set for the chamfer term.
    pub chamfer_samples: usize,
    pub seed: u64,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions { chamfer_samples: CHAMFER_SAMPLES, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct LossEval {
    pub terms: LossTerms,
    pub total: f64,
    pub grads: RenderGrads,
    /// The hit mask was empty, so the masked terms are 0.
    pub empty_mask: bool,
}

/// All six terms, their weighted sum, and the upstream gradient of the sum.
/// Gradients are only formed for terms with a positive weight.
pub fn evaluate(out: &RenderOutput, target: &Target, w: &LossWeights, opts: &LossOptions) -> Result<LossEval> {
    let sensor = &target.sensor;
    let n = sensor.pixel_count();
    if out.width != sensor.width || out.height != sensor.height {
        return Err(Error::contract("render and target sizes differ"));
    }
    let mut g = RenderGrads::zeros(out.width, out.height);
    let mut terms = LossTerms::default();

    let depth = loss_depth(&out.mean_depth, &out.median_depth, &target.range, &target.hit)?;
    terms.depth = depth.value;
    if w.depth > 0.0 {
        masked_l1_grad(&out.mean_depth, &target.range, &target.hit, depth.count, w.depth, &mut g.mean_depth);
        masked_l1_grad(&out.median_depth, &target.range, &target.hit, depth.count, w.depth, &mut g.median_depth);
    }

    let inten = loss_intensity(&out.intensity, &target.intensity, &target.hit)?;
    terms.intensity = inten.value;
    if w.intensity > 0.0 {
        masked_l1_grad(&out.intensity, &target.intensity, &target.hit, inten.count, w.intensity, &mut g.intensity);
    }

    terms.raydrop = loss_raydrop(&out.raydrop, &target.drop)?;
    if w.raydrop > 0.0 {
        loss_raydrop_grad(&out.raydrop, &target.drop, w.raydrop, &mut g.raydrop);
    }

    terms.distortion = loss_distortion(&out.distort_a, &out.distort_b, &out.distort_c)?;
    if w.distortion > 0.0 {
        loss_distortion_grad(out, w.distortion, &mut g);
    }

    let pseudo = pseudo_normal(&out.mean_depth, &target.hit, sensor)?;
    let normal = loss_normal(&out.normal, &pseudo.normals, &pseudo.valid)?;
    terms.normal = normal.value;
    if w.normal > 0.0 && normal.count > 0 {
        let k = w.normal / normal.count as f64;
        let mut g_pseudo = vec![Vec3::zeros(); n];
        for i in 0..n {
            if pseudo.valid[i] {
                g.normal[i] -= pseudo.normals[i] * k;
                g_pseudo[i] = -out.normal[i] * k;
            }
        }
        pseudo_normal_backward(&out.mean_depth, &target.hit, sensor, &g_pseudo, &mut g.mean_depth);
    }

    // rendered points from the median depth at ground-truth hits
    let dirs = pixel_dirs(sensor);
    let pixels: Vec<usize> = (0..n).filter(|&i| target.hit[i] && out.median_depth[i] > 0.0).collect();
    if !pixels.is_empty() && !target.points.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let pick_r = subsample(pixels.len(), opts.chamfer_samples, &mut rng);
        let pick_g = subsample(target.points.len(), opts.chamfer_samples, &mut rng);
        let a: Vec<Vec3> = pick_r.iter().map(|&k| dirs[pixels[k]] * out.median_depth[pixels[k]]).collect();
        let b: Vec<Vec3> = pick_g.iter().map(|&k| target.points[k]).collect();
        let (value, grad) = loss_chamfer(&a, &b)?;
        terms.chamfer = value;
        if w.chamfer > 0.0 {
            for (k, gp) in pick_r.iter().zip(&grad) {
                let i = pixels[*k];
                g.median_depth[i] += w.chamfer * dirs[i].dot(gp);
            }
        }
    }

    let total = total_loss(&terms, w);
    if !total.is_finite() {
        return Err(Error::Degenerate("non-finite loss".into()));
    }
    Ok(LossEval { terms, total, grads: g, empty_mask: depth.is_empty() })
}
