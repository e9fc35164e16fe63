//! Evaluation metrics for predicted range frames: point-cloud Chamfer distance
//! and F-score, masked RMSE / MedAE / PSNR, and panoramic SSIM.

use serde::{Deserialize, Serialize};

use crate::lidario::{range_to_points, Frame};
use crate::panocam::SensorModel;
use crate::spatial::PointIndex;
use crate::{Error, Result, Vec3};

/// Default F-score distance threshold, meters.
pub const FSCORE_THRESHOLD: f64 = 0.05;
/// Reported PSNR for a zero error.
pub const PSNR_CAP: f64 = 99.0;
/// Default depth data range for PSNR and SSIM, meters.
pub const DEPTH_RANGE: f64 = 80.0;

pub const SSIM_RADIUS: usize = 5;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Symmetric mean nearest-neighbour distance, without subsampling.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    crate::losses::chamfer_distance(a, b)
}

fn within_fraction(from: &[Vec3], to: &PointIndex, threshold: f64) -> f64 {
    let hits = from.iter().filter(|p| to.nearest(p).is_some_and(|(_, d)| d <= threshold)).count();
    hits as f64 / from.len() as f64
}

/// Harmonic mean of the fractions of `a` near `b` and of `b` near `a`.
pub fn fscore(a: &[Vec3], b: &[Vec3], threshold: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("point set for the F-score"));
    }
    let precision = within_fraction(a, &PointIndex::new(b), threshold);
    let recall = within_fraction(b, &PointIndex::new(a), threshold);
    Ok(if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 })
}

fn masked_errors(x: &[f64], gt: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if x.len() != gt.len() || x.len() != mask.len() {
        return Err(Error::contract("metric inputs differ in length"));
    }
    let errs: Vec<f64> = (0..x.len()).filter(|&i| mask[i]).map(|i| x[i] - gt[i]).collect();
    if errs.is_empty() {
        return Err(Error::Empty("evaluation mask"));
    }
    Ok(errs)
}

fn masked_mse(x: &[f64], gt: &[f64], mask: &[bool]) -> Result<f64> {
    let e = masked_errors(x, gt, mask)?;
    Ok(e.iter().map(|d| d * d).sum::<f64>() / e.len() as f64)
}

pub fn rmse(x: &[f64], gt: &[f64], mask: &[bool]) -> Result<f64> {
    masked_mse(x, gt, mask).map(f64::sqrt)
}

/// Median absolute error; even counts take the lower middle value.
pub fn medae(x: &[f64], gt: &[f64], mask: &[bool]) -> Result<f64> {
    let mut e: Vec<f64> = masked_errors(x, gt, mask)?.into_iter().map(f64::abs).collect();
    let k = (e.len() - 1) / 2;
    let (_, m, _) = e.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*m)
}

/// `10 log10(range^2 / mse)`, capped at [`PSNR_CAP`].
pub fn psnr(x: &[f64], gt: &[f64], mask: &[bool], data_range: f64) -> Result<f64> {
    if !(data_range > 0.0) {
        return Err(Error::contract("PSNR data range must be positive"));
    }
    let mse = masked_mse(x, gt, mask)?;
    Ok(if mse == 0.0 { PSNR_CAP } else { (10.0 * (data_range * data_range / mse).log10()).min(PSNR_CAP) })
}

fn gaussian_taps() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut w = [0.0; 2 * SSIM_RADIUS + 1];
    for (k, v) in w.iter_mut().enumerate() {
        let d = k as f64 - SSIM_RADIUS as f64;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable window: cyclic along columns, edge-clamped along rows.
fn filter(img: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let r = SSIM_RADIUS as i64;
    let mut tmp = vec![0.0; img.len()];
    for row in 0..height {
        for col in 0..width {
            let mut s = 0.0;
            for (k, w) in taps.iter().enumerate() {
                let c = (col as i64 + k as i64 - r).rem_euclid(width as i64) as usize;
                s += w * img[row * width + c];
            }
            tmp[row * width + col] = s;
        }
    }
    let mut out = vec![0.0; img.len()];
    for row in 0..height {
        for col in 0..width {
            let mut s = 0.0;
            for (k, w) in taps.iter().enumerate() {
                let rr = (row as i64 + k as i64 - r).clamp(0, height as i64 - 1) as usize;
                s += w * tmp[rr * width + col];
            }
            out[row * width + col] = s;
        }
    }
    out
}

/// Local SSIM value per pixel.
pub fn ssim_map(x: &[f64], gt: &[f64], width: usize, height: usize, data_range: f64) -> Result<Vec<f64>> {
    if x.len() != width * height || gt.len() != x.len() || x.is_empty() {
        return Err(Error::contract("SSIM inputs must be full maps of the given size"));
    }
    if !(data_range > 0.0) {
        return Err(Error::contract("SSIM data range must be positive"));
    }
    let taps = gaussian_taps();
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter(x, width, height, &taps);
    let my = filter(gt, width, height, &taps);
    let sxx = filter(&sq(x, x), width, height, &taps);
    let syy = filter(&sq(gt, gt), width, height, &taps);
    let sxy = filter(&sq(x, gt), width, height, &taps);
    Ok((0..x.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            let vx = sxx[i] - a * a;
            let vy = syy[i] - b * b;
            let cov = sxy[i] - a * b;
            ((2.0 * a * b + c1) * (2.0 * cov + c2)) / ((a * a + b * b + c1) * (vx + vy + c2))
        })
        .collect())
}

/// Mean local SSIM over the whole map; dropped pixels should hold 0 in both inputs.
pub fn ssim(x: &[f64], gt: &[f64], width: usize, height: usize, data_range: f64) -> Result<f64> {
    let m = ssim_map(x, gt, width, height, data_range)?;
    Ok(m.iter().sum::<f64>() / m.len() as f64)
}

/// Pixels that are hits in both the prediction and the ground truth.
pub fn evaluation_mask(pred_hit: &[bool], gt_hit: &[bool]) -> Vec<bool> {
    pred_hit.iter().zip(gt_hit).map(|(a, b)| *a && *b).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct MetricsConfig {
    pub fscore_threshold: f64,
    pub depth_range: f64,
    pub intensity_range: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { fscore_threshold: FSCORE_THRESHOLD, depth_range: DEPTH_RANGE, intensity_range: 1.0 }
    }
}

/// Metrics of one predicted frame against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub chamfer: f64,
    pub fscore: f64,
    pub depth_rmse: f64,
    pub depth_medae: f64,
    pub depth_psnr: f64,
    pub depth_ssim: f64,
    pub intensity_rmse: f64,
    pub intensity_medae: f64,
    pub intensity_psnr: f64,
    pub intensity_ssim: f64,
    /// Fraction of pixels whose hit/drop state matches.
    pub drop_accuracy: f64,
    /// Fraction of ground-truth hits inside the evaluation mask.
    pub mask_coverage: f64,
}

impl FrameMetrics {
    pub const NAMES: [&'static str; 12] = [
        "chamfer",
        "fscore",
        "depth_rmse",
        "depth_medae",
        "depth_psnr",
        "depth_ssim",
        "intensity_rmse",
        "intensity_medae",
        "intensity_psnr",
        "intensity_ssim",
        "drop_accuracy",
        "mask_coverage",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.chamfer,
            self.fscore,
            self.depth_rmse,
            self.depth_medae,
            self.depth_psnr,
            self.depth_ssim,
            self.intensity_rmse,
            self.intensity_medae,
            self.intensity_psnr,
            self.intensity_ssim,
            self.drop_accuracy,
            self.mask_coverage,
        ]
    }

    fn from_values(v: [f64; 12]) -> Self {
        FrameMetrics {
            chamfer: v[0],
            fscore: v[1],
            depth_rmse: v[2],
            depth_medae: v[3],
            depth_psnr: v[4],
            depth_ssim: v[5],
            intensity_rmse: v[6],
            intensity_medae: v[7],
            intensity_psnr: v[8],
            intensity_ssim: v[9],
            drop_accuracy: v[10],
            mask_coverage: v[11],
        }
    }

    /// Per-metric mean over frames.
    pub fn mean(all: &[FrameMetrics]) -> Result<FrameMetrics> {
        if all.is_empty() {
            return Err(Error::Empty("frame metrics to aggregate"));
        }
        // undefined (NaN) entries are skipped per metric
        let mut acc = [(0.0, 0usize); 12];
        for m in all {
            for (a, v) in acc.iter_mut().zip(m.values()) {
                if !v.is_nan() {
                    *a = (a.0 + v, a.1 + 1);
                }
            }
        }
        Ok(Self::from_values(acc.map(|(sum, k)| if k > 0 { sum / k as f64 } else { f64::NAN })))
    }

    /// `name: value` lines.
    pub fn to_text(&self) -> String {
        Self::NAMES.iter().zip(self.values()).map(|(n, v)| format!("{n}: {v:.6}\n")).collect()
    }
}

/// Compares a predicted frame with the ground truth on the joint hit mask.
pub fn evaluate_frame(pred: &Frame, gt: &Frame, sensor: &SensorModel, cfg: &MetricsConfig) -> Result<FrameMetrics> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::contract("predicted and ground-truth frames differ in size"));
    }
    let to64 = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    let (pr, gr) = (to64(&pred.range), to64(&gt.range));
    let (pi, gi) = (to64(&pred.intensity), to64(&gt.intensity));
    let (ph, gh) = (pred.hit_mask(), gt.hit_mask());
    let mask = evaluation_mask(&ph, &gh);
    let pts = |f: &Frame| -> Result<Vec<Vec3>> { Ok(range_to_points(f, sensor)?.into_iter().map(|p| p.position).collect()) };
    let (pp, gp) = (pts(pred)?, pts(gt)?);
    let n = pr.len() as f64;
    let gt_hits = gh.iter().filter(|&&h| h).count();
    if gt_hits == 0 {
        return Err(Error::Empty("ground-truth hits"));
    }
    // an empty prediction leaves the point and masked metrics undefined
    let defined = |v: Result<f64>| if mask.iter().any(|&m| m) { v } else { Ok(f64::NAN) };
    let (cd, fs) = if pp.is_empty() { (f64::NAN, 0.0) } else { (chamfer(&pp, &gp)?, fscore(&pp, &gp, cfg.fscore_threshold)?) };
    Ok(FrameMetrics {
        chamfer: cd,
        fscore: fs,
        depth_rmse: defined(rmse(&pr, &gr, &mask))?,
        depth_medae: defined(medae(&pr, &gr, &mask))?,
        depth_psnr: defined(psnr(&pr, &gr, &mask, cfg.depth_range))?,
        depth_ssim: ssim(&pr, &gr, pred.width, pred.height, cfg.depth_range)?,
        intensity_rmse: defined(rmse(&pi, &gi, &mask))?,
        intensity_medae: defined(medae(&pi, &gi, &mask))?,
        intensity_psnr: defined(psnr(&pi, &gi, &mask, cfg.intensity_range))?,
        intensity_ssim: ssim(&pi, &gi, pred.width, pred.height, cfg.intensity_range)?,
        drop_accuracy: ph.iter().zip(&gh).filter(|(a, b)| a == b).count() as f64 / n,
        mask_coverage: mask.iter().filter(|&&m| m).count() as f64 / gt_hits as f64,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::panocam::Pose;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0), rng.gen_range(-5.0..5.0))).collect()
    }

    #[test]
    fn chamfer_cases() {
        let a = vec![Vec3::new(1.0, 2.0, 3.0)];
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert!((chamfer(&a, &[Vec3::new(2.0, 2.0, 3.0)]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_matches_brute_force_on_2000_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (cloud(&mut rng, 2000), cloud(&mut rng, 1700));
        let nn = |p: &Vec3, set: &[Vec3]| set.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
        let brute = a.iter().map(|p| nn(p, &b)).sum::<f64>() / a.len() as f64 + b.iter().map(|p| nn(p, &a)).sum::<f64>() / b.len() as f64;
        assert!((chamfer(&a, &b).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn fscore_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = cloud(&mut rng, 300);
        assert_eq!(fscore(&a, &a, 0.05).unwrap(), 1.0);
        let far: Vec<Vec3> = a.iter().map(|p| p + Vec3::new(0.0, 100.0, 0.0)).collect();
        assert_eq!(fscore(&a, &far, 0.05).unwrap(), 0.0);
        // shift half of a by 1 m and count by brute force
        let b: Vec<Vec3> = a.iter().enumerate().map(|(i, p)| if i % 2 == 0 { p + Vec3::new(0.0, 0.0, 1.0) } else { *p }).collect();
        let near = |p: &Vec3, set: &[Vec3]| set.iter().any(|q| (p - q).norm() <= 0.05);
        let precision = a.iter().filter(|p| near(p, &b)).count() as f64 / a.len() as f64;
        let recall = b.iter().filter(|p| near(p, &a)).count() as f64 / b.len() as f64;
        let expected = 2.0 * precision * recall / (precision + recall);
        assert!((fscore(&a, &b, 0.05).unwrap() - expected).abs() < 1e-15);
        assert!((fscore(&b, &a, 0.05).unwrap() - expected).abs() < 1e-15);
        assert!(fscore(&a, &[], 0.05).is_err());
    }

    #[test]
    fn rmse_medae_psnr_cases() {
        let gt = vec![1.0, 2.0, 3.0, 4.0];
        let mask = vec![true; 4];
        assert_eq!(rmse(&gt, &gt, &mask).unwrap(), 0.0);
        assert_eq!(medae(&gt, &gt, &mask).unwrap(), 0.0);
        assert_eq!(psnr(&gt, &gt, &mask, 80.0).unwrap(), PSNR_CAP);
        let off: Vec<f64> = gt.iter().map(|v| v - 0.7).collect();
        assert!((rmse(&off, &gt, &mask).unwrap() - 0.7).abs() < 1e-15);
        assert!((medae(&off, &gt, &mask).unwrap() - 0.7).abs() < 1e-15);
        // lower middle of |e| = {1, 2, 3, 4}
        let x = vec![2.0, 4.0, 6.0, 8.0];
        assert_eq!(medae(&x, &gt, &mask).unwrap(), 2.0);
        // mse = range^2
        let big: Vec<f64> = gt.iter().map(|v| v + 80.0).collect();
        assert!(psnr(&big, &gt, &mask, 80.0).unwrap().abs() < 1e-12);
        let e = [0.1, -0.3, 0.2, 0.0];
        let noisy: Vec<f64> = gt.iter().zip(e).map(|(g, d)| g + d).collect();
        let mse = e.iter().map(|d| d * d).sum::<f64>() / 4.0;
        assert!((psnr(&noisy, &gt, &mask, 1.0).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-12);
        assert!(rmse(&gt, &gt, &[false; 4]).is_err());
    }

    /// Direct windowed statistics with explicit index wrapping.
    fn brute_ssim_stats(x: &[f64], y: &[f64], w: usize, h: usize, col: usize, row: usize) -> [f64; 5] {
        let mut s = [0.0; 5];
        let mut norm = 0.0;
        for dr in -5i64..=5 {
            for dc in -5i64..=5 {
                let g = (-((dr * dr + dc * dc) as f64) / (2.0 * 1.5 * 1.5)).exp();
                let rr = (row as i64 + dr).clamp(0, h as i64 - 1) as usize;
                let cc = (col as i64 + dc).rem_euclid(w as i64) as usize;
                let (a, b) = (x[rr * w + cc], y[rr * w + cc]);
                s[0] += g * a;
                s[1] += g * b;
                s[2] += g * a * a;
                s[3] += g * b * b;
                s[4] += g * a * b;
                norm += g;
            }
        }
        s.map(|v| v / norm)
    }

    fn closed_form(s: [f64; 5], range: f64) -> f64 {
        let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
        let (a, b) = (s[0], s[1]);
        ((2.0 * a * b + c1) * (2.0 * (s[4] - a * b) + c2)) / ((a * a + b * b + c1) * (s[2] - a * a + s[3] - b * b + c2))
    }

    #[test]
    fn ssim_identity_is_exactly_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..40 * 12).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert_eq!(ssim(&x, &x, 40, 12, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn ssim_matches_windowed_oracle_including_borders() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (w, h) = (24, 9);
        let x: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.6 * v + rng.gen_range(0.0..0.3)).collect();
        let map = ssim_map(&x, &y, w, h, 1.0).unwrap();
        for row in 0..h {
            for col in 0..w {
                let expected = closed_form(brute_ssim_stats(&x, &y, w, h, col, row), 1.0);
                assert!((map[row * w + col] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ssim_anticorrelated_checkerboard_approaches_minus_one() {
        let (w, h) = (32, 32);
        let x: Vec<f64> = (0..w * h).map(|i| if (i % w + i / w) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let map = ssim_map(&x, &y, w, h, 1.0).unwrap();
        for row in 6..h - 6 {
            for col in 0..w {
                let v = map[row * w + col];
                let expected = closed_form(brute_ssim_stats(&x, &y, w, h, col, row), 1.0);
                assert!((v - expected).abs() < 1e-12);
                // local means vanish, so only the structure term remains
                assert!((v + (2.0 - 0.0009) / (2.0 + 0.0009)).abs() < 1e-6, "{v}");
            }
        }
    }

    #[test]
    fn ssim_constant_offset_is_the_luminance_term() {
        let (w, h) = (20, 8);
        let (a, c) = (0.3, 0.2);
        let x = vec![a; w * h];
        let y = vec![a + c; w * h];
        let c1 = 0.0001;
        let expected = (2.0 * a * (a + c) + c1) / (a * a + (a + c) * (a + c) + c1);
        assert!((ssim(&x, &y, w, h, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn frame_metrics_of_identical_and_offset_frames() {
        let s = SensorModel::new(32, 8, 1.3, 1.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let range: Vec<f32> = (0..256).map(|i| if i % 7 == 0 { 0.0 } else { rng.gen_range(2.0..9.0) }).collect();
        let inten: Vec<f32> = range.iter().map(|&r| if r > 0.0 { 0.4 } else { 0.0 }).collect();
        let gt = Frame::new(32, 8, range.clone(), inten.clone(), 0.0, Pose::identity()).unwrap();
        let m = evaluate_frame(&gt, &gt, &s, &MetricsConfig::default()).unwrap();
        assert_eq!((m.chamfer, m.fscore, m.depth_rmse, m.depth_ssim, m.depth_psnr), (0.0, 1.0, 0.0, 1.0, PSNR_CAP));
        assert_eq!(m.drop_accuracy, 1.0);
        let shifted = Frame::new(32, 8, range.iter().map(|&r| if r > 0.0 { r + 1.0 } else { 0.0 }).collect(), inten, 0.0, Pose::identity()).unwrap();
        let m = evaluate_frame(&shifted, &gt, &s, &MetricsConfig::default()).unwrap();
        assert!((m.depth_rmse - 1.0).abs() < 1e-6);
        assert_eq!(m.intensity_rmse, 0.0);
        let agg = FrameMetrics::mean(&[m, m]).unwrap();
        assert_eq!(agg, m);
        assert!(agg.to_text().contains("depth_rmse: 1.000000"));
    }

    #[test]
    fn empty_prediction_leaves_point_metrics_undefined() {
        let s = SensorModel::new(32, 8, 1.3, 1.9).unwrap();
        let gt = Frame::new(32, 8, vec![4.0; 256], vec![0.5; 256], 0.0, Pose::identity()).unwrap();
        let empty = Frame::new(32, 8, vec![0.0; 256], vec![0.0; 256], 0.0, Pose::identity()).unwrap();
        let m = evaluate_frame(&empty, &gt, &s, &MetricsConfig::default()).unwrap();
        assert!(m.chamfer.is_nan() && m.depth_rmse.is_nan() && m.intensity_psnr.is_nan());
        assert_eq!((m.fscore, m.drop_accuracy, m.mask_coverage), (0.0, 0.0, 0.0));
        assert!(evaluate_frame(&gt, &empty, &s, &MetricsConfig::default()).is_err());
        let full = evaluate_frame(&gt, &gt, &s, &MetricsConfig::default()).unwrap();
        let agg = FrameMetrics::mean(&[m, full]).unwrap();
        assert_eq!((agg.chamfer, agg.depth_rmse, agg.fscore), (0.0, 0.0, 0.5));
    }

    proptest! {
        #[test]
        fn chamfer_and_fscore_are_symmetric(seed in 0u64..500, na in 1usize..60, nb in 1usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (cloud(&mut rng, na), cloud(&mut rng, nb));
            prop_assert!((chamfer(&a, &b).unwrap() - chamfer(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert_eq!(fscore(&a, &b, 0.5).unwrap(), fscore(&b, &a, 0.5).unwrap());
        }

        #[test]
        fn errors_vanish_iff_masked_maps_match(seed in 0u64..500, n in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let mask: Vec<bool> = (0..n).map(|i| i == 0 || rng.gen_bool(0.5)).collect();
            let mut x = gt.clone();
            for i in 0..n {
                if !mask[i] { x[i] += 3.0; }
            }
            prop_assert_eq!(rmse(&x, &gt, &mask).unwrap(), 0.0);
            prop_assert_eq!(medae(&x, &gt, &mask).unwrap(), 0.0);
            x[0] += 0.5;
            prop_assert!(rmse(&x, &gt, &mask).unwrap() > 0.0);
        }

        #[test]
        fn psnr_decreases_with_mse(a in 0.001f64..1.0, b in 0.001f64..1.0) {
            let gt = vec![0.0; 4];
            let pa = psnr(&[a; 4], &gt, &[true; 4], 1.0).unwrap();
            let pb = psnr(&[b; 4], &gt, &[true; 4], 1.0).unwrap();
            prop_assert_eq!(a < b, pa > pb);
        }
    }
}
