//! Splat primitives with periodic vibration and temporal opacity decay.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::Matrix4x3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sh::{self, SH_C0};
use crate::spatial::PointIndex;
use crate::{Error, Result, Vec3};

/// Spherical-harmonic degree of the intensity and ray-drop channels.
pub const SH_DEGREE: usize = 2;
pub const SH_COEFFS: usize = sh::coeff_count(SH_DEGREE);

/// Number of scalar learnable parameters per primitive.
pub const PARAM_COUNT: usize = 17 + 2 * SH_COEFFS;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Named ranges of the flat parameter vector, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamSlot {
    Position,
    TangentU,
    TangentV,
    LogScale,
    Opacity,
    Vibration,
    LifePeak,
    DecayRate,
    IntensitySh,
    RaydropSh,
}

impl ParamSlot {
    pub const ALL: [ParamSlot; 10] = [
        ParamSlot::Position,
        ParamSlot::TangentU,
        ParamSlot::TangentV,
        ParamSlot::LogScale,
        ParamSlot::Opacity,
        ParamSlot::Vibration,
        ParamSlot::LifePeak,
        ParamSlot::DecayRate,
        ParamSlot::IntensitySh,
        ParamSlot::RaydropSh,
    ];

    pub fn range(self) -> Range<usize> {
        match self {
            ParamSlot::Position => 0..3,
            ParamSlot::TangentU => 3..6,
            ParamSlot::TangentV => 6..9,
            ParamSlot::LogScale => 9..11,
            ParamSlot::Opacity => 11..12,
            ParamSlot::Vibration => 12..15,
            ParamSlot::LifePeak => 15..16,
            ParamSlot::DecayRate => 16..17,
            ParamSlot::IntensitySh => 17..17 + SH_COEFFS,
            ParamSlot::RaydropSh => 17 + SH_COEFFS..PARAM_COUNT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamSlot::Position => "mu",
            ParamSlot::TangentU => "tu",
            ParamSlot::TangentV => "tv",
            ParamSlot::LogScale => "log_scale",
            ParamSlot::Opacity => "opacity_raw",
            ParamSlot::Vibration => "vib_dir",
            ParamSlot::LifePeak => "life_peak",
            ParamSlot::DecayRate => "decay_rate_raw",
            ParamSlot::IntensitySh => "intensity_sh",
            ParamSlot::RaydropSh => "raydrop_sh",
        }
    }

    pub fn of_index(index: usize) -> ParamSlot {
        *Self::ALL.iter().find(|s| s.range().contains(&index)).expect("parameter index out of range")
    }
}

/// One periodically vibrating 2D Gaussian disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplatPrimitive {
    pub mu: Vec3,
    pub tu: Vec3,
    pub tv: Vec3,
    /// `ln(s_u), ln(s_v)`.
    pub log_scale: [f64; 2],
    pub opacity_raw: f64,
    pub vib_dir: Vec3,
    pub life_peak: f64,
    /// `ln(beta)`.
    pub decay_rate_raw: f64,
    pub intensity_sh: [f64; SH_COEFFS],
    pub raydrop_sh: [f64; SH_COEFFS],
}

impl SplatPrimitive {
    /// A static disk facing along `tu x tv` with the given opacity and constant intensity.
    pub fn new_static(mu: Vec3, tu: Vec3, tv: Vec3, scale: [f64; 2], opacity: f64, intensity: f64) -> Self {
        let mut intensity_sh = [0.0; SH_COEFFS];
        intensity_sh[0] = intensity / SH_C0;
        SplatPrimitive {
            mu,
            tu,
            tv,
            log_scale: [scale[0].ln(), scale[1].ln()],
            opacity_raw: logit(opacity),
            vib_dir: Vec3::zeros(),
            life_peak: 0.0,
            decay_rate_raw: 1e3_f64.ln(),
            intensity_sh,
            raydrop_sh: [0.0; SH_COEFFS],
        }
    }

    pub fn scale(&self) -> [f64; 2] {
        [self.log_scale[0].exp(), self.log_scale[1].exp()]
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_raw)
    }

    /// Temporal decay width `beta`, seconds.
    pub fn decay_rate(&self) -> f64 {
        self.decay_rate_raw.exp()
    }

    /// Center at time `t`: `mu + l/(2 pi) sin(2 pi (t - tau) / l) v`.
    pub fn position_at(&self, t: f64, cycle_length: f64) -> Vec3 {
        self.mu + self.vibration_factor(t, cycle_length) * self.vib_dir
    }

    pub(crate) fn vibration_factor(&self, t: f64, cycle_length: f64) -> f64 {
        cycle_length / (2.0 * PI) * (2.0 * PI * (t - self.life_peak) / cycle_length).sin()
    }

    /// Opacity at time `t`: `o exp(-(t - tau)^2 / (2 beta^2))`.
    pub fn opacity_at(&self, t: f64) -> f64 {
        let beta = self.decay_rate();
        let dt = t - self.life_peak;
        self.opacity() * (-0.5 * dt * dt / (beta * beta)).exp()
    }

    /// Largest decayed opacity reached on `[t0, t1]`.
    pub fn peak_opacity_over(&self, t0: f64, t1: f64) -> f64 {
        let t = self.life_peak.clamp(t0.min(t1), t0.max(t1));
        self.opacity_at(t)
    }

    /// Homogeneous UV-to-world map: columns `(s_u t_u, 0)`, `(s_v t_v, 0)`, `(mu(t), 1)`.
    pub fn basis(&self, t: f64, cycle_length: f64) -> Matrix4x3<f64> {
        let [su, sv] = self.scale();
        let c = self.position_at(t, cycle_length);
        let a = self.tu * su;
        let b = self.tv * sv;
        Matrix4x3::new(
            a.x, b.x, c.x, //
            a.y, b.y, c.y, //
            a.z, b.z, c.z, //
            0.0, 0.0, 1.0,
        )
    }

    /// Gram-Schmidt with `tu` kept as the leading direction.
    pub fn orthonormalize_frame(&mut self) {
        let (tu, tv) = orthonormal_pair(&self.tu, &self.tv);
        self.tu = tu;
        self.tv = tv;
    }

    pub fn to_params(&self) -> [f64; PARAM_COUNT] {
        let mut p = [0.0; PARAM_COUNT];
        p[0..3].copy_from_slice(self.mu.as_slice());
        p[3..6].copy_from_slice(self.tu.as_slice());
        p[6..9].copy_from_slice(self.tv.as_slice());
        p[9..11].copy_from_slice(&self.log_scale);
        p[11] = self.opacity_raw;
        p[12..15].copy_from_slice(self.vib_dir.as_slice());
        p[15] = self.life_peak;
        p[16] = self.decay_rate_raw;
        p[ParamSlot::IntensitySh.range()].copy_from_slice(&self.intensity_sh);
        p[ParamSlot::RaydropSh.range()].copy_from_slice(&self.raydrop_sh);
        p
    }

    pub fn from_params(p: &[f64; PARAM_COUNT]) -> Self {
        let v3 = |r: Range<usize>| Vec3::from_column_slice(&p[r]);
        let mut intensity_sh = [0.0; SH_COEFFS];
        intensity_sh.copy_from_slice(&p[ParamSlot::IntensitySh.range()]);
        let mut raydrop_sh = [0.0; SH_COEFFS];
        raydrop_sh.copy_from_slice(&p[ParamSlot::RaydropSh.range()]);
        SplatPrimitive {
            mu: v3(0..3),
            tu: v3(3..6),
            tv: v3(6..9),
            log_scale: [p[9], p[10]],
            opacity_raw: p[11],
            vib_dir: v3(12..15),
            life_peak: p[15],
            decay_rate_raw: p[16],
            intensity_sh,
            raydrop_sh,
        }
    }
}

/// Orthonormalizes `(a, b)` keeping the direction of `a`; falls back to an
/// arbitrary perpendicular when `b` is (nearly) parallel to `a`.
pub fn orthonormal_pair(a: &Vec3, b: &Vec3) -> (Vec3, Vec3) {
    let u = a.try_normalize(1e-300).unwrap_or_else(Vec3::x);
    let mut v = b - u * u.dot(b);
    if v.norm() < 1e-12 * b.norm().max(1.0) {
        let helper = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        v = helper - u * u.dot(&helper);
    }
    let v = v.normalize();
    // second pass keeps |u.v| at rounding level
    let v = (v - u * u.dot(&v)).normalize();
    (u, v)
}

/// Per-pixel ray-drop prior, stored as logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorMap {
    pub width: usize,
    pub height: usize,
    pub logits: Vec<f64>,
}

impl PriorMap {
    pub fn constant(width: usize, height: usize, probability: f64) -> Self {
        PriorMap { width, height, logits: vec![logit(probability); width * height] }
    }

    pub fn probability(&self, index: usize) -> f64 {
        sigmoid(self.logits[index])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<SplatPrimitive>,
    /// Vibration cycle length `l`, seconds.
    pub cycle_length: f64,
    pub raydrop_prior: PriorMap,
}

impl Scene {
    pub fn new(primitives: Vec<SplatPrimitive>, cycle_length: f64, raydrop_prior: PriorMap) -> Result<Self> {
        if !(cycle_length > 0.0) {
            return Err(Error::contract("cycle length must be positive"));
        }
        Ok(Scene { primitives, cycle_length, raydrop_prior })
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

/// A LiDAR return used to seed primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub position: Vec3,
    pub intensity: f64,
    /// Capture time, seconds.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    /// Upper bound on primitives; the cloud is uniformly sub-sampled beyond it.
    pub max_points: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub initial_opacity: f64,
    pub seed: u64,
    /// Sequence time span `(start, end)`, seconds.
    pub time_range: (f64, f64),
    /// Overrides the default cycle length of 0.2 x sequence duration.
    pub cycle_length: Option<f64>,
    /// Prior map size `(width, height)`.
    pub prior_size: (usize, usize),
    pub prior_probability: f64,
    /// Start each life peak at its point's capture time instead of the
    /// sequence midpoint.
    pub life_peak_from_points: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            max_points: 1_000_000,
            scale_min: 0.01,
            scale_max: 1.0,
            initial_opacity: 0.1,
            seed: 0,
            time_range: (0.0, 1.0),
            cycle_length: None,
            prior_size: (1024, 64),
            prior_probability: 0.05,
            life_peak_from_points: false,
        }
    }
}

impl InitConfig {
    pub fn duration(&self) -> f64 {
        (self.time_range.1 - self.time_range.0).abs()
    }

    pub fn resolved_cycle_length(&self) -> f64 {
        self.cycle_length.unwrap_or_else(|| {
            let d = self.duration();
            if d > 0.0 {
                0.2 * d
            } else {
                1.0
            }
        })
    }
}

const INIT_NEIGHBORS: usize = 3;

/// One static, low-opacity primitive per (sub-sampled) point, sized from the
/// mean distance to its three nearest neighbors.
pub fn init_from_pointcloud(points: &[PointSample], config: &InitConfig) -> Result<Scene> {
    if points.is_empty() {
        return Err(Error::Empty("point cloud for initialization"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chosen: Vec<PointSample> = if points.len() > config.max_points {
        rand::seq::index::sample(&mut rng, points.len(), config.max_points).into_iter().map(|i| points[i]).collect()
    } else {
        points.to_vec()
    };

    let positions: Vec<Vec3> = chosen.iter().map(|p| p.position).collect();
    let index = PointIndex::new(&positions);

    let duration = config.duration();
    let mid = 0.5 * (config.time_range.0 + config.time_range.1);
    let beta = if duration > 0.0 { 10.0 * duration } else { 10.0 };
    let (pw, ph) = config.prior_size;

    let mut primitives = Vec::with_capacity(chosen.len());
    for (i, p) in chosen.iter().enumerate() {
        let found = index.nearest_k(&p.position, INIT_NEIGHBORS + 1);
        let dists: Vec<f64> = found.iter().filter(|n| n.0 != i).take(INIT_NEIGHBORS).map(|n| n.1.sqrt()).collect();
        let scale =
            if dists.is_empty() { config.scale_max } else { (dists.iter().sum::<f64>() / dists.len() as f64).clamp(config.scale_min, config.scale_max) };
        let (tu, tv) = random_frame(&mut rng);
        let mut prim = SplatPrimitive::new_static(p.position, tu, tv, [scale, scale], config.initial_opacity, p.intensity);
        prim.life_peak = if config.life_peak_from_points { p.time } else { mid };
        prim.decay_rate_raw = beta.ln();
        primitives.push(prim);
    }
    Scene::new(primitives, config.resolved_cycle_length(), PriorMap::constant(pw, ph, config.prior_probability))
}

fn random_frame(rng: &mut impl Rng) -> (Vec3, Vec3) {
    let mut draw = || loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    };
    let a = draw();
    let b = draw();
    orthonormal_pair(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prim() -> SplatPrimitive {
        SplatPrimitive::new_static(Vec3::new(1.0, 2.0, 3.0), Vec3::x(), Vec3::y(), [1.0, 1.0], 0.9, 0.5)
    }

    #[test]
    fn position_at_peak_and_zero_direction() {
        let mut p = prim();
        p.vib_dir = Vec3::new(0.3, -1.0, 2.0);
        p.life_peak = 0.7;
        assert_eq!(p.position_at(0.7, 2.0), p.mu);
        p.vib_dir = Vec3::zeros();
        assert_eq!(p.position_at(5.3, 2.0), p.mu);
    }

    #[test]
    fn position_quarter_cycle() {
        let mut p = prim();
        p.vib_dir = Vec3::z();
        p.life_peak = 0.0;
        let l = 2.0 * PI;
        let got = p.position_at(l / 4.0, l);
        assert!((got - (p.mu + Vec3::z())).norm() < 1e-15);
    }

    #[test]
    fn opacity_examples() {
        let mut p = prim();
        p.life_peak = 1.0;
        p.decay_rate_raw = 0.5f64.ln();
        assert!((p.opacity_at(1.0) - 0.9).abs() < 1e-15);
        p.opacity_raw = 40.0; // o = 1 in f64
        assert!((p.opacity_at(1.5) - (-0.5f64).exp()).abs() < 1e-12);
        p.opacity_raw = logit(0.9);
        let far = p.opacity_at(1.0 + 10.0 * 0.5);
        assert!((far - 0.9 * (-50.0f64).exp()).abs() < 1e-30);
        assert!((far - 1.74e-22).abs() < 0.01e-22);
    }

    #[test]
    fn basis_examples() {
        let mut p = prim();
        p.mu = Vec3::new(0.0, 0.0, 5.0);
        p.log_scale = [2.0f64.ln(), 0.0];
        let h = p.basis(0.0, 1.0);
        let center = h * nalgebra::Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(center, nalgebra::Vector4::new(0.0, 0.0, 5.0, 1.0));
        let q = h * nalgebra::Vector3::new(1.0, 0.0, 1.0);
        assert!((q - nalgebra::Vector4::new(2.0, 0.0, 5.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn param_round_trip_and_slots() {
        let mut p = prim();
        p.vib_dir = Vec3::new(0.1, 0.2, 0.3);
        p.raydrop_sh[4] = 0.25;
        let q = SplatPrimitive::from_params(&p.to_params());
        assert_eq!(p, q);
        let covered: usize = ParamSlot::ALL.iter().map(|s| s.range().len()).sum();
        assert_eq!(covered, PARAM_COUNT);
        assert_eq!(ParamSlot::of_index(11), ParamSlot::Opacity);
        assert_eq!(ParamSlot::of_index(PARAM_COUNT - 1), ParamSlot::RaydropSh);
    }

    #[test]
    fn prune_peak_opacity() {
        let mut p = prim();
        p.life_peak = 5.0;
        p.decay_rate_raw = 0.0;
        assert!((p.peak_opacity_over(0.0, 10.0) - 0.9).abs() < 1e-15);
        assert!((p.peak_opacity_over(0.0, 4.0) - p.opacity_at(4.0)).abs() < 1e-15);
    }

    #[test]
    fn init_single_point() {
        let pts = [PointSample { position: Vec3::zeros(), intensity: 0.4, time: 0.0 }];
        let scene = init_from_pointcloud(&pts, &InitConfig::default()).unwrap();
        assert_eq!(scene.len(), 1);
        assert_eq!(scene.primitives[0].mu, Vec3::zeros());
        let p = &scene.primitives[0];
        assert!((p.opacity() - 0.1).abs() < 1e-12);
        assert_eq!(p.vib_dir, Vec3::zeros());
        let dc = crate::sh::eval_sh(&p.intensity_sh, &Vec3::z()).unwrap();
        assert!((dc - 0.4).abs() < 1e-12);
        assert_eq!(crate::sh::eval_sh(&p.raydrop_sh, &Vec3::z()).unwrap(), 0.0);
    }

    #[test]
    fn init_life_peaks() {
        let pts = [PointSample { position: Vec3::zeros(), intensity: 0.4, time: 0.3 }, PointSample { position: Vec3::x(), intensity: 0.4, time: 1.7 }];
        let cfg = InitConfig { time_range: (0.0, 2.0), ..InitConfig::default() };
        let mid = init_from_pointcloud(&pts, &cfg).unwrap();
        assert!(mid.primitives.iter().all(|p| p.life_peak == 1.0));
        assert!((mid.primitives[0].decay_rate() - 20.0).abs() < 1e-12);
        let own = init_from_pointcloud(&pts, &InitConfig { life_peak_from_points: true, ..cfg }).unwrap();
        assert_eq!((own.primitives[0].life_peak, own.primitives[1].life_peak), (0.3, 1.7));
    }

    #[test]
    fn init_duplicate_points_clamp_to_min_scale() {
        let q = Vec3::new(1.0, 1.0, 1.0);
        let pts = [PointSample { position: q, intensity: 0.1, time: 0.0 }, PointSample { position: q, intensity: 0.1, time: 0.0 }];
        let cfg = InitConfig { scale_min: 0.02, ..InitConfig::default() };
        let scene = init_from_pointcloud(&pts, &cfg).unwrap();
        for p in &scene.primitives {
            let s = p.scale();
            assert!((s[0] - 0.02).abs() < 1e-12 && (s[1] - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn init_rejects_empty() {
        assert!(matches!(init_from_pointcloud(&[], &InitConfig::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn init_grid_scale_matches_brute_force_knn() {
        let d = 0.25;
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..9 {
                pts.push(PointSample { position: Vec3::new(i as f64 * d, j as f64 * d, 4.0), intensity: 0.5, time: 0.0 });
            }
        }
        let scene = init_from_pointcloud(&pts, &InitConfig::default()).unwrap();
        // brute-force mean of the three nearest distances
        let mut brute: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut ds: Vec<f64> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| (q.position - p.position).norm()).collect();
                ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ds[..3].iter().sum::<f64>() / 3.0
            })
            .collect();
        let mut got: Vec<f64> = scene.primitives.iter().map(|p| p.scale()[0]).collect();
        for (a, b) in got.iter().zip(brute.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = got[got.len() / 2];
        assert!(median >= 0.5 * d && median <= 2.0 * d, "median {median}");
    }

    #[test]
    fn init_frames_are_orthonormal() {
        let pts: Vec<PointSample> = (0..50).map(|i| PointSample { position: Vec3::new(i as f64, 0.0, 1.0), intensity: 0.2, time: 0.0 }).collect();
        let scene = init_from_pointcloud(&pts, &InitConfig { seed: 9, ..InitConfig::default() }).unwrap();
        for p in &scene.primitives {
            assert!(p.tu.dot(&p.tv).abs() < 1e-12);
            assert!((p.tu.norm() - 1.0).abs() < 1e-12);
        }
    }

    fn arb_vec3() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn position_is_periodic(mu in arb_vec3(), v in arb_vec3(), tau in -5.0..5.0f64, t in -5.0..5.0f64, l in 0.1..10.0f64) {
            let mut p = prim();
            p.mu = mu;
            p.vib_dir = v;
            p.life_peak = tau;
            let a = p.position_at(t, l);
            let b = p.position_at(t + l, l);
            prop_assert!((a - b).norm() < 1e-12 * (1.0 + v.norm() * l));
        }

        #[test]
        fn opacity_symmetric_about_peak(tau in -5.0..5.0f64, delta in 0.0..5.0f64, braw in -2.0..2.0f64) {
            let mut p = prim();
            p.life_peak = tau;
            p.decay_rate_raw = braw;
            let a = p.opacity_at(tau + delta);
            let b = p.opacity_at(tau - delta);
            // (tau + d) - tau and (tau - d) - tau are exact negatives only up to rounding of the sum
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-300));
            prop_assert!(a > 0.0 || delta > 0.0);
            prop_assert!(a <= p.opacity());
        }

        #[test]
        fn basis_matches_direct_expansion(mu in arb_vec3(), a in arb_vec3(), b in arb_vec3(), u in -3.0..3.0f64, v in -3.0..3.0f64, ls0 in -3.0..1.0f64, ls1 in -3.0..1.0f64, t in 0.0..2.0f64) {
            let (tu, tv) = orthonormal_pair(&a, &b);
            let mut p = prim();
            p.mu = mu; p.tu = tu; p.tv = tv; p.log_scale = [ls0, ls1];
            p.vib_dir = Vec3::new(0.2, 0.1, -0.3);
            let h = p.basis(t, 1.5);
            let got = h * nalgebra::Vector3::new(u, v, 1.0);
            let [su, sv] = p.scale();
            let want = p.position_at(t, 1.5) + tu * su * u + tv * sv * v;
            prop_assert!((got.xyz() - want).norm() < 1e-12 * (1.0 + want.norm()));
            prop_assert_eq!(got.w, 1.0);
            // affine in (u, v)
            let alpha = 0.3;
            let q = h * nalgebra::Vector3::new(alpha * u + (1.0 - alpha) * 0.5, alpha * v + (1.0 - alpha) * -1.0, 1.0);
            let q2 = alpha * got + (1.0 - alpha) * (h * nalgebra::Vector3::new(0.5, -1.0, 1.0));
            prop_assert!((q - q2).norm() < 1e-10 * (1.0 + q.norm()));
        }

        #[test]
        fn reorthonormalization_holds(a in arb_vec3(), b in arb_vec3()) {
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let mut p = prim();
            p.tu = a; p.tv = b;
            p.orthonormalize_frame();
            prop_assert!(p.tu.dot(&p.tv).abs() < 1e-10);
            prop_assert!((p.tu.norm() - 1.0).abs() < 1e-10);
            prop_assert!((p.tv.norm() - 1.0).abs() < 1e-10);
        }
    }
}
