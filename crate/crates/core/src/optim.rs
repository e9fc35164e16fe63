//! Adam updates with per-attribute learning rates, pruning, and the training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{evaluate, LossOptions, LossTerms, LossWeights, Target};
use crate::panocam::Pose;
use crate::raster::{backward, render_with_tape, GradientSet, RasterConfig};
use crate::scene::{ParamSlot, Scene, PARAM_COUNT};
use crate::{Error, Result, Vec3};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    /// Initial center rate, multiplied by the scene extent.
    pub position: f64,
    /// Center rate reached at the last iteration (exponential decay).
    pub position_final: f64,
    pub vibration: f64,
    pub frame: f64,
    pub scale: f64,
    pub opacity: f64,
    pub life_peak: f64,
    pub decay_rate: f64,
    pub sh: f64,
    pub prior: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            position: 1.6e-4,
            position_final: 1.6e-6,
            vibration: 1.6e-4,
            frame: 5e-3,
            scale: 5e-3,
            opacity: 5e-2,
            life_peak: 5e-4,
            decay_rate: 5e-3,
            sh: 2.5e-3,
            prior: 5e-3,
        }
    }
}

impl LearningRates {
    fn all(&self) -> [f64; 10] {
        [self.position, self.position_final, self.vibration, self.frame, self.scale, self.opacity, self.life_peak, self.decay_rate, self.sh, self.prior]
    }

    /// Per-coordinate rates for one primitive block at `iteration` of `total`.
    pub fn table(&self, extent: f64, iteration: usize, total: usize) -> [f64; PARAM_COUNT] {
        let frac = if total > 1 { (iteration as f64 / (total - 1) as f64).min(1.0) } else { 0.0 };
        let position =
            if self.position > 0.0 && self.position_final > 0.0 { self.position * (self.position_final / self.position).powf(frac) } else { self.position };
        let mut table = [0.0; PARAM_COUNT];
        for slot in ParamSlot::ALL {
            let lr = match slot {
                ParamSlot::Position => position * extent,
                ParamSlot::TangentU | ParamSlot::TangentV => self.frame,
                ParamSlot::LogScale => self.scale,
                ParamSlot::Opacity => self.opacity,
                ParamSlot::Vibration => self.vibration,
                ParamSlot::LifePeak => self.life_peak,
                ParamSlot::DecayRate => self.decay_rate,
                ParamSlot::IntensitySh | ParamSlot::RaydropSh => self.sh,
            };
            table[slot.range()].iter_mut().for_each(|v| *v = lr);
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: LearningRates,
    /// Overrides the extent derived from the training points.
    pub scene_extent: Option<f64>,
    /// Prune every this many iterations; 0 disables pruning.
    pub prune_interval: usize,
    pub prune_opacity: f64,
    pub weights: LossWeights,
    pub chamfer_samples: usize,
    pub seed: u64,
    pub raster: RasterConfig,
    /// Log every this many iterations (the first and last are always logged).
    pub log_interval: usize,
    /// Keep every vibration vector at zero.
    pub freeze_vibration: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 30_000,
            lr: LearningRates::default(),
            scene_extent: None,
            prune_interval: 500,
            prune_opacity: 0.005,
            weights: LossWeights::default(),
            chamfer_samples: crate::losses::CHAMFER_SAMPLES,
            seed: 0,
            raster: RasterConfig::default(),
            log_interval: 1,
            freeze_vibration: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::contract("iterations must be at least 1"));
        }
        if self.lr.all().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::contract("learning rates must be finite and non-negative"));
        }
        if !(self.prune_opacity >= 0.0) {
            return Err(Error::contract("prune opacity must be non-negative"));
        }
        if self.raster.tile_size == 0 {
            return Err(Error::contract("tile size must be positive"));
        }
        self.weights.validate()
    }
}

/// First and second moments for every scene parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<[f64; PARAM_COUNT]>,
    pub v: Vec<[f64; PARAM_COUNT]>,
    pub m_prior: Vec<f64>,
    pub v_prior: Vec<f64>,
}

impl AdamState {
    pub fn new(scene: &Scene) -> Self {
        let n = scene.len();
        let p = scene.raydrop_prior.logits.len();
        AdamState { step: 0, m: vec![[0.0; PARAM_COUNT]; n], v: vec![[0.0; PARAM_COUNT]; n], m_prior: vec![0.0; p], v_prior: vec![0.0; p] }
    }

    pub fn matches(&self, scene: &Scene) -> bool {
        self.m.len() == scene.len()
            && self.v.len() == scene.len()
            && self.m_prior.len() == scene.raydrop_prior.logits.len()
            && self.v_prior.len() == scene.raydrop_prior.logits.len()
    }
}

/// One bias-corrected Adam update of `params` in place. `step` is the 1-based step index.
pub fn adaptive_step(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], lr: &[f64], step: u64) {
    let bc1 = 1.0 - ADAM_BETA1.powf(step as f64);
    let bc2 = 1.0 - ADAM_BETA2.powf(step as f64);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr[i] * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Removes primitives whose peak decayed opacity over `time_range` is below
/// `threshold`, keeping order. Returns the kept indices.
pub fn prune(scene: &mut Scene, threshold: f64, time_range: (f64, f64)) -> Result<Vec<usize>> {
    let keep: Vec<usize> = (0..scene.len()).filter(|&i| scene.primitives[i].peak_opacity_over(time_range.0, time_range.1) >= threshold).collect();
    if keep.is_empty() && !scene.is_empty() {
        return Err(Error::Empty("scene after pruning (every primitive is below the opacity threshold)"));
    }
    if keep.len() != scene.len() {
        scene.primitives = keep.iter().map(|&i| scene.primitives[i].clone()).collect();
    }
    Ok(keep)
}

/// One supervised frame.
#[derive(Debug, Clone)]
pub struct TrainingFrame {
    pub target: Target,
    pub pose: Pose,
    pub time: f64,
}

impl TrainingFrame {
    /// Ground-truth hits in the world frame.
    pub fn world_points(&self) -> Vec<Vec3> {
        self.target.points.iter().map(|p| self.pose.sensor_to_world(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub frame: usize,
    pub total: f64,
    pub terms: LossTerms,
    pub primitives: usize,
    pub empty_mask: bool,
}

/// Radius of the bounding sphere of every training point.
pub fn scene_extent(frames: &[TrainingFrame]) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for f in frames {
        for p in f.world_points() {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
    }
    if lo.x.is_finite() {
        (0.5 * (hi - lo).norm()).max(1e-3)
    } else {
        1.0
    }
}

pub struct Trainer {
    pub scene: Scene,
    pub adam: AdamState,
    pub config: TrainConfig,
    /// Iterations completed so far.
    pub iteration: usize,
    order: Vec<usize>,
    extent: f64,
    time_range: (f64, f64),
}

impl Trainer {
    pub fn new(scene: Scene, frames: &[TrainingFrame], config: TrainConfig) -> Result<Self> {
        let adam = AdamState::new(&scene);
        Self::resume(scene, adam, 0, frames, config)
    }

    /// Continues from a saved scene, optimizer state and iteration count.
    pub fn resume(mut scene: Scene, adam: AdamState, iteration: usize, frames: &[TrainingFrame], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if frames.is_empty() {
            return Err(Error::Empty("training frames"));
        }
        if !adam.matches(&scene) {
            return Err(Error::contract("optimizer state does not match the scene"));
        }
        let s = &frames[0].target.sensor;
        if scene.raydrop_prior.width != s.width || scene.raydrop_prior.height != s.height {
            return Err(Error::contract("ray-drop prior size does not match the sensor"));
        }
        if config.freeze_vibration {
            scene.primitives.iter_mut().for_each(|p| p.vib_dir = Vec3::zeros());
        }
        let mut order: Vec<usize> = (0..frames.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        let extent = config.scene_extent.unwrap_or_else(|| scene_extent(frames));
        let t0 = frames.iter().map(|f| f.time).fold(f64::INFINITY, f64::min);
        let t1 = frames.iter().map(|f| f.time).fold(f64::NEG_INFINITY, f64::max);
        Ok(Trainer { scene, adam, config, iteration, order, extent, time_range: (t0, t1) })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    /// Frame visited at a given iteration.
    pub fn frame_at(&self, iteration: usize) -> usize {
        self.order[iteration % self.order.len()]
    }

    /// Loss and gradients on one frame without updating anything.
    pub fn gradients(&self, frame: &TrainingFrame, seed: u64) -> Result<(f64, LossTerms, bool, GradientSet)> {
        let (out, tape) = render_with_tape(&self.scene, frame.time, &frame.target.sensor, &frame.pose, &self.config.raster)?;
        let opts = LossOptions { chamfer_samples: self.config.chamfer_samples, seed };
        let ev = evaluate(&out, &frame.target, &self.config.weights, &opts).map_err(|e| match e {
            Error::Degenerate(_) => Error::NonFiniteLoss { iteration: self.iteration },
            other => other,
        })?;
        if !ev.total.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: self.iteration });
        }
        let grads = backward(&tape, &self.scene, &ev.grads)?;
        Ok((ev.total, ev.terms, ev.empty_mask, grads))
    }

    /// Runs one iteration. On error the scene and optimizer state are untouched.
    pub fn step(&mut self, frames: &[TrainingFrame]) -> Result<IterationLog> {
        let fi = self.frame_at(self.iteration);
        let seed = self.config.seed ^ (self.iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let (total, terms, empty_mask, grads) = self.gradients(&frames[fi], seed)?;

        self.adam.step += 1;
        let t = self.adam.step;
        let mut table = self.config.lr.table(self.extent, self.iteration, self.config.iterations);
        if self.config.freeze_vibration {
            table[ParamSlot::Vibration.range()].iter_mut().for_each(|v| *v = 0.0);
        }
        for (i, prim) in self.scene.primitives.iter_mut().enumerate() {
            let mut params = prim.to_params();
            adaptive_step(&mut params, &grads.primitives[i], &mut self.adam.m[i], &mut self.adam.v[i], &table, t);
            *prim = crate::scene::SplatPrimitive::from_params(&params);
            prim.orthonormalize_frame();
        }
        let prior_lr = vec![self.config.lr.prior; grads.prior_logits.len()];
        adaptive_step(&mut self.scene.raydrop_prior.logits, &grads.prior_logits, &mut self.adam.m_prior, &mut self.adam.v_prior, &prior_lr, t);

        let log = IterationLog { iteration: self.iteration, frame: fi, total, terms, primitives: self.scene.len(), empty_mask };
        self.iteration += 1;
        if self.config.prune_interval > 0 && self.iteration % self.config.prune_interval == 0 && self.iteration < self.config.iterations {
            self.prune_now()?;
        }
        Ok(log)
    }

    pub fn prune_now(&mut self) -> Result<()> {
        let keep = prune(&mut self.scene, self.config.prune_opacity, self.time_range)?;
        if keep.len() != self.adam.m.len() {
            self.adam.m = keep.iter().map(|&i| self.adam.m[i]).collect();
            self.adam.v = keep.iter().map(|&i| self.adam.v[i]).collect();
        }
        Ok(())
    }

    fn should_log(&self, iteration: usize) -> bool {
        let k = self.config.log_interval.max(1);
        iteration % k == 0 || iteration + 1 == self.config.iterations
    }

    /// Runs until `config.iterations`, passing every logged record to `sink`.
    pub fn run(&mut self, frames: &[TrainingFrame], mut sink: impl FnMut(&IterationLog) -> Result<()>) -> Result<()> {
        while !self.done() {
            let log = self.step(frames)?;
            if self.should_log(log.iteration) {
                sink(&log)?;
            }
        }
        Ok(())
    }
}
