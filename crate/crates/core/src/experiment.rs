//! Reproducible scene and data fixtures shared by tests, benchmarks and the CLI.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use crate::lidario::{range_to_points, trace_frame, BoxSpec, DropModel, Frame, Material, ObjectRef, PlaneSpec, SensorSpec, SyntheticSceneSpec, Trajectory};
use crate::losses::Target;
use crate::metrics::{evaluate_frame, FrameMetrics, MetricsConfig};
use crate::optim::{LearningRates, TrainConfig, TrainingFrame};
use crate::panocam::{angles_to_dir, Pose, RayAngles, SensorModel};
use crate::raster::{render, RasterConfig, RenderOutput};
use crate::scene::{init_from_pointcloud, logit, orthonormal_pair, InitConfig, PriorMap, Scene, SplatPrimitive};
use crate::{Error, Result, Vec3};

/// A small dynamic scene with every attribute away from its default, plus a
/// target rendered from a perturbed copy of it.
pub struct GradientFixture {
    pub scene: Scene,
    pub sensor: SensorModel,
    pub pose: Pose,
    pub time: f64,
    pub target: Target,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// `count` splats spread around the horizon of a 16x64 panorama.
pub fn gradient_fixture(seed: u64, count: usize) -> Result<GradientFixture> {
    let sensor = SensorModel::new(64, 16, 1.2, 1.95)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = random_scene(&mut rng, count, &sensor, true)?;
    let mut reference = random_scene(&mut rng, count, &sensor, false)?;
    for (r, s) in reference.primitives.iter_mut().zip(&scene.primitives) {
        r.mu = s.mu + random_unit(&mut rng) * 0.3;
    }
    let pose = Pose::from_rotation_origin(nalgebra::Rotation3::from_euler_angles(0.02, 0.3, -0.01).into_inner(), Vec3::new(0.1, -0.05, 0.2))?;
    let time = 0.37;
    let gt = render(&reference, time, &sensor, &pose, &RasterConfig::default())?;
    let range: Vec<f64> = (0..sensor.pixel_count()).map(|i| if gt.accum_alpha[i] > 0.5 { gt.mean_depth[i] / gt.accum_alpha[i] } else { 0.0 }).collect();
    let intensity: Vec<f64> = (0..sensor.pixel_count()).map(|i| if range[i] > 0.0 { gt.intensity[i].clamp(0.0, 1.0) } else { 0.0 }).collect();
    let target = Target::new(sensor, range, intensity)?;
    Ok(GradientFixture { scene, sensor, pose, time, target })
}

fn random_scene(rng: &mut ChaCha8Rng, count: usize, sensor: &SensorModel, dynamic: bool) -> Result<Scene> {
    let mut prims = Vec::with_capacity(count);
    for k in 0..count {
        let phi = -PI + 2.0 * PI * (k as f64 + rng.gen_range(0.2..0.8)) / count as f64;
        let theta = rng.gen_range(sensor.vfov_min + 0.15..sensor.vfov_max - 0.15);
        let dist = rng.gen_range(3.0..7.0);
        let center = angles_to_dir(RayAngles { phi, theta }) * dist;
        // mostly facing the sensor, tilted
        let facing = (-center.normalize() + random_unit(rng) * 0.4).normalize();
        let tu = facing.cross(&random_unit(rng));
        let (tu, tv) = orthonormal_pair(&tu, &facing.cross(&tu));
        let scale = [rng.gen_range(0.8..1.6), rng.gen_range(0.8..1.6)];
        let mut p = SplatPrimitive::new_static(center, tu, tv, scale, rng.gen_range(0.3..0.8), rng.gen_range(0.2..0.6));
        if dynamic {
            p.vib_dir = random_unit(rng) * 0.3;
            p.life_peak = rng.gen_range(0.0..0.8);
            p.decay_rate_raw = rng.gen_range(0.5f64..1.5).ln();
        }
        for c in p.intensity_sh.iter_mut().skip(1) {
            *c = rng.gen_range(-0.1..0.1);
        }
        p.raydrop_sh[0] = rng.gen_range(0.3..1.2);
        for c in p.raydrop_sh.iter_mut().skip(1) {
            *c = rng.gen_range(-0.1..0.1);
        }
        prims.push(p);
    }
    let mut prior = PriorMap::constant(sensor.width, sensor.height, 0.1);
    for l in prior.logits.iter_mut() {
        *l = logit(rng.gen_range(0.02..0.3));
    }
    Scene::new(prims, 1.1, prior)
}

/// Which frames of a sequence are held out for evaluation: index `k` is held
/// out when `k % every == offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoldOut {
    pub every: usize,
    pub offset: usize,
}

impl Default for HoldOut {
    fn default() -> Self {
        HoldOut { every: 10, offset: 5 }
    }
}

impl HoldOut {
    pub fn validate(&self) -> Result<()> {
        if self.every < 2 || self.offset >= self.every {
            return Err(Error::contract("hold-out needs every >= 2 and offset < every"));
        }
        Ok(())
    }

    pub fn is_held_out(&self, k: usize) -> bool {
        k % self.every == self.offset
    }

    /// `(train, test)` frame indices.
    pub fn split(&self, n: usize) -> (Vec<usize>, Vec<usize>) {
        (0..n).partition(|&k| !self.is_held_out(k))
    }
}

pub fn training_frames(frames: &[Frame], sensor: &SensorModel) -> Result<Vec<TrainingFrame>> {
    frames.iter().map(|f| Ok(TrainingFrame { target: f.to_target(sensor)?, pose: f.pose, time: f.timestamp })).collect()
}

/// Primitives seeded from the pooled world points of `frames`.
pub fn initial_scene(frames: &[Frame], sensor: &SensorModel, init: &InitConfig) -> Result<Scene> {
    let mut points = Vec::new();
    for f in frames {
        points.extend(range_to_points(f, sensor)?);
    }
    let t0 = frames.iter().map(|f| f.timestamp).fold(f64::INFINITY, f64::min);
    let t1 = frames.iter().map(|f| f.timestamp).fold(f64::NEG_INFINITY, f64::max);
    let cfg = InitConfig { time_range: (t0, t1), prior_size: (sensor.width, sensor.height), ..init.clone() };
    init_from_pointcloud(&points, &cfg)
}

/// How rendered maps become a range frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderPolicy {
    /// A pixel is dropped when its ray-drop probability reaches this.
    pub drop_threshold: f64,
    pub apply_drop: bool,
    /// Pixels with less accumulated opacity have no surface and are dropped.
    pub min_accum: f64,
    pub depth: DepthSource,
}

/// Which rendered depth map becomes the output range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthSource {
    /// Blended depth normalized by accumulated opacity.
    Mean,
    /// Depth where transmittance crosses one half; keeps silhouettes sharp.
    Median,
}

impl Default for RenderPolicy {
    fn default() -> Self {
        RenderPolicy { drop_threshold: 0.5, apply_drop: true, min_accum: 0.5, depth: DepthSource::Mean }
    }
}

/// Range is the opacity-normalized mean depth; intensity is clamped to `[0, 1]`.
pub fn output_to_frame(out: &RenderOutput, timestamp: f64, pose: &Pose, policy: &RenderPolicy) -> Result<Frame> {
    let n = out.pixel_count();
    let mut range = vec![0f32; n];
    let mut intensity = vec![0f32; n];
    for i in 0..n {
        let a = out.accum_alpha[i];
        let dropped = policy.apply_drop && out.raydrop[i] >= policy.drop_threshold;
        if a >= policy.min_accum && a > 0.0 && !dropped {
            let r = match policy.depth {
                DepthSource::Mean => (out.mean_depth[i] / a) as f32,
                DepthSource::Median => out.median_depth[i] as f32,
            };
            if r > 0.0 && r.is_finite() {
                range[i] = r;
                intensity[i] = out.intensity[i].clamp(0.0, 1.0) as f32;
            }
        }
    }
    Frame::new(out.width, out.height, range, intensity, timestamp, *pose)
}

pub fn render_frame(scene: &Scene, sensor: &SensorModel, pose: &Pose, time: f64, raster: &RasterConfig, policy: &RenderPolicy) -> Result<Frame> {
    output_to_frame(&render(scene, time, sensor, pose, raster)?, time, pose, policy)
}

/// Metrics of the scene re-rendered at every frame's pose and time.
pub fn evaluate_frames(
    scene: &Scene,
    frames: &[Frame],
    sensor: &SensorModel,
    raster: &RasterConfig,
    policy: &RenderPolicy,
    metrics: &MetricsConfig,
) -> Result<Vec<FrameMetrics>> {
    frames.iter().map(|gt| evaluate_frame(&render_frame(scene, sensor, &gt.pose, gt.timestamp, raster, policy)?, gt, sensor, metrics)).collect()
}

/// Pixels whose analytic nearest hit is `object`.
pub fn object_mask(spec: &SyntheticSceneSpec, sensor: &SensorModel, pose: &Pose, time: f64, object: ObjectRef) -> Vec<bool> {
    trace_frame(spec, sensor, pose, time).iter().map(|h| h.is_some_and(|h| h.object == object)).collect()
}

/// Everything needed to run one reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SyntheticSceneSpec,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub holdout: HoldOut,
    #[serde(default)]
    pub render: RenderPolicy,
}

pub const PRESETS: [&str; 3] = ["smoke", "box-room", "dynamic-room"];

fn plane(point: [f64; 3], normal: [f64; 3], intensity: f64) -> PlaneSpec {
    PlaneSpec { point, normal, axis_u: None, half_extent: None, material: Material { intensity, drop_base: 0.01, drop_grazing: 0.2 } }
}

/// Floor 1.7 m below the sensor and four walls tall enough to close the view.
fn room_spec(width: usize, height: usize, frames: usize) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        seed: 7,
        sensor: SensorSpec { width, height, vfov_min: 1.53, vfov_max: 1.99, max_range: 80.0 },
        drop: DropModel { r_atten: 60.0, range_coeff: 0.0, grazing_exponent: 8.0 },
        planes: vec![
            plane([0.0, 1.7, 0.0], [0.0, -1.0, 0.0], 0.5),
            plane([-4.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.7),
            plane([4.0, 0.0, 0.0], [-1.0, 0.0, 0.0], 0.6),
            plane([0.0, 0.0, -4.0], [0.0, 0.0, 1.0], 0.8),
            plane([0.0, 0.0, 8.0], [0.0, 0.0, -1.0], 0.55),
        ],
        boxes: vec![],
        spheres: vec![],
        trajectory: Trajectory::Linear { start: [0.0, 0.0, 0.0], velocity: [0.0, 0.0, 1.0], frames, dt: 0.1, t0: 0.0, yaw: 0.0 },
    }
}

/// Named experiment configurations.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base_train = TrainConfig { log_interval: 1, ..TrainConfig::default() };
    match name {
        "smoke" => Ok(ExperimentConfig {
            scene: room_spec(64, 16, 10),
            init: InitConfig { max_points: 8, scale_min: 0.05, scale_max: 1.0, ..InitConfig::default() },
            train: TrainConfig { iterations: 50, prune_interval: 0, ..base_train },
            holdout: HoldOut::default(),
            render: RenderPolicy::default(),
        }),
        "box-room" => Ok(ExperimentConfig {
            scene: room_spec(256, 32, 20),
            init: InitConfig { max_points: 3000, scale_min: 0.02, scale_max: 0.5, ..InitConfig::default() },
            train: TrainConfig { iterations: 1500, prune_interval: 500, ..base_train },
            holdout: HoldOut::default(),
            render: RenderPolicy::default(),
        }),
        "dynamic-room" => {
            let mut scene = room_spec(256, 32, 20);
            scene.boxes.push(BoxSpec {
                center: [-1.5, 1.0, 4.0],
                half_extent: [0.5, 0.7, 0.5],
                velocity: [1.0, 0.0, 0.0],
                material: Material { intensity: 0.9, drop_base: 0.01, drop_grazing: 0.2 },
            });
            Ok(ExperimentConfig {
                scene,
                // a cycle much longer than the sequence makes vibration act as
                // near-linear motion, and per-point life peaks start each
                // primitive where it was observed
                init: InitConfig {
                    max_points: 3000,
                    scale_min: 0.02,
                    scale_max: 0.5,
                    cycle_length: Some(20.0),
                    life_peak_from_points: true,
                    ..InitConfig::default()
                },
                train: TrainConfig { iterations: 3000, prune_interval: 500, lr: LearningRates { vibration: 5e-3, ..LearningRates::default() }, ..base_train },
                holdout: HoldOut::default(),
                render: RenderPolicy::default(),
            })
        }
        other => Err(Error::contract(format!("unknown preset '{other}', expected one of {}", PRESETS.join(", ")))),
    }
}
