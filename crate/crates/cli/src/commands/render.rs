use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use panosplat::baseline3d::{render_baseline, Scene3D};
use panosplat::experiment::{output_to_frame, DepthSource, HoldOut, RenderPolicy};
use panosplat::lidario::{load_checkpoint, range_to_points, Frame};
use panosplat::panocam::{Pose, SensorModel};
use panosplat::raster::{render, RasterConfig};
use panosplat::scene::Scene;

use crate::error::{CliError, CliResult, IoContext};
use crate::manifest::{create_dir, load_poses, now_unix, write_frames, Manifest, MANIFEST_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderPath {
    /// Per-pixel ray-splat intersection.
    Exact,
    /// Linearized 3D Gaussian projection.
    Baseline3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Depth {
    /// Opacity-normalized blended depth.
    Mean,
    /// Depth where transmittance crosses one half.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Data directory supplying the sensor and, without --poses, the poses.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON list of {"timestamp", "pose": 16 row-major values}.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Which manifest frames to render when --poses is absent.
    #[arg(long, value_enum, default_value = "all")]
    pub split: Split,
    #[arg(long, default_value_t = 10)]
    pub holdout_every: usize,
    #[arg(long, default_value_t = 5)]
    pub holdout_offset: usize,
    /// Keep every pixel with a surface, ignoring the ray-drop probability.
    #[arg(long)]
    pub no_drop: bool,
    #[arg(long, default_value_t = 0.5)]
    pub drop_threshold: f64,
    /// Also write `render_NNNN.xyz` (x y z intensity per line, world frame).
    #[arg(long)]
    pub points: bool,
    #[arg(long, value_enum, default_value = "mean")]
    pub depth: Depth,
    #[arg(long, value_enum, default_value = "exact")]
    pub path: RenderPath,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn render_with(path: RenderPath, scene: &Scene, sensor: &SensorModel, pose: &Pose, time: f64, policy: &RenderPolicy) -> CliResult<Frame> {
    let cfg = RasterConfig::default();
    let out = match path {
        RenderPath::Exact => render(scene, time, sensor, pose, &cfg)?,
        RenderPath::Baseline3d => render_baseline(&Scene3D::from_scene(scene, time), sensor, pose, &cfg)?,
    };
    Ok(output_to_frame(&out, time, pose, policy)?)
}

pub fn xyz_text(frame: &Frame, sensor: &SensorModel) -> CliResult<String> {
    let mut s = String::new();
    for p in range_to_points(frame, sensor)? {
        let _ = writeln!(s, "{} {} {} {}", p.position.x, p.position.y, p.position.z, p.intensity);
    }
    Ok(s)
}

fn requested_poses(args: &RenderArgs, manifest: &Manifest) -> CliResult<Vec<(Pose, f64)>> {
    if let Some(p) = &args.poses {
        return load_poses(p);
    }
    let holdout = HoldOut { every: args.holdout_every, offset: args.holdout_offset };
    holdout.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let mut out = Vec::new();
    for (k, e) in manifest.frames.iter().enumerate() {
        let keep = match args.split {
            Split::All => true,
            Split::Train => !holdout.is_held_out(k),
            Split::Test => holdout.is_held_out(k),
        };
        if keep {
            out.push((Pose::from_row_major(&e.pose)?, e.timestamp));
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("no poses selected"));
    }
    Ok(out)
}

fn write_points(dir: &Path, frames: &[Frame], sensor: &SensorModel) -> CliResult<()> {
    for (k, f) in frames.iter().enumerate() {
        let path = dir.join(format!("render_{k:04}.xyz"));
        std::fs::write(&path, xyz_text(f, sensor)?).at(&path)?;
    }
    Ok(())
}

pub fn run(args: &RenderArgs) -> CliResult<()> {
    if !(args.drop_threshold > 0.0 && args.drop_threshold <= 1.0) {
        return Err(CliError::usage("--drop-threshold must lie in (0, 1]"));
    }
    let (manifest, _) = Manifest::load(&args.data)?;
    let sensor = manifest.sensor_model()?;
    let poses = requested_poses(args, &manifest)?;
    let ck = load_checkpoint(&args.checkpoint).at(&args.checkpoint)?;
    let policy = RenderPolicy {
        drop_threshold: args.drop_threshold,
        apply_drop: !args.no_drop,
        depth: match args.depth {
            Depth::Median => DepthSource::Median,
            Depth::Mean => DepthSource::Mean,
        },
        ..RenderPolicy::default()
    };
    let frames = poses.iter().map(|(pose, t)| render_with(args.path, &ck.scene, &sensor, pose, *t, &policy)).collect::<CliResult<Vec<_>>>()?;
    create_dir(&args.out)?;
    let entries = write_frames(&args.out, "render", &frames)?;
    if args.points {
        write_points(&args.out, &frames, &sensor)?;
    }
    Manifest { format: MANIFEST_FORMAT, sensor: manifest.sensor, seed: None, scene: None, frames: entries, created_unix: now_unix() }.save(&args.out)?;
    println!("rendered {} frames to {}", frames.len(), args.out.display());
    Ok(())
}
