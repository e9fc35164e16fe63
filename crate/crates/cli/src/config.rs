//! Run configuration: a named preset, overlaid by a TOML file, overlaid by flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use panosplat::experiment::{preset, HoldOut, RenderPolicy};
use panosplat::optim::TrainConfig;
use panosplat::scene::InitConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, IoContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub init: InitConfig,
    pub train: TrainConfig,
    pub holdout: HoldOut,
    pub render: RenderPolicy,
}

impl RunConfig {
    pub fn from_preset(name: &str) -> CliResult<Self> {
        let p = preset(name).map_err(|e| CliError::usage(e.to_string()))?;
        Ok(RunConfig { init: p.init, train: p.train, holdout: p.holdout, render: p.render })
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train.validate()?;
        self.holdout.validate()?;
        if !(self.render.drop_threshold > 0.0 && self.render.drop_threshold <= 1.0) {
            return Err(CliError::usage("render.drop_threshold must lie in (0, 1]"));
        }
        if self.init.max_points == 0 {
            return Err(CliError::usage("init.max_points must be at least 1"));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Flags shared by every command that trains.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Preset supplying the defaults (smoke, box-room, dynamic-room).
    #[arg(long, default_value = "box-room")]
    pub preset: String,
    /// TOML file with [init], [train], [holdout] and [render] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long)]
    pub holdout_every: Option<usize>,
    #[arg(long)]
    pub holdout_offset: Option<usize>,
    #[arg(long)]
    pub freeze_vibration: bool,
    #[arg(long)]
    pub lambda_depth: Option<f64>,
    #[arg(long)]
    pub lambda_intensity: Option<f64>,
    #[arg(long)]
    pub lambda_raydrop: Option<f64>,
    #[arg(long)]
    pub lambda_distortion: Option<f64>,
    #[arg(long)]
    pub lambda_normal: Option<f64>,
    #[arg(long)]
    pub lambda_chamfer: Option<f64>,
}

impl RunArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::from_preset(&self.preset)?;
        if let Some(path) = &self.config {
            cfg = overlay_file(&cfg, path)?;
        }
        let t = &mut cfg.train;
        set(&mut t.iterations, self.iterations);
        set(&mut t.seed, self.seed);
        set(&mut cfg.init.seed, self.seed);
        set(&mut cfg.init.max_points, self.max_points);
        set(&mut cfg.holdout.every, self.holdout_every);
        set(&mut cfg.holdout.offset, self.holdout_offset);
        t.freeze_vibration |= self.freeze_vibration;
        let w = &mut t.weights;
        set(&mut w.depth, self.lambda_depth);
        set(&mut w.intensity, self.lambda_intensity);
        set(&mut w.raydrop, self.lambda_raydrop);
        set(&mut w.distortion, self.lambda_distortion);
        set(&mut w.normal, self.lambda_normal);
        set(&mut w.chamfer, self.lambda_chamfer);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn overlay_file(cfg: &RunConfig, path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).at(path)?;
    let over: toml::Value = toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut base = toml::Value::try_from(cfg).map_err(|e| CliError::usage(e.to_string()))?;
    merge(&mut base, over);
    base.try_into().map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}
