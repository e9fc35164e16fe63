use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use panosplat::metrics::{evaluate_frame, FrameMetrics, MetricsConfig};
use panosplat::scene::Scene;
use serde::Serialize;

use super::render::{render_with, RenderPath};
use super::train::{load_dataset, make_trainer, Dataset};
use super::write_json;
use crate::config::{RunArgs, RunConfig};
use crate::error::{CliError, CliResult, IoContext};
use crate::manifest::create_dir;

pub const VARIANTS: [&str; 6] = ["full", "baseline3d", "no-vibration", "no-distortion", "no-normal", "no-chamfer"];

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subset of: full, baseline3d, no-vibration, no-distortion, no-normal, no-chamfer.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantResult {
    pub variant: String,
    pub metrics: FrameMetrics,
}

/// The run configuration a training variant uses, or `None` for render-only variants.
pub fn variant_config(name: &str, base: &RunConfig) -> CliResult<Option<RunConfig>> {
    let mut cfg = base.clone();
    match name {
        "full" => {}
        "baseline3d" => return Ok(None),
        "no-vibration" => cfg.train.freeze_vibration = true,
        "no-distortion" => cfg.train.weights.distortion = 0.0,
        "no-normal" => cfg.train.weights.normal = 0.0,
        "no-chamfer" => cfg.train.weights.chamfer = 0.0,
        other => return Err(CliError::usage(format!("unknown variant '{other}', expected one of {}", VARIANTS.join(", ")))),
    }
    Ok(Some(cfg))
}

fn train_variant(ds: &Dataset, cfg: &RunConfig) -> CliResult<Scene> {
    let (mut trainer, tf) = make_trainer(ds, cfg, None)?;
    while !trainer.done() {
        trainer.step(&tf)?;
    }
    Ok(trainer.scene)
}

fn score(ds: &Dataset, scene: &Scene, cfg: &RunConfig, path: RenderPath) -> CliResult<FrameMetrics> {
    if ds.test.is_empty() {
        return Err(CliError::usage("the hold-out rule selects no evaluation frames"));
    }
    let metrics = MetricsConfig { depth_range: ds.manifest.sensor.max_range, ..MetricsConfig::default() };
    let per_frame = ds
        .test
        .iter()
        .map(|gt| {
            let pred = render_with(path, scene, &ds.sensor, &gt.pose, gt.timestamp, &cfg.render)?;
            Ok(evaluate_frame(&pred, gt, &ds.sensor, &metrics)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(FrameMetrics::mean(&per_frame)?)
}

pub fn markdown(results: &[VariantResult]) -> String {
    let mut s =
        String::from("| variant | depth RMSE | depth MedAE | CD | F-score | intensity RMSE | intensity PSNR | drop acc |\n|---|---|---|---|---|---|---|---|\n");
    for r in results {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.2} | {:.4} |",
            r.variant, m.depth_rmse, m.depth_medae, m.chamfer, m.fscore, m.intensity_rmse, m.intensity_psnr, m.drop_accuracy
        );
    }
    s
}

pub fn run(args: &AblateArgs) -> CliResult<()> {
    let base = args.run.resolve()?;
    let names: Vec<String> = args.variants.clone().unwrap_or_else(|| VARIANTS.iter().map(|s| s.to_string()).collect());
    let configs = names.iter().map(|n| variant_config(n, &base)).collect::<CliResult<Vec<_>>>()?;
    let ds = load_dataset(&args.data, &base)?;

    let mut full: Option<Scene> = None;
    let mut results = Vec::new();
    for (name, cfg) in names.iter().zip(&configs) {
        let metrics = match cfg {
            Some(cfg) => {
                let scene = train_variant(&ds, cfg)?;
                let m = score(&ds, &scene, cfg, RenderPath::Exact)?;
                if name == "full" {
                    full = Some(scene);
                }
                m
            }
            None => {
                if full.is_none() {
                    full = Some(train_variant(&ds, &base)?);
                }
                score(&ds, full.as_ref().expect("trained above"), &base, RenderPath::Baseline3d)?
            }
        };
        results.push(VariantResult { variant: name.clone(), metrics });
    }
    create_dir(&args.out)?;
    write_json(&args.out.join("ablation.json"), &results)?;
    let md = markdown(&results);
    let path = args.out.join("ablation.md");
    std::fs::write(&path, &md).at(&path)?;
    print!("{md}");
    Ok(())
}
