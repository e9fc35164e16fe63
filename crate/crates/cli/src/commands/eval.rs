use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use panosplat::metrics::{evaluate_frame, FrameMetrics, MetricsConfig};

use super::train::metrics_report;
use super::write_json;
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

/// Timestamps closer than this pair a prediction with a ground-truth frame.
const TIME_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predicted frames (directory or manifest).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth frames (directory or manifest).
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = panosplat::metrics::FSCORE_THRESHOLD)]
    pub fscore_threshold: f64,
    /// Depth data range for PSNR and SSIM; defaults to the sensor's max range.
    #[arg(long)]
    pub depth_range: Option<f64>,
    /// Machine-readable report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn table(per_frame: &[FrameMetrics], mean: &FrameMetrics) -> String {
    let mut s = String::from("frame");
    for n in FrameMetrics::NAMES {
        let _ = write!(s, "\t{n}");
    }
    s.push('\n');
    let row = |s: &mut String, label: &str, m: &FrameMetrics| {
        s.push_str(label);
        for v in m.values() {
            let _ = write!(s, "\t{v:.6}");
        }
        s.push('\n');
    };
    for (k, m) in per_frame.iter().enumerate() {
        row(&mut s, &k.to_string(), m);
    }
    row(&mut s, "mean", mean);
    s
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let (pm, proot) = Manifest::load(&args.pred)?;
    let (gm, groot) = Manifest::load(&args.gt)?;
    if (pm.sensor.width, pm.sensor.height) != (gm.sensor.width, gm.sensor.height) {
        return Err(CliError::usage("prediction and ground truth use different sensor sizes"));
    }
    let sensor = gm.sensor_model()?;
    let cfg =
        MetricsConfig { fscore_threshold: args.fscore_threshold, depth_range: args.depth_range.unwrap_or(gm.sensor.max_range), ..MetricsConfig::default() };
    if !(cfg.fscore_threshold > 0.0) || !(cfg.depth_range > 0.0) {
        return Err(CliError::usage("thresholds and ranges must be positive"));
    }
    let pred = pm.load_frames(&proot)?;
    let gt = gm.load_frames(&groot)?;
    if pred.is_empty() {
        return Err(CliError::usage("no predicted frames"));
    }
    let mut per_frame = Vec::with_capacity(pred.len());
    for (k, p) in pred.iter().enumerate() {
        let g = gt
            .iter()
            .find(|g| (g.timestamp - p.timestamp).abs() <= TIME_MATCH)
            .ok_or_else(|| CliError::usage(format!("predicted frame {k} (t = {}) has no ground truth", p.timestamp)))?;
        per_frame.push(evaluate_frame(p, g, &sensor, &cfg)?);
    }
    let report = metrics_report(per_frame)?;
    let mean = report.mean.expect("at least one frame");
    print!("{}", table(&report.frames, &mean));
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}
