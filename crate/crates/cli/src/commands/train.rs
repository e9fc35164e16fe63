use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use panosplat::experiment::{evaluate_frames, initial_scene, training_frames};
use panosplat::lidario::{load_checkpoint, save_checkpoint, Checkpoint, Frame, OptimizerSnapshot};
use panosplat::metrics::{FrameMetrics, MetricsConfig};
use panosplat::optim::{IterationLog, Trainer};
use panosplat::panocam::SensorModel;
use serde::Serialize;

use super::write_json;
use crate::config::{RunArgs, RunConfig};
use crate::error::{CliError, CliResult, IoContext};
use crate::manifest::{create_dir, now_unix, Manifest};

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Directory (or manifest file) produced by `synth`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from a checkpoint that carries optimizer state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Also write `checkpoint_NNNNNN.psls` every this many iterations.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Frames of a data directory split into training and held-out sets.
pub struct Dataset {
    pub manifest: Manifest,
    pub sensor: SensorModel,
    pub train: Vec<Frame>,
    pub test: Vec<Frame>,
}

pub fn load_dataset(data: &Path, cfg: &RunConfig) -> CliResult<Dataset> {
    let (manifest, root) = Manifest::load(data)?;
    let sensor = manifest.sensor_model()?;
    let frames = manifest.load_frames(&root)?;
    let (tr, te) = cfg.holdout.split(frames.len());
    if tr.is_empty() {
        return Err(CliError::usage("the hold-out rule leaves no training frames"));
    }
    let pick = |idx: &[usize]| idx.iter().map(|&k| frames[k].clone()).collect::<Vec<_>>();
    Ok(Dataset { train: pick(&tr), test: pick(&te), manifest, sensor })
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    config: &'a RunConfig,
    data: String,
    resume: Option<String>,
    train_frames: usize,
    held_out_frames: usize,
    created_unix: u64,
}

#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub frames: Vec<FrameMetrics>,
    pub mean: Option<FrameMetrics>,
}

pub fn metrics_report(per_frame: Vec<FrameMetrics>) -> CliResult<MetricsReport> {
    let mean = if per_frame.is_empty() { None } else { Some(FrameMetrics::mean(&per_frame)?) };
    Ok(MetricsReport { frames: per_frame, mean })
}

/// Builds a trainer from scratch or from a checkpoint.
pub fn make_trainer(ds: &Dataset, cfg: &RunConfig, resume: Option<&Path>) -> CliResult<(Trainer, Vec<panosplat::optim::TrainingFrame>)> {
    let tf = training_frames(&ds.train, &ds.sensor)?;
    let trainer = match resume {
        Some(path) => {
            let ck = load_checkpoint(path).at(path)?;
            match ck.optimizer {
                Some(opt) => Trainer::resume(ck.scene, opt.adam, opt.iteration as usize, &tf, cfg.train)?,
                None => Trainer::new(ck.scene, &tf, cfg.train)?,
            }
        }
        None => Trainer::new(initial_scene(&ds.train, &ds.sensor, &cfg.init)?, &tf, cfg.train)?,
    };
    Ok((trainer, tf))
}

pub fn checkpoint_of(trainer: &Trainer) -> Checkpoint {
    Checkpoint { scene: trainer.scene.clone(), optimizer: Some(OptimizerSnapshot { iteration: trainer.iteration as u64, adam: trainer.adam.clone() }) }
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let cfg = args.run.resolve()?;
    if args.checkpoint_every == Some(0) {
        return Err(CliError::usage("--checkpoint-every must be positive"));
    }
    let ds = load_dataset(&args.data, &cfg)?;
    let (mut trainer, tf) = make_trainer(&ds, &cfg, args.resume.as_deref())?;
    create_dir(&args.out)?;
    write_json(
        &args.out.join("run.json"),
        &RunRecord {
            config: &cfg,
            data: args.data.display().to_string(),
            resume: args.resume.as_ref().map(|p| p.display().to_string()),
            train_frames: ds.train.len(),
            held_out_frames: ds.test.len(),
            created_unix: now_unix(),
        },
    )?;

    let log_path = args.out.join("log.jsonl");
    let mut log = BufWriter::new(File::create(&log_path).at(&log_path)?);
    let write_log = |log: &mut BufWriter<File>, rec: &IterationLog| -> CliResult<()> {
        let line = serde_json::to_string(rec).map_err(|e| CliError::io(e.to_string()))?;
        writeln!(log, "{line}").at(&log_path)
    };
    let k = cfg.train.log_interval.max(1);
    while !trainer.done() {
        let rec = trainer.step(&tf)?;
        if rec.iteration % k == 0 || rec.iteration + 1 == cfg.train.iterations {
            write_log(&mut log, &rec)?;
        }
        if let Some(every) = args.checkpoint_every {
            if trainer.iteration % every == 0 && !trainer.done() {
                let path = args.out.join(format!("checkpoint_{:06}.psls", trainer.iteration));
                save_checkpoint(&path, &checkpoint_of(&trainer)).at(&path)?;
            }
        }
    }
    log.flush().at(&log_path)?;
    let ck_path = args.out.join("checkpoint.psls");
    save_checkpoint(&ck_path, &checkpoint_of(&trainer)).at(&ck_path)?;

    let per_frame = evaluate_frames(&trainer.scene, &ds.test, &ds.sensor, &cfg.train.raster, &cfg.render, &MetricsConfig::default())?;
    let report = metrics_report(per_frame)?;
    write_json(&args.out.join("metrics.json"), &report)?;
    match &report.mean {
        Some(m) => {
            let text = m.to_text();
            let path = args.out.join("metrics.txt");
            std::fs::write(&path, &text).at(&path)?;
            print!("held-out metrics over {} frames\n{text}", report.frames.len());
        }
        None => println!("no held-out frames; metrics skipped"),
    }
    println!("trained {} iterations, {} primitives; checkpoint {}", trainer.iteration, trainer.scene.len(), ck_path.display());
    Ok(())
}
