use std::fs;
use std::path::PathBuf;

use clap::Args;
use panosplat::experiment::preset;
use panosplat::lidario::{synth_generate, SyntheticSceneSpec, Trajectory};

use crate::error::{CliError, CliResult, IoContext};
use crate::manifest::{create_dir, now_unix, write_frames, Manifest, MANIFEST_FORMAT};

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Scene description (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Built-in scene instead of a spec file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override the frame count of a linear trajectory.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn resolve_spec(args: &SynthArgs) -> CliResult<SyntheticSceneSpec> {
    let mut spec = match (&args.spec, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).at(path)?;
            toml::from_str::<SyntheticSceneSpec>(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => preset(name).map_err(|e| CliError::usage(e.to_string()))?.scene,
        (None, None) => return Err(CliError::usage("either --spec or --preset is required")),
    };
    if let Some(n) = args.frames {
        match &mut spec.trajectory {
            Trajectory::Linear { frames, .. } => *frames = n,
            Trajectory::Keyframes { keyframes } => {
                if n == 0 || n > keyframes.len() {
                    return Err(CliError::usage(format!("--frames must lie in 1..={}", keyframes.len())));
                }
                keyframes.truncate(n);
            }
        }
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(spec)
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let spec = resolve_spec(args)?;
    let frames = synth_generate(&spec)?;
    create_dir(&args.out)?;
    let scene_path = args.out.join("scene.toml");
    fs::write(&scene_path, spec.to_toml()?).at(&scene_path)?;
    let entries = write_frames(&args.out, "frame", &frames)?;
    let manifest =
        Manifest { format: MANIFEST_FORMAT, sensor: spec.sensor, seed: Some(spec.seed), scene: Some(spec), frames: entries, created_unix: now_unix() };
    manifest.save(&args.out)?;
    println!("wrote {} frames to {}", frames.len(), args.out.display());
    Ok(())
}
