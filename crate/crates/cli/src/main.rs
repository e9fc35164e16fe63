//! `panosplat`: synthesize LiDAR sequences, fit splat scenes to them, render
//! novel views, and score the results.

mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, Kind};

#[derive(Debug, Parser)]
#[command(name = "panosplat", version, about = "Panoramic LiDAR reconstruction with 2D Gaussian splats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate range frames from a synthetic scene description.
    Synth(commands::synth::SynthArgs),
    /// Fit a scene to a frame sequence.
    Train(commands::train::TrainArgs),
    /// Render range frames from a checkpoint.
    Render(commands::render::RenderArgs),
    /// Compare predicted frames with ground truth.
    Eval(commands::eval::EvalArgs),
    /// Train and score ablation variants.
    Ablate(commands::ablate::AblateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Kind::Usage.exit_code()) } else { ExitCode::SUCCESS };
        }
    };
    let result: Result<(), CliError> = match cli.command {
        Command::Synth(a) => commands::synth::run(&a),
        Command::Train(a) => commands::train::run(&a),
        Command::Render(a) => commands::render::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Ablate(a) => commands::ablate::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
