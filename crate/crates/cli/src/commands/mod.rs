pub mod ablate;
pub mod eval;
pub mod render;
pub mod synth;
pub mod train;

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult, IoContext};

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    fs::write(path, text + "\n").at(path)
}
