//! JSON manifest listing the frame files of a run.

use std::fs;
use std::path::{Path, PathBuf};

use panosplat::lidario::{load_frame, save_frame, Frame, SensorSpec, SyntheticSceneSpec};
use panosplat::panocam::{Pose, SensorModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, IoContext};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub file: String,
    pub timestamp: f64,
    /// World to sensor, row-major.
    pub pose: [f64; 16],
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub sensor: SensorSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Generator input, when the frames are synthetic.
    #[serde(default)]
    pub scene: Option<SyntheticSceneSpec>,
    pub frames: Vec<FrameEntry>,
    /// Wall-clock creation time; the only non-deterministic field of any output.
    pub created_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// A directory holding a manifest and its frames.
pub fn manifest_path(dir: &Path) -> PathBuf {
    if dir.is_file() {
        dir.to_path_buf()
    } else {
        dir.join(MANIFEST_FILE)
    }
}

impl Manifest {
    pub fn sensor_model(&self) -> CliResult<SensorModel> {
        Ok(self.sensor.model()?)
    }

    pub fn load(dir: &Path) -> CliResult<(Manifest, PathBuf)> {
        let path = manifest_path(dir);
        let text = fs::read_to_string(&path).at(&path)?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::io(format!("{}: unsupported manifest format {}", path.display(), m.format)));
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, root))
    }

    /// Loads every frame, checking sizes and checksums.
    pub fn load_frames(&self, root: &Path) -> CliResult<Vec<Frame>> {
        self.frames
            .iter()
            .map(|e| {
                let path = root.join(&e.file);
                let bytes = fs::read(&path).at(&path)?;
                if sha256_hex(&bytes) != e.sha256 {
                    return Err(CliError::io(format!("{}: checksum mismatch", path.display())));
                }
                let frame = load_frame(&path).at(&path)?;
                if frame.width != self.sensor.width || frame.height != self.sensor.height {
                    return Err(CliError::io(format!("{}: frame size differs from the manifest sensor", path.display())));
                }
                Ok(frame)
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::io(e.to_string()))?;
        fs::write(&path, text + "\n").at(&path)
    }
}

/// Writes `frames` as `{prefix}_NNNN.pslf` and returns their manifest entries.
pub fn write_frames(dir: &Path, prefix: &str, frames: &[Frame]) -> CliResult<Vec<FrameEntry>> {
    frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let file = format!("{prefix}_{k:04}.pslf");
            let path = dir.join(&file);
            save_frame(&path, f).at(&path)?;
            let bytes = fs::read(&path).at(&path)?;
            Ok(FrameEntry { file, timestamp: f.timestamp, pose: f.pose.to_row_major(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).at(dir)
}

/// A pose request for `render`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub timestamp: f64,
    pub pose: [f64; 16],
}

/// Reads a JSON list of `{timestamp, pose}`; non-rigid poses are rejected.
pub fn load_poses(path: &Path) -> CliResult<Vec<(Pose, f64)>> {
    let text = fs::read_to_string(path).at(path)?;
    let entries: Vec<PoseEntry> = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(CliError::usage(format!("{}: no poses", path.display())));
    }
    entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let pose = Pose::from_row_major(&e.pose).map_err(|err| CliError::usage(format!("{}: pose {k}: {err}", path.display())))?;
            if !e.timestamp.is_finite() {
                return Err(CliError::usage(format!("{}: pose {k}: timestamp must be finite", path.display())));
            }
            Ok((pose, e.timestamp))
        })
        .collect()
}
