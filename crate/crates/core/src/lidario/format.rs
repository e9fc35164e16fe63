//! Little-endian binary formats for range frames and scene checkpoints.
//!
//! Frame: `"PSLF"`, u32 version, u32 W, u32 H, f64 timestamp, 16 f64 pose
//! (row-major), W*H f32 range, W*H f32 intensity.
//!
//! Checkpoint: `"PSLS"`, u32 version, u32 primitive count, f64 cycle length,
//! u32 prior W, u32 prior H, one block of `PARAM_COUNT` f64 per primitive in
//! field order, W*H f64 prior logits, then a u8 flag and, when set, the
//! optimizer state: u64 iteration, u64 step, first and second moments of every
//! primitive block and of the prior logits, all f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::Frame;
use crate::optim::AdamState;
use crate::panocam::Pose;
use crate::scene::{PriorMap, Scene, SplatPrimitive, PARAM_COUNT};
use crate::{Error, Result};

pub const FRAME_MAGIC: &[u8; 4] = b"PSLF";
pub const FRAME_VERSION: u32 = 1;
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PSLS";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Largest image or primitive count accepted when reading, to reject corrupt headers early.
const MAX_COUNT: u32 = 1 << 28;

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::format("file is truncated")
    } else {
        Error::Io(e)
    }
}

fn read_header(r: &mut impl Read, magic: &[u8; 4], version: u32) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(truncated)?;
    if &m != magic {
        return Err(Error::format(format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&m), String::from_utf8_lossy(magic))));
    }
    let v = r.read_u32::<LE>().map_err(truncated)?;
    if v != version {
        return Err(Error::format(format!("unsupported version {v}, expected {version}")));
    }
    Ok(())
}

fn read_count(r: &mut impl Read, what: &str) -> Result<usize> {
    let n = r.read_u32::<LE>().map_err(truncated)?;
    if n > MAX_COUNT {
        return Err(Error::format(format!("{what} {n} is implausibly large")));
    }
    Ok(n as usize)
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::format("trailing bytes after the last field")),
    }
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LE>(&mut v).map_err(truncated)?;
    Ok(v)
}

fn write_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for &x in v {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

pub fn write_frame(w: &mut impl Write, f: &Frame) -> Result<()> {
    w.write_all(FRAME_MAGIC)?;
    w.write_u32::<LE>(FRAME_VERSION)?;
    w.write_u32::<LE>(f.width as u32)?;
    w.write_u32::<LE>(f.height as u32)?;
    w.write_f64::<LE>(f.timestamp)?;
    write_f64s(w, &f.pose.to_row_major())?;
    for &x in f.range.iter().chain(&f.intensity) {
        w.write_f32::<LE>(x)?;
    }
    Ok(())
}

pub fn read_frame(r: &mut impl Read) -> Result<Frame> {
    read_header(r, FRAME_MAGIC, FRAME_VERSION)?;
    let width = read_count(r, "width")?;
    let height = read_count(r, "height")?;
    if width == 0 || height == 0 {
        return Err(Error::format("frame has zero size"));
    }
    let timestamp = r.read_f64::<LE>().map_err(truncated)?;
    let mut pose = [0.0; 16];
    r.read_f64_into::<LE>(&mut pose).map_err(truncated)?;
    let pose = Pose::from_row_major(&pose).map_err(|e| Error::format(format!("frame pose: {e}")))?;
    let n = width.checked_mul(height).ok_or_else(|| Error::format("frame size overflows"))?;
    let mut range = vec![0f32; n];
    r.read_f32_into::<LE>(&mut range).map_err(truncated)?;
    let mut intensity = vec![0f32; n];
    r.read_f32_into::<LE>(&mut intensity).map_err(truncated)?;
    expect_eof(r)?;
    Frame::new(width, height, range, intensity, timestamp, pose).map_err(|e| Error::format(format!("frame contents: {e}")))
}

pub fn save_frame(path: impl AsRef<Path>, f: &Frame) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_frame(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    read_frame(&mut BufReader::new(File::open(path)?))
}

/// Optimizer state saved alongside a scene so training can resume exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSnapshot {
    /// Iterations completed.
    pub iteration: u64,
    pub adam: AdamState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub scene: Scene,
    pub optimizer: Option<OptimizerSnapshot>,
}

pub fn write_checkpoint(w: &mut impl Write, c: &Checkpoint) -> Result<()> {
    let s = &c.scene;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LE>(CHECKPOINT_VERSION)?;
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_f64::<LE>(s.cycle_length)?;
    w.write_u32::<LE>(s.raydrop_prior.width as u32)?;
    w.write_u32::<LE>(s.raydrop_prior.height as u32)?;
    for p in &s.primitives {
        write_f64s(w, &p.to_params())?;
    }
    write_f64s(w, &s.raydrop_prior.logits)?;
    match &c.optimizer {
        None => w.write_u8(0)?,
        Some(o) => {
            if !o.adam.matches(s) {
                return Err(Error::contract("optimizer state does not match the scene"));
            }
            w.write_u8(1)?;
            w.write_u64::<LE>(o.iteration)?;
            w.write_u64::<LE>(o.adam.step)?;
            for block in o.adam.m.iter().chain(&o.adam.v) {
                write_f64s(w, block)?;
            }
            write_f64s(w, &o.adam.m_prior)?;
            write_f64s(w, &o.adam.v_prior)?;
        }
    }
    Ok(())
}

fn read_blocks(r: &mut impl Read, n: usize) -> Result<Vec<[f64; PARAM_COUNT]>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b = [0.0; PARAM_COUNT];
        r.read_f64_into::<LE>(&mut b).map_err(truncated)?;
        out.push(b);
    }
    Ok(out)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint> {
    read_header(r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let count = read_count(r, "primitive count")?;
    let cycle_length = r.read_f64::<LE>().map_err(truncated)?;
    let width = read_count(r, "prior width")?;
    let height = read_count(r, "prior height")?;
    let pixels = width.checked_mul(height).ok_or_else(|| Error::format("prior size overflows"))?;
    let primitives = read_blocks(r, count)?.iter().map(SplatPrimitive::from_params).collect();
    let logits = read_f64s(r, pixels)?;
    let scene = Scene::new(primitives, cycle_length, PriorMap { width, height, logits }).map_err(|e| Error::format(format!("checkpoint scene: {e}")))?;
    let optimizer = match r.read_u8().map_err(truncated)? {
        0 => None,
        1 => {
            let iteration = r.read_u64::<LE>().map_err(truncated)?;
            let step = r.read_u64::<LE>().map_err(truncated)?;
            let m = read_blocks(r, count)?;
            let v = read_blocks(r, count)?;
            let m_prior = read_f64s(r, pixels)?;
            let v_prior = read_f64s(r, pixels)?;
            Some(OptimizerSnapshot { iteration, adam: AdamState { step, m, v, m_prior, v_prior } })
        }
        flag => return Err(Error::format(format!("bad optimizer flag {flag}"))),
    };
    expect_eof(r)?;
    Ok(Checkpoint { scene, optimizer })
}

pub fn save_checkpoint(path: impl AsRef<Path>, c: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, c)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
