//! Central finite-difference checks of the analytic scene gradients.

use crate::panocam::{Pose, SensorModel};
use crate::raster::{backward, render, render_with_tape, RasterConfig, RenderGrads, RenderOutput};
use crate::scene::{ParamSlot, Scene, SplatPrimitive, PARAM_COUNT};
use crate::Result;

/// Which scalar parameter an entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Primitive { index: usize, param: usize },
    PriorLogit { pixel: usize },
}

impl std::fmt::Display for Coordinate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Coordinate::Primitive { index, param } => {
                let slot = ParamSlot::of_index(param);
                write!(f, "primitive {index} {}[{}]", slot.name(), param - slot.range().start)
            }
            Coordinate::PriorLogit { pixel } => write!(f, "prior logit {pixel}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FdEntry {
    pub coord: Coordinate,
    pub analytic: f64,
    pub numeric: f64,
}

impl FdEntry {
    pub fn rel_err(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub step: f64,
    /// Entries with `|numeric|` at or below this are not judged.
    pub floor: f64,
    pub rel_tol: f64,
    pub include_prior: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { step: 1e-5, floor: 1e-6, rel_tol: 1e-3, include_prior: true }
    }
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
    pub options: FdOptions,
}

impl FdReport {
    pub fn judged(&self) -> impl Iterator<Item = &FdEntry> {
        self.entries.iter().filter(|e| e.numeric.abs() > self.options.floor)
    }

    pub fn failures(&self) -> Vec<FdEntry> {
        self.judged().filter(|e| !(e.rel_err() < self.options.rel_tol)).copied().collect()
    }

    pub fn max_rel_err(&self) -> f64 {
        self.judged().map(FdEntry::rel_err).fold(0.0, f64::max)
    }
}

/// Scalar objective over a render, returning its value and upstream gradient.
pub type Objective<'a> = dyn Fn(&RenderOutput) -> Result<(f64, RenderGrads)> + 'a;

/// Compares the analytic gradient of `objective(render(scene))` with central
/// differences over every primitive parameter and, optionally, every prior logit.
pub fn check_scene(
    scene: &Scene,
    t: f64,
    sensor: &SensorModel,
    pose: &Pose,
    cfg: &RasterConfig,
    objective: &Objective<'_>,
    opts: FdOptions,
) -> Result<FdReport> {
    let (out, tape) = render_with_tape(scene, t, sensor, pose, cfg)?;
    let (_, upstream) = objective(&out)?;
    let grads = backward(&tape, scene, &upstream)?;
    let eval = |s: &Scene| -> Result<f64> { objective(&render(s, t, sensor, pose, cfg)?).map(|(v, _)| v) };

    let mut entries = Vec::new();
    let mut work = scene.clone();
    for index in 0..scene.len() {
        let base = scene.primitives[index].to_params();
        for param in 0..PARAM_COUNT {
            let mut p = base;
            p[param] = base[param] + opts.step;
            work.primitives[index] = SplatPrimitive::from_params(&p);
            let plus = eval(&work)?;
            p[param] = base[param] - opts.step;
            work.primitives[index] = SplatPrimitive::from_params(&p);
            let minus = eval(&work)?;
            work.primitives[index] = scene.primitives[index].clone();
            entries.push(FdEntry {
                coord: Coordinate::Primitive { index, param },
                analytic: grads.primitives[index][param],
                numeric: (plus - minus) / (2.0 * opts.step),
            });
        }
    }
    if opts.include_prior {
        for pixel in 0..scene.raydrop_prior.logits.len() {
            let base = scene.raydrop_prior.logits[pixel];
            work.raydrop_prior.logits[pixel] = base + opts.step;
            let plus = eval(&work)?;
            work.raydrop_prior.logits[pixel] = base - opts.step;
            let minus = eval(&work)?;
            work.raydrop_prior.logits[pixel] = base;
            entries.push(FdEntry { coord: Coordinate::PriorLogit { pixel }, analytic: grads.prior_logits[pixel], numeric: (plus - minus) / (2.0 * opts.step) });
        }
    }
    Ok(FdReport { entries, options: opts })
}
