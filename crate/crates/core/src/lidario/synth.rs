//! Analytic ray tracing of planes, boxes and spheres into range frames.
//!
//! Intensity is `base |cos(incidence)| exp(-r / r_atten)`. A return is dropped
//! when a per-(seed, frame, pixel) hash, read as a uniform draw in `[0, 1)`, is
//! below `drop_base + drop_grazing (1 - |cos|)^grazing_exponent + range_coeff r / max_range`.
//! Rays that hit nothing within `max_range` are dropped as well.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Frame;
use crate::panocam::{Pose, SensorModel};
use crate::{Error, Mat3, Result, Vec3};

const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub width: usize,
    pub height: usize,
    pub vfov_min: f64,
    pub vfov_max: f64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
}

fn default_max_range() -> f64 {
    80.0
}

impl SensorSpec {
    pub fn model(&self) -> Result<SensorModel> {
        SensorModel::new(self.width, self.height, self.vfov_min, self.vfov_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Material {
    /// Intensity at normal incidence and zero range.
    pub intensity: f64,
    pub drop_base: f64,
    pub drop_grazing: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material { intensity: 0.6, drop_base: 0.0, drop_grazing: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropModel {
    pub r_atten: f64,
    pub range_coeff: f64,
    pub grazing_exponent: f64,
}

impl Default for DropModel {
    fn default() -> Self {
        DropModel { r_atten: 60.0, range_coeff: 0.0, grazing_exponent: 8.0 }
    }
}

/// A plane through `point` with unit-normalized `normal`. With `half_extent`
/// set it is the rectangle `|(x - point) . axis_u| <= a`, `|(x - point) . axis_v| <= b`
/// where `axis_v = normal x axis_u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    #[serde(default)]
    pub axis_u: Option<[f64; 3]>,
    #[serde(default)]
    pub half_extent: Option<[f64; 2]>,
    #[serde(default)]
    pub material: Material,
}

/// Axis-aligned box whose center moves as `center + velocity t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: [f64; 3],
    pub half_extent: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default)]
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub origin: [f64; 3],
    /// Rotation about the world y axis, radians.
    #[serde(default)]
    pub yaw: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// `frames` poses at `t0 + k dt`, origin `start + velocity (t - t0)`.
    Linear {
        start: [f64; 3],
        velocity: [f64; 3],
        frames: usize,
        dt: f64,
        #[serde(default)]
        t0: f64,
        #[serde(default)]
        yaw: f64,
    },
    Keyframes {
        keyframes: Vec<Keyframe>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    #[serde(default)]
    pub seed: u64,
    pub sensor: SensorSpec,
    #[serde(default)]
    pub drop: DropModel,
    #[serde(default)]
    pub planes: Vec<PlaneSpec>,
    #[serde(default)]
    pub boxes: Vec<BoxSpec>,
    #[serde(default)]
    pub spheres: Vec<SphereSpec>,
    pub trajectory: Trajectory,
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Pose of a sensor at `origin` turned by `yaw` about the world y axis.
pub fn yaw_pose(origin: Vec3, yaw: f64) -> Result<Pose> {
    let sensor_to_world: Mat3 = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), yaw).into_inner();
    Pose::from_rotation_origin(sensor_to_world.transpose(), origin)
}

impl SyntheticSceneSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SyntheticSceneSpec = toml::from_str(text).map_err(|e| Error::Format(format!("scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("scene spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.model()?;
        let bad = |what: &str| Err(Error::contract(format!("invalid {what}")));
        if !(self.sensor.max_range > 0.0) || !self.sensor.max_range.is_finite() {
            return bad("sensor max range");
        }
        let d = &self.drop;
        if !finite(&[d.r_atten, d.range_coeff, d.grazing_exponent]) || !(d.r_atten > 0.0) || d.grazing_exponent < 0.0 {
            return bad("drop model");
        }
        let mat_ok = |m: &Material| finite(&[m.intensity, m.drop_base, m.drop_grazing]) && m.intensity >= 0.0;
        for p in &self.planes {
            let n = v3(&p.normal);
            if !finite(&p.point) || !finite(&p.normal) || !(n.norm() > 0.0) || !mat_ok(&p.material) {
                return bad("plane");
            }
            match (p.axis_u, p.half_extent) {
                (None, None) => {}
                (Some(u), Some(h)) => {
                    let u = v3(&u);
                    if !finite(&[u.x, u.y, u.z, h[0], h[1]]) || !(h[0] > 0.0 && h[1] > 0.0) || u.cross(&n).norm() < 1e-9 * u.norm() * n.norm() {
                        return bad("plane extent");
                    }
                }
                _ => return bad("plane: axis_u and half_extent go together"),
            }
        }
        for b in &self.boxes {
            if !finite(&b.center) || !finite(&b.velocity) || !b.half_extent.iter().all(|h| *h > 0.0 && h.is_finite()) || !mat_ok(&b.material) {
                return bad("box");
            }
        }
        for s in &self.spheres {
            if !finite(&s.center) || !(s.radius > 0.0) || !s.radius.is_finite() || !mat_ok(&s.material) {
                return bad("sphere");
            }
        }
        let stamps: Vec<f64> = self.poses()?.iter().map(|p| p.1).collect();
        if stamps.is_empty() {
            return Err(Error::contract("trajectory has no frames"));
        }
        if !finite(&stamps) || stamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::contract("trajectory timestamps must be finite and strictly increasing"));
        }
        Ok(())
    }

    /// Pose and timestamp of every frame.
    pub fn poses(&self) -> Result<Vec<(Pose, f64)>> {
        match &self.trajectory {
            Trajectory::Linear { start, velocity, frames, dt, t0, yaw } => (0..*frames)
                .map(|k| {
                    let dtk = k as f64 * dt;
                    Ok((yaw_pose(v3(start) + v3(velocity) * dtk, *yaw)?, t0 + dtk))
                })
                .collect(),
            Trajectory::Keyframes { keyframes } => keyframes.iter().map(|k| Ok((yaw_pose(v3(&k.origin), k.yaw)?, k.time))).collect(),
        }
    }

    pub fn frame_count(&self) -> usize {
        match &self.trajectory {
            Trajectory::Linear { frames, .. } => *frames,
            Trajectory::Keyframes { keyframes } => keyframes.len(),
        }
    }
}

/// Which primitive of the scene description a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectRef {
    Plane(usize),
    Box(usize),
    Sphere(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub r: f64,
    /// `|cos|` of the incidence angle.
    pub cos: f64,
    pub object: ObjectRef,
}

/// Distance along a unit ray to a plane or rectangle, with the unit normal.
pub fn plane_intersect(p: &PlaneSpec, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
    let n = v3(&p.normal).normalize();
    let denom = n.dot(d);
    if denom.abs() < 1e-12 {
        return None;
    }
    let p0 = v3(&p.point);
    let t = n.dot(&(p0 - o)) / denom;
    if !(t > HIT_EPS) {
        return None;
    }
    if let (Some(u), Some(h)) = (p.axis_u, p.half_extent) {
        let u = v3(&u);
        let u = (u - n * n.dot(&u)).normalize();
        let v = n.cross(&u);
        let x = o + d * t - p0;
        if x.dot(&u).abs() > h[0] || x.dot(&v).abs() > h[1] {
            return None;
        }
    }
    Some((t, n))
}

/// Nearest positive distance along a unit ray to a sphere, with the outward normal.
pub fn sphere_intersect(s: &SphereSpec, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
    let c = v3(&s.center);
    let oc = o - c;
    let b = oc.dot(d);
    let disc = b * b - (oc.norm_squared() - s.radius * s.radius);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = if -b - sq > HIT_EPS { -b - sq } else { -b + sq };
    if !(t > HIT_EPS) {
        return None;
    }
    Some((t, (o + d * t - c) / s.radius))
}

/// Slab intersection with an axis-aligned box centered at `center`.
pub fn box_intersect(center: &Vec3, half: &[f64; 3], o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
    let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut axis_near, mut axis_far) = (0, 0);
    for k in 0..3 {
        let lo = center[k] - half[k];
        let hi = center[k] + half[k];
        if d[k].abs() < 1e-15 {
            if o[k] < lo || o[k] > hi {
                return None;
            }
            continue;
        }
        let (mut a, mut b) = ((lo - o[k]) / d[k], (hi - o[k]) / d[k]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if a > t_near {
            t_near = a;
            axis_near = k;
        }
        if b < t_far {
            t_far = b;
            axis_far = k;
        }
    }
    if t_near > t_far {
        return None;
    }
    let (t, axis) = if t_near > HIT_EPS {
        (t_near, axis_near)
    } else if t_far > HIT_EPS {
        (t_far, axis_far)
    } else {
        return None;
    };
    let mut n = Vec3::zeros();
    n[axis] = if d[axis] > 0.0 { -1.0 } else { 1.0 };
    Some((t, n))
}

/// Nearest hit of a world ray at time `t` among every primitive of the spec.
pub fn raycast(spec: &SyntheticSceneSpec, o: &Vec3, d: &Vec3, t: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let mut consider = |hit: Option<(f64, Vec3)>, object: ObjectRef| {
        if let Some((r, n)) = hit {
            if best.is_none_or(|b| r < b.r) {
                best = Some(Hit { r, cos: n.dot(d).abs().min(1.0), object });
            }
        }
    };
    for (i, p) in spec.planes.iter().enumerate() {
        consider(plane_intersect(p, o, d), ObjectRef::Plane(i));
    }
    for (i, b) in spec.boxes.iter().enumerate() {
        let c = v3(&b.center) + v3(&b.velocity) * t;
        consider(box_intersect(&c, &b.half_extent, o, d), ObjectRef::Box(i));
    }
    for (i, s) in spec.spheres.iter().enumerate() {
        consider(sphere_intersect(s, o, d), ObjectRef::Sphere(i));
    }
    best
}

fn material_of(spec: &SyntheticSceneSpec, obj: ObjectRef) -> &Material {
    match obj {
        ObjectRef::Plane(i) => &spec.planes[i].material,
        ObjectRef::Box(i) => &spec.boxes[i].material,
        ObjectRef::Sphere(i) => &spec.spheres[i].material,
    }
}

/// Per-pixel nearest hit within the sensor's max range, before ray drop.
pub fn trace_frame(spec: &SyntheticSceneSpec, sensor: &SensorModel, pose: &Pose, time: f64) -> Vec<Option<Hit>> {
    let origin = pose.origin();
    let to_world = pose.rotation().transpose();
    let mut out = Vec::with_capacity(sensor.pixel_count());
    for row in 0..sensor.height {
        for col in 0..sensor.width {
            let d = to_world * sensor.pixel_ray(col, row).dir;
            out.push(raycast(spec, &origin, &d, time).filter(|h| h.r <= spec.sensor.max_range));
        }
    }
    out
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` determined by `(seed, frame, pixel)`.
pub fn unit_hash(seed: u64, frame: u64, pixel: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ frame) ^ pixel);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Drop probability of a return.
pub fn drop_probability(spec: &SyntheticSceneSpec, hit: &Hit) -> f64 {
    let m = material_of(spec, hit.object);
    let d = &spec.drop;
    (m.drop_base + m.drop_grazing * (1.0 - hit.cos).powf(d.grazing_exponent) + d.range_coeff * hit.r / spec.sensor.max_range).clamp(0.0, 1.0)
}

/// Frame `index` of the scene trajectory; with `apply_drops` false every hit is kept.
pub fn synth_frame(spec: &SyntheticSceneSpec, index: usize, pose: &Pose, time: f64, apply_drops: bool) -> Result<Frame> {
    let sensor = spec.sensor.model()?;
    let hits = trace_frame(spec, &sensor, pose, time);
    let n = sensor.pixel_count();
    let mut range = vec![0f32; n];
    let mut intensity = vec![0f32; n];
    for (i, hit) in hits.iter().enumerate() {
        let Some(h) = hit else { continue };
        if apply_drops && unit_hash(spec.seed, index as u64, i as u64) < drop_probability(spec, h) {
            continue;
        }
        let m = material_of(spec, h.object);
        range[i] = h.r as f32;
        intensity[i] = (m.intensity * h.cos * (-h.r / spec.drop.r_atten).exp()).clamp(0.0, 1.0) as f32;
        if range[i] == 0.0 {
            intensity[i] = 0.0;
        }
    }
    Frame::new(sensor.width, sensor.height, range, intensity, time, *pose)
}

/// Every frame of the trajectory.
pub fn synth_generate(spec: &SyntheticSceneSpec) -> Result<Vec<Frame>> {
    spec.validate()?;
    let poses = spec.poses()?;
    poses.par_iter().enumerate().map(|(k, (pose, t))| synth_frame(spec, k, pose, *t, true)).collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::panocam::{angles_to_dir, RayAngles};

    fn spec_with(planes: Vec<PlaneSpec>, boxes: Vec<BoxSpec>, spheres: Vec<SphereSpec>) -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            seed: 3,
            sensor: SensorSpec { width: 64, height: 16, vfov_min: 1.2, vfov_max: 1.95, max_range: 80.0 },
            drop: DropModel::default(),
            planes,
            boxes,
            spheres,
            trajectory: Trajectory::Linear { start: [0.0; 3], velocity: [0.0, 0.0, 1.0], frames: 3, dt: 0.1, t0: 0.0, yaw: 0.0 },
        }
    }

    fn forward() -> Vec3 {
        angles_to_dir(RayAngles { phi: 0.0, theta: PI / 2.0 })
    }

    #[test]
    fn plane_ahead() {
        let p = PlaneSpec { point: [0.0, 0.0, 5.0], normal: [0.0, 0.0, 1.0], axis_u: None, half_extent: None, material: Material::default() };
        let (r, _) = plane_intersect(&p, &Vec3::zeros(), &forward()).unwrap();
        assert!((r - 5.0).abs() < 1e-12);
        assert!(plane_intersect(&p, &Vec3::zeros(), &-forward()).is_none());
        let small = PlaneSpec { axis_u: Some([1.0, 0.0, 0.0]), half_extent: Some([0.5, 0.5]), ..p };
        let off = Vec3::new(1.0, 0.0, 5.0).normalize();
        assert!(plane_intersect(&small, &Vec3::zeros(), &off).is_none());
        assert!(plane_intersect(&small, &Vec3::zeros(), &forward()).is_some());
    }

    #[test]
    fn sphere_ahead() {
        let s = SphereSpec { center: [0.0, 0.0, 10.0], radius: 2.0, material: Material::default() };
        let (r, n) = sphere_intersect(&s, &Vec3::zeros(), &forward()).unwrap();
        assert!((r - 8.0).abs() < 1e-12);
        assert!((n + forward()).norm() < 1e-12);
        // from inside, the far wall
        let (r, _) = sphere_intersect(&s, &Vec3::new(0.0, 0.0, 10.0), &forward()).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn moving_box_shift_is_exact() {
        let b = BoxSpec { center: [0.0, 0.0, 10.0], half_extent: [1.0, 1.0, 1.0], velocity: [0.0, 0.0, 1.0], material: Material::default() };
        let spec = spec_with(vec![], vec![b], vec![]);
        let r0 = raycast(&spec, &Vec3::zeros(), &forward(), 0.0).unwrap().r;
        let r1 = raycast(&spec, &Vec3::zeros(), &forward(), 1.0).unwrap().r;
        assert!((r0 - 9.0).abs() < 1e-12);
        assert!((r1 - r0 - 1.0).abs() < 1e-12);
        // lateral motion: the ray leaves the box after 1.5 s at 1 m/s
        let side = BoxSpec { velocity: [1.0, 0.0, 0.0], ..b };
        let spec = spec_with(vec![], vec![side], vec![]);
        assert!(raycast(&spec, &Vec3::zeros(), &forward(), 0.9).is_some());
        assert!(raycast(&spec, &Vec3::zeros(), &forward(), 1.1).is_none());
    }

    #[test]
    fn box_normals_and_inside_origin() {
        let c = Vec3::new(0.0, 0.0, 5.0);
        let (t, n) = box_intersect(&c, &[1.0, 2.0, 1.0], &Vec3::zeros(), &forward()).unwrap();
        assert!((t - 4.0).abs() < 1e-12 && n == Vec3::new(0.0, 0.0, -1.0));
        let (t, _) = box_intersect(&c, &[1.0, 2.0, 1.0], &c, &forward()).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(box_intersect(&c, &[1.0, 2.0, 1.0], &Vec3::new(3.0, 0.0, 0.0), &forward()).is_none());
    }

    #[test]
    fn generation_is_deterministic_and_drops_follow_the_hash() {
        let mut m = Material::default();
        m.drop_base = 0.3;
        let floor = PlaneSpec { point: [0.0, 1.5, 0.0], normal: [0.0, -1.0, 0.0], axis_u: None, half_extent: None, material: m };
        let spec = spec_with(vec![floor], vec![], vec![]);
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let s = spec.sensor.model().unwrap();
        let clean = synth_frame(&spec, 0, &a[0].pose, a[0].timestamp, false).unwrap();
        let (mut dropped, mut hits) = (0, 0);
        for i in 0..s.pixel_count() {
            if clean.range[i] > 0.0 {
                hits += 1;
                let expect_drop = unit_hash(3, 0, i as u64) < 0.3;
                assert_eq!(a[0].range[i] == 0.0, expect_drop);
                dropped += expect_drop as usize;
            }
        }
        let rate = dropped as f64 / hits as f64;
        assert!((rate - 0.3).abs() < 0.08, "drop rate {rate}");
    }

    #[test]
    fn intensity_model() {
        let p = PlaneSpec {
            point: [0.0, 0.0, 5.0],
            normal: [0.0, 0.0, -1.0],
            axis_u: None,
            half_extent: None,
            material: Material { intensity: 0.8, ..Material::default() },
        };
        let spec = SyntheticSceneSpec { drop: DropModel { r_atten: 20.0, ..DropModel::default() }, ..spec_with(vec![p], vec![], vec![]) };
        let s = spec.sensor.model().unwrap();
        let f = synth_frame(&spec, 0, &Pose::identity(), 0.0, false).unwrap();
        for row in 0..s.height {
            for col in 0..s.width {
                let i = row * s.width + col;
                let d = s.pixel_ray(col, row).dir;
                if d.z > 1e-6 && f.range[i] > 0.0 {
                    let r = 5.0 / d.z;
                    assert!((f.range[i] as f64 - r).abs() < 1e-5 * r);
                    let expected = 0.8 * d.z * (-r / 20.0).exp();
                    assert!((f.intensity[i] as f64 - expected).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn spec_text_round_trip_and_validation() {
        let text = r#"
            seed = 4
            [sensor]
            width = 64
            height = 16
            vfov_min = 1.2
            vfov_max = 1.95

            [[planes]]
            point = [0.0, 1.7, 0.0]
            normal = [0.0, -1.0, 0.0]
            material = { intensity = 0.5 }

            [[boxes]]
            center = [2.0, 1.0, 6.0]
            half_extent = [0.5, 0.7, 0.5]
            velocity = [1.0, 0.0, 0.0]

            [trajectory]
            kind = "linear"
            start = [0.0, 0.0, 0.0]
            velocity = [0.0, 0.0, 1.0]
            frames = 4
            dt = 0.1
        "#;
        let spec = SyntheticSceneSpec::from_toml(text).unwrap();
        assert_eq!(spec.sensor.max_range, 80.0);
        assert_eq!(spec.planes[0].material.intensity, 0.5);
        assert_eq!(spec.frame_count(), 4);
        let again = SyntheticSceneSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(again, spec);
        assert!(SyntheticSceneSpec::from_toml(&text.replace("frames = 4", "frames = 0")).is_err());
        assert!(SyntheticSceneSpec::from_toml(&text.replace("dt = 0.1", "dt = -0.1")).is_err());
        assert!(SyntheticSceneSpec::from_toml(&text.replace("seed = 4", "seed = 4\nbogus = 1")).is_err());
    }
}
