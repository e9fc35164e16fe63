//! Range frames, scene checkpoints, conversions between range maps and point
//! clouds, and the analytic synthetic-scene generator.

mod format;
mod synth;

pub use format::{
    load_checkpoint, load_frame, read_checkpoint, read_frame, save_checkpoint, save_frame, write_checkpoint, write_frame, Checkpoint, OptimizerSnapshot,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION, FRAME_MAGIC, FRAME_VERSION,
};
pub use synth::{
    box_intersect, drop_probability, plane_intersect, raycast, sphere_intersect, synth_frame, synth_generate, trace_frame, unit_hash, yaw_pose, BoxSpec,
    DropModel, Hit, Keyframe, Material, ObjectRef, PlaneSpec, SensorSpec, SphereSpec, SyntheticSceneSpec, Trajectory,
};

use crate::losses::Target;
use crate::panocam::{Pose, SensorModel};
use crate::scene::PointSample;
use crate::{Error, Result};

/// One LiDAR sweep as panoramic maps. Range 0 marks a dropped ray.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Meters, row-major.
    pub range: Vec<f32>,
    /// In `[0, 1]`, 0 wherever the ray was dropped.
    pub intensity: Vec<f32>,
    pub timestamp: f64,
    /// World to sensor.
    pub pose: Pose,
}

impl Frame {
    pub fn new(width: usize, height: usize, range: Vec<f32>, intensity: Vec<f32>, timestamp: f64, pose: Pose) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract("frame size must be positive"));
        }
        let n = width * height;
        if range.len() != n || intensity.len() != n {
            return Err(Error::contract(format!("frame maps must hold {n} values")));
        }
        if !timestamp.is_finite() {
            return Err(Error::contract("frame timestamp must be finite"));
        }
        for i in 0..n {
            let (r, v) = (range[i], intensity[i]);
            if !(r >= 0.0) || !r.is_finite() || !v.is_finite() {
                return Err(Error::contract(format!("invalid range or intensity at pixel {i}")));
            }
            if r == 0.0 && v != 0.0 {
                return Err(Error::contract(format!("dropped pixel {i} has non-zero intensity")));
            }
        }
        Ok(Frame { width, height, range, intensity, timestamp, pose })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn hit_mask(&self) -> Vec<bool> {
        self.range.iter().map(|&r| r > 0.0).collect()
    }

    pub fn hit_count(&self) -> usize {
        self.range.iter().filter(|&&r| r > 0.0).count()
    }

    fn check_sensor(&self, sensor: &SensorModel) -> Result<()> {
        if sensor.width != self.width || sensor.height != self.height {
            return Err(Error::contract(format!("frame is {}x{} but the sensor is {}x{}", self.width, self.height, sensor.width, sensor.height)));
        }
        Ok(())
    }

    /// Ground truth for the losses, in double precision.
    pub fn to_target(&self, sensor: &SensorModel) -> Result<Target> {
        self.check_sensor(sensor)?;
        Target::new(*sensor, self.range.iter().map(|&v| v as f64).collect(), self.intensity.iter().map(|&v| v as f64).collect())
    }
}

/// World-frame point per hit pixel, at the pixel-center ray.
pub fn range_to_points(frame: &Frame, sensor: &SensorModel) -> Result<Vec<PointSample>> {
    frame.check_sensor(sensor)?;
    let mut out = Vec::with_capacity(frame.hit_count());
    for row in 0..frame.height {
        for col in 0..frame.width {
            let i = row * frame.width + col;
            let r = frame.range[i];
            if r > 0.0 {
                let p = sensor.pixel_ray(col, row).dir * r as f64;
                out.push(PointSample { position: frame.pose.sensor_to_world(&p), intensity: frame.intensity[i] as f64, time: frame.timestamp });
            }
        }
    }
    Ok(out)
}

/// Projects world points into a range frame, keeping the nearest return per pixel.
/// Points outside the vertical field of view or at the sensor origin are ignored.
pub fn points_to_range(points: &[PointSample], sensor: &SensorModel, pose: &Pose, timestamp: f64) -> Result<Frame> {
    if points.is_empty() {
        return Err(Error::Empty("point cloud for projection"));
    }
    let n = sensor.pixel_count();
    let mut best = vec![f64::INFINITY; n];
    let mut range = vec![0f32; n];
    let mut intensity = vec![0f32; n];
    for p in points {
        let local = pose.world_to_sensor(&p.position);
        let r = local.norm();
        if !(r > 0.0) {
            continue;
        }
        let Some((col, row)) = sensor.pixel_of(&local) else { continue };
        let i = row * sensor.width + col;
        if r < best[i] {
            best[i] = r;
            range[i] = r as f32;
            intensity[i] = p.intensity as f32;
        }
    }
    // a return that rounds to zero would read as a drop
    for i in 0..n {
        if range[i] == 0.0 {
            intensity[i] = 0.0;
        }
    }
    Frame::new(sensor.width, sensor.height, range, intensity, timestamp, *pose)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::Vec3;

    fn sensor() -> SensorModel {
        SensorModel::new(64, 16, 1.2, 1.95).unwrap()
    }

    #[test]
    fn frame_validation() {
        let p = Pose::identity();
        assert!(Frame::new(0, 4, vec![], vec![], 0.0, p).is_err());
        assert!(Frame::new(2, 1, vec![1.0], vec![0.0], 0.0, p).is_err());
        assert!(Frame::new(2, 1, vec![0.0, 1.0], vec![0.5, 0.0], 0.0, p).is_err());
        assert!(Frame::new(2, 1, vec![-1.0, 1.0], vec![0.0, 0.0], 0.0, p).is_err());
        let f = Frame::new(2, 1, vec![0.0, 1.0], vec![0.0, 0.3], 0.0, p).unwrap();
        assert_eq!(f.hit_mask(), vec![false, true]);
    }

    #[test]
    fn single_hit_pixel_back_projects_forward() {
        // phi = 0 at column W/2, theta = pi/2 at the row center when vfov is symmetric
        let s = SensorModel::new(8, 1, PI / 2.0 - 0.1, PI / 2.0 + 0.1).unwrap();
        let mut range = vec![0f32; 8];
        range[4] = 5.0;
        let f = Frame::new(8, 1, range, vec![0.0; 8], 0.0, Pose::identity()).unwrap();
        let pts = range_to_points(&f, &s).unwrap();
        assert_eq!(pts.len(), 1);
        let a = s.pixel_center_angles(4, 0);
        assert!(a.phi.abs() < 1e-12 + PI / 8.0);
        let expected = crate::panocam::angles_to_dir(a) * 5.0;
        assert!((pts[0].position - expected).norm() < 1e-12);
    }

    #[test]
    fn all_dropped_frame_gives_no_points() {
        let s = sensor();
        let f = Frame::new(64, 16, vec![0.0; 1024], vec![0.0; 1024], 0.0, Pose::identity()).unwrap();
        assert!(range_to_points(&f, &s).unwrap().is_empty());
    }

    #[test]
    fn nearest_return_wins() {
        let s = sensor();
        let d = s.pixel_ray(10, 5).dir;
        let pts = [PointSample { position: d * 7.0, intensity: 0.2, time: 0.0 }, PointSample { position: d * 3.0, intensity: 0.9, time: 0.0 }];
        let f = points_to_range(&pts, &s, &Pose::identity(), 1.0).unwrap();
        let i = 5 * 64 + 10;
        assert_eq!(f.range[i], 3.0);
        assert_eq!(f.intensity[i], 0.9);
        assert_eq!(f.hit_count(), 1);
        assert!(points_to_range(&[], &s, &Pose::identity(), 0.0).is_err());
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let rot = nalgebra::Rotation3::from_euler_angles(rng.gen_range(-0.2..0.2), rng.gen_range(-PI..PI), rng.gen_range(-0.2..0.2)).into_inner();
        Pose::from_rotation_origin(rot, Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0), rng.gen_range(-5.0..5.0))).unwrap()
    }

    proptest! {
        #[test]
        fn grid_aligned_round_trip_is_exact(seed in 0u64..500) {
            let s = sensor();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = s.pixel_count();
            let range: Vec<f32> = (0..n).map(|_| if rng.gen_bool(0.7) { rng.gen_range(0.5f32..60.0) } else { 0.0 }).collect();
            let intensity: Vec<f32> = range.iter().map(|&r| if r > 0.0 { rng.gen_range(0.0f32..1.0) } else { 0.0 }).collect();
            let pose = random_pose(&mut rng);
            let f = Frame::new(64, 16, range, intensity, 0.5, pose).unwrap();
            let pts = range_to_points(&f, &s).unwrap();
            prop_assert_eq!(pts.len(), f.hit_count());
            if !pts.is_empty() {
                let g = points_to_range(&pts, &s, &pose, 0.5).unwrap();
                prop_assert_eq!(g, f);
            }
        }
    }
}
