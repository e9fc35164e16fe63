//! Differentiable panoramic Gaussian splatting for LiDAR scenes.
//!
//! Scenes are made of flat 2D Gaussian disks whose centers vibrate periodically
//! in time and whose opacity decays away from a life peak. A spinning LiDAR is
//! modeled as an equirectangular range image; every pixel ray is intersected
//! exactly with every splat it may touch, and depth, intensity, ray-drop
//! probability and normals are alpha-blended front to back. The renderer has a
//! hand-written reverse pass so the whole scene can be fitted to recorded
//! range/intensity maps and re-simulated from new poses and times.

pub mod baseline3d;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod intersect;
pub mod lidario;
pub mod losses;
pub mod metrics;
pub mod optim;
pub mod panocam;
pub mod raster;
pub mod scene;
pub mod sh;
pub mod spatial;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec4 = nalgebra::Vector4<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Mat4 = nalgebra::Matrix4<f64>;
