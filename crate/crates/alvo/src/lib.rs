//! Active-light visual odometry testbed.
//!
//! A deterministic raycast simulator renders dark indoor scenes with a
//! steerable cone-beam spotlight. A closed-loop pipeline aims the beam at
//! texture-rich regions (enhance, detect, cluster, score, select), a
//! pan/tilt controller slews the light, and a minimal depth-assisted
//! frame-to-frame tracker estimates the camera trajectory. An evaluation
//! harness scores episodes (translational / rotational RMSE, trajectory
//! length ratio, tracking losses) so the active strategy can be compared
//! against fixed-light and lights-on baselines under identical seeds.

pub mod arm;
pub mod camera;
pub mod enhance;
pub mod eval;
pub mod focus;
pub mod frame;
pub mod geometry;
pub mod odom;
pub mod pipeline;
pub mod sim;

pub use camera::{CameraModel, PixelPoint};
pub use frame::Frame;
pub use geometry::Pose;
