//! Pan/tilt arm controller: pixel-to-PPM mapping, rate-limited smoothing
//! toward the latest setpoint, and PPM-to-angle conversion for the
//! simulator's beam kinematics.
//!
//! Servo commands are pulse widths in microseconds. The image corners map
//! linearly onto the PPM bounds, so the mapping is exact at all four
//! corners by construction.

use serde::Deserialize;

use crate::camera::{CameraModel, PixelPoint};

/// Pan/tilt servo command pair, microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub ppm_j1: f64,
    pub ppm_j2: f64,
}

/// Controller configuration. Angular ranges are (at `ppm_min`, at
/// `ppm_max`) pairs and may be descending when a joint's rotation sense
/// is opposite to the image axis it tracks.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ArmConfig {
    pub ppm_min: f64,
    pub ppm_max: f64,
    /// Saturation: maximum PPM change per control tick.
    pub delta_max: f64,
    /// Proportional smoothing gain in (0, 1].
    pub smoothing_beta: f64,
    /// Pan angle at (ppm_min, ppm_max), radians.
    pub pan_range: (f64, f64),
    /// Tilt angle at (ppm_min, ppm_max), radians.
    pub tilt_range: (f64, f64),
}

impl Default for ArmConfig {
    fn default() -> Self {
        let pan = 35.0_f64.to_radians();
        let tilt = 30.0_f64.to_radians();
        ArmConfig {
            ppm_min: 1000.0,
            ppm_max: 2000.0,
            delta_max: 40.0,
            smoothing_beta: 0.35,
            pan_range: (-pan, pan),
            tilt_range: (-tilt, tilt),
        }
    }
}

impl ArmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.ppm_min >= self.ppm_max {
            return Err("ppm_min must be < ppm_max".into());
        }
        if self.delta_max <= 0.0 {
            return Err("delta_max must be > 0".into());
        }
        if !(0.0 < self.smoothing_beta && self.smoothing_beta <= 1.0) {
            return Err("smoothing_beta must be in (0, 1]".into());
        }
        if self.pan_range.0 == self.pan_range.1 || self.tilt_range.0 == self.tilt_range.1 {
            return Err("angular ranges must be nonzero".into());
        }
        Ok(())
    }

    pub fn center(&self) -> JointState {
        let mid = (self.ppm_min + self.ppm_max) / 2.0;
        JointState {
            ppm_j1: mid,
            ppm_j2: mid,
        }
    }
}

/// Result of mapping a pixel to servo targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMapping {
    pub target: JointState,
    /// True when the pixel fell outside the image and was clamped.
    pub clamped: bool,
}

/// Linear pixel-to-PPM map: (0, 0) hits (ppm_min, ppm_min) and
/// (W-1, H-1) hits (ppm_max, ppm_max). Out-of-bounds pixels are clamped
/// onto the image and flagged.
pub fn pixel_to_ppm(p: &PixelPoint, camera: &CameraModel, cfg: &ArmConfig) -> PixelMapping {
    let max_x = (camera.width - 1) as f64;
    let max_y = (camera.height - 1) as f64;
    let x = p.x.clamp(0.0, max_x);
    let y = p.y.clamp(0.0, max_y);
    let clamped = x != p.x || y != p.y;
    let span = cfg.ppm_max - cfg.ppm_min;
    PixelMapping {
        target: JointState {
            ppm_j1: cfg.ppm_min + (x / max_x) * span,
            ppm_j2: cfg.ppm_min + (y / max_y) * span,
        },
        clamped,
    }
}

/// One smoothing tick toward the target: per joint, a proportional step
/// `beta * (target - current)` saturated at `delta_max`, with the result
/// clamped into the PPM bounds.
pub fn step(current: &JointState, target: &JointState, cfg: &ArmConfig) -> JointState {
    let advance = |cur: f64, tgt: f64| -> f64 {
        let raw = cfg.smoothing_beta * (tgt - cur);
        let applied = raw.clamp(-cfg.delta_max, cfg.delta_max);
        (cur + applied).clamp(cfg.ppm_min, cfg.ppm_max)
    };
    JointState {
        ppm_j1: advance(current.ppm_j1, target.ppm_j1),
        ppm_j2: advance(current.ppm_j2, target.ppm_j2),
    }
}

/// PPM to joint angles: `ppm_min` maps to the range start, `ppm_max` to
/// the range end, linearly in between.
pub fn ppm_to_angles(state: &JointState, cfg: &ArmConfig) -> (f64, f64) {
    let span = cfg.ppm_max - cfg.ppm_min;
    let map = |ppm: f64, range: (f64, f64)| -> f64 {
        let t = (ppm - cfg.ppm_min) / span;
        range.0 + t * (range.1 - range.0)
    };
    (
        map(state.ppm_j1, cfg.pan_range),
        map(state.ppm_j2, cfg.tilt_range),
    )
}
