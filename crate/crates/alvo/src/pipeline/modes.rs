//! Lighting strategies behind a common trait, selected by name.
//!
//! Each baseline differs only in how it drives the light: the active mode
//! chases focus targets, the fixed mode pins the beam at the image
//! center, and the lights-on mode floods the scene with ambient light.
//! Everything else in the episode loop is shared.

use crate::arm::{ArmConfig, JointState};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::PipelineError;

/// Behavior that varies across the AL / FL / LO baselines.
pub trait LightingMode: Send {
    fn name(&self) -> &'static str;

    /// Whether the low-rate enhance-and-focus stream runs at all.
    fn runs_focus(&self) -> bool {
        false
    }

    /// Whether the spotlight is powered.
    fn spotlight_enabled(&self) -> bool {
        true
    }

    /// Scene ambient override, if the mode changes the room lighting.
    fn ambient_override(&self) -> Option<f64> {
        None
    }

    /// Deliver a new focus target (latest-value mailbox semantics).
    fn deposit_target(&mut self, _target: JointState) {}

    /// The setpoint the arm chases this tick.
    fn setpoint(&self, arm: &ArmConfig) -> JointState;
}

/// Active light: the arm chases the latest focus selection.
pub struct ActiveLight {
    latest: Option<JointState>,
}

impl LightingMode for ActiveLight {
    fn name(&self) -> &'static str {
        "AL"
    }

    fn runs_focus(&self) -> bool {
        true
    }

    fn deposit_target(&mut self, target: JointState) {
        self.latest = Some(target);
    }

    fn setpoint(&self, arm: &ArmConfig) -> JointState {
        self.latest.unwrap_or_else(|| arm.center())
    }
}

/// Fixed light: the beam is held at the image-center equivalent command.
pub struct FixedLight;

impl LightingMode for FixedLight {
    fn name(&self) -> &'static str {
        "FL"
    }

    fn setpoint(&self, arm: &ArmConfig) -> JointState {
        arm.center()
    }
}

/// Lights on: the whole scene is lit by ambient light; the spotlight is
/// off and the arm is parked.
pub struct LightsOn {
    ambient: f64,
}

impl LightingMode for LightsOn {
    fn name(&self) -> &'static str {
        "LO"
    }

    fn spotlight_enabled(&self) -> bool {
        false
    }

    fn ambient_override(&self) -> Option<f64> {
        Some(self.ambient)
    }

    fn setpoint(&self, arm: &ArmConfig) -> JointState {
        arm.center()
    }
}

/// Registry: build a lighting mode from its configured name.
pub fn mode_by_name(
    name: &str,
    cfg: &PipelineConfig,
) -> Result<Box<dyn LightingMode>, PipelineError> {
    match name.to_ascii_uppercase().as_str() {
        "AL" => Ok(Box::new(ActiveLight { latest: None })),
        "FL" => Ok(Box::new(FixedLight)),
        "LO" => Ok(Box::new(LightsOn {
            ambient: cfg.lo_ambient,
        })),
        other => Err(PipelineError::UnknownMode(other.to_string())),
    }
}

pub fn mode_names() -> &'static [&'static str] {
    &["AL", "FL", "LO"]
}
