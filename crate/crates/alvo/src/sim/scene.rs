//! Scene description: planar surfaces with albedo textures, a cone-beam
//! spotlight, ambient light, sensor noise and the scripted robot path.
//!
//! Scenes load from a versioned TOML file (see `scenes/` for the bundled
//! presets and the schema reference in the README). Surfaces are rectangles
//! in their local x/y plane; the local z axis is the plane normal and
//! shading treats surfaces as two-sided.

use nalgebra::Vector3;
use serde::Deserialize;
use thiserror::Error;

use crate::geometry::Pose;
use crate::sim::noise;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene io: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported scene version {0} (expected 1)")]
    Version(u32),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("unknown scene preset '{0}'")]
    UnknownPreset(String),
}

/// Procedural albedo patterns. Values are reflectances in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum TextureKind {
    Flat {
        value: f64,
    },
    Checkerboard {
        cell: f64,
        low: f64,
        high: f64,
    },
    /// Random speckle: each `cell`-sized square is bright with
    /// probability `density`, keyed deterministically on `seed`.
    /// Aperiodic, so correlation trackers see no repeating lobes.
    NoisePatch {
        seed: u64,
        cell: f64,
        density: f64,
        low: f64,
        high: f64,
    },
}

/// Default speckle cell edge length in meters.
pub const SPECKLE_CELL: f64 = 0.025;

/// A texture painted over a rectangular region of a surface, in the
/// surface-local (u, v) frame centered on the surface origin.
#[derive(Debug, Clone, PartialEq)]
pub struct AlbedoTexture {
    pub kind: TextureKind,
    /// (u_min, v_min, u_max, v_max) in meters.
    pub region: (f64, f64, f64, f64),
}

impl AlbedoTexture {
    fn contains(&self, u: f64, v: f64) -> bool {
        let (u0, v0, u1, v1) = self.region;
        u >= u0 && u <= u1 && v >= v0 && v <= v1
    }

    fn value(&self, u: f64, v: f64) -> f64 {
        match &self.kind {
            TextureKind::Flat { value } => *value,
            TextureKind::Checkerboard { cell, low, high } => {
                let cu = (u / cell).floor() as i64;
                let cv = (v / cell).floor() as i64;
                if (cu + cv).rem_euclid(2) == 0 {
                    *high
                } else {
                    *low
                }
            }
            TextureKind::NoisePatch {
                seed,
                cell,
                density,
                low,
                high,
            } => {
                let cu = (u / cell).floor() as i64;
                let cv = (v / cell).floor() as i64;
                if noise::cell_uniform(*seed, cu, cv) < *density {
                    *high
                } else {
                    *low
                }
            }
        }
    }
}

/// One rectangular wall patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    /// Local-to-world transform; local z is the normal.
    pub pose: Pose,
    /// Full extent along local x and y, meters.
    pub extent: (f64, f64),
    /// Reflectance where no texture region applies.
    pub base_albedo: f64,
    pub textures: Vec<AlbedoTexture>,
}

impl Surface {
    /// Albedo at surface-local coordinates; the last matching texture wins.
    pub fn albedo(&self, u: f64, v: f64) -> f64 {
        let mut value = self.base_albedo;
        for tex in &self.textures {
            if tex.contains(u, v) {
                value = tex.value(u, v);
            }
        }
        value
    }
}

/// Cone-beam light with inverse-square falloff and a soft edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotLight {
    /// Radiant scale: irradiance at 1 m on-axis on a perpendicular surface.
    pub power: f64,
    /// Full opening angle of the cone, radians.
    pub cone_full_angle: f64,
    /// Angular width of the smooth edge beyond the half-angle, radians.
    pub edge_softness: f64,
}

impl Default for SpotLight {
    fn default() -> Self {
        SpotLight {
            power: 2.0,
            cone_full_angle: 30.0_f64.to_radians(),
            edge_softness: 3.0_f64.to_radians(),
        }
    }
}

impl SpotLight {
    /// Cone attenuation for a ray `angle` radians off the beam axis:
    /// 1 inside the half-angle, smoothstep down to 0 over `edge_softness`.
    pub fn cone_factor(&self, angle: f64) -> f64 {
        let half = self.cone_full_angle / 2.0;
        if angle <= half {
            1.0
        } else if angle >= half + self.edge_softness || self.edge_softness <= 0.0 {
            0.0
        } else {
            let t = (angle - half) / self.edge_softness;
            1.0 - t * t * (3.0 - 2.0 * t)
        }
    }
}

/// Scripted ground-truth motion plus the fixed mounting transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScript {
    /// (timestamp seconds, body pose in world), strictly increasing in time.
    pub samples: Vec<(f64, Pose)>,
    pub camera_extrinsic: Pose,
    pub arm_base_extrinsic: Pose,
}

impl TrajectoryScript {
    pub fn start_time(&self) -> f64 {
        self.samples.first().map(|(t, _)| *t).unwrap_or(0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub surfaces: Vec<Surface>,
    /// Uniform irradiance added everywhere; 0 means total darkness.
    pub ambient: f64,
    /// Additive Gaussian sensor noise, 8-bit intensity units.
    pub noise_sigma: f64,
    pub rng_seed: u64,
    pub spotlight: SpotLight,
    pub trajectory: TrajectoryScript,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.ambient < 0.0 {
            return Err(SceneError::Invalid("ambient must be >= 0".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(SceneError::Invalid("noise_sigma must be >= 0".into()));
        }
        if self.spotlight.power < 0.0 {
            return Err(SceneError::Invalid("spotlight power must be >= 0".into()));
        }
        if self.spotlight.cone_full_angle <= 0.0
            || self.spotlight.cone_full_angle >= std::f64::consts::PI
        {
            return Err(SceneError::Invalid(
                "cone_full_angle must be in (0, pi)".into(),
            ));
        }
        for (i, s) in self.surfaces.iter().enumerate() {
            if s.extent.0 <= 0.0 || s.extent.1 <= 0.0 {
                return Err(SceneError::Invalid(format!(
                    "surface {i} has non-positive extent"
                )));
            }
            if !(0.0..=1.0).contains(&s.base_albedo) {
                return Err(SceneError::Invalid(format!(
                    "surface {i} albedo outside [0,1]"
                )));
            }
            for t in &s.textures {
                let ok = match t.kind {
                    TextureKind::Flat { value } => (0.0..=1.0).contains(&value),
                    TextureKind::Checkerboard { cell, low, high } => {
                        cell > 0.0 && (0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high)
                    }
                    TextureKind::NoisePatch {
                        cell,
                        density,
                        low,
                        high,
                        ..
                    } => {
                        cell > 0.0
                            && (0.0..=1.0).contains(&density)
                            && (0.0..=1.0).contains(&low)
                            && (0.0..=1.0).contains(&high)
                    }
                };
                if !ok {
                    return Err(SceneError::Invalid(format!(
                        "surface {i} has an invalid texture"
                    )));
                }
            }
        }
        if self.trajectory.samples.len() < 2 {
            return Err(SceneError::Invalid(
                "trajectory needs at least two samples".into(),
            ));
        }
        for pair in self.trajectory.samples.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(SceneError::Invalid(
                    "trajectory timestamps must strictly increase".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Scene, SceneError> {
        let file: SceneFile = toml::from_str(text)?;
        let scene = file.into_scene()?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Scene, SceneError> {
        let text = std::fs::read_to_string(path)?;
        Scene::from_toml_str(&text)
    }

    /// Resolve `preset:<name>` to a bundled scene, otherwise load a file.
    pub fn resolve(source: &str) -> Result<Scene, SceneError> {
        if let Some(name) = source.strip_prefix("preset:") {
            let text = preset(name).ok_or_else(|| SceneError::UnknownPreset(name.to_string()))?;
            Scene::from_toml_str(text)
        } else {
            Scene::load(source)
        }
    }
}

/// Bundled scene presets, keyed by name.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "corridor_l1" => Some(include_str!("../../../../scenes/corridor_l1.toml")),
        "corridor_l2" => Some(include_str!("../../../../scenes/corridor_l2.toml")),
        "corridor_r" => Some(include_str!("../../../../scenes/corridor_r.toml")),
        "room_r" => Some(include_str!("../../../../scenes/room_r.toml")),
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &["corridor_l1", "corridor_l2", "corridor_r", "room_r"]
}

// ---------------------------------------------------------------------------
// TOML schema (version 1)
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    version: u32,
    scene: SceneSection,
    #[serde(default)]
    spotlight: SpotSection,
    #[serde(rename = "surface", default)]
    surfaces: Vec<SurfaceSection>,
    trajectory: TrajectorySection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneSection {
    #[serde(default)]
    ambient: f64,
    #[serde(default = "default_noise_sigma")]
    noise_sigma: f64,
    #[serde(default)]
    rng_seed: u64,
}

fn default_noise_sigma() -> f64 {
    2.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpotSection {
    #[serde(default = "default_power")]
    power: f64,
    #[serde(default = "default_cone_deg")]
    cone_deg: f64,
    #[serde(default = "default_edge_deg")]
    edge_softness_deg: f64,
}

fn default_power() -> f64 {
    2.0
}
fn default_cone_deg() -> f64 {
    30.0
}
fn default_edge_deg() -> f64 {
    3.0
}

impl Default for SpotSection {
    fn default() -> Self {
        SpotSection {
            power: default_power(),
            cone_deg: default_cone_deg(),
            edge_softness_deg: default_edge_deg(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceSection {
    center: [f64; 3],
    /// Roll-pitch-yaw degrees orienting the local frame in the world.
    #[serde(default)]
    rpy_deg: [f64; 3],
    extent: [f64; 2],
    #[serde(default = "default_albedo")]
    albedo: f64,
    #[serde(rename = "texture", default)]
    textures: Vec<TextureSection>,
}

fn default_albedo() -> f64 {
    0.3
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextureSection {
    kind: String,
    #[serde(default)]
    value: Option<f64>,
    #[serde(default)]
    cell: Option<f64>,
    #[serde(default)]
    low: Option<f64>,
    #[serde(default)]
    high: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    density: Option<f64>,
    /// (u_min, v_min, u_max, v_max); defaults to the whole surface.
    #[serde(default)]
    region: Option<[f64; 4]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectorySection {
    #[serde(default)]
    camera_extrinsic: Option<PoseSection>,
    #[serde(default)]
    arm_base_extrinsic: Option<PoseSection>,
    #[serde(rename = "sample")]
    samples: Vec<SampleSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseSection {
    #[serde(default)]
    position: [f64; 3],
    #[serde(default)]
    rpy_deg: [f64; 3],
}

impl PoseSection {
    fn into_pose(self) -> Pose {
        pose_from_rpy_deg(self.position, self.rpy_deg)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleSection {
    t: f64,
    position: [f64; 3],
    #[serde(default)]
    yaw_deg: f64,
    #[serde(default)]
    rpy_deg: Option<[f64; 3]>,
}

fn pose_from_rpy_deg(position: [f64; 3], rpy_deg: [f64; 3]) -> Pose {
    Pose::from_euler(
        rpy_deg[0].to_radians(),
        rpy_deg[1].to_radians(),
        rpy_deg[2].to_radians(),
        Vector3::new(position[0], position[1], position[2]),
    )
}

/// Rotation placing a camera (x right, y down, z forward) on a body frame
/// (x forward, y left, z up), looking along body +x.
pub fn forward_camera_extrinsic() -> Pose {
    // Columns are the camera axes expressed in the body frame.
    let rot = nalgebra::Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    );
    Pose::new(
        crate::geometry::quaternion_from_rotation(&rot),
        Vector3::zeros(),
    )
}

impl SceneFile {
    fn into_scene(self) -> Result<Scene, SceneError> {
        if self.version != 1 {
            return Err(SceneError::Version(self.version));
        }
        let mut surfaces = Vec::new();
        for s in self.surfaces {
            let mut textures = Vec::new();
            for t in s.textures {
                let region = t.region.map(|r| (r[0], r[1], r[2], r[3])).unwrap_or((
                    -s.extent[0] / 2.0,
                    -s.extent[1] / 2.0,
                    s.extent[0] / 2.0,
                    s.extent[1] / 2.0,
                ));
                let kind = match t.kind.as_str() {
                    "flat" => TextureKind::Flat {
                        value: t.value.ok_or_else(|| {
                            SceneError::Invalid("flat texture needs value".into())
                        })?,
                    },
                    "checkerboard" => TextureKind::Checkerboard {
                        cell: t
                            .cell
                            .ok_or_else(|| SceneError::Invalid("checkerboard needs cell".into()))?,
                        low: t.low.unwrap_or(0.1),
                        high: t.high.unwrap_or(0.9),
                    },
                    "noise_patch" => TextureKind::NoisePatch {
                        seed: t.seed.unwrap_or(0),
                        cell: t.cell.unwrap_or(SPECKLE_CELL),
                        density: t.density.ok_or_else(|| {
                            SceneError::Invalid("noise_patch needs density".into())
                        })?,
                        low: t.low.unwrap_or(0.1),
                        high: t.high.unwrap_or(0.9),
                    },
                    other => {
                        return Err(SceneError::Invalid(format!(
                            "unknown texture kind '{other}'"
                        )))
                    }
                };
                textures.push(AlbedoTexture { kind, region });
            }
            surfaces.push(Surface {
                pose: pose_from_rpy_deg(s.center, s.rpy_deg),
                extent: (s.extent[0], s.extent[1]),
                base_albedo: s.albedo,
                textures,
            });
        }
        let samples = self
            .trajectory
            .samples
            .into_iter()
            .map(|s| {
                let pose = match s.rpy_deg {
                    Some(rpy) => pose_from_rpy_deg(s.position, rpy),
                    None => pose_from_rpy_deg(s.position, [0.0, 0.0, s.yaw_deg]),
                };
                (s.t, pose)
            })
            .collect();
        Ok(Scene {
            surfaces,
            ambient: self.scene.ambient,
            noise_sigma: self.scene.noise_sigma,
            rng_seed: self.scene.rng_seed,
            spotlight: SpotLight {
                power: self.spotlight.power,
                cone_full_angle: self.spotlight.cone_deg.to_radians(),
                edge_softness: self.spotlight.edge_softness_deg.to_radians(),
            },
            trajectory: TrajectoryScript {
                samples,
                camera_extrinsic: self
                    .trajectory
                    .camera_extrinsic
                    .map(|p| p.into_pose())
                    .unwrap_or_else(forward_camera_extrinsic),
                arm_base_extrinsic: self
                    .trajectory
                    .arm_base_extrinsic
                    .map(|p| p.into_pose())
                    .unwrap_or_else(Pose::identity),
            },
        })
    }
}
