//! Episode configuration: a versioned TOML file covering every stage.
//! Every field has a default; a config file only overrides what it names.

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::arm::ArmConfig;
use crate::camera::CameraModel;
use crate::enhance::{ClassicalConfig, EnhancerChoice};
use crate::focus::{ClusterParams, NormalizationMode, TsmParams};
use crate::odom::OdomParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported config version {0} (expected 1)")]
    Version(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Scene file path or `preset:<name>`.
    pub scene: String,
    /// Lighting mode name: AL, FL or LO.
    pub mode: String,
    pub seed: u64,
    /// Episode length, seconds (clamped to the scene's script range).
    pub duration: f64,
    /// Low-rate resample period T_s, seconds.
    pub resample_period: f64,
    pub camera: CameraModel,
    /// Response floor for the focus detector. The global contrast stretch
    /// rescales responses with frame content, so the stage additionally
    /// keeps only the strongest corners and prunes small clusters.
    pub focus_threshold: f64,
    /// Strongest-response cap on focus keypoints per frame.
    pub focus_max_features: usize,
    /// Clusters below this member count are ignored by target selection.
    pub min_cluster_size: usize,
    pub tsm: TsmParams,
    pub cluster: ClusterParams,
    pub arm: ArmConfig,
    pub odom: OdomParams,
    pub enhancer: EnhancerChoice,
    /// Ambient irradiance used by the lights-on baseline.
    pub lo_ambient: f64,
    /// Deterministic event schedule when true; a free-running threaded
    /// loop (latest-value mailboxes, no acceptance guarantees) when false.
    pub lockstep: bool,
    /// Dump every Nth frame as PGM + depth when set.
    pub dump_every: Option<u32>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        // The arm and odometry defaults here differ from the bare
        // library defaults: the pan range is inverted because pixel x
        // grows rightward while positive pan (about body z-up) swings
        // left, the slew limit suits the soft-edged beam, and the
        // matcher search stays below the shortest texture period.
        let arm = ArmConfig {
            delta_max: 25.0,
            pan_range: (35.0_f64.to_radians(), -35.0_f64.to_radians()),
            ..ArmConfig::default()
        };
        let odom = OdomParams {
            search_radius: 10,
            inlier_dist: 0.03,
            ..OdomParams::default()
        };
        PipelineConfig {
            scene: "preset:corridor_l1".into(),
            mode: "AL".into(),
            seed: 7,
            duration: 20.0,
            resample_period: 0.5,
            camera: CameraModel::default(),
            focus_threshold: 1.5e4,
            focus_max_features: 150,
            min_cluster_size: 12,
            tsm: TsmParams::default(),
            cluster: ClusterParams {
                eps_px: 16.0,
                ..ClusterParams::default()
            },
            arm,
            odom,
            enhancer: EnhancerChoice::default(),
            lo_ambient: 0.5,
            lockstep: true,
            dump_every: None,
        }
    }
}

impl PipelineConfig {
    pub fn fps(&self) -> f64 {
        self.camera.fps
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.camera
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.tsm.validate().map_err(ConfigError::Invalid)?;
        self.cluster.validate().map_err(ConfigError::Invalid)?;
        self.arm.validate().map_err(ConfigError::Invalid)?;
        if self.resample_period < 1.0 / self.fps() {
            return Err(ConfigError::Invalid(
                "resample_period must be at least one frame period".into(),
            ));
        }
        if self.duration <= 0.0 {
            return Err(ConfigError::Invalid("duration must be positive".into()));
        }
        if let EnhancerChoice::Classical(c) = &self.enhancer {
            c.validate().map_err(ConfigError::Invalid)?;
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        if file.version != 1 {
            return Err(ConfigError::Version(file.version));
        }
        let cfg = file.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// TOML schema (version 1)
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    version: u32,
    #[serde(default)]
    scene: Option<String>,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    duration_s: Option<f64>,
    #[serde(default)]
    resample_period_s: Option<f64>,
    #[serde(default)]
    lockstep: Option<bool>,
    #[serde(default)]
    dump_every: Option<u32>,
    #[serde(default)]
    camera: Option<CameraSection>,
    #[serde(default)]
    focus: Option<FocusSection>,
    #[serde(default)]
    arm: Option<ArmSection>,
    #[serde(default)]
    odom: Option<OdomSection>,
    #[serde(default)]
    enhancer: Option<EnhancerSection>,
    #[serde(default)]
    lo: Option<LoSection>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CameraSection {
    width: Option<u32>,
    height: Option<u32>,
    fx: Option<f64>,
    fy: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    fps: Option<f64>,
    exposure_gain: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FocusSection {
    detector_threshold: Option<f64>,
    max_features: Option<usize>,
    min_cluster_size: Option<usize>,
    alpha: Option<f64>,
    epsilon: Option<f64>,
    normalization: Option<NormalizationMode>,
    eps_px: Option<f64>,
    min_pts: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ArmSection {
    ppm_min: Option<f64>,
    ppm_max: Option<f64>,
    delta_max: Option<f64>,
    smoothing_beta: Option<f64>,
    /// Degrees at (ppm_min, ppm_max); descending pairs flip the joint sense.
    pan_deg: Option<[f64; 2]>,
    tilt_deg: Option<[f64; 2]>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OdomSection {
    detector_threshold: Option<f64>,
    max_features: Option<usize>,
    search_radius: Option<u32>,
    match_threshold: Option<f64>,
    inlier_dist_m: Option<f64>,
    ransac_iters: Option<u32>,
    inlier_min: Option<usize>,
    min_depth_m: Option<f64>,
    advance_dist_m: Option<f64>,
    advance_rot_deg: Option<f64>,
    advance_match_fraction: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EnhancerSection {
    kind: Option<String>,
    gamma: Option<f64>,
    clip_percentiles: Option<[f64; 2]>,
    command: Option<Vec<String>>,
    timeout_s: Option<f64>,
    fallback: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LoSection {
    ambient: Option<f64>,
}

impl ConfigFile {
    fn into_config(self) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::default();
        if let Some(s) = self.scene {
            cfg.scene = s;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.duration_s {
            cfg.duration = d;
        }
        if let Some(r) = self.resample_period_s {
            cfg.resample_period = r;
        }
        if let Some(l) = self.lockstep {
            cfg.lockstep = l;
        }
        cfg.dump_every = self.dump_every;

        if let Some(c) = self.camera {
            let d = CameraModel::default();
            cfg.camera = CameraModel {
                width: c.width.unwrap_or(d.width),
                height: c.height.unwrap_or(d.height),
                fx: c.fx.unwrap_or(d.fx),
                fy: c.fy.unwrap_or(d.fy),
                cx: c.cx.unwrap_or(d.cx),
                cy: c.cy.unwrap_or(d.cy),
                fps: c.fps.unwrap_or(d.fps),
                exposure_gain: c.exposure_gain.unwrap_or(d.exposure_gain),
            };
        }

        if let Some(f) = self.focus {
            if let Some(t) = f.detector_threshold {
                cfg.focus_threshold = t;
            }
            if let Some(m) = f.max_features {
                cfg.focus_max_features = m;
            }
            if let Some(m) = f.min_cluster_size {
                cfg.min_cluster_size = m;
            }
            cfg.tsm = TsmParams {
                alpha: f.alpha.unwrap_or(cfg.tsm.alpha),
                epsilon: f.epsilon.unwrap_or(cfg.tsm.epsilon),
                normalization: f.normalization.unwrap_or(cfg.tsm.normalization),
            };
            cfg.cluster = ClusterParams {
                eps_px: f.eps_px.unwrap_or(cfg.cluster.eps_px),
                min_pts: f.min_pts.unwrap_or(cfg.cluster.min_pts),
            };
        }

        if let Some(a) = self.arm {
            let d = cfg.arm;
            cfg.arm = ArmConfig {
                ppm_min: a.ppm_min.unwrap_or(d.ppm_min),
                ppm_max: a.ppm_max.unwrap_or(d.ppm_max),
                delta_max: a.delta_max.unwrap_or(d.delta_max),
                smoothing_beta: a.smoothing_beta.unwrap_or(d.smoothing_beta),
                pan_range: a
                    .pan_deg
                    .map(|p| (p[0].to_radians(), p[1].to_radians()))
                    .unwrap_or(d.pan_range),
                tilt_range: a
                    .tilt_deg
                    .map(|p| (p[0].to_radians(), p[1].to_radians()))
                    .unwrap_or(d.tilt_range),
            };
        }

        if let Some(o) = self.odom {
            let d = cfg.odom;
            cfg.odom = OdomParams {
                detector_threshold: o.detector_threshold.unwrap_or(d.detector_threshold),
                max_features: o.max_features.unwrap_or(d.max_features),
                search_radius: o.search_radius.unwrap_or(d.search_radius),
                match_threshold: o.match_threshold.unwrap_or(d.match_threshold),
                inlier_dist: o.inlier_dist_m.unwrap_or(d.inlier_dist),
                ransac_iters: o.ransac_iters.unwrap_or(d.ransac_iters),
                inlier_min: o.inlier_min.unwrap_or(d.inlier_min),
                min_depth: o.min_depth_m.unwrap_or(d.min_depth),
                advance_dist: o.advance_dist_m.unwrap_or(d.advance_dist),
                advance_rot: o
                    .advance_rot_deg
                    .map(f64::to_radians)
                    .unwrap_or(d.advance_rot),
                advance_match_fraction: o
                    .advance_match_fraction
                    .unwrap_or(d.advance_match_fraction),
                seed: d.seed,
            };
        }

        if let Some(e) = self.enhancer {
            let kind = e.kind.as_deref().unwrap_or("classical");
            cfg.enhancer = match kind {
                "classical" => {
                    let d = ClassicalConfig::default();
                    EnhancerChoice::Classical(ClassicalConfig {
                        gamma: e.gamma.unwrap_or(d.gamma),
                        clip_percentiles: e
                            .clip_percentiles
                            .map(|p| (p[0], p[1]))
                            .unwrap_or(d.clip_percentiles),
                    })
                }
                "external" => {
                    let command = e.command.ok_or_else(|| {
                        ConfigError::Invalid("external enhancer needs a command".into())
                    })?;
                    EnhancerChoice::External {
                        command,
                        timeout: Duration::from_secs_f64(e.timeout_s.unwrap_or(5.0)),
                        fallback: e.fallback.unwrap_or(true),
                    }
                }
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown enhancer kind '{other}'"
                    )))
                }
            };
        }

        if let Some(lo) = self.lo {
            if let Some(a) = lo.ambient {
                cfg.lo_ambient = a;
            }
        }
        Ok(cfg)
    }
}
