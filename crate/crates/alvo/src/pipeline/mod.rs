//! Closed-loop episode orchestration.
//!
//! Two image streams run off one deterministic tick schedule: every tick
//! renders a raw frame and feeds the odometry; every resample period the
//! same tick's frame is enhanced, the focus stage picks a target and the
//! arm receives a new setpoint through a latest-value mailbox. The arm
//! then steps once per tick. Baselines differ only in their
//! [`modes::LightingMode`] strategy.
//!
//! The default schedule is lockstep and bit-reproducible. An optional
//! free-running mode executes the focus stage on a worker thread with
//! latest-value mailboxes on both sides; it drops stale frames and makes
//! no determinism promises.

pub mod config;
pub mod modes;

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::arm::{self, ArmConfig, JointState};
use crate::camera::PixelPoint;
use crate::enhance::{self, ClassicalEnhancer, EnhanceError, Enhancer, EnhancerChoice};
use crate::eval::{self, Alignment, EpisodeReport, Trajectory, TrajectoryKind};
use crate::focus::{self, ClusterParams, FocusState, TsmParams};
use crate::frame::Frame;
use crate::odom::{OdomParams, OdomState, TrackResult};
use crate::sim::{self, scene::Scene, JointLimits, RenderInputs};
use config::PipelineConfig;
use modes::LightingMode;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown mode '{0}' (expected AL, FL or LO)")]
    UnknownMode(String),
    #[error(transparent)]
    Scene(#[from] crate::sim::scene::SceneError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("enhancer failed with no fallback: {0}")]
    Enhance(#[from] EnhanceError),
    #[error(transparent)]
    Focus(#[from] crate::focus::FocusError),
    #[error(transparent)]
    Odom(#[from] crate::odom::OdomError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
    #[error("episode io: {0}")]
    Io(#[from] std::io::Error),
}

/// Counters describing what actually happened during an episode.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EpisodeStats {
    pub frames: u64,
    pub tracked_frames: u64,
    pub focus_events: u64,
    /// Focus firings that found no cluster; the previous setpoint held.
    pub focus_no_target: u64,
    /// External enhancer failures absorbed by the classical fallback.
    pub enhancer_fallbacks: u64,
    /// Enhanced frames that reached the odometry stream. Stays zero: the
    /// streams are separated by construction and this counter proves it.
    pub enhanced_frames_into_odom: u64,
    /// Focus targets that landed outside the image and were clamped.
    pub clamped_targets: u64,
}

/// One arm trace row per tick.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub tick: u64,
    pub target: JointState,
    pub state: JointState,
    pub pan: f64,
    pub tilt: f64,
}

/// Everything an episode produces.
pub struct EpisodeArtifacts {
    pub mode: String,
    pub report: EpisodeReport,
    pub gt: Trajectory,
    pub est: Trajectory,
    pub trace: Vec<TraceRow>,
    pub stats: EpisodeStats,
}

/// The focus stage bundled for one invocation site.
struct FocusStage {
    enhancer: Box<dyn Enhancer>,
    fallback: Option<ClassicalEnhancer>,
    state: FocusState,
    threshold: f64,
    max_features: usize,
    min_cluster_size: usize,
    cluster: ClusterParams,
    tsm: TsmParams,
    camera: crate::camera::CameraModel,
    arm: ArmConfig,
}

enum FocusOutcome {
    Target {
        state: JointState,
        clamped: bool,
    },
    NoTarget,
    FellBack {
        state: Option<JointState>,
        clamped: bool,
    },
}

impl FocusStage {
    fn new(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let fallback = match &cfg.enhancer {
            EnhancerChoice::External { fallback: true, .. } => {
                Some(ClassicalEnhancer::new(Default::default()))
            }
            _ => None,
        };
        Ok(FocusStage {
            enhancer: enhance::create(&cfg.enhancer)?,
            fallback,
            state: FocusState::default(),
            threshold: cfg.focus_threshold,
            max_features: cfg.focus_max_features,
            min_cluster_size: cfg.min_cluster_size,
            cluster: cfg.cluster,
            tsm: cfg.tsm,
            camera: cfg.camera,
            arm: cfg.arm,
        })
    }

    /// Detect corners on the enhanced frame and cluster them. The global
    /// contrast stretch moves absolute response levels around with frame
    /// content, so detection keeps the strongest `max_features` corners
    /// above the floor and clusters below `min_cluster_size` are pruned
    /// (random noise corners neither concentrate nor persist).
    fn centroids(&self, enhanced: &Frame) -> Vec<focus::Centroid> {
        let mut keypoints = focus::detect_features(enhanced, self.threshold);
        if keypoints.len() > self.max_features {
            keypoints.sort_by(|a, b| b.response.partial_cmp(&a.response).unwrap());
            keypoints.truncate(self.max_features);
            keypoints.sort_by(|a, b| {
                (a.position.y, a.position.x)
                    .partial_cmp(&(b.position.y, b.position.x))
                    .unwrap()
            });
        }
        let mut centroids = focus::cluster(&keypoints, &self.cluster);
        centroids.retain(|c| c.count >= self.min_cluster_size);
        centroids
    }

    /// Enhance the frame, run detect-cluster-select and map the target
    /// pixel to servo commands.
    fn run(&mut self, frame: &Frame) -> Result<FocusOutcome, PipelineError> {
        let (enhanced, fell_back) = match self.enhancer.enhance(frame) {
            Ok(f) => (f, false),
            Err(e) => match &self.fallback {
                Some(fb) => (fb.enhance(frame)?, true),
                None => return Err(PipelineError::Enhance(e)),
            },
        };
        let centroids = self.centroids(&enhanced);
        match focus::select_target(&centroids, &mut self.state, &self.tsm) {
            Ok(sel) => {
                let mapping = arm::pixel_to_ppm(&sel.target, &self.camera, &self.arm);
                let outcome = if fell_back {
                    FocusOutcome::FellBack {
                        state: Some(mapping.target),
                        clamped: mapping.clamped,
                    }
                } else {
                    FocusOutcome::Target {
                        state: mapping.target,
                        clamped: mapping.clamped,
                    }
                };
                Ok(outcome)
            }
            Err(focus::FocusError::NoTarget) => {
                if fell_back {
                    Ok(FocusOutcome::FellBack {
                        state: None,
                        clamped: false,
                    })
                } else {
                    Ok(FocusOutcome::NoTarget)
                }
            }
            Err(e) => Err(PipelineError::Focus(e)),
        }
    }
}

/// Run one episode under the configured mode.
///
/// `dump_dir`, when set together with `config.dump_every`, receives
/// `frame_<index>.pgm` and `frame_<index>.depth` dumps.
pub fn run_episode(
    cfg: &PipelineConfig,
    dump_dir: Option<&Path>,
) -> Result<EpisodeArtifacts, PipelineError> {
    cfg.validate()?;
    let mut scene = Scene::resolve(&cfg.scene)?;
    // One master seed drives both the render noise and the estimator.
    scene.rng_seed ^= cfg.seed;

    let mut mode = modes::mode_by_name(&cfg.mode, cfg)?;
    let mut focus_stage = mode
        .runs_focus()
        .then(|| FocusStage::new(cfg))
        .transpose()?;

    if cfg.lockstep {
        run_loop(cfg, &scene, mode.as_mut(), &mut focus_stage, dump_dir)
    } else {
        run_free_running(cfg, &scene, mode, focus_stage, dump_dir)
    }
}

fn episode_ticks(cfg: &PipelineConfig, scene: &Scene) -> (f64, u64) {
    let script = &scene.trajectory;
    let span = script.end_time() - script.start_time();
    let duration = cfg.duration.min(span);
    let ticks = (duration * cfg.fps()).round() as u64;
    (duration, ticks.max(1))
}

struct TickContext<'a> {
    cfg: &'a PipelineConfig,
    scene: &'a Scene,
    limits: JointLimits,
    gt: Trajectory,
    est: Trajectory,
    trace: Vec<TraceRow>,
    stats: EpisodeStats,
    odom: OdomState,
    arm_state: JointState,
}

impl<'a> TickContext<'a> {
    fn new(cfg: &'a PipelineConfig, scene: &'a Scene) -> Result<Self, PipelineError> {
        let script = &scene.trajectory;
        let start = script.start_time();
        let body0 = sim::sample_ground_truth(script, start)?;
        let cam0 = body0.compose(&script.camera_extrinsic);
        let odom_params = OdomParams {
            seed: cfg.seed,
            ..cfg.odom
        };
        Ok(TickContext {
            cfg,
            scene,
            limits: JointLimits::default(),
            gt: Trajectory::new(TrajectoryKind::GroundTruth),
            est: Trajectory::new(TrajectoryKind::Estimate),
            trace: Vec::new(),
            stats: EpisodeStats::default(),
            odom: OdomState::new(cfg.camera, odom_params, cam0),
            arm_state: cfg.arm.center(),
        })
    }

    /// Render the frame for tick `i` and advance ground truth + odometry.
    fn render_and_track(
        &mut self,
        i: u64,
        mode: &dyn LightingMode,
        dump_dir: Option<&Path>,
    ) -> Result<Frame, PipelineError> {
        let script = &self.scene.trajectory;
        let t = script.start_time() + i as f64 / self.cfg.fps();
        let body = sim::sample_ground_truth(script, t)?;
        let cam_pose = body.compose(&script.camera_extrinsic);
        self.gt.push(t, cam_pose);

        let (pan, tilt) = arm::ppm_to_angles(&self.arm_state, &self.cfg.arm);
        let beam = sim::beam_pose(&body, &script.arm_base_extrinsic, pan, tilt, &self.limits);

        let inputs = RenderInputs {
            camera_pose: cam_pose,
            beam: beam.pose,
            spot_enabled: mode.spotlight_enabled(),
            ambient_override: mode.ambient_override(),
            frame_index: i,
            timestamp: t,
        };
        let frame = sim::render(self.scene, &inputs, &self.cfg.camera);
        self.stats.frames += 1;

        if let (Some(dir), Some(every)) = (dump_dir, self.cfg.dump_every) {
            if every > 0 && i.is_multiple_of(every as u64) {
                std::fs::create_dir_all(dir)?;
                frame.save_pgm(dir.join(format!("frame_{i:06}.pgm")))?;
                frame.save_depth(dir.join(format!("frame_{i:06}.depth")))?;
            }
        }

        // The odometry stream consumes the raw frame only.
        match self.odom.track(&frame)? {
            TrackResult::Tracked { pose, .. } => {
                self.est.push(t, pose);
                self.stats.tracked_frames += 1;
            }
            TrackResult::Lost | TrackResult::NotAcquired => {}
        }
        Ok(frame)
    }

    /// Step the arm toward the mode's setpoint and record the trace row.
    fn step_arm(&mut self, i: u64, mode: &dyn LightingMode) {
        let target = mode.setpoint(&self.cfg.arm);
        self.arm_state = arm::step(&self.arm_state, &target, &self.cfg.arm);
        let (pan, tilt) = arm::ppm_to_angles(&self.arm_state, &self.cfg.arm);
        self.trace.push(TraceRow {
            tick: i,
            target,
            state: self.arm_state,
            pan,
            tilt,
        });
    }

    fn finish(self, mode_name: &str) -> Result<EpisodeArtifacts, PipelineError> {
        let t_lost = self.odom.t_lost;
        let mut stats = self.stats;
        stats.enhanced_frames_into_odom = self.odom.enhanced_frames_seen;
        let report = eval::evaluate(&self.gt, &self.est, 0.02, t_lost, Alignment::None)?;
        Ok(EpisodeArtifacts {
            mode: mode_name.to_string(),
            report,
            gt: self.gt,
            est: self.est,
            trace: self.trace,
            stats,
        })
    }
}

fn apply_focus_outcome(
    outcome: FocusOutcome,
    mode: &mut dyn LightingMode,
    stats: &mut EpisodeStats,
) {
    match outcome {
        FocusOutcome::Target { state, clamped } => {
            if clamped {
                stats.clamped_targets += 1;
            }
            mode.deposit_target(state);
        }
        FocusOutcome::NoTarget => stats.focus_no_target += 1,
        FocusOutcome::FellBack { state, clamped } => {
            stats.enhancer_fallbacks += 1;
            if let Some(s) = state {
                if clamped {
                    stats.clamped_targets += 1;
                }
                mode.deposit_target(s);
            } else {
                stats.focus_no_target += 1;
            }
        }
    }
}

/// Deterministic lockstep schedule.
fn run_loop(
    cfg: &PipelineConfig,
    scene: &Scene,
    mode: &mut dyn LightingMode,
    focus_stage: &mut Option<FocusStage>,
    dump_dir: Option<&Path>,
) -> Result<EpisodeArtifacts, PipelineError> {
    let (duration, ticks) = episode_ticks(cfg, scene);
    let _ = duration;
    let mut ctx = TickContext::new(cfg, scene)?;
    let start = scene.trajectory.start_time();
    let mut next_focus = start;

    for i in 0..ticks {
        let t = start + i as f64 / cfg.fps();
        let frame = ctx.render_and_track(i, mode, dump_dir)?;

        // The focus stage fires when sim time crosses a multiple of the
        // resample period, and always processes the current frame.
        if t + 1e-9 >= next_focus {
            next_focus += cfg.resample_period;
            if let Some(stage) = focus_stage.as_mut() {
                ctx.stats.focus_events += 1;
                let outcome = stage.run(&frame)?;
                apply_focus_outcome(outcome, mode, &mut ctx.stats);
            }
        }

        ctx.step_arm(i, mode);
    }
    ctx.finish(mode.name())
}

/// A write-latest/read-latest slot shared between the loop and the focus
/// worker. Senders never block; readers take the newest value or nothing.
struct Mailbox<T>(Mutex<Option<T>>);

impl<T> Mailbox<T> {
    fn new() -> Self {
        Mailbox(Mutex::new(None))
    }

    fn put(&self, value: T) {
        *self.0.lock().unwrap() = Some(value);
    }

    fn take(&self) -> Option<T> {
        self.0.lock().unwrap().take()
    }
}

/// Free-running variant: the focus stage runs on a worker thread fed by a
/// latest-frame mailbox; stale frames are simply overwritten. The
/// high-rate loop never waits on the worker.
fn run_free_running(
    cfg: &PipelineConfig,
    scene: &Scene,
    mut mode: Box<dyn LightingMode>,
    focus_stage: Option<FocusStage>,
    dump_dir: Option<&Path>,
) -> Result<EpisodeArtifacts, PipelineError> {
    let (_, ticks) = episode_ticks(cfg, scene);
    let mut ctx = TickContext::new(cfg, scene)?;

    let frame_box: Arc<Mailbox<Frame>> = Arc::new(Mailbox::new());
    let outcome_box: Arc<Mailbox<FocusOutcome>> = Arc::new(Mailbox::new());
    let stop = Arc::new(AtomicBool::new(false));

    let worker = focus_stage.map(|mut stage| {
        let frames = Arc::clone(&frame_box);
        let outcomes = Arc::clone(&outcome_box);
        let stop = Arc::clone(&stop);
        std::thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                match frames.take() {
                    Some(frame) => {
                        if let Ok(outcome) = stage.run(&frame) {
                            outcomes.put(outcome);
                        }
                    }
                    None => std::thread::sleep(std::time::Duration::from_micros(200)),
                }
            }
        })
    });

    let start = scene.trajectory.start_time();
    let mut next_focus = start;
    for i in 0..ticks {
        let t = start + i as f64 / cfg.fps();
        let frame = ctx.render_and_track(i, mode.as_mut(), dump_dir)?;

        if worker.is_some() && t + 1e-9 >= next_focus {
            next_focus += cfg.resample_period;
            ctx.stats.focus_events += 1;
            frame_box.put(frame);
        }
        if let Some(outcome) = outcome_box.take() {
            apply_focus_outcome(outcome, mode.as_mut(), &mut ctx.stats);
        }

        ctx.step_arm(i, mode.as_mut());
    }

    stop.store(true, Ordering::Relaxed);
    if let Some(w) = worker {
        let _ = w.join();
    }
    ctx.finish(mode.name())
}

/// Run several modes with identical seeds and scene.
pub fn compare_modes(
    cfg: &PipelineConfig,
    mode_names: &[String],
) -> Result<Vec<EpisodeArtifacts>, PipelineError> {
    let mut rows = Vec::new();
    for name in mode_names {
        let mut mode_cfg = cfg.clone();
        mode_cfg.mode = name.clone();
        rows.push(run_episode(&mode_cfg, None)?);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Artifact files
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Summary<'a> {
    mode: &'a str,
    scene: &'a str,
    seed: u64,
    ate_rmse_m: f64,
    are_rmse_rad: f64,
    r_t: f64,
    t_lost: u64,
    frames: u64,
    tracked_frames: u64,
    focus_events: u64,
    focus_no_target: u64,
    enhancer_fallbacks: u64,
    enhanced_frames_into_odom: u64,
    clamped_targets: u64,
}

/// Report CSV: one row per associated timestamp.
pub fn report_csv(report: &EpisodeReport) -> String {
    let mut out = String::from("timestamp,ate_m,are_rad\n");
    for (t, ate, are) in &report.errors {
        out.push_str(&format!("{t:.9},{ate:.9},{are:.9}\n"));
    }
    out
}

/// Arm trace CSV matching the control loop, one row per tick.
pub fn arm_trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("tick,target_ppm_j1,target_ppm_j2,ppm_j1,ppm_j2,pan_rad,tilt_rad\n");
    for r in trace {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.9},{:.9}\n",
            r.tick, r.target.ppm_j1, r.target.ppm_j2, r.state.ppm_j1, r.state.ppm_j2, r.pan, r.tilt
        ));
    }
    out
}

/// Mode comparison CSV, one row per episode.
pub fn comparison_csv(rows: &[EpisodeArtifacts]) -> String {
    let mut out = String::from("mode,ate_rmse_m,are_rmse_rad,r_t,t_lost\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.9},{:.9},{:.9},{}\n",
            r.mode, r.report.ate_rmse, r.report.are_rmse, r.report.r_t, r.report.t_lost
        ));
    }
    out
}

/// Write the standard episode artifact set into `dir`:
/// `gt.tum`, `est.tum`, `report.csv`, `summary.toml`, `arm_trace.csv`.
pub fn write_artifacts(
    dir: &Path,
    cfg: &PipelineConfig,
    artifacts: &EpisodeArtifacts,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    eval::save_tum(&artifacts.gt, dir.join("gt.tum"))?;
    eval::save_tum(&artifacts.est, dir.join("est.tum"))?;
    std::fs::write(dir.join("report.csv"), report_csv(&artifacts.report))?;
    std::fs::write(dir.join("arm_trace.csv"), arm_trace_csv(&artifacts.trace))?;
    let summary = Summary {
        mode: &artifacts.mode,
        scene: &cfg.scene,
        seed: cfg.seed,
        ate_rmse_m: artifacts.report.ate_rmse,
        are_rmse_rad: artifacts.report.are_rmse,
        r_t: artifacts.report.r_t,
        t_lost: artifacts.report.t_lost,
        frames: artifacts.stats.frames,
        tracked_frames: artifacts.stats.tracked_frames,
        focus_events: artifacts.stats.focus_events,
        focus_no_target: artifacts.stats.focus_no_target,
        enhancer_fallbacks: artifacts.stats.enhancer_fallbacks,
        enhanced_frames_into_odom: artifacts.stats.enhanced_frames_into_odom,
        clamped_targets: artifacts.stats.clamped_targets,
    };
    let text = toml::to_string(&summary)
        .map_err(|e| PipelineError::Io(std::io::Error::other(e.to_string())))?;
    std::fs::write(dir.join("summary.toml"), text)?;
    Ok(())
}

/// Run the focus stage over a directory of PGM frames, the CLI `focus`
/// subcommand's engine. Returns CSV rows of
/// `(frame_index, target_x, target_y, centroid_count, score)`; frames
/// with no clusters repeat the previous target with a zero count.
pub fn focus_over_frames(
    cfg: &PipelineConfig,
    frames: &[(u64, Frame)],
) -> Result<String, PipelineError> {
    let mut stage = FocusStage::new(cfg)?;
    let mut out = String::from("frame,target_x,target_y,centroid_count,score\n");
    let mut last: Option<(PixelPoint, f64)> = None;
    for (index, frame) in frames {
        let (enhanced, _) = match stage.enhancer.enhance(frame) {
            Ok(f) => (f, false),
            Err(e) => match &stage.fallback {
                Some(fb) => (fb.enhance(frame)?, true),
                None => return Err(PipelineError::Enhance(e)),
            },
        };
        let centroids = stage.centroids(&enhanced);
        match focus::select_target(&centroids, &mut stage.state, &stage.tsm) {
            Ok(sel) => {
                out.push_str(&format!(
                    "{},{:.3},{:.3},{},{:.6}\n",
                    index, sel.target.x, sel.target.y, sel.count, sel.score
                ));
                last = Some((sel.target, sel.score));
            }
            Err(focus::FocusError::NoTarget) => match last {
                Some((p, _)) => out.push_str(&format!("{},{:.3},{:.3},0,\n", index, p.x, p.y)),
                None => out.push_str(&format!("{index},,,0,\n")),
            },
            Err(e) => return Err(PipelineError::Focus(e)),
        }
    }
    Ok(out)
}
