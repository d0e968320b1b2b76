//! Trajectory evaluation: absolute pose error split into translational
//! and rotational parts, RMSE aggregation, the estimated-to-ground-truth
//! length ratio, and the TUM trajectory format.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{relative_pose, Pose};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory is empty or too short: {0}")]
    TooShort(String),
    #[error("no timestamp associations within tolerance")]
    NoAssociations,
    #[error("ground-truth trajectory has zero length")]
    ZeroLengthGroundTruth,
    #[error("rmse of an empty list is undefined")]
    EmptyValues,
    #[error("trajectory io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory parse at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    GroundTruth,
    Estimate,
}

/// A timestamped pose sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, Pose)>,
    pub kind: TrajectoryKind,
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind) -> Self {
        Trajectory {
            samples: Vec::new(),
            kind,
        }
    }

    pub fn push(&mut self, t: f64, pose: Pose) {
        debug_assert!(
            self.samples
                .last()
                .map(|(last, _)| t > *last)
                .unwrap_or(true),
            "timestamps must strictly increase"
        );
        self.samples.push((t, pose));
    }

    /// Sum of consecutive translation distances.
    pub fn length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].1.translation() - w[0].1.translation()).norm())
            .sum()
    }
}

/// One associated sample: the estimate timestamp plus the paired poses.
#[derive(Debug, Clone, Copy)]
pub struct AssociatedPair<'a> {
    pub timestamp: f64,
    pub gt: &'a Pose,
    pub est: &'a Pose,
}

/// Pair each estimate sample with the nearest ground-truth sample within
/// `max_dt` seconds. Estimates without a close ground-truth sample are
/// dropped; each ground-truth sample is used at most once; pairing scans
/// forward so it is deterministic.
pub fn associate<'a>(
    gt: &'a Trajectory,
    est: &'a Trajectory,
    max_dt: f64,
) -> Result<Vec<AssociatedPair<'a>>, EvalError> {
    if gt.samples.is_empty() || est.samples.is_empty() {
        return Err(EvalError::TooShort(
            "association needs non-empty trajectories".into(),
        ));
    }
    let mut pairs = Vec::new();
    // First ground-truth index not yet consumed by an earlier pair.
    let mut frontier = 0usize;
    for (te, pe) in &est.samples {
        // Candidates: the first unconsumed sample at/after te and, when it
        // is itself unconsumed, its predecessor.
        let mut gi = frontier;
        while gi < gt.samples.len() && gt.samples[gi].0 < *te {
            gi += 1;
        }
        let mut best: Option<usize> = None;
        if gi < gt.samples.len() {
            best = Some(gi);
        }
        if gi > frontier {
            let prev = gi - 1;
            let better = match best {
                Some(b) => (gt.samples[prev].0 - te).abs() < (gt.samples[b].0 - te).abs(),
                None => true,
            };
            if better {
                best = Some(prev);
            }
        }
        if let Some(b) = best {
            if (gt.samples[b].0 - te).abs() <= max_dt {
                pairs.push(AssociatedPair {
                    timestamp: *te,
                    gt: &gt.samples[b].1,
                    est: pe,
                });
                frontier = b + 1;
            }
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::NoAssociations);
    }
    Ok(pairs)
}

/// Absolute pose error of one (ground truth, estimate) pair: the relative
/// pose between them, decomposed into translation norm (meters) and
/// geodesic rotation angle (radians).
pub fn ape(gt: &Pose, est: &Pose) -> (f64, f64) {
    let e = relative_pose(gt, est);
    (e.translation().norm(), e.rotation_angle())
}

/// Root mean squared error.
pub fn rmse(values: &[f64]) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyValues);
    }
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    Ok((sum_sq / values.len() as f64).sqrt())
}

/// Estimated-to-ground-truth trajectory length ratio; 1 is ideal.
pub fn trajectory_ratio(gt: &Trajectory, est: &Trajectory) -> Result<f64, EvalError> {
    if gt.samples.len() < 2 || est.samples.len() < 2 {
        return Err(EvalError::TooShort(
            "length ratio needs >= 2 samples per trajectory".into(),
        ));
    }
    let l_gt = gt.length();
    if l_gt <= 0.0 {
        return Err(EvalError::ZeroLengthGroundTruth);
    }
    Ok(est.length() / l_gt)
}

/// Per-episode metric summary plus the per-timestamp error series.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeReport {
    pub ate_rmse: f64,
    pub are_rmse: f64,
    pub r_t: f64,
    pub t_lost: u64,
    #[serde(skip)]
    pub errors: Vec<(f64, f64, f64)>, // (timestamp, ate, are)
}

/// Rigid alignment option for externally produced trajectories. Episodes
/// rendered by the simulator share the world frame with their ground
/// truth, so the default is no alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    #[default]
    None,
    Rigid,
}

/// Evaluate an estimate against ground truth: associate, optionally
/// pre-align, decompose the APE per pair and aggregate.
///
/// A stationary episode has zero ground-truth length; when the estimate
/// is also stationary the length ratio degenerates to 1 (equal lengths)
/// instead of failing.
pub fn evaluate(
    gt: &Trajectory,
    est: &Trajectory,
    max_dt: f64,
    t_lost: u64,
    alignment: Alignment,
) -> Result<EpisodeReport, EvalError> {
    let pairs = associate(gt, est, max_dt)?;

    let aligned_est: Vec<Pose> = match alignment {
        Alignment::None => pairs.iter().map(|p| *p.est).collect(),
        Alignment::Rigid => {
            let correction = rigid_alignment(&pairs)?;
            pairs.iter().map(|p| correction.compose(p.est)).collect()
        }
    };

    let mut ate = Vec::with_capacity(pairs.len());
    let mut are = Vec::with_capacity(pairs.len());
    let mut errors = Vec::with_capacity(pairs.len());
    for (pair, est_pose) in pairs.iter().zip(aligned_est.iter()) {
        let (a, r) = ape(pair.gt, est_pose);
        ate.push(a);
        are.push(r);
        errors.push((pair.timestamp, a, r));
    }

    let r_t = match trajectory_ratio(gt, est) {
        Ok(r) => r,
        Err(EvalError::ZeroLengthGroundTruth) if est.length() <= 1e-9 => 1.0,
        Err(e) => return Err(e),
    };
    Ok(EpisodeReport {
        ate_rmse: rmse(&ate)?,
        are_rmse: rmse(&are)?,
        r_t,
        t_lost,
        errors,
    })
}

/// Least-squares rigid transform taking estimate positions onto ground
/// truth positions (orientation from the first pair), used by the
/// optional pre-alignment.
fn rigid_alignment(pairs: &[AssociatedPair<'_>]) -> Result<Pose, EvalError> {
    use nalgebra::{Matrix3, Vector3};
    if pairs.len() < 3 {
        // With fewer pairs fall back to snapping the first estimate onto
        // the first ground-truth pose.
        let p = &pairs[0];
        return Ok(p.gt.compose(&p.est.inverse()));
    }
    let n = pairs.len() as f64;
    let mut cg = Vector3::zeros();
    let mut ce = Vector3::zeros();
    for p in pairs {
        cg += p.gt.translation();
        ce += p.est.translation();
    }
    cg /= n;
    ce /= n;
    let mut cov = Matrix3::zeros();
    for p in pairs {
        cov += (p.gt.translation() - cg) * (p.est.translation() - ce).transpose();
    }
    let svd = cov.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(EvalError::TooShort("degenerate alignment geometry".into()));
    };
    let mut rot = u * v_t;
    if rot.determinant() < 0.0 {
        rot = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)) * v_t;
    }
    let q = crate::geometry::quaternion_from_rotation(&rot);
    let t = cg - q * ce;
    Ok(Pose::new(q, t))
}

// ---------------------------------------------------------------------------
// TUM trajectory format
// ---------------------------------------------------------------------------

/// Serialize as TUM lines: `timestamp tx ty tz qx qy qz qw`.
pub fn to_tum(traj: &Trajectory) -> String {
    let mut out = String::new();
    for (t, pose) in &traj.samples {
        let tr = pose.translation();
        let q = pose.rotation().quaternion();
        writeln!(
            out,
            "{t:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}",
            tr.x, tr.y, tr.z, q.i, q.j, q.k, q.w
        )
        .expect("string write");
    }
    out
}

pub fn save_tum<P: AsRef<Path>>(traj: &Trajectory, path: P) -> Result<(), EvalError> {
    std::fs::write(path, to_tum(traj))?;
    Ok(())
}

/// Parse a TUM trajectory file; `#` lines are comments.
pub fn parse_tum(text: &str, kind: TrajectoryKind) -> Result<Trajectory, EvalError> {
    let mut traj = Trajectory::new(kind);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_ascii_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EvalError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if fields.len() != 8 {
            return Err(EvalError::Parse {
                line: i + 1,
                reason: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let q = nalgebra::Quaternion::new(fields[7], fields[4], fields[5], fields[6]);
        let pose = Pose::new(
            nalgebra::UnitQuaternion::new_normalize(q),
            nalgebra::Vector3::new(fields[1], fields[2], fields[3]),
        );
        traj.push(fields[0], pose);
    }
    if traj.samples.is_empty() {
        return Err(EvalError::TooShort("no samples in trajectory file".into()));
    }
    Ok(traj)
}

pub fn load_tum<P: AsRef<Path>>(path: P, kind: TrajectoryKind) -> Result<Trajectory, EvalError> {
    let text = std::fs::read_to_string(path)?;
    parse_tum(&text, kind)
}

// ---------------------------------------------------------------------------
// Plotting
// ---------------------------------------------------------------------------

/// Top-down (x, y) SVG overlay of ground truth vs estimate.
pub fn svg_overlay(gt: &Trajectory, est: &Trajectory) -> String {
    const SIZE: f64 = 640.0;
    const MARGIN: f64 = 50.0;

    let points: Vec<(f64, f64)> = gt
        .samples
        .iter()
        .chain(est.samples.iter())
        .map(|(_, p)| (p.translation().x, p.translation().y))
        .collect();
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in &points {
        min_x = min_x.min(*x);
        max_x = max_x.max(*x);
        min_y = min_y.min(*y);
        max_y = max_y.max(*y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1e-6);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    // World +y is left; plot with x rightward and y upward (SVG y flipped).
    let map = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN + (x - min_x) * scale,
            SIZE - MARGIN - (y - min_y) * scale,
        )
    };

    let polyline = |traj: &Trajectory, color: &str, dash: &str| -> String {
        let pts: Vec<String> = traj
            .samples
            .iter()
            .map(|(_, p)| {
                let (sx, sy) = map(p.translation().x, p.translation().y);
                format!("{sx:.2},{sy:.2}")
            })
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash} points=\"{}\"/>",
            pts.join(" ")
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "{}",
        polyline(gt, "#555555", " stroke-dasharray=\"6 4\"")
    );
    let _ = writeln!(svg, "{}", polyline(est, "#c0392b", ""));
    let _ = writeln!(
        svg,
        "<text x=\"{MARGIN}\" y=\"28\" font-family=\"monospace\" font-size=\"14\" fill=\"#555555\">ground truth (dashed)</text>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{MARGIN}\" y=\"46\" font-family=\"monospace\" font-size=\"14\" fill=\"#c0392b\">estimate</text>"
    );
    let _ = writeln!(svg, "</svg>");
    svg
}
