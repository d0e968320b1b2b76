//! Minimal depth-assisted frame-to-frame visual odometry.
//!
//! Per frame: detect corners, match the previous frame's corners by
//! normalized cross-correlation with forward-backward consistency, lift
//! both sides to 3D through the depth channel, and estimate the rigid
//! motion with a RANSAC loop around a closed-form least-squares fit.
//! Too few inliers means tracking is lost: the loss counter increments,
//! the reference resets to the current frame and the pose holds.

use nalgebra::{Matrix3, Vector3};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Deserialize;
use thiserror::Error;

use crate::camera::{CameraModel, PixelPoint};
use crate::focus::{detect_features, Keypoint};
use crate::frame::Frame;
use crate::geometry::Pose;

#[derive(Debug, Error)]
pub enum OdomError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("degenerate correspondence geometry")]
    Degenerate,
    #[error("frame has no depth channel; odometry needs simulator depth")]
    MissingDepth,
}

/// One pixel correspondence between the reference and current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub prev: PixelPoint,
    pub cur: PixelPoint,
    /// Normalized correlation in [-1, 1].
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct OdomParams {
    /// Corner detector threshold for the raw odometry stream.
    pub detector_threshold: f64,
    /// Strongest-response cap on reference keypoints per frame.
    pub max_features: usize,
    /// Half-size of the matching search window, pixels.
    pub search_radius: u32,
    /// Minimum acceptable correlation score.
    pub match_threshold: f64,
    /// RANSAC inlier distance, meters.
    pub inlier_dist: f64,
    pub ransac_iters: u32,
    /// Consensus size below which the frame counts as tracking lost;
    /// calibrated at 212x200 and scaled with pixel count.
    pub inlier_min: usize,
    /// Translation (meters) against the reference frame beyond which the
    /// reference advances. Holding the reference while motion is small
    /// keeps per-frame quantization error from compounding.
    pub advance_dist: f64,
    /// Rotation (radians) against the reference beyond which it advances.
    pub advance_rot: f64,
    /// Advance the reference when fewer than this fraction of its
    /// keypoints still match (view content changed).
    pub advance_match_fraction: f64,
    /// Features closer than this (meters) are ignored: very close
    /// content moves and rescales too fast for patch correlation.
    pub min_depth: f64,
    pub seed: u64,
}

impl Default for OdomParams {
    fn default() -> Self {
        OdomParams {
            detector_threshold: 3.0e4,
            max_features: 150,
            search_radius: 20,
            match_threshold: 0.8,
            inlier_dist: 0.05,
            ransac_iters: 200,
            inlier_min: 12,
            advance_dist: 0.05,
            advance_rot: 3.0_f64.to_radians(),
            advance_match_fraction: 0.6,
            min_depth: 0.8,
            seed: 0,
        }
    }
}

impl OdomParams {
    /// Scale the inlier threshold with image area relative to 212x200.
    pub fn scaled_to(&self, camera: &CameraModel) -> OdomParams {
        let ratio = (camera.width as f64 * camera.height as f64) / (212.0 * 200.0);
        OdomParams {
            inlier_min: ((self.inlier_min as f64 * ratio).round() as usize).max(6),
            ..*self
        }
    }
}

// ---------------------------------------------------------------------------
// Patch matching
// ---------------------------------------------------------------------------

const PATCH_RADIUS: i64 = 5; // 11x11 patches

struct Patch {
    values: [f64; 121],
    norm: f64,
}

fn extract_patch(frame: &Frame, cx: i64, cy: i64) -> Option<Patch> {
    let w = frame.width as i64;
    let h = frame.height as i64;
    if cx < PATCH_RADIUS || cy < PATCH_RADIUS || cx >= w - PATCH_RADIUS || cy >= h - PATCH_RADIUS {
        return None;
    }
    let mut values = [0.0f64; 121];
    let mut sum = 0.0;
    let mut i = 0;
    for dy in -PATCH_RADIUS..=PATCH_RADIUS {
        for dx in -PATCH_RADIUS..=PATCH_RADIUS {
            let v = frame.intensity[((cy + dy) * w + cx + dx) as usize] as f64;
            values[i] = v;
            sum += v;
            i += 1;
        }
    }
    let mean = sum / 121.0;
    let mut norm = 0.0;
    for v in &mut values {
        *v -= mean;
        norm += *v * *v;
    }
    Some(Patch {
        values,
        norm: norm.sqrt(),
    })
}

fn ncc(a: &Patch, b: &Patch) -> f64 {
    if a.norm < 1e-9 || b.norm < 1e-9 {
        return 0.0;
    }
    let mut dot = 0.0;
    for i in 0..121 {
        dot += a.values[i] * b.values[i];
    }
    dot / (a.norm * b.norm)
}

/// Weak motion prior: repeating textures produce correlation lobes at the
/// pattern period that tie with the true peak up to noise; a small
/// distance penalty resolves those ties toward the smaller displacement
/// without overriding genuinely better matches.
const OFFSET_PENALTY: f64 = 1e-4;

/// Best integer NCC offset for `patch` in `frame` around (cx, cy),
/// scored as correlation minus the distance penalty. Deterministic:
/// exact ties keep the first offset in scan order.
fn best_offset(
    frame: &Frame,
    patch: &Patch,
    cx: i64,
    cy: i64,
    radius: i64,
) -> Option<(i64, i64, f64)> {
    let mut best: Option<(i64, i64, f64)> = None;
    let mut best_penalized = f64::NEG_INFINITY;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let Some(candidate) = extract_patch(frame, cx + dx, cy + dy) else {
                continue;
            };
            let score = ncc(patch, &candidate);
            let penalized = score - OFFSET_PENALTY * (dx * dx + dy * dy) as f64;
            if penalized > best_penalized {
                best_penalized = penalized;
                best = Some((dx, dy, score));
            }
        }
    }
    best
}

/// Parabolic peak refinement from three samples; returns a correction in
/// [-0.5, 0.5] or 0 when the samples do not bracket a maximum.
fn refine_1d(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom >= -1e-12 {
        return 0.0;
    }
    ((left - right) / (2.0 * denom)).clamp(-0.5, 0.5)
}

/// Sub-pixel peak of a 3x3 score neighborhood via a least-squares
/// quadratic surface (orthogonal polynomial form). Falls back to two 1-D
/// parabolas when the surface is not concave.
fn refine_2d(s: &[[f64; 3]; 3]) -> (f64, f64) {
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (iy, row) in s.iter().enumerate() {
        let y = iy as f64 - 1.0;
        for (ix, &f) in row.iter().enumerate() {
            let x = ix as f64 - 1.0;
            sx += x * f;
            sy += y * f;
            sxx += (x * x - 2.0 / 3.0) * f;
            syy += (y * y - 2.0 / 3.0) * f;
            sxy += x * y * f;
        }
    }
    // Orthogonal-polynomial least squares on the 3x3 stencil:
    // gradient (sx/6, sy/6); Hessian diag sxx, syy; cross term sxy/4.
    let gx = sx / 6.0;
    let gy = sy / 6.0;
    let hxx = sxx;
    let hyy = syy;
    let hxy = sxy / 4.0;
    let det = hxx * hyy - hxy * hxy;
    if hxx < -1e-12 && det > 1e-15 {
        let dx = (-gx * hyy + gy * hxy) / det;
        let dy = (-gy * hxx + gx * hxy) / det;
        if dx.abs() <= 0.75 && dy.abs() <= 0.75 {
            return (dx.clamp(-0.5, 0.5), dy.clamp(-0.5, 0.5));
        }
    }
    (
        refine_1d(s[1][0], s[1][1], s[1][2]),
        refine_1d(s[0][1], s[1][1], s[2][1]),
    )
}

/// Match the reference keypoints into the current frame: best 11x11 NCC
/// within `search_radius`, one-to-one by forward-backward consistency,
/// scores thresholded, sub-pixel peak via parabola fit. Deterministic.
pub fn match_features(
    prev: &Frame,
    keypoints: &[Keypoint],
    cur: &Frame,
    params: &OdomParams,
) -> Vec<Match> {
    let radius = params.search_radius as i64;
    let mut out = Vec::new();
    for kp in keypoints {
        let px = kp.position.x.round() as i64;
        let py = kp.position.y.round() as i64;
        let Some(template) = extract_patch(prev, px, py) else {
            continue;
        };
        let Some((dx, dy, score)) = best_offset(cur, &template, px, py, radius) else {
            continue;
        };
        if score < params.match_threshold {
            continue;
        }
        // Backward check: the matched current patch must land back on the
        // original keypoint.
        let Some(back_template) = extract_patch(cur, px + dx, py + dy) else {
            continue;
        };
        let Some((bx, by, back_score)) =
            best_offset(prev, &back_template, px + dx, py + dy, radius)
        else {
            continue;
        };
        if (bx + dx).abs() > 1 || (by + dy).abs() > 1 {
            continue;
        }

        // Sub-pixel refinement around both integer peaks. Perspective
        // shear skews the correlation surface the opposite way in the
        // two matching directions, so averaging the forward displacement
        // with the negated backward displacement cancels that bias to
        // first order. A perfect correlation is already the true peak.
        let refine = |template: &Patch,
                      search: &Frame,
                      cx: i64,
                      cy: i64,
                      ox0: i64,
                      oy0: i64,
                      peak: f64|
         -> (f64, f64) {
            if peak >= 1.0 - 1e-9 {
                return (0.0, 0.0);
            }
            let mut grid = [[0.0f64; 3]; 3];
            for oy in -1i64..=1 {
                for ox in -1i64..=1 {
                    match extract_patch(search, cx + ox0 + ox, cy + oy0 + oy) {
                        Some(p) => grid[(oy + 1) as usize][(ox + 1) as usize] = ncc(template, &p),
                        None => return (0.0, 0.0),
                    }
                }
            }
            refine_2d(&grid)
        };
        let (ffx, ffy) = refine(&template, cur, px, py, dx, dy, score);
        let (bfx, bfy) = refine(&back_template, prev, px + dx, py + dy, bx, by, back_score);

        // Forward displacement (dx + ffx); backward displacement of the
        // matched patch is (bx + bfx) and estimates the negative motion.
        let disp_x = ((dx as f64 + ffx) - (bx as f64 + bfx)) / 2.0;
        let disp_y = ((dy as f64 + ffy) - (by as f64 + bfy)) / 2.0;

        out.push(Match {
            prev: kp.position,
            cur: PixelPoint::new(px as f64 + disp_x, py as f64 + disp_y),
            score,
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Rigid estimation
// ---------------------------------------------------------------------------

/// Closed-form least-squares rigid fit mapping `prev` points onto `cur`
/// points: centroid subtraction, cross-covariance, best rotation through
/// the SVD with a reflection guard, translation from the centroids.
fn fit_rigid(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Result<Pose, OdomError> {
    let n = pairs.len();
    if n < 3 {
        return Err(OdomError::TooFewCorrespondences(n));
    }
    let mut c_prev = Vector3::zeros();
    let mut c_cur = Vector3::zeros();
    for (p, q) in pairs {
        c_prev += p;
        c_cur += q;
    }
    c_prev /= n as f64;
    c_cur /= n as f64;

    let mut cov = Matrix3::zeros();
    for (p, q) in pairs {
        cov += (q - c_cur) * (p - c_prev).transpose();
    }
    let svd = cov.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(OdomError::Degenerate);
    };
    let mut rot = u * v_t;
    if rot.determinant() < 0.0 {
        // Reflection guard: flip the axis of the smallest singular value.
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        rot = u * flip * v_t;
    }
    let q = crate::geometry::quaternion_from_rotation(&rot);
    let t = c_cur - q * c_prev;
    Ok(Pose::new(q, t))
}

/// RANSAC over minimal 3-point samples with a consensus refit. Returns
/// the transform mapping previous-frame points onto current-frame points
/// and the consensus size. Deterministic for a given seed.
pub fn estimate_rigid(
    pairs: &[(Vector3<f64>, Vector3<f64>)],
    params: &OdomParams,
) -> Result<(Pose, usize), OdomError> {
    let n = pairs.len();
    if n < 3 {
        return Err(OdomError::TooFewCorrespondences(n));
    }

    let inliers_of = |pose: &Pose| -> Vec<usize> {
        pairs
            .iter()
            .enumerate()
            .filter(|(_, (p, q))| (q - pose.transform_point(p)).norm() <= params.inlier_dist)
            .map(|(i, _)| i)
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best_inliers: Vec<usize> = Vec::new();
    for _ in 0..params.ransac_iters {
        // Three distinct indices.
        let mut idx = [0usize; 3];
        idx[0] = (rng.next_u64() % n as u64) as usize;
        loop {
            idx[1] = (rng.next_u64() % n as u64) as usize;
            if idx[1] != idx[0] {
                break;
            }
        }
        loop {
            idx[2] = (rng.next_u64() % n as u64) as usize;
            if idx[2] != idx[0] && idx[2] != idx[1] {
                break;
            }
        }
        let sample = [pairs[idx[0]], pairs[idx[1]], pairs[idx[2]]];
        // Skip nearly collinear samples; they leave the rotation about
        // the line unconstrained.
        let a = sample[1].0 - sample[0].0;
        let b = sample[2].0 - sample[0].0;
        if a.cross(&b).norm() < 1e-9 {
            continue;
        }
        let Ok(model) = fit_rigid(&sample) else {
            continue;
        };
        let inl = inliers_of(&model);
        if inl.len() > best_inliers.len() {
            best_inliers = inl;
        }
    }

    if best_inliers.len() < 3 {
        return Err(OdomError::Degenerate);
    }
    let consensus: Vec<_> = best_inliers.iter().map(|&i| pairs[i]).collect();
    let refit = fit_rigid(&consensus)?;
    // Re-evaluate the consensus with the refit model.
    let final_inliers = inliers_of(&refit).len();
    Ok((refit, final_inliers))
}

// ---------------------------------------------------------------------------
// Tracking
// ---------------------------------------------------------------------------

/// Outcome of one tracking step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackResult {
    /// Pose chained successfully; carries the updated world pose and the
    /// consensus size.
    Tracked { pose: Pose, inliers: usize },
    /// Tracking was live and broke this frame: a loss event. The loss
    /// counter increments, the reference resets to the current frame and
    /// the previous pose holds.
    Lost,
    /// Not tracking and nothing to acquire yet; the reference resets so
    /// tracking can resume as soon as structure reappears.
    NotAcquired,
}

struct Reference {
    frame: Frame,
    keypoints: Vec<Keypoint>,
    /// World pose estimate at the reference frame; current poses chain
    /// from here so intra-keyframe error does not accumulate.
    pose: Pose,
    /// Best match count this reference has produced; the view-change
    /// advance rule compares against this, not the raw keypoint count,
    /// since some keypoints are never matchable (margins, weak texture).
    best_matches: usize,
}

/// Frame-to-frame tracker state.
pub struct OdomState {
    camera: CameraModel,
    params: OdomParams,
    /// Current camera pose estimate in the world frame.
    pub pose: Pose,
    reference: Option<Reference>,
    /// Number of tracking-loss emissions so far; never decreases.
    pub t_lost: u64,
    /// Whether the last step tracked (references are valid).
    tracking: bool,
    /// Frames flagged as enhanced that reached this tracker. The
    /// pipeline's stream separation keeps this at zero.
    pub enhanced_frames_seen: u64,
}

impl OdomState {
    pub fn new(camera: CameraModel, params: OdomParams, initial_pose: Pose) -> Self {
        OdomState {
            camera,
            params: params.scaled_to(&camera),
            pose: initial_pose,
            reference: None,
            t_lost: 0,
            tracking: false,
            enhanced_frames_seen: 0,
        }
    }

    pub fn params(&self) -> &OdomParams {
        &self.params
    }

    fn detect(&self, frame: &Frame) -> Vec<Keypoint> {
        let mut kps = detect_features(frame, self.params.detector_threshold);
        // Depth gate before the strongest-response cap, so close content
        // cannot crowd out usable features.
        if frame.depth.is_some() {
            kps.retain(|k| {
                match frame.depth_at(k.position.x.round() as u32, k.position.y.round() as u32) {
                    Some(z) => z >= self.params.min_depth,
                    None => false,
                }
            });
        }
        if kps.len() > self.params.max_features {
            // Keep the strongest responses; re-sort row-major for
            // deterministic downstream behavior.
            kps.sort_by(|a, b| b.response.partial_cmp(&a.response).unwrap());
            kps.truncate(self.params.max_features);
            kps.sort_by(|a, b| {
                (a.position.y, a.position.x)
                    .partial_cmp(&(b.position.y, b.position.x))
                    .unwrap()
            });
        }
        kps
    }

    /// Lift a (possibly sub-pixel) image point to 3D. Depth is sampled
    /// with bilinear interpolation in inverse depth, which is exact for
    /// planar surfaces under perspective; matches touching a depth
    /// discontinuity or a miss are dropped.
    fn lift(&self, frame: &Frame, p: &PixelPoint) -> Option<Vector3<f64>> {
        let x0 = p.x.floor() as i64;
        let y0 = p.y.floor() as i64;
        if x0 < 0 || y0 < 0 || x0 + 1 >= frame.width as i64 || y0 + 1 >= frame.height as i64 {
            // On the last row/column fall back to the nearest pixel.
            let xr = p.x.round() as i64;
            let yr = p.y.round() as i64;
            if xr < 0 || yr < 0 || xr >= frame.width as i64 || yr >= frame.height as i64 {
                return None;
            }
            let z = frame.depth_at(xr as u32, yr as u32)?;
            return Some(self.camera.unproject(p, z));
        }
        let fx = p.x - x0 as f64;
        let fy = p.y - y0 as f64;
        let mut inv = 0.0;
        for (dx, dy, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let z = frame.depth_at((x0 + dx) as u32, (y0 + dy) as u32)?;
            if z <= 0.0 {
                return None;
            }
            inv += w / z;
        }
        if inv <= 0.0 {
            return None;
        }
        let z = 1.0 / inv;
        if z < self.params.min_depth {
            return None;
        }
        Some(self.camera.unproject(p, z))
    }

    /// Advance the tracker by one frame. The frame must carry depth.
    ///
    /// `TrackResult::Lost` is emitted exactly when a live track breaks,
    /// and `t_lost` counts exactly those emissions. While bootstrapping
    /// (before the first acquisition, or after a loss until structure
    /// reappears) failing frames report `NotAcquired` instead.
    pub fn track(&mut self, frame: &Frame) -> Result<TrackResult, OdomError> {
        if frame.depth.is_none() {
            return Err(OdomError::MissingDepth);
        }
        if frame.enhanced {
            self.enhanced_frames_seen += 1;
        }

        if self.reference.is_none() {
            // First frame: acquire when there is enough structure to track.
            let keypoints = self.detect(frame);
            let acquired = keypoints.len() >= self.params.inlier_min;
            let inliers = keypoints.len();
            self.reference = Some(Reference {
                frame: frame.clone(),
                keypoints,
                pose: self.pose,
                best_matches: 0,
            });
            self.tracking = acquired;
            return Ok(if acquired {
                TrackResult::Tracked {
                    pose: self.pose,
                    inliers,
                }
            } else {
                TrackResult::NotAcquired
            });
        }
        let reference = self.reference.as_ref().expect("reference acquired above");

        // Seed the RANSAC from the stream seed and frame index so reruns
        // are bit-identical but frames stay decorrelated.
        let frame_params = OdomParams {
            seed: self.params.seed ^ frame.index.wrapping_mul(0x9e3779b97f4a7c15),
            ..self.params
        };

        let matches = match_features(&reference.frame, &reference.keypoints, frame, &frame_params);
        let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = matches
            .iter()
            .filter_map(|m| {
                let p = self.lift(&reference.frame, &m.prev)?;
                let q = self.lift(frame, &m.cur)?;
                Some((p, q))
            })
            .collect();

        let estimate = estimate_rigid(&pairs, &frame_params);
        match estimate {
            Ok((motion, inliers)) if inliers >= self.params.inlier_min => {
                // `motion` maps reference-camera coordinates to current-camera
                // coordinates, so the world pose chains with its inverse.
                self.pose = reference.pose.compose(&motion.inverse());
                self.tracking = true;
                // Advance the reference once enough motion or view change
                // has built up; holding it below that keeps sub-pixel
                // matching noise from compounding every frame.
                let best = {
                    let r = self.reference.as_mut().expect("reference exists");
                    r.best_matches = r.best_matches.max(matches.len());
                    r.best_matches
                };
                let min_matches =
                    (best as f64 * self.params.advance_match_fraction).ceil() as usize;
                if motion.translation().norm() >= self.params.advance_dist
                    || motion.rotation_angle() >= self.params.advance_rot
                    || matches.len() < min_matches
                {
                    let keypoints = self.detect(frame);
                    self.reference = Some(Reference {
                        frame: frame.clone(),
                        keypoints,
                        pose: self.pose,
                        best_matches: 0,
                    });
                }
                Ok(TrackResult::Tracked {
                    pose: self.pose,
                    inliers,
                })
            }
            _ => {
                let was_tracking = self.tracking;
                self.tracking = false;
                let keypoints = self.detect(frame);
                self.reference = Some(Reference {
                    frame: frame.clone(),
                    keypoints,
                    pose: self.pose,
                    best_matches: 0,
                });
                if was_tracking {
                    self.t_lost += 1;
                    Ok(TrackResult::Lost)
                } else {
                    Ok(TrackResult::NotAcquired)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use std::f64::consts::FRAC_PI_6;

    fn textured_frame(w: u32, h: u32, shift_x: i64, with_depth: bool) -> Frame {
        // Smooth deterministic texture with strong local structure.
        let mut data = vec![0u8; (w * h) as usize];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let sx = x + shift_x;
                let v = ((sx * 37 + y * 61) % 251) as f64 * 0.5
                    + 80.0 * ((sx as f64 * 0.31).sin() * (y as f64 * 0.27).cos() + 1.0);
                data[(y * w as i64 + x) as usize] = v.clamp(0.0, 255.0) as u8;
            }
        }
        let depth = with_depth.then(|| vec![2.0f32; (w * h) as usize]);
        Frame::new(0, 0.0, w, h, data, depth).unwrap()
    }

    #[test]
    fn identical_frames_match_themselves_perfectly() {
        let f = textured_frame(96, 96, 0, false);
        let params = OdomParams {
            search_radius: 6,
            ..OdomParams::default()
        };
        // Keypoints too close to the border have no 11x11 patch and
        // cannot participate; every interior keypoint must self-match.
        let kps: Vec<Keypoint> = detect_features(&f, 1e4)
            .into_iter()
            .filter(|k| {
                k.position.x >= 5.0
                    && k.position.x < 91.0
                    && k.position.y >= 5.0
                    && k.position.y < 91.0
            })
            .collect();
        assert!(kps.len() >= 5, "test frame too bland: {} kps", kps.len());
        let ms = match_features(&f, &kps, &f, &params);
        assert_eq!(ms.len(), kps.len());
        for m in &ms {
            assert!((m.score - 1.0).abs() < 1e-9);
            assert!(m.prev.distance(&m.cur) < 1e-9);
        }
    }

    #[test]
    fn shifted_frame_matches_with_the_shift() {
        let a = textured_frame(96, 96, 0, false);
        let b = textured_frame(96, 96, 3, false); // content moves 3 px left
        let params = OdomParams {
            search_radius: 8,
            ..OdomParams::default()
        };
        let kps: Vec<Keypoint> = detect_features(&a, 1e4)
            .into_iter()
            .filter(|k| {
                k.position.x > 12.0
                    && k.position.x < 84.0
                    && k.position.y > 12.0
                    && k.position.y < 84.0
            })
            .collect();
        assert!(kps.len() >= 5);
        let ms = match_features(&a, &kps, &b, &params);
        assert!(ms.len() as f64 >= kps.len() as f64 * 0.8);
        for m in &ms {
            assert!(
                (m.cur.x - (m.prev.x - 3.0)).abs() <= 0.5,
                "dx {}",
                m.cur.x - m.prev.x
            );
            assert!((m.cur.y - m.prev.y).abs() <= 0.5);
        }
    }

    #[test]
    fn uncorrelated_noise_yields_no_matches() {
        let mut a = vec![0u8; 96 * 96];
        let mut b = vec![0u8; 96 * 96];
        for i in 0..a.len() {
            a[i] = (crate::sim::noise::cell_uniform(1, i as i64, 0) * 255.0) as u8;
            b[i] = (crate::sim::noise::cell_uniform(2, i as i64, 1) * 255.0) as u8;
        }
        let fa = Frame::new(0, 0.0, 96, 96, a, None).unwrap();
        let fb = Frame::new(1, 0.1, 96, 96, b, None).unwrap();
        let kps = detect_features(&fa, 1e4);
        let params = OdomParams {
            search_radius: 6,
            ..OdomParams::default()
        };
        let ms = match_features(&fa, &kps, &fb, &params);
        // Mutual-best filtering plus the 0.8 threshold leaves near nothing.
        assert!(
            ms.len() <= kps.len() / 10 + 1,
            "{} of {}",
            ms.len(),
            kps.len()
        );
    }

    fn spread_points(n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                Vector3::new(
                    (t * 0.713).sin() * 2.0 + t * 0.013,
                    (t * 1.151).cos() * 1.5,
                    3.0 + (t * 0.421).sin(),
                )
            })
            .collect()
    }

    #[test]
    fn identity_correspondences_give_identity() {
        let pts = spread_points(20);
        let pairs: Vec<_> = pts.iter().map(|p| (*p, *p)).collect();
        let (pose, inliers) = estimate_rigid(&pairs, &OdomParams::default()).unwrap();
        assert_eq!(inliers, 20);
        let (ang, trans) = pose.error_magnitude();
        assert!(ang < 1e-9 && trans < 1e-9);
    }

    #[test]
    fn known_transform_recovered_exactly() {
        let truth = Pose::from_axis_angle(&Vector3::z(), FRAC_PI_6, Vector3::new(1.0, 0.0, 0.0));
        let pts = spread_points(20);
        let pairs: Vec<_> = pts.iter().map(|p| (*p, truth.transform_point(p))).collect();
        let (pose, inliers) = estimate_rigid(&pairs, &OdomParams::default()).unwrap();
        assert_eq!(inliers, 20);
        let diff = crate::geometry::relative_pose(&pose, &truth);
        let (ang, trans) = diff.error_magnitude();
        assert!(ang < 1e-9, "angle error {ang}");
        assert!(trans < 1e-9, "translation error {trans}");
    }

    #[test]
    fn gross_outliers_are_rejected() {
        let truth = Pose::from_axis_angle(
            &Vector3::new(0.2, 1.0, -0.3),
            0.4,
            Vector3::new(0.3, -0.2, 0.5),
        );
        let pts = spread_points(20);
        let mut pairs: Vec<_> = pts.iter().map(|p| (*p, truth.transform_point(p))).collect();
        // Ten gross outliers, > 1 m off.
        for i in 0..10 {
            let p = Vector3::new(i as f64 * 0.37, -1.0, 4.0);
            let q = truth.transform_point(&p) + Vector3::new(1.5 + i as f64 * 0.21, -2.0, 1.1);
            pairs.push((p, q));
        }
        let (pose, inliers) = estimate_rigid(&pairs, &OdomParams::default()).unwrap();
        assert_eq!(inliers, 20);
        let diff = crate::geometry::relative_pose(&pose, &truth);
        let (ang, trans) = diff.error_magnitude();
        assert!(ang < 1e-6 && trans < 1e-6, "ang {ang} trans {trans}");
    }

    #[test]
    fn too_few_or_degenerate_input_fails() {
        let p = Vector3::new(0.0, 0.0, 1.0);
        assert!(matches!(
            estimate_rigid(&[(p, p), (p, p)], &OdomParams::default()),
            Err(OdomError::TooFewCorrespondences(2))
        ));
        // Collinear points: every minimal sample is rejected.
        let pairs: Vec<_> = (0..10)
            .map(|i| {
                let p = Vector3::new(i as f64, 0.0, 1.0);
                (p, p)
            })
            .collect();
        assert!(estimate_rigid(&pairs, &OdomParams::default()).is_err());
    }

    #[test]
    fn estimate_rotation_is_orthonormal() {
        let truth = Pose::from_axis_angle(
            &Vector3::new(1.0, 1.0, 1.0),
            0.8,
            Vector3::new(0.1, 0.2, 0.3),
        );
        let pts = spread_points(15);
        let pairs: Vec<_> = pts.iter().map(|p| (*p, truth.transform_point(p))).collect();
        let (pose, _) = estimate_rigid(&pairs, &OdomParams::default()).unwrap();
        let r = pose.rotation_matrix();
        assert!(((r.transpose() * r) - Matrix3::identity()).norm() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn track_requires_depth() {
        let f = textured_frame(96, 96, 0, false);
        let mut state = OdomState::new(
            CameraModel {
                width: 96,
                height: 96,
                cx: 48.0,
                cy: 48.0,
                ..CameraModel::default()
            },
            OdomParams::default(),
            Pose::identity(),
        );
        assert!(matches!(state.track(&f), Err(OdomError::MissingDepth)));
    }

    #[test]
    fn static_frames_track_with_identity_increment() {
        let cam = CameraModel {
            width: 96,
            height: 96,
            cx: 48.0,
            cy: 48.0,
            ..CameraModel::default()
        };
        let params = OdomParams {
            detector_threshold: 1e4,
            search_radius: 6,
            inlier_min: 8,
            ..OdomParams::default()
        };
        let mut state = OdomState::new(cam, params, Pose::identity());
        let mut f0 = textured_frame(96, 96, 0, true);
        f0.index = 0;
        let mut f1 = f0.clone();
        f1.index = 1;
        f1.timestamp = 0.1;
        assert!(matches!(state.track(&f0), Ok(TrackResult::Tracked { .. })));
        match state.track(&f1).unwrap() {
            TrackResult::Tracked { pose, inliers } => {
                assert!(inliers >= 8);
                let (ang, trans) = pose.error_magnitude();
                assert!(ang < 1e-6 && trans < 1e-6);
            }
            other => panic!("expected tracking on static frames, got {other:?}"),
        }
        assert_eq!(state.t_lost, 0);
    }

    #[test]
    fn featureless_frames_lose_tracking_once_acquired() {
        let cam = CameraModel {
            width: 96,
            height: 96,
            cx: 48.0,
            cy: 48.0,
            ..CameraModel::default()
        };
        let params = OdomParams {
            detector_threshold: 1e4,
            search_radius: 6,
            inlier_min: 8,
            ..OdomParams::default()
        };
        let mut state = OdomState::new(cam, params, Pose::identity());
        let mut f0 = textured_frame(96, 96, 0, true);
        f0.index = 0;
        state.track(&f0).unwrap();
        // A flat dark frame: no features, no matches: one loss event.
        let dark =
            Frame::new(1, 0.1, 96, 96, vec![3u8; 96 * 96], Some(vec![2.0; 96 * 96])).unwrap();
        assert_eq!(state.track(&dark).unwrap(), TrackResult::Lost);
        assert_eq!(state.t_lost, 1);
        // Still dark: bootstrapping again, not a second loss event.
        let dark2 =
            Frame::new(2, 0.2, 96, 96, vec![3u8; 96 * 96], Some(vec![2.0; 96 * 96])).unwrap();
        assert_eq!(state.track(&dark2).unwrap(), TrackResult::NotAcquired);
        assert_eq!(state.t_lost, 1);
        // Texture returns: tracking resumes from the held pose.
        let mut f3 = textured_frame(96, 96, 0, true);
        f3.index = 3;
        f3.timestamp = 0.3;
        state.track(&f3).unwrap();
        let mut f4 = textured_frame(96, 96, 0, true);
        f4.index = 4;
        f4.timestamp = 0.4;
        assert!(matches!(
            state.track(&f4).unwrap(),
            TrackResult::Tracked { .. }
        ));
        assert_eq!(state.t_lost, 1);
    }
}
