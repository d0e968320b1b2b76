//! The feature-focus stage: detect corners on the enhanced frame, cluster
//! them, score cluster centroids and emit one target point for the beam.
//!
//! The target selection metric balances two terms: the normalized feature
//! count of each centroid and the inverse distance to the previously
//! selected target. The distance term is what keeps the beam from
//! thrashing between clusters of similar size when image noise makes the
//! counts fluctuate.

use serde::Deserialize;
use thiserror::Error;

use crate::camera::PixelPoint;
use crate::frame::Frame;

#[derive(Debug, Error)]
pub enum FocusError {
    #[error("cannot normalize an empty list")]
    EmptyInput,
    #[error("no clusters to select a target from")]
    NoTarget,
    #[error("selection score undefined: normalized distance hit -epsilon in literal mode")]
    UndefinedScore,
}

/// A detected corner: position plus detector response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub position: PixelPoint,
    pub response: f64,
}

/// A cluster summary: mean position and member count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    pub position: PixelPoint,
    pub count: usize,
}

/// How the per-centroid counts and distances are normalized before scoring.
///
/// `Standard` is min-max onto [0, 1]. `Literal` is the (v - max) form that
/// lands in [-1, 0]; it is kept selectable for fidelity experiments but
/// inverts the intent of the distance term and can make the score
/// undefined when a normalized distance equals -epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    #[default]
    Standard,
    Literal,
}

/// Tuning of the target selection metric.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct TsmParams {
    /// Balance between the distance term (alpha) and the count term (1 - alpha).
    pub alpha: f64,
    /// Keeps the distance denominator away from zero.
    pub epsilon: f64,
    pub normalization: NormalizationMode,
}

impl Default for TsmParams {
    fn default() -> Self {
        TsmParams {
            alpha: 0.5,
            epsilon: 0.1,
            normalization: NormalizationMode::Standard,
        }
    }
}

impl TsmParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err("alpha must be in [0, 1]".into());
        }
        if self.epsilon <= 0.0 {
            return Err("epsilon must be > 0".into());
        }
        Ok(())
    }
}

/// Density clustering parameters. `eps_px` is calibrated for a 212-wide
/// image and should scale with resolution.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ClusterParams {
    pub eps_px: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            eps_px: 24.0,
            min_pts: 4,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.eps_px <= 0.0 {
            return Err("eps_px must be > 0".into());
        }
        if self.min_pts < 1 {
            return Err("min_pts must be >= 1".into());
        }
        Ok(())
    }

    /// Scale the neighborhood radius to another image width.
    pub fn scaled_to_width(&self, width: u32) -> ClusterParams {
        ClusterParams {
            eps_px: self.eps_px * width as f64 / 212.0,
            min_pts: self.min_pts,
        }
    }
}

/// Carries the previously selected target between invocations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FocusState {
    pub p_last: Option<PixelPoint>,
}

// ---------------------------------------------------------------------------
// Corner detection
// ---------------------------------------------------------------------------

const NMS_RADIUS: i64 = 3;

/// Minimum-eigenvalue corner response over a 3x3 structure tensor window,
/// Sobel gradients. Border pixels (2 px) score zero.
fn response_map(frame: &Frame) -> Vec<f64> {
    let w = frame.width as usize;
    let h = frame.height as usize;
    let px = |x: usize, y: usize| -> f64 { frame.intensity[y * w + x] as f64 };

    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            gx[y * w + x] = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            gy[y * w + x] = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
        }
    }

    let mut resp = vec![0.0f64; w * h];
    if w < 5 || h < 5 {
        return resp;
    }
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let mut sxx = 0.0;
            let mut syy = 0.0;
            let mut sxy = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let ix = (x as i64 + dx) as usize;
                    let iy = (y as i64 + dy) as usize;
                    let a = gx[iy * w + ix];
                    let b = gy[iy * w + ix];
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            // Smaller eigenvalue of the 2x2 structure tensor.
            let half_trace = (sxx + syy) / 2.0;
            let det_term = ((sxx - syy) / 2.0).powi(2) + sxy * sxy;
            resp[y * w + x] = half_trace - det_term.sqrt();
        }
    }
    resp
}

/// Detect corner keypoints above `threshold` with non-maximum suppression
/// in a radius of 3 px. Output is ordered row-major; ties inside the NMS
/// window keep the row-major-first point, so detection is deterministic.
pub fn detect_features(frame: &Frame, threshold: f64) -> Vec<Keypoint> {
    let w = frame.width as i64;
    let h = frame.height as i64;
    let resp = response_map(frame);
    let at = |x: i64, y: i64| resp[(y * w + x) as usize];

    let mut out = Vec::new();
    for y in 0..h {
        'candidate: for x in 0..w {
            let r = at(x, y);
            if r < threshold {
                continue;
            }
            for dy in -NMS_RADIUS..=NMS_RADIUS {
                for dx in -NMS_RADIUS..=NMS_RADIUS {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x + dx;
                    let ny = y + dy;
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let rn = at(nx, ny);
                    let earlier = (ny, nx) < (y, x);
                    if rn > r || (rn == r && earlier) {
                        continue 'candidate;
                    }
                }
            }
            out.push(Keypoint {
                position: PixelPoint::new(x as f64, y as f64),
                response: r,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Density clustering
// ---------------------------------------------------------------------------

/// Density-based clustering of keypoints. Points within `eps_px` of each
/// other are neighbors; a point with at least `min_pts` neighbors
/// (counting itself) is a core point; clusters are the connected
/// components of core points plus their border points; everything else is
/// noise and dropped. Centroids come back sorted by count descending,
/// ties broken by row-major position.
pub fn cluster(keypoints: &[Keypoint], params: &ClusterParams) -> Vec<Centroid> {
    let n = keypoints.len();
    if n == 0 {
        return Vec::new();
    }
    let eps2 = params.eps_px * params.eps_px;
    let dist2 = |a: usize, b: usize| -> f64 {
        let pa = keypoints[a].position;
        let pb = keypoints[b].position;
        let dx = pa.x - pb.x;
        let dy = pa.y - pb.y;
        dx * dx + dy * dy
    };

    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(i, j) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors
        .iter()
        .map(|nb| nb.len() >= params.min_pts)
        .collect();

    const UNLABELED: usize = usize::MAX;
    let mut label = vec![UNLABELED; n];
    let mut n_clusters = 0usize;

    for i in 0..n {
        if !core[i] || label[i] != UNLABELED {
            continue;
        }
        let id = n_clusters;
        n_clusters += 1;
        label[i] = id;
        let mut queue = vec![i];
        while let Some(p) = queue.pop() {
            for &q in &neighbors[p] {
                if label[q] == UNLABELED {
                    label[q] = id;
                    if core[q] {
                        queue.push(q);
                    }
                }
            }
        }
    }

    let mut sums = vec![(0.0f64, 0.0f64, 0usize); n_clusters];
    for i in 0..n {
        if label[i] != UNLABELED {
            let (sx, sy, c) = &mut sums[label[i]];
            *sx += keypoints[i].position.x;
            *sy += keypoints[i].position.y;
            *c += 1;
        }
    }

    let mut centroids: Vec<Centroid> = sums
        .into_iter()
        .map(|(sx, sy, c)| Centroid {
            position: PixelPoint::new(sx / c as f64, sy / c as f64),
            count: c,
        })
        .collect();
    centroids.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.position.y.partial_cmp(&b.position.y).unwrap())
            .then(a.position.x.partial_cmp(&b.position.x).unwrap())
    });
    centroids
}

// ---------------------------------------------------------------------------
// Target selection metric
// ---------------------------------------------------------------------------

/// Normalize a list of values for scoring. Standard mode maps onto [0, 1];
/// literal mode uses the (v - max) numerator and lands in [-1, 0]. When
/// all values are equal (including the all-zero first-iteration distance
/// list) every output is 0.0: a constant term cannot change the argmax.
pub fn normalize(values: &[f64], mode: NormalizationMode) -> Result<Vec<f64>, FocusError> {
    if values.is_empty() {
        return Err(FocusError::EmptyInput);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.0; values.len()]);
    }
    let span = max - min;
    Ok(values
        .iter()
        .map(|&v| match mode {
            NormalizationMode::Standard => (v - min) / span,
            NormalizationMode::Literal => (v - max) / span,
        })
        .collect())
}

/// The selection score for one centroid:
/// `alpha / (d' + epsilon) + (1 - alpha) * n'`.
///
/// In literal mode d' can equal -epsilon, which would divide by zero; that
/// case surfaces as an error instead of producing an infinite score.
pub fn tsm_score(n_prime: f64, d_prime: f64, params: &TsmParams) -> Result<f64, FocusError> {
    let denom = d_prime + params.epsilon;
    if denom.abs() < 1e-12 {
        return Err(FocusError::UndefinedScore);
    }
    Ok(params.alpha / denom + (1.0 - params.alpha) * n_prime)
}

/// A scored selection: the winning centroid's position plus diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub target: PixelPoint,
    /// Member count of the selected centroid.
    pub count: usize,
    pub score: f64,
}

/// Pick the target centroid: compute per-centroid distances to the
/// previous target (all zeros on the first iteration), normalize both
/// lists, score with the TSM and return the argmax. Ties prefer the
/// larger count, then row-major position. Updates `state.p_last`.
pub fn select_target(
    centroids: &[Centroid],
    state: &mut FocusState,
    params: &TsmParams,
) -> Result<Selection, FocusError> {
    if centroids.is_empty() {
        return Err(FocusError::NoTarget);
    }
    let distances: Vec<f64> = centroids
        .iter()
        .map(|c| match &state.p_last {
            Some(p) => p.distance(&c.position),
            None => 0.0,
        })
        .collect();
    let counts: Vec<f64> = centroids.iter().map(|c| c.count as f64).collect();
    let d_norm = normalize(&distances, params.normalization)?;
    let n_norm = normalize(&counts, params.normalization)?;

    let mut best: Option<(usize, f64)> = None;
    for i in 0..centroids.len() {
        let score = tsm_score(n_norm[i], d_norm[i], params)?;
        let better = match best {
            None => true,
            Some((bi, bs)) => {
                score > bs
                    || (score == bs && {
                        let (a, b) = (&centroids[i], &centroids[bi]);
                        a.count > b.count
                            || (a.count == b.count
                                && (a.position.y, a.position.x) < (b.position.y, b.position.x))
                    })
            }
        };
        if better {
            best = Some((i, score));
        }
    }
    let (idx, score) = best.expect("non-empty centroid list");
    let target = centroids[idx].position;
    state.p_last = Some(target);
    Ok(Selection {
        target,
        count: centroids[idx].count,
        score,
    })
}
