//! Relative hand depth from 2-D landmarks: camera-plane mapping, triangle
//! metrics, model-skeleton calibration and the three-distance depth solve.

mod solver;

use std::collections::HashSet;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hand::Hand;
use crate::landmarks::{HandObservation, LandmarkFrame, FINGERTIPS, INDEX_MCP, LANDMARK_COUNT, RING_MCP, WRIST};

pub use solver::{solve_depths, solve_depths_report, HandDepthResult, SolveReport, MAX_ITERATIONS};

pub const DEFAULT_FLOATING_THRESHOLD: f64 = 0.9;
pub const DEFAULT_TARGET_ANGLE_DEG: f64 = 28.0;
pub const MIN_CALIBRATION_FRAMES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepthError {
    #[error("zero-length ray from the wrist")]
    ZeroRay,
    #[error("degenerate triangle or hexagon (zero area)")]
    ZeroArea,
    #[error("observed landmarks coincide or are not finite")]
    DegenerateObservation,
    #[error("model skeleton has non-positive sides or violates the triangle inequality")]
    InvalidSkeleton,
    #[error("insufficient calibration frames for hand {side}: {reason}")]
    InsufficientCalibration { side: Hand, reason: String },
    #[error("depth solve did not converge (residual {residual:.3e} after {iterations} iterations)")]
    NotConverged { residual: f64, iterations: usize },
    #[error("non-positive depth ({t:.4}, {u:.4}, {v:.4})")]
    NonPositiveDepth { t: f64, u: f64, v: f64 },
}

/// Maps normalized image coordinates onto the z = 1 camera plane:
/// x = 2u - 1, y = AR (2v - 1) with AR = h / w.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub aspect_ratio: f64,
}

impl CameraFrame {
    pub fn new(image_w: f64, image_h: f64) -> Self {
        CameraFrame { aspect_ratio: image_h / image_w }
    }

    pub fn to_camera(&self, uv: [f64; 2]) -> Point2<f64> {
        Point2::new(2.0 * uv[0] - 1.0, self.aspect_ratio * (2.0 * uv[1] - 1.0))
    }

    pub fn to_normalized(&self, p: Point2<f64>) -> [f64; 2] {
        [(p.x + 1.0) / 2.0, (p.y / self.aspect_ratio + 1.0) / 2.0]
    }

    pub fn hand_points(&self, hand: &HandObservation) -> [Point2<f64>; LANDMARK_COUNT] {
        hand.landmarks.map(|uv| self.to_camera(uv))
    }
}

/// Shoelace area, absolute.
pub fn polygon_area(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len();
    let twice: f64 = (0..n).map(|i| pts[i].x * pts[(i + 1) % n].y - pts[(i + 1) % n].x * pts[i].y).sum();
    twice.abs() / 2.0
}

fn segments_cross(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
    let orient = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| (q - p).perp(&(r - p));
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// True when two non-adjacent edges of the closed polygon cross.
pub fn is_self_intersecting(pts: &[Point2<f64>]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleMetrics {
    /// Angle IWR at the wrist, degrees.
    pub angle_deg: f64,
    /// Triangle IWR area over the area of the hexagon W F1..F5.
    pub r: f64,
    pub area: f64,
    pub self_intersecting: bool,
}

/// Metrics of the wrist / index-MCP / ring-MCP triangle of a hand given in
/// camera-plane coordinates.
pub fn triangle_metrics(pts: &[Point2<f64>; LANDMARK_COUNT]) -> Result<TriangleMetrics, DepthError> {
    let (w, i, r) = (pts[WRIST], pts[INDEX_MCP], pts[RING_MCP]);
    let (wi, wr) = (i - w, r - w);
    if wi.norm() == 0.0 || wr.norm() == 0.0 {
        return Err(DepthError::ZeroRay);
    }
    let area = polygon_area(&[i, w, r]);
    let mut hexagon = vec![w];
    hexagon.extend(FINGERTIPS.iter().map(|&k| pts[k]));
    let hex_area = polygon_area(&hexagon);
    let scale = wi.norm() * wr.norm();
    if area <= 1e-12 * scale || hex_area <= 1e-12 * scale {
        return Err(DepthError::ZeroArea);
    }
    let cos = (wi.dot(&wr) / (wi.norm() * wr.norm())).clamp(-1.0, 1.0);
    Ok(TriangleMetrics {
        angle_deg: cos.acos().to_degrees(),
        r: area / hex_area,
        area,
        self_intersecting: is_self_intersecting(&hexagon),
    })
}

/// Reference triangle side lengths |IW|, |WR|, |RI| on the z = 1 plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSkeleton {
    pub side: Hand,
    pub iw: f64,
    pub wr: f64,
    pub ri: f64,
}

impl ModelSkeleton {
    pub fn from_lengths(side: Hand, iw: f64, wr: f64, ri: f64) -> Self {
        ModelSkeleton { side, iw, wr, ri }
    }

    pub fn from_points(side: Hand, pts: &[Point2<f64>; LANDMARK_COUNT]) -> Self {
        let (w, i, r) = (pts[WRIST], pts[INDEX_MCP], pts[RING_MCP]);
        ModelSkeleton { side, iw: (i - w).norm(), wr: (w - r).norm(), ri: (r - i).norm() }
    }

    pub fn lengths(&self) -> [f64; 3] {
        [self.iw, self.wr, self.ri]
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        ModelSkeleton { side: self.side, iw: self.iw * lambda, wr: self.wr * lambda, ri: self.ri * lambda }
    }

    pub fn is_valid(&self) -> bool {
        let [a, b, c] = self.lengths();
        a.is_finite() && b.is_finite() && c.is_finite() && a > 0.0 && b > 0.0 && c > 0.0 && a < b + c && b < a + c && c < a + b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target_angle_deg: f64,
    /// Fraction of frames kept by closeness to the target angle.
    pub angle_fraction: f64,
    /// Fraction of frames kept by largest r.
    pub r_fraction: f64,
    pub min_frames: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            target_angle_deg: DEFAULT_TARGET_ANGLE_DEG,
            angle_fraction: 0.1,
            r_fraction: 0.5,
            min_frames: MIN_CALIBRATION_FRAMES,
        }
    }
}

/// One hand observation reduced to what calibration needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub frame_idx: u64,
    pub metrics: TriangleMetrics,
    pub skeleton: ModelSkeleton,
}

impl CalibrationSample {
    /// `None` when the hand's metrics are invalid for calibration.
    pub fn from_points(frame_idx: u64, side: Hand, pts: &[Point2<f64>; LANDMARK_COUNT]) -> Option<Self> {
        let metrics = triangle_metrics(pts).ok()?;
        if metrics.self_intersecting {
            return None;
        }
        Some(CalibrationSample { frame_idx, metrics, skeleton: ModelSkeleton::from_points(side, pts) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub skeleton: ModelSkeleton,
    pub frame_idx: u64,
    pub n_valid: usize,
    /// The angle/r intersection was empty and only the angle filter was used.
    pub relaxed: bool,
}

fn lowest_k<F: Fn(&CalibrationSample) -> f64>(samples: &[CalibrationSample], k: usize, key: F) -> HashSet<u64> {
    let mut sorted: Vec<&CalibrationSample> = samples.iter().collect();
    sorted.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.frame_idx.cmp(&b.frame_idx)));
    sorted.iter().take(k).map(|s| s.frame_idx).collect()
}

/// Picks the reference skeleton for one hand: frames whose wrist angle is
/// among the closest `angle_fraction` to the target and whose r is among the
/// largest `r_fraction`; of those, the lower-median area frame.
pub fn select_model_skeleton(
    samples: &[CalibrationSample],
    side: Hand,
    cfg: &CalibrationConfig,
) -> Result<Calibration, DepthError> {
    let n = samples.len();
    if n < cfg.min_frames || n == 0 {
        return Err(DepthError::InsufficientCalibration {
            side,
            reason: format!("{n} valid frames, need at least {}", cfg.min_frames),
        });
    }
    let n_angle = ((n as f64 * cfg.angle_fraction).ceil() as usize).clamp(1, n);
    let n_r = ((n as f64 * cfg.r_fraction).ceil() as usize).clamp(1, n);
    let by_angle = lowest_k(samples, n_angle, |s| (s.metrics.angle_deg - cfg.target_angle_deg).abs());
    let by_r = lowest_k(samples, n_r, |s| -s.metrics.r);

    let mut relaxed = false;
    let mut chosen: Vec<&CalibrationSample> =
        samples.iter().filter(|s| by_angle.contains(&s.frame_idx) && by_r.contains(&s.frame_idx)).collect();
    if chosen.is_empty() {
        relaxed = true;
        chosen = samples.iter().filter(|s| by_angle.contains(&s.frame_idx)).collect();
    }
    if chosen.is_empty() {
        return Err(DepthError::InsufficientCalibration { side, reason: "no frame passed the angle filter".into() });
    }
    chosen.sort_by(|a, b| a.metrics.area.total_cmp(&b.metrics.area).then(a.frame_idx.cmp(&b.frame_idx)));
    let pick = chosen[(chosen.len() - 1) / 2];
    Ok(Calibration { skeleton: pick.skeleton, frame_idx: pick.frame_idx, n_valid: n, relaxed })
}

/// Strictly below the threshold counts as floating.
pub fn classify_floating(d: f64, threshold: f64) -> bool {
    d < threshold
}

/// Observed I, W, R of a hand in camera-plane coordinates, in solver order.
pub fn iwr(pts: &[Point2<f64>; LANDMARK_COUNT]) -> [Point2<f64>; 3] {
    [pts[INDEX_MCP], pts[WRIST], pts[RING_MCP]]
}

/// Whether detector side labels look swapped: among frames with exactly one
/// left and one right hand, the left wrist lies to the right of the right
/// wrist (by `wrist_x`) in more than `fraction` of them.
pub fn side_labels_swapped<F>(frames: &[LandmarkFrame], min_score: f64, fraction: f64, wrist_x: F) -> bool
where
    F: Fn(&HandObservation) -> Option<f64>,
{
    let mut both = 0usize;
    let mut contradicted = 0usize;
    for f in frames {
        let hands: Vec<&HandObservation> = f.hands_above(min_score).collect();
        let left: Vec<_> = hands.iter().filter(|h| h.side == Hand::Left).collect();
        let right: Vec<_> = hands.iter().filter(|h| h.side == Hand::Right).collect();
        if left.len() != 1 || right.len() != 1 {
            continue;
        }
        if let (Some(lx), Some(rx)) = (wrist_x(left[0]), wrist_x(right[0])) {
            both += 1;
            if lx > rx {
                contradicted += 1;
            }
        }
    }
    both > 0 && contradicted as f64 > fraction * both as f64
}

pub fn swap_sides(frames: &mut [LandmarkFrame]) {
    for f in frames {
        for h in &mut f.hands {
            h.side = h.side.other();
        }
    }
}
