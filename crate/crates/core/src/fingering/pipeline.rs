use log::{debug, info, warn};
use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{annotate_note, fingering_scores, FingeringAnnotation, FingeringConfig, Summary};
use crate::depth::{
    iwr, select_model_skeleton, side_labels_swapped, solve_depths, swap_sides, Calibration, CalibrationSample, CameraFrame,
    DepthError, HandDepthResult, ModelSkeleton,
};
use crate::geometry::{GeometryError, KeyboardGeometry, KeyboardMapper, KeyboardPoint};
use crate::hand::Hand;
use crate::landmarks::{HandObservation, LandmarkFrame, FINGERTIPS, LANDMARK_COUNT, WRIST};
use crate::midi::Performance;

#[derive(Debug, Error)]
pub enum FingeringError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("calibration failed: {0}")]
    Calibration(#[from] DepthError),
}

/// A detected hand reduced to what scoring needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedHand {
    pub side: Hand,
    pub score: f64,
    /// `None` when the depth solve failed; such hands count as not floating.
    pub depth: Option<HandDepthResult>,
    pub floating: bool,
    /// Fingertips 1..5 in keyboard space (`None` if the mapping failed).
    pub fingertips: [Option<KeyboardPoint>; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedFrame {
    pub frame_idx: u64,
    pub t_s: f64,
    pub hands: Vec<PreparedHand>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    pub sides_swapped: bool,
    pub calibration_frames: Vec<(Hand, u64)>,
    pub skeletons: Vec<ModelSkeleton>,
    pub hands_seen: usize,
    pub depth_unknown: usize,
    pub floating: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub annotation: FingeringAnnotation,
    pub summary: Summary,
    pub diagnostics: PipelineDiagnostics,
    pub frames: Vec<PreparedFrame>,
}

struct Undistorted {
    /// Undistorted pixel coordinates.
    pixels: [Point2<f64>; LANDMARK_COUNT],
    camera: [Point2<f64>; LANDMARK_COUNT],
}

fn undistort_hand(hand: &HandObservation, mapper: &KeyboardMapper, cam: &CameraFrame) -> Option<Undistorted> {
    let (w, h) = (mapper.geometry.image_w, mapper.geometry.image_h);
    let mut pixels = [Point2::new(0.0, 0.0); LANDMARK_COUNT];
    for (px, uv) in pixels.iter_mut().zip(hand.landmarks.iter()) {
        *px = mapper.geometry.undistort(Point2::new(uv[0] * w, uv[1] * h)).ok()?;
    }
    let camera = pixels.map(|p| cam.to_camera([p.x / w, p.y / h]));
    Some(Undistorted { pixels, camera })
}

fn calibrate(
    frames: &[LandmarkFrame],
    mapper: &KeyboardMapper,
    cam: &CameraFrame,
    cfg: &FingeringConfig,
) -> Result<Vec<(Hand, Calibration)>, DepthError> {
    let mut out = Vec::new();
    for side in Hand::BOTH {
        let mut samples = Vec::new();
        let mut observed = 0usize;
        for f in frames {
            let hands: Vec<&HandObservation> = f.hands_above(cfg.min_hand_score).filter(|h| h.side == side).collect();
            observed += hands.len();
            // Frames where one side is detected twice are ambiguous for calibration.
            if hands.len() != 1 {
                continue;
            }
            if let Some(u) = undistort_hand(hands[0], mapper, cam) {
                samples.extend(CalibrationSample::from_points(f.frame_idx, side, &u.camera));
            }
        }
        if observed == 0 {
            debug!("no detections of hand {side}; skipping calibration");
            continue;
        }
        let cal = select_model_skeleton(&samples, side, &cfg.calibration)?;
        info!(
            "hand {side}: model skeleton from frame {} ({} valid frames{})",
            cal.frame_idx,
            cal.n_valid,
            if cal.relaxed { ", angle filter only" } else { "" }
        );
        out.push((side, cal));
    }
    Ok(out)
}

/// Applies side correction, calibration, per-hand depth and fingertip mapping
/// to every frame.
pub fn prepare_frames(
    landmarks: &[LandmarkFrame],
    geometry: &KeyboardGeometry,
    cfg: &FingeringConfig,
) -> Result<(Vec<PreparedFrame>, PipelineDiagnostics), FingeringError> {
    let mapper = KeyboardMapper::new(geometry.clone())?;
    let cam = CameraFrame::new(geometry.image_w, geometry.image_h);
    let mut frames = landmarks.to_vec();
    frames.sort_by_key(|f| f.frame_idx);
    let mut diag = PipelineDiagnostics::default();

    let wrist_x = |h: &HandObservation| {
        let uv = h.landmark(WRIST);
        mapper.normalized_to_keyboard(uv[0], uv[1]).ok().map(|k| k.x)
    };
    if side_labels_swapped(&frames, cfg.min_hand_score, cfg.side_swap_fraction, wrist_x) {
        warn!("hand side labels contradict wrist order in most frames; swapping L/R");
        swap_sides(&mut frames);
        diag.sides_swapped = true;
    }

    let calibrations = calibrate(&frames, &mapper, &cam, cfg)?;
    diag.calibration_frames = calibrations.iter().map(|(s, c)| (*s, c.frame_idx)).collect();
    diag.skeletons = calibrations.iter().map(|(_, c)| c.skeleton).collect();
    let skeleton_of = |side: Hand| calibrations.iter().find(|(s, _)| *s == side).map(|(_, c)| c.skeleton);

    let prepared: Vec<PreparedFrame> = frames
        .par_iter()
        .map(|f| {
            let hands = f
                .hands_above(cfg.min_hand_score)
                .map(|h| {
                    let und = undistort_hand(h, &mapper, &cam);
                    let depth = match (&und, skeleton_of(h.side)) {
                        (Some(u), Some(model)) => match solve_depths(iwr(&u.camera), &model, cfg.floating_threshold) {
                            Ok(r) => Some(r),
                            Err(e) => {
                                debug!("frame {} hand {}: depth unknown ({e})", f.frame_idx, h.side);
                                None
                            }
                        },
                        _ => None,
                    };
                    let fingertips = match &und {
                        Some(u) => FINGERTIPS.map(|k| mapper.homography.apply(u.pixels[k]).ok()),
                        None => [None; 5],
                    };
                    PreparedHand {
                        side: h.side,
                        score: h.score,
                        floating: depth.map_or(false, |d| d.floating),
                        depth,
                        fingertips,
                    }
                })
                .collect();
            PreparedFrame { frame_idx: f.frame_idx, t_s: f.t_s, hands }
        })
        .collect();

    for f in &prepared {
        for h in &f.hands {
            diag.hands_seen += 1;
            diag.depth_unknown += usize::from(h.depth.is_none());
            diag.floating += usize::from(h.floating);
        }
    }
    if diag.depth_unknown > 0 {
        warn!("{} of {} hand detections have unknown depth; treated as not floating", diag.depth_unknown, diag.hands_seen);
    }
    let mut prepared = prepared;
    prepared.sort_by(|a, b| a.t_s.total_cmp(&b.t_s).then(a.frame_idx.cmp(&b.frame_idx)));
    Ok((prepared, diag))
}

/// Calibration, per-frame depth, per-note scoring, candidates and labels.
pub fn run_pipeline(
    landmarks: &[LandmarkFrame],
    performance: &Performance,
    geometry: &KeyboardGeometry,
    cfg: &FingeringConfig,
) -> Result<PipelineOutput, FingeringError> {
    let (frames, diagnostics) = prepare_frames(landmarks, geometry, cfg)?;
    let layout = crate::geometry::KeyLayout::standard();
    let entries = performance
        .notes
        .par_iter()
        .map(|n| annotate_note(n, &fingering_scores(n, &frames, &layout, cfg), cfg))
        .collect();
    let annotation = FingeringAnnotation { entries };
    let summary = annotation.summary();
    info!(
        "{} notes: {:.1}% auto, {:.1}% no candidate, {:.1}% multiple candidates",
        summary.n_notes,
        100.0 * summary.auto_fraction,
        100.0 * summary.pending_none_fraction,
        100.0 * summary.pending_multi_fraction
    );
    Ok(PipelineOutput { annotation, summary, diagnostics, frames })
}
