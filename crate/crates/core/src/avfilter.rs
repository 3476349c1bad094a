//! Pruning of transcribed onsets whose pitch no visible fingertip could have
//! played.

use std::collections::{BTreeSet, HashMap};

use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, KeyboardMapper};
use crate::landmarks::{LandmarkFrame, FINGERTIPS};
use crate::midi::Performance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetCombine {
    Union,
    Intersection,
}

/// What to do when fewer than two hands are visible (but at least one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingHandPolicy {
    Keep,
    FilterWithAvailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub candidate_range: usize,
    pub set_combine: SetCombine,
    pub fps: f64,
    pub missing_hand_policy: MissingHandPolicy,
    pub min_hand_score: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            candidate_range: 2,
            set_combine: SetCombine::Union,
            fps: 60.0,
            missing_hand_policy: MissingHandPolicy::FilterWithAvailable,
            min_hand_score: 0.5,
        }
    }
}

/// Nearest frame by midpoint timestamp `(i + 0.5) / fps`; ties go to the
/// lower index, the result is clamped to the video.
pub fn frame_for_onset(onset_s: f64, fps: f64, n_frames: usize) -> usize {
    if n_frames == 0 {
        return 0;
    }
    let x = (onset_s * fps - 0.5).floor().max(0.0);
    let i0 = x as usize;
    let mid = |i: usize| (i as f64 + 0.5) / fps;
    let i = if (onset_s - mid(i0)).abs() <= (onset_s - mid(i0 + 1)).abs() { i0 } else { i0 + 1 };
    i.min(n_frames - 1)
}

/// Candidate pitches of every fingertip of the visible hands, combined.
/// `None` when no hand passes the score threshold.
pub fn plausible_pitches(frame: &LandmarkFrame, mapper: &KeyboardMapper, cfg: &FilterConfig) -> Result<Option<BTreeSet<u8>>, GeometryError> {
    let mut sets = Vec::new();
    for hand in frame.hands_above(cfg.min_hand_score) {
        for &tip in &FINGERTIPS {
            let [u, v] = hand.landmark(tip);
            let kp = mapper.to_keyboard_space(Point2::new(u * mapper.geometry.image_w, v * mapper.geometry.image_h))?;
            sets.push(mapper.layout.candidate_pitches(mapper.layout.white_index_at(kp.x), cfg.candidate_range));
        }
    }
    if sets.is_empty() {
        return Ok(None);
    }
    let combined = match cfg.set_combine {
        SetCombine::Union => sets.into_iter().flatten().collect(),
        SetCombine::Intersection => {
            let mut it = sets.into_iter();
            let first = it.next().unwrap_or_default();
            it.fold(first, |acc, s| acc.intersection(&s).copied().collect())
        }
    };
    Ok(Some(combined))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Kept,
    Discarded,
    NoHands,
    SingleHandKept,
    Uncovered,
}

impl Decision {
    pub fn retains(self) -> bool {
        self != Decision::Discarded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterLogEntry {
    pub note_id: u32,
    pub frame: usize,
    pub decision: Decision,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub performance: Performance,
    pub log: Vec<FilterLogEntry>,
}

impl FilterOutcome {
    pub fn log_jsonl(&self) -> String {
        self.log.iter().map(|e| serde_json::to_string(e).expect("log entry serializes") + "\n").collect()
    }
}

/// Keeps a note when no hand is visible in its onset frame or when its pitch
/// is among the plausible pitches. Pedals and timing are untouched.
pub fn filter_performance(
    p: &Performance,
    landmarks: &[LandmarkFrame],
    mapper: &KeyboardMapper,
    cfg: &FilterConfig,
    n_frames: Option<usize>,
) -> Result<FilterOutcome, GeometryError> {
    let by_index: HashMap<usize, &LandmarkFrame> = landmarks.iter().map(|f| (f.frame_idx as usize, f)).collect();
    let n_frames = n_frames.unwrap_or_else(|| landmarks.iter().map(|f| f.frame_idx as usize + 1).max().unwrap_or(0));
    let covered_until = n_frames as f64 / cfg.fps;

    let log: Vec<FilterLogEntry> = p
        .notes
        .par_iter()
        .map(|n| {
            let frame = frame_for_onset(n.onset_s, cfg.fps, n_frames);
            let entry = |decision, candidates| FilterLogEntry { note_id: n.note_id, frame, decision, candidates };
            if n.onset_s >= covered_until {
                return Ok(entry(Decision::Uncovered, 0));
            }
            let Some(f) = by_index.get(&frame) else {
                return Ok(entry(Decision::NoHands, 0));
            };
            let visible = f.hands_above(cfg.min_hand_score).count();
            if visible == 0 {
                return Ok(entry(Decision::NoHands, 0));
            }
            if visible == 1 && cfg.missing_hand_policy == MissingHandPolicy::Keep {
                return Ok(entry(Decision::SingleHandKept, 0));
            }
            let set = plausible_pitches(f, mapper, cfg)?.unwrap_or_default();
            let decision = if set.contains(&n.pitch) { Decision::Kept } else { Decision::Discarded };
            Ok(entry(decision, set.len()))
        })
        .collect::<Result<_, GeometryError>>()?;

    let uncovered = log.iter().filter(|e| e.decision == Decision::Uncovered).count();
    if uncovered > 0 {
        log::warn!("{uncovered} onsets lie past the landmark timeline and were kept");
    }
    let notes = p.notes.iter().zip(&log).filter(|(_, e)| e.decision.retains()).map(|(n, _)| n.clone()).collect();
    Ok(FilterOutcome { performance: p.with_notes(notes), log })
}
