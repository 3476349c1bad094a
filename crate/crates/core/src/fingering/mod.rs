//! Per-note fingering scores from non-floating hand frames, candidate
//! extraction and automatic labeling.

mod output;
mod pipeline;

use serde::{Deserialize, Serialize};

use crate::geometry::{KeyLayout, KeyboardPoint, WHITE_KEY_WIDTH};
use crate::hand::{FingerId, Hand};
use crate::midi::NoteEvent;

pub use output::{parse_fingering_jsonl, FingeringRow, OutputError};
pub use pipeline::{prepare_frames, run_pipeline, FingeringError, PipelineDiagnostics, PipelineOutput, PreparedFrame, PreparedHand};

use crate::depth::{CalibrationConfig, DEFAULT_FLOATING_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingeringConfig {
    /// Candidate if score > normal_fraction * max_score.
    pub normal_fraction: f64,
    /// Strong candidate if score > strong_fraction * max_score.
    pub strong_fraction: f64,
    /// Linear weight falloff outside the key, in white-key widths.
    pub falloff_white_keys: f64,
    pub floating_threshold: f64,
    /// Detections below this score are ignored.
    pub min_hand_score: f64,
    /// Detector side labels are swapped when wrist order contradicts them in
    /// more than this fraction of two-hand frames.
    pub side_swap_fraction: f64,
    pub calibration: CalibrationConfig,
}

impl Default for FingeringConfig {
    fn default() -> Self {
        FingeringConfig {
            normal_fraction: 0.5,
            strong_fraction: 0.8,
            falloff_white_keys: 0.5,
            floating_threshold: DEFAULT_FLOATING_THRESHOLD,
            min_hand_score: 0.5,
            side_swap_fraction: 0.8,
            calibration: CalibrationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Auto,
    Manual,
    PendingNone,
    PendingMulti,
}

impl Status {
    pub fn is_pending(self) -> bool {
        matches!(self, Status::PendingNone | Status::PendingMulti)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Auto => "auto",
            Status::Manual => "manual",
            Status::PendingNone => "pending-none",
            Status::PendingMulti => "pending-multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub finger: FingerId,
    pub score: f64,
    pub strong: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingeringScoreTable {
    pub note_id: u32,
    /// Indexed by `FingerId::index`.
    pub scores: [f64; 10],
    /// Number of frames whose midpoint lies within the note.
    pub max_score: u32,
}

impl FingeringScoreTable {
    pub fn score(&self, finger: FingerId) -> f64 {
        self.scores[finger.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteAnnotation {
    pub note_id: u32,
    pub onset_s: f64,
    pub pitch: u8,
    pub status: Status,
    /// `None` with status manual marks a note the annotator declared unplayable.
    pub label: Option<FingerId>,
    pub candidates: Vec<Candidate>,
    pub max_score: u32,
    pub scores: [f64; 10],
}

impl NoteAnnotation {
    pub fn pending(note_id: u32, onset_s: f64, pitch: u8) -> Self {
        NoteAnnotation {
            note_id,
            onset_s,
            pitch,
            status: Status::PendingNone,
            label: None,
            candidates: Vec::new(),
            max_score: 0,
            scores: [0.0; 10],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub n_notes: usize,
    pub auto: usize,
    pub manual: usize,
    pub pending_none: usize,
    pub pending_multi: usize,
    pub auto_fraction: f64,
    pub manual_fraction: f64,
    pub pending_none_fraction: f64,
    pub pending_multi_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FingeringAnnotation {
    pub entries: Vec<NoteAnnotation>,
}

impl FingeringAnnotation {
    pub fn get(&self, note_id: u32) -> Option<&NoteAnnotation> {
        self.index_of(note_id).map(|i| &self.entries[i])
    }

    pub fn get_mut(&mut self, note_id: u32) -> Option<&mut NoteAnnotation> {
        self.index_of(note_id).map(move |i| &mut self.entries[i])
    }

    pub fn index_of(&self, note_id: u32) -> Option<usize> {
        match self.entries.get(note_id as usize) {
            Some(e) if e.note_id == note_id => Some(note_id as usize),
            _ => self.entries.iter().position(|e| e.note_id == note_id),
        }
    }

    /// Hand of the note's label, if it has one.
    pub fn hand_of(&self, note_id: u32) -> Option<Hand> {
        self.get(note_id).and_then(|e| e.label).map(|f| f.hand)
    }

    pub fn pending(&self) -> impl Iterator<Item = &NoteAnnotation> {
        self.entries.iter().filter(|e| e.status.is_pending())
    }

    pub fn pending_count(&self) -> usize {
        self.pending().count()
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary { n_notes: self.entries.len(), ..Summary::default() };
        for e in &self.entries {
            match e.status {
                Status::Auto => s.auto += 1,
                Status::Manual => s.manual += 1,
                Status::PendingNone => s.pending_none += 1,
                Status::PendingMulti => s.pending_multi += 1,
            }
        }
        if s.n_notes > 0 {
            let n = s.n_notes as f64;
            s.auto_fraction = s.auto as f64 / n;
            s.manual_fraction = s.manual as f64 / n;
            s.pending_none_fraction = s.pending_none as f64 / n;
            s.pending_multi_fraction = s.pending_multi as f64 / n;
        }
        s
    }
}

/// 1 inside the key footprint, then a linear falloff to 0 at `falloff`
/// white-key widths from it.
pub fn fingertip_weight(tip: KeyboardPoint, pitch: u8, layout: &KeyLayout, falloff: f64) -> f64 {
    let Some(key) = layout.key(pitch) else { return 0.0 };
    let dist = key.distance(tip) / WHITE_KEY_WIDTH;
    if dist == 0.0 {
        1.0
    } else if falloff <= 0.0 {
        0.0
    } else {
        (1.0 - dist / falloff).max(0.0)
    }
}

/// Range of frames (sorted by time) whose midpoint lies in `[onset, offset)`.
pub fn covering_frames(frames: &[PreparedFrame], onset_s: f64, offset_s: f64) -> std::ops::Range<usize> {
    let start = frames.partition_point(|f| f.t_s < onset_s);
    let end = frames.partition_point(|f| f.t_s < offset_s);
    start..end.max(start)
}

/// Sums, over the frames covering the note, the per-finger fingertip weight
/// on the note's key. Floating hands contribute nothing; when one side is
/// detected more than once in a frame the larger weight counts.
pub fn fingering_scores(note: &NoteEvent, frames: &[PreparedFrame], layout: &KeyLayout, cfg: &FingeringConfig) -> FingeringScoreTable {
    let range = covering_frames(frames, note.onset_s, note.offset_s);
    let mut scores = [0.0; 10];
    for frame in &frames[range.clone()] {
        let mut best = [0.0_f64; 10];
        for hand in frame.hands.iter().filter(|h| !h.floating) {
            for finger in 1..=5u8 {
                let Some(tip) = hand.fingertips[usize::from(finger - 1)] else { continue };
                let id = FingerId { hand: hand.side, finger };
                let w = fingertip_weight(tip, note.pitch, layout, cfg.falloff_white_keys);
                best[id.index()] = best[id.index()].max(w);
            }
        }
        for (s, b) in scores.iter_mut().zip(best) {
            *s += b;
        }
    }
    FingeringScoreTable { note_id: note.note_id, scores, max_score: range.len() as u32 }
}

/// Normal candidates exceed `normal_fraction` of the maximum score, strong ones
/// `strong_fraction`. A single strong candidate replaces the whole list.
pub fn extract_candidates(table: &FingeringScoreTable, cfg: &FingeringConfig) -> Vec<Candidate> {
    if table.max_score == 0 {
        return Vec::new();
    }
    let max = f64::from(table.max_score);
    let candidates: Vec<Candidate> = FingerId::all()
        .filter_map(|finger| {
            let score = table.score(finger);
            (score > cfg.normal_fraction * max).then_some(Candidate { finger, score, strong: score > cfg.strong_fraction * max })
        })
        .collect();
    let strong: Vec<Candidate> = candidates.iter().filter(|c| c.strong).copied().collect();
    if strong.len() == 1 {
        strong
    } else {
        candidates
    }
}

/// Status and label implied by a candidate list.
pub fn auto_label(candidates: &[Candidate]) -> (Status, Option<FingerId>) {
    match candidates {
        [] => (Status::PendingNone, None),
        [only] => (Status::Auto, Some(only.finger)),
        _ => (Status::PendingMulti, None),
    }
}

pub fn annotate_note(note: &NoteEvent, table: &FingeringScoreTable, cfg: &FingeringConfig) -> NoteAnnotation {
    let candidates = extract_candidates(table, cfg);
    let (status, label) = auto_label(&candidates);
    NoteAnnotation {
        note_id: note.note_id,
        onset_s: note.onset_s,
        pitch: note.pitch,
        status,
        label,
        candidates,
        max_score: table.max_score,
        scores: table.scores,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::layout::KEYBOARD_HEIGHT;

    fn f(hand: Hand, finger: u8) -> FingerId {
        FingerId::new(hand, finger).unwrap()
    }

    fn table(pairs: &[(FingerId, f64)], max_score: u32) -> FingeringScoreTable {
        let mut scores = [0.0; 10];
        for (id, s) in pairs {
            scores[id.index()] = *s;
        }
        FingeringScoreTable { note_id: 0, scores, max_score }
    }

    #[test]
    fn weight_inside_and_falloff() {
        let layout = KeyLayout::standard();
        let f4 = layout.key(65).unwrap();
        assert_eq!(fingertip_weight(f4.anchor(), 65, &layout, 0.5), 1.0);
        // F4 is white index 26; its front part spans [26w, 27w]. Step 0.25 widths left of it.
        let x = 26.0 * WHITE_KEY_WIDTH - 0.25 * WHITE_KEY_WIDTH;
        let w = fingertip_weight(KeyboardPoint::new(x, 100.0), 65, &layout, 0.5);
        assert!((w - 0.5).abs() < 1e-12);
        let far = KeyboardPoint::new(f4.anchor().x + 2.0 * WHITE_KEY_WIDTH, 100.0);
        assert_eq!(fingertip_weight(far, 65, &layout, 0.5), 0.0);
    }

    #[test]
    fn weight_matches_sampled_boundary_distance() {
        // Distance oracle: dense sampling of the footprint boundary.
        let layout = KeyLayout::standard();
        for pitch in [60u8, 61, 64, 65, 66] {
            let key = layout.key(pitch).unwrap();
            let mut boundary = Vec::new();
            for r in &key.parts {
                for k in 0..=2000 {
                    let s = k as f64 / 2000.0;
                    boundary.push((r.x0 + s * (r.x1 - r.x0), r.y0));
                    boundary.push((r.x0 + s * (r.x1 - r.x0), r.y1));
                    boundary.push((r.x0, r.y0 + s * (r.y1 - r.y0)));
                    boundary.push((r.x1, r.y0 + s * (r.y1 - r.y0)));
                }
            }
            for &(x, y) in &[(key.anchor().x + 14.0, KEYBOARD_HEIGHT + 3.0), (key.anchor().x - 12.0, 30.0), (key.anchor().x, 128.0)] {
                let p = KeyboardPoint::new(x, y);
                if key.contains(p) {
                    continue;
                }
                let d = boundary.iter().map(|b| (b.0 - x).hypot(b.1 - y)).fold(f64::INFINITY, f64::min);
                let expected = (1.0 - d / WHITE_KEY_WIDTH / 0.5).max(0.0);
                let got = fingertip_weight(p, pitch, &layout, 0.5);
                assert!((got - expected).abs() < 1e-3, "pitch {pitch} at ({x}, {y}): {got} vs {expected}");
            }
        }
    }

    #[test]
    fn single_strong_candidate() {
        let r2 = f(Hand::Right, 2);
        let t = table(&[(r2, 9.0), (f(Hand::Right, 3), 1.0), (f(Hand::Left, 1), 0.5)], 10);
        let c = extract_candidates(&t, &FingeringConfig::default());
        assert_eq!(c, vec![Candidate { finger: r2, score: 9.0, strong: true }]);
        assert_eq!(auto_label(&c), (Status::Auto, Some(r2)));
    }

    #[test]
    fn single_strong_collapses_normal_candidates() {
        let t = table(&[(f(Hand::Right, 2), 9.0), (f(Hand::Right, 3), 6.0)], 10);
        let c = extract_candidates(&t, &FingeringConfig::default());
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].finger, f(Hand::Right, 2));
    }

    #[test]
    fn two_normal_candidates() {
        let t = table(&[(f(Hand::Right, 2), 6.0), (f(Hand::Right, 3), 5.5)], 10);
        let c = extract_candidates(&t, &FingeringConfig::default());
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| !c.strong));
        assert_eq!(auto_label(&c).0, Status::PendingMulti);
    }

    #[test]
    fn two_strong_candidates_do_not_collapse() {
        let t = table(&[(f(Hand::Right, 2), 9.0), (f(Hand::Right, 3), 8.5)], 10);
        let c = extract_candidates(&t, &FingeringConfig::default());
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| c.strong));
        assert_eq!(auto_label(&c).0, Status::PendingMulti);
    }

    #[test]
    fn thresholds_are_strict() {
        let t = table(&[(f(Hand::Left, 4), 5.0)], 10);
        assert!(extract_candidates(&t, &FingeringConfig::default()).is_empty());
        let t = table(&[(f(Hand::Left, 4), 8.0)], 10);
        let c = extract_candidates(&t, &FingeringConfig::default());
        assert_eq!(c.len(), 1);
        assert!(!c[0].strong);
        // A lone normal candidate is still the only candidate.
        assert_eq!(auto_label(&c).0, Status::Auto);
    }

    #[test]
    fn zero_frames_yield_no_candidates() {
        let t = table(&[], 0);
        let c = extract_candidates(&t, &FingeringConfig::default());
        assert!(c.is_empty());
        assert_eq!(auto_label(&c), (Status::PendingNone, None));
    }

    fn frames_with_tip(n: usize, tip: KeyboardPoint, floating: &[usize]) -> Vec<PreparedFrame> {
        (0..n)
            .map(|i| PreparedFrame {
                frame_idx: i as u64,
                t_s: (i as f64 + 0.5) / 60.0,
                hands: vec![PreparedHand {
                    side: Hand::Right,
                    score: 1.0,
                    depth: None,
                    floating: floating.contains(&i),
                    fingertips: [None, Some(tip), Some(KeyboardPoint::new(900.0, 100.0)), None, None],
                }],
            })
            .collect()
    }

    fn note_over(frames: usize) -> NoteEvent {
        NoteEvent { note_id: 0, onset_s: 0.0, offset_s: frames as f64 / 60.0, pitch: 65, velocity: 80 }
    }

    #[test]
    fn scores_count_covering_frames() {
        let layout = KeyLayout::standard();
        let tip = layout.key(65).unwrap().anchor();
        let t = fingering_scores(&note_over(10), &frames_with_tip(30, tip, &[]), &layout, &FingeringConfig::default());
        assert_eq!(t.max_score, 10);
        assert_eq!(t.score(f(Hand::Right, 2)), 10.0);
        assert_eq!(t.scores.iter().sum::<f64>(), 10.0);
    }

    #[test]
    fn floating_frames_contribute_nothing() {
        let layout = KeyLayout::standard();
        let tip = layout.key(65).unwrap().anchor();
        let frames = frames_with_tip(30, tip, &[1, 3, 5, 7]);
        let t = fingering_scores(&note_over(10), &frames, &layout, &FingeringConfig::default());
        assert_eq!(t.max_score, 10);
        assert_eq!(t.score(f(Hand::Right, 2)), 6.0);
    }

    #[test]
    fn half_weight_is_linear() {
        let layout = KeyLayout::standard();
        let tip = KeyboardPoint::new(26.0 * WHITE_KEY_WIDTH - 0.25 * WHITE_KEY_WIDTH, 100.0);
        let t = fingering_scores(&note_over(10), &frames_with_tip(30, tip, &[]), &layout, &FingeringConfig::default());
        assert!((t.score(f(Hand::Right, 2)) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn note_shorter_than_a_frame() {
        let layout = KeyLayout::standard();
        let frames = frames_with_tip(30, layout.key(65).unwrap().anchor(), &[]);
        let note = NoteEvent { note_id: 0, onset_s: 0.001, offset_s: 0.002, pitch: 65, velocity: 80 };
        let t = fingering_scores(&note, &frames, &layout, &FingeringConfig::default());
        assert_eq!(t.max_score, 0);
        assert_eq!(annotate_note(&note, &t, &FingeringConfig::default()).status, Status::PendingNone);
    }

    #[test]
    fn summary_fractions_sum_to_one() {
        let mut ann = FingeringAnnotation::default();
        for i in 0..7u32 {
            let mut e = NoteAnnotation::pending(i, i as f64, 60);
            e.status = [Status::Auto, Status::PendingMulti, Status::PendingNone][i as usize % 3];
            ann.entries.push(e);
        }
        let s = ann.summary();
        assert_eq!((s.auto, s.pending_multi, s.pending_none), (3, 2, 2));
        assert!((s.auto_fraction + s.pending_none_fraction + s.pending_multi_fraction + s.manual_fraction - 1.0).abs() < 1e-12);
    }
}
