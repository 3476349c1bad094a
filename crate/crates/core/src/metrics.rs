//! Transcription and fingering evaluation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingering::{FingeringAnnotation, Status};
use crate::hand::FingerId;
use crate::midi::NoteEvent;

pub const ONSET_TOLERANCE_S: f64 = 0.05;
pub const OFFSET_MIN_TOLERANCE_S: f64 = 0.05;
pub const OFFSET_RATIO: f64 = 0.2;
pub const VELOCITY_TOLERANCE: f64 = 0.1;
pub const FRAME_HOP_S: f64 = 0.01;
pub const FINGERING_FIRST_NOTES: usize = 150;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("each sample needs at least two values (got {0} and {1})")]
    TooFewSamples(usize, usize),
    #[error("pooled standard deviation is zero")]
    ZeroDeviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Onset,
    Offset,
    Velocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// (reference index, estimate index)
    pub pairs: Vec<(usize, usize)>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rounds a time difference to 7 decimals so that boundary cases compare as written.
fn rounded(d: f64) -> f64 {
    (d * 1e7).round() / 1e7
}

/// Maximum bipartite matching by augmenting paths, refs tried in order.
pub fn max_matching(n_ref: usize, n_est: usize, eligible: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let adj: Vec<Vec<usize>> = (0..n_ref).map(|r| (0..n_est).filter(|&e| eligible(r, e)).collect()).collect();
    let mut est_owner: Vec<Option<usize>> = vec![None; n_est];

    fn augment(r: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &e in &adj[r] {
            if seen[e] {
                continue;
            }
            seen[e] = true;
            if owner[e].map_or(true, |o| augment(o, adj, owner, seen)) {
                owner[e] = Some(r);
                return true;
            }
        }
        false
    }

    for r in 0..n_ref {
        let mut seen = vec![false; n_est];
        augment(r, &adj, &mut est_owner, &mut seen);
    }
    let mut pairs: Vec<(usize, usize)> = est_owner.iter().enumerate().filter_map(|(e, o)| o.map(|r| (r, e))).collect();
    pairs.sort_unstable();
    pairs
}

fn base_eligible(r: &NoteEvent, e: &NoteEvent, onset_tol: f64, with_offset: bool) -> bool {
    if r.pitch != e.pitch || rounded((r.onset_s - e.onset_s).abs()) > onset_tol {
        return false;
    }
    if with_offset {
        let tol = OFFSET_MIN_TOLERANCE_S.max(OFFSET_RATIO * (r.offset_s - r.onset_s));
        return rounded((r.offset_s - e.offset_s).abs()) <= tol;
    }
    true
}

/// Estimate velocities mapped onto the reference's normalized [0, 1] scale by
/// a least-squares line fitted on an onset-only matching.
fn rescaled_velocities(reference: &[NoteEvent], estimate: &[NoteEvent], onset_tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let pairs = max_matching(reference.len(), estimate.len(), |r, e| base_eligible(&reference[r], &estimate[e], onset_tol, false));
    if pairs.is_empty() {
        return None;
    }
    let vmin = reference.iter().map(|n| n.velocity).min()?;
    let vmax = reference.iter().map(|n| n.velocity).max()?;
    let range = f64::from((vmax - vmin).max(1));
    let ref_norm: Vec<f64> = reference.iter().map(|n| f64::from(n.velocity - vmin) / range).collect();

    let a = DMatrix::from_fn(pairs.len(), 2, |i, j| if j == 0 { f64::from(estimate[pairs[i].1].velocity) } else { 1.0 });
    let b = DVector::from_iterator(pairs.len(), pairs.iter().map(|&(r, _)| ref_norm[r]));
    let coef = a.svd(true, true).solve(&b, 1e-10).ok()?;
    let est_scaled = estimate.iter().map(|n| coef[0] * f64::from(n.velocity) + coef[1]).collect();
    Some((ref_norm, est_scaled))
}

/// One-to-one note matching with mir_eval's conventions.
pub fn note_metrics(reference: &[NoteEvent], estimate: &[NoteEvent], mode: MatchMode, onset_tol: f64) -> MatchResult {
    let pairs = match mode {
        MatchMode::Onset | MatchMode::Offset => {
            let with_offset = mode == MatchMode::Offset;
            max_matching(reference.len(), estimate.len(), |r, e| base_eligible(&reference[r], &estimate[e], onset_tol, with_offset))
        }
        MatchMode::Velocity => match rescaled_velocities(reference, estimate, onset_tol) {
            None => Vec::new(),
            Some((ref_v, est_v)) => max_matching(reference.len(), estimate.len(), |r, e| {
                base_eligible(&reference[r], &estimate[e], onset_tol, false) && (ref_v[r] - est_v[e]).abs() <= VELOCITY_TOLERANCE
            }),
        },
    };
    let precision = ratio(pairs.len(), estimate.len());
    let recall = ratio(pairs.len(), reference.len());
    MatchResult { f1: f1_score(precision, recall), pairs, precision, recall }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub ref_active: usize,
    pub est_active: usize,
}

/// Frame `k` samples time `k * hop`; a note is active when onset <= k*hop < offset.
pub fn piano_roll(notes: &[NoteEvent], hop: f64, n_frames: usize) -> Vec<Vec<u8>> {
    let mut roll = vec![Vec::new(); n_frames];
    let to_frame = |t: f64| (rounded(t / hop)).ceil().max(0.0) as usize;
    for n in notes {
        for frame in roll.iter_mut().take(to_frame(n.offset_s).min(n_frames)).skip(to_frame(n.onset_s)) {
            frame.push(n.pitch);
        }
    }
    for frame in &mut roll {
        frame.sort_unstable();
        frame.dedup();
    }
    roll
}

pub fn frame_metrics(reference: &[NoteEvent], estimate: &[NoteEvent], hop: f64) -> FrameMetrics {
    let end = reference.iter().chain(estimate).map(|n| n.offset_s).fold(0.0, f64::max);
    let n_frames = (rounded(end / hop)).ceil() as usize + 1;
    let r = piano_roll(reference, hop, n_frames);
    let e = piano_roll(estimate, hop, n_frames);
    let (mut tp, mut nr, mut ne) = (0, 0, 0);
    for (rf, ef) in r.iter().zip(&e) {
        nr += rf.len();
        ne += ef.len();
        tp += rf.iter().filter(|p| ef.binary_search(p).is_ok()).count();
    }
    let precision = ratio(tp, ne);
    let recall = ratio(tp, nr);
    FrameMetrics { precision, recall, f1: f1_score(precision, recall), true_positives: tp, ref_active: nr, est_active: ne }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingeringReport {
    /// None when no note in range was auto-labeled.
    pub precision: Option<f64>,
    pub evaluated: usize,
    pub correct: usize,
    pub n_first: usize,
    pub pending_none_pct: f64,
    pub pending_multi_pct: f64,
    pub n_notes: usize,
}

fn finger_matches(est: FingerId, reference: FingerId, substitutions: &[(u8, u8)]) -> bool {
    est.hand == reference.hand
        && (est.finger == reference.finger
            || substitutions.iter().any(|&(a, b)| (a, b) == (reference.finger, est.finger) || (b, a) == (reference.finger, est.finger)))
}

/// Precision of auto labels among the first `n_first` notes; `reference` is
/// indexed like the annotation entries. Substitution pairs count either finger as correct.
pub fn fingering_precision(reference: &[Option<FingerId>], est: &FingeringAnnotation, n_first: usize, substitutions: &[(u8, u8)]) -> FingeringReport {
    let mut evaluated = 0;
    let mut correct = 0;
    for (e, r) in est.entries.iter().take(n_first).zip(reference) {
        if e.status != Status::Auto {
            continue;
        }
        let (Some(label), Some(r)) = (e.label, r) else { continue };
        evaluated += 1;
        if finger_matches(label, *r, substitutions) {
            correct += 1;
        }
    }
    let n = est.entries.len();
    let pct = |s: Status| 100.0 * ratio(est.entries.iter().filter(|e| e.status == s).count(), n);
    FingeringReport {
        precision: (evaluated > 0).then(|| correct as f64 / evaluated as f64),
        evaluated,
        correct,
        n_first,
        pending_none_pct: pct(Status::PendingNone),
        pending_multi_pct: pct(Status::PendingMulti),
        n_notes: n,
    }
}

/// Standardized mean difference with the (n - 1)-weighted pooled deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::TooFewSamples(a.len(), b.len()));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ss = |x: &[f64], m: f64| x.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    let (ma, mb) = (mean(a), mean(b));
    let pooled = ((ss(a, ma) + ss(b, mb)) / (a.len() + b.len() - 2) as f64).sqrt();
    if pooled == 0.0 {
        return Err(MetricsError::ZeroDeviation);
    }
    Ok((ma - mb) / pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingering::NoteAnnotation;
    use crate::hand::Hand;

    fn n(onset: f64, offset: f64, pitch: u8, velocity: u8) -> NoteEvent {
        NoteEvent { note_id: 0, onset_s: onset, offset_s: offset, pitch, velocity }
    }

    #[test]
    fn exact_and_shifted_estimates() {
        let r = vec![n(0.0, 0.5, 60, 80), n(0.5, 1.0, 62, 90), n(1.0, 1.5, 64, 70)];
        let m = note_metrics(&r, &r, MatchMode::Onset, ONSET_TOLERANCE_S);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let shifted: Vec<NoteEvent> = r.iter().map(|x| n(x.onset_s + 0.04, x.offset_s + 0.04, x.pitch, x.velocity)).collect();
        assert_eq!(note_metrics(&r, &shifted, MatchMode::Onset, ONSET_TOLERANCE_S).f1, 1.0);
        assert_eq!(note_metrics(&r, &shifted, MatchMode::Offset, ONSET_TOLERANCE_S).f1, 1.0);
        let late: Vec<NoteEvent> = r.iter().map(|x| n(x.onset_s + 0.05, x.offset_s, x.pitch, x.velocity)).collect();
        assert_eq!(note_metrics(&r, &late, MatchMode::Onset, ONSET_TOLERANCE_S).f1, 1.0);
        let too_late: Vec<NoteEvent> = r.iter().map(|x| n(x.onset_s + 0.051, x.offset_s, x.pitch, x.velocity)).collect();
        assert_eq!(note_metrics(&r, &too_late, MatchMode::Onset, ONSET_TOLERANCE_S).f1, 0.0);
    }

    #[test]
    fn offset_tolerance_scales_with_duration() {
        let r = vec![n(0.0, 1.0, 60, 80)];
        assert_eq!(note_metrics(&r, &[n(0.0, 1.19, 60, 80)], MatchMode::Offset, 0.05).f1, 1.0);
        assert_eq!(note_metrics(&r, &[n(0.0, 1.21, 60, 80)], MatchMode::Offset, 0.05).f1, 0.0);
        let short = vec![n(0.0, 0.1, 60, 80)];
        assert_eq!(note_metrics(&short, &[n(0.0, 0.15, 60, 80)], MatchMode::Offset, 0.05).f1, 1.0);
    }

    #[test]
    fn velocity_is_compared_after_linear_rescaling() {
        let r = vec![n(0.0, 0.5, 60, 40), n(0.5, 1.0, 62, 80), n(1.0, 1.5, 64, 120)];
        // Estimate velocities are an affine map of the reference: always matched.
        let e: Vec<NoteEvent> = r.iter().map(|x| n(x.onset_s, x.offset_s, x.pitch, x.velocity / 2 + 10)).collect();
        assert_eq!(note_metrics(&r, &e, MatchMode::Velocity, 0.05).f1, 1.0);
        // One wildly off velocity breaks the fit for that note.
        let mut e2 = r.clone();
        e2.push(n(1.5, 2.0, 65, 120));
        let r2 = {
            let mut v = r.clone();
            v.push(n(1.5, 2.0, 65, 40));
            v
        };
        let m = note_metrics(&r2, &e2, MatchMode::Velocity, 0.05);
        assert!(m.pairs.len() < 4);
        assert_eq!(note_metrics(&r, &[], MatchMode::Velocity, 0.05).f1, 0.0);
    }

    #[test]
    fn empty_lists() {
        let m = note_metrics(&[], &[], MatchMode::Onset, 0.05);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn frame_metrics_half_coverage() {
        let r = vec![n(0.0, 1.0, 60, 80), n(2.0, 3.0, 64, 80)];
        let e = vec![n(0.0, 0.5, 60, 80), n(2.0, 2.5, 64, 80)];
        let f = frame_metrics(&r, &e, FRAME_HOP_S);
        assert_eq!((f.precision, f.recall), (1.0, 0.5));
        assert_eq!(frame_metrics(&r, &r, FRAME_HOP_S).f1, 1.0);
    }

    #[test]
    fn single_note_rasterization() {
        // Onset 0.013 and offset 0.047 at 10 ms hop: frames sampled at 0.02, 0.03, 0.04.
        let r = vec![n(0.013, 0.047, 60, 80)];
        let e = vec![n(0.02, 0.06, 60, 80)];
        let roll = piano_roll(&r, 0.01, 7);
        let active: Vec<usize> = (0..7).filter(|&k| !roll[k].is_empty()).collect();
        assert_eq!(active, vec![2, 3, 4]);
        let f = frame_metrics(&r, &e, 0.01);
        // Estimate frames 2..=5, overlap 2..=4.
        assert_eq!((f.true_positives, f.ref_active, f.est_active), (3, 3, 4));
    }

    #[test]
    fn fingering_precision_counts() {
        let r3 = FingerId::new(Hand::Right, 3).unwrap();
        let r4 = FingerId::new(Hand::Right, 4).unwrap();
        let mut entries = Vec::new();
        let mut reference = Vec::new();
        for i in 0..200u32 {
            let mut a = NoteAnnotation::pending(i, f64::from(i), 60);
            if i < 100 {
                a.status = Status::Auto;
                a.label = Some(if i < 95 { r3 } else { r4 });
            } else if i < 120 {
                a.status = Status::PendingMulti;
            }
            entries.push(a);
            reference.push(Some(r3));
        }
        let ann = FingeringAnnotation { entries };
        let rep = fingering_precision(&reference, &ann, 150, &[]);
        assert_eq!((rep.evaluated, rep.correct), (100, 95));
        assert_eq!(rep.precision, Some(0.95));
        assert_eq!(rep.pending_multi_pct, 10.0);
        assert_eq!(rep.pending_none_pct, 40.0);
        assert_eq!(fingering_precision(&reference, &ann, 150, &[(3, 4)]).precision, Some(1.0));
        let none = fingering_precision(&reference[150..], &FingeringAnnotation { entries: ann.entries[150..].to_vec() }, 150, &[]);
        assert_eq!(none.precision, None);
    }

    #[test]
    fn cohens_d_cases() {
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        // Means 5 and 3, each sample variance 4: pooled SD 2.
        let a = [3.0, 7.0, 3.0, 7.0];
        let b = [1.0, 5.0, 1.0, 5.0];
        let d = cohens_d(&a, &b).unwrap();
        assert!((d - 2.0 / (16.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let a = [3.0, 7.0];
        let b = [1.0, 5.0];
        // Var = 8 each with n - 1 = 1; rescale to SD 2: values m +- sqrt(2).
        let s = 2f64.sqrt();
        let d = cohens_d(&[5.0 - s, 5.0 + s], &[3.0 - s, 3.0 + s]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(cohens_d(&a, &b).unwrap() > 0.0);
        assert_eq!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]), Err(MetricsError::ZeroDeviation));
        assert_eq!(cohens_d(&[1.0], &[1.0, 2.0]), Err(MetricsError::TooFewSamples(1, 2)));
    }
}
