//! MIDI performances: SMF I/O, sustain-pedal offset extension and per-hand splitting.

mod smf;
mod tempo;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingering::FingeringAnnotation;
use crate::hand::Hand;

pub use smf::{parse_midi, parse_midi_with_warnings, write_midi};
pub use tempo::{TempoChange, TempoMap, DEFAULT_TEMPO_US};

/// MIDI controller number of the sustain (damper) pedal.
pub const SUSTAIN_CONTROLLER: u8 = 64;
/// CC64 values at or above this count as "pedal down".
pub const DEFAULT_PEDAL_THRESHOLD: u8 = 64;

pub const LOWEST_PIANO_PITCH: u8 = 21;
pub const HIGHEST_PIANO_PITCH: u8 = 108;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub note_id: u32,
    pub onset_s: f64,
    pub offset_s: f64,
    pub pitch: u8,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn duration(&self) -> f64 {
        self.offset_s - self.onset_s
    }

    pub fn is_piano_range(&self) -> bool {
        (LOWEST_PIANO_PITCH..=HIGHEST_PIANO_PITCH).contains(&self.pitch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedalEvent {
    pub time_s: f64,
    pub value: u8,
}

/// Note and sustain-pedal events of a recording, with the timing grid they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub notes: Vec<NoteEvent>,
    pub pedals: Vec<PedalEvent>,
    pub ticks_per_quarter: u16,
    pub tempo_map: Vec<TempoChange>,
}

impl Default for Performance {
    fn default() -> Self {
        Performance { notes: Vec::new(), pedals: Vec::new(), ticks_per_quarter: 480, tempo_map: Vec::new() }
    }
}

impl Performance {
    /// Builds a performance, sorting notes by (onset, pitch) and renumbering
    /// `note_id` in that order. Pedal events are stably sorted by time.
    pub fn new(
        mut notes: Vec<NoteEvent>,
        mut pedals: Vec<PedalEvent>,
        ticks_per_quarter: u16,
        mut tempo_map: Vec<TempoChange>,
    ) -> Self {
        sort_notes(&mut notes);
        for (i, n) in notes.iter_mut().enumerate() {
            n.note_id = i as u32;
        }
        pedals.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        tempo_map.sort_by_key(|c| c.tick);
        Performance { notes, pedals, ticks_per_quarter, tempo_map }
    }

    /// Same timing grid and pedals, different notes (ids preserved).
    pub fn with_notes(&self, mut notes: Vec<NoteEvent>) -> Self {
        sort_notes(&mut notes);
        Performance { notes, ..self.clone() }
    }

    pub fn tempo(&self) -> TempoMap {
        TempoMap::new(self.ticks_per_quarter, &self.tempo_map)
    }

    /// End time of the last note or pedal event.
    pub fn end_time(&self) -> f64 {
        let notes = self.notes.iter().map(|n| n.offset_s);
        let pedals = self.pedals.iter().map(|p| p.time_s);
        notes.chain(pedals).fold(0.0, f64::max)
    }

    pub fn note(&self, note_id: u32) -> Option<&NoteEvent> {
        self.notes.iter().find(|n| n.note_id == note_id)
    }
}

fn sort_notes(notes: &mut [NoteEvent]) {
    notes.sort_by(|a, b| {
        a.onset_s
            .total_cmp(&b.onset_s)
            .then(a.pitch.cmp(&b.pitch))
            .then(a.offset_s.total_cmp(&b.offset_s))
            .then(a.velocity.cmp(&b.velocity))
    });
}

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("malformed MIDI header at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
    #[error("malformed MIDI track at byte {offset}: {reason}")]
    Track { offset: usize, reason: String },
    #[error("unexpected end of MIDI data at byte {offset}")]
    UnexpectedEof { offset: usize },
    #[error("SMF format {0} is not supported (only 0 and 1)")]
    UnsupportedFormat(u16),
    #[error("cannot encode event: {0}")]
    InvalidEvent(String),
    #[error("notes without a hand assignment: {0:?}")]
    UnresolvedNotes(Vec<u32>),
}

impl MidiError {
    fn rebase(self, base: usize) -> Self {
        match self {
            MidiError::UnexpectedEof { offset } => MidiError::UnexpectedEof { offset: offset + base },
            MidiError::Track { offset, reason } => MidiError::Track { offset: offset + base, reason },
            e => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MidiWarning {
    UnterminatedNote { onset_s: f64, pitch: u8 },
    OrphanNoteOff { seconds: f64, pitch: u8 },
    OutOfRangePitch { note_id: u32, pitch: u8 },
}

impl fmt::Display for MidiWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MidiWarning::UnterminatedNote { onset_s, pitch } => {
                write!(f, "note {pitch} at {onset_s:.3}s has no note-off; closed at final event")
            }
            MidiWarning::OrphanNoteOff { seconds, pitch } => {
                write!(f, "note-off for {pitch} at {seconds:.3}s has no open note-on")
            }
            MidiWarning::OutOfRangePitch { note_id, pitch } => {
                write!(f, "note {note_id} has pitch {pitch} outside the 88-key range")
            }
        }
    }
}

/// Extends note offsets to the sustain-pedal release.
///
/// A note whose offset falls while the pedal is down (value >= `threshold`)
/// is held until the first later pedal event below the threshold, or until
/// the end of the performance when the pedal is never released. An extended
/// note is cut at the next onset of the same pitch.
pub fn apply_sustain_extension(p: &Performance, threshold: u8) -> Vec<NoteEvent> {
    let mut notes = p.notes.clone();
    if p.pedals.is_empty() {
        return notes;
    }
    let end = p.end_time();
    let pedals = &p.pedals;

    for n in notes.iter_mut() {
        // Pedal state at the offset: the last event at or before it.
        let idx = pedals.partition_point(|e| e.time_s <= n.offset_s);
        let down = idx > 0 && pedals[idx - 1].value >= threshold;
        if !down {
            continue;
        }
        let release = pedals[idx..].iter().find(|e| e.value < threshold).map(|e| e.time_s).unwrap_or(end);
        n.offset_s = n.offset_s.max(release);
    }

    // Re-strike truncation, per pitch in onset order.
    let mut order: Vec<usize> = (0..notes.len()).collect();
    order.sort_by(|&a, &b| notes[a].pitch.cmp(&notes[b].pitch).then(notes[a].onset_s.total_cmp(&notes[b].onset_s)));
    for pair in order.windows(2) {
        let (cur, next) = (pair[0], pair[1]);
        if notes[cur].pitch != notes[next].pitch {
            continue;
        }
        let next_onset = notes[next].onset_s;
        if next_onset > notes[cur].onset_s && notes[cur].offset_s > next_onset {
            notes[cur].offset_s = next_onset;
        }
    }
    notes
}

/// Partitions a performance into left- and right-hand performances using the
/// hand of each note's label. Pedal events and the tempo map are copied to both.
pub fn split_by_hand(p: &Performance, labels: &FingeringAnnotation) -> Result<(Performance, Performance), MidiError> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut unresolved = Vec::new();
    for n in &p.notes {
        match labels.hand_of(n.note_id) {
            Some(Hand::Left) => left.push(*n),
            Some(Hand::Right) => right.push(*n),
            None => unresolved.push(n.note_id),
        }
    }
    if !unresolved.is_empty() {
        return Err(MidiError::UnresolvedNotes(unresolved));
    }
    Ok((p.with_notes(left), p.with_notes(right)))
}

/// One JSON object per line: `{note_id, onset_s, offset_s, pitch, velocity}`.
pub fn notes_to_jsonl(notes: &[NoteEvent]) -> String {
    let mut out = String::new();
    for n in notes {
        out.push_str(&serde_json::to_string(n).expect("note serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingering::{Candidate, FingeringAnnotation, NoteAnnotation, Status};
    use crate::hand::FingerId;

    fn note(onset: f64, offset: f64, pitch: u8) -> NoteEvent {
        NoteEvent { note_id: 0, onset_s: onset, offset_s: offset, pitch, velocity: 80 }
    }

    fn pedal(t: f64, v: u8) -> PedalEvent {
        PedalEvent { time_s: t, value: v }
    }

    #[test]
    fn pedal_extends_to_release() {
        let p = Performance::new(vec![note(0.0, 1.0, 60)], vec![pedal(0.5, 127), pedal(2.0, 0)], 480, vec![]);
        let ext = apply_sustain_extension(&p, 64);
        assert_eq!(ext[0].offset_s, 2.0);
    }

    #[test]
    fn light_pedal_leaves_offsets() {
        let p = Performance::new(vec![note(0.0, 1.0, 60)], vec![pedal(0.0, 20), pedal(3.0, 20)], 480, vec![]);
        assert_eq!(apply_sustain_extension(&p, 64), p.notes);
    }

    #[test]
    fn restrike_truncates_extended_note() {
        let p = Performance::new(
            vec![note(0.0, 1.0, 60), note(1.5, 2.0, 60)],
            vec![pedal(0.0, 127), pedal(3.0, 0)],
            480,
            vec![],
        );
        let ext = apply_sustain_extension(&p, 64);
        assert_eq!((ext[0].onset_s, ext[0].offset_s), (0.0, 1.5));
        assert_eq!((ext[1].onset_s, ext[1].offset_s), (1.5, 3.0));
    }

    #[test]
    fn release_at_offset_means_no_extension() {
        let p = Performance::new(vec![note(0.0, 1.0, 60)], vec![pedal(0.0, 127), pedal(1.0, 0)], 480, vec![]);
        assert_eq!(apply_sustain_extension(&p, 64)[0].offset_s, 1.0);
    }

    #[test]
    fn never_released_extends_to_end() {
        let p = Performance::new(
            vec![note(0.0, 1.0, 60), note(0.5, 4.0, 64)],
            vec![pedal(0.2, 127)],
            480,
            vec![],
        );
        let ext = apply_sustain_extension(&p, 64);
        assert_eq!(ext[0].offset_s, 4.0);
        assert_eq!(ext[1].offset_s, 4.0);
    }

    #[test]
    fn no_pedals_is_identity() {
        let p = Performance::new(vec![note(0.0, 1.0, 60), note(0.5, 0.7, 62)], vec![], 480, vec![]);
        assert_eq!(apply_sustain_extension(&p, 64), p.notes);
    }

    fn annotation_with(hands: &[Option<Hand>]) -> FingeringAnnotation {
        let entries = hands
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let mut e = NoteAnnotation::pending(i as u32, i as f64, 60);
                if let Some(h) = h {
                    let id = FingerId::new(*h, 2).unwrap();
                    e.status = Status::Auto;
                    e.label = Some(id);
                    e.candidates = vec![Candidate { finger: id, score: 1.0, strong: true }];
                }
                e
            })
            .collect();
        FingeringAnnotation { entries }
    }

    #[test]
    fn split_all_right() {
        let p = Performance::new((0..4).map(|i| note(i as f64, i as f64 + 0.5, 60)).collect(), vec![pedal(0.0, 100)], 480, vec![]);
        let (l, r) = split_by_hand(&p, &annotation_with(&[Some(Hand::Right); 4])).unwrap();
        assert!(l.notes.is_empty());
        assert_eq!(r.notes, p.notes);
        assert_eq!(l.pedals, p.pedals);
    }

    #[test]
    fn split_alternating() {
        let p = Performance::new((0..10).map(|i| note(i as f64, i as f64 + 0.5, 60)).collect(), vec![], 480, vec![]);
        let hands: Vec<Option<Hand>> =
            (0..10).map(|i| Some(if i % 2 == 0 { Hand::Left } else { Hand::Right })).collect();
        let (l, r) = split_by_hand(&p, &annotation_with(&hands)).unwrap();
        assert_eq!(l.notes.len(), 5);
        assert_eq!(r.notes.len(), 5);
        assert!(l.notes.iter().all(|n| n.note_id % 2 == 0));
        assert!(l.notes.windows(2).all(|w| w[0].onset_s < w[1].onset_s));
    }

    #[test]
    fn split_rejects_pending() {
        let p = Performance::new((0..3).map(|i| note(i as f64, i as f64 + 0.5, 60)).collect(), vec![], 480, vec![]);
        let err = split_by_hand(&p, &annotation_with(&[Some(Hand::Left), None, Some(Hand::Right)])).unwrap_err();
        match err {
            MidiError::UnresolvedNotes(ids) => assert_eq!(ids, vec![1]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn jsonl_has_one_line_per_note() {
        let p = Performance::new(vec![note(0.0, 1.0, 60), note(0.5, 0.7, 62)], vec![], 480, vec![]);
        let s = notes_to_jsonl(&p.notes);
        assert_eq!(s.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(s.lines().next().unwrap()).unwrap();
        assert_eq!(v["pitch"], 60);
        assert_eq!(v["offset_s"], 1.0);
    }
}
