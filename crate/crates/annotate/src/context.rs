//! What an annotator sees for one note.

use pianotrace_core::fingering::{covering_frames, Candidate, Status};
use pianotrace_core::geometry::layout::{pitch_name, Rect};
use pianotrace_core::geometry::{KeyLayout, KeyboardPoint};
use pianotrace_core::hand::{FingerId, Hand};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::Session;

pub const NEIGHBOR_SPAN: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteInfo {
    pub note_id: u32,
    pub onset_s: f64,
    pub offset_s: f64,
    pub pitch: u8,
    pub name: String,
    pub velocity: u8,
    pub status: Status,
    pub hand: Option<Hand>,
    pub finger: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerScore {
    pub hand: Hand,
    pub finger: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInfo {
    pub pitch: u8,
    pub name: String,
    pub black: bool,
    /// Footprint in keyboard space (1024 x 125).
    pub parts: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandContext {
    pub side: Hand,
    pub score: f64,
    pub floating: bool,
    pub depth: Option<f64>,
    /// Fingers 1..5 in keyboard space.
    pub fingertips: [Option<KeyboardPoint>; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameContext {
    pub frame_idx: u64,
    pub t_s: f64,
    pub image_url: Option<String>,
    pub hands: Vec<HandContext>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    /// Position relative to the note in onset order.
    pub offset: i32,
    pub note_id: u32,
    pub onset_s: f64,
    pub pitch: u8,
    pub name: String,
    pub status: Status,
    pub hand: Option<Hand>,
    pub finger: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteContext {
    pub note: NoteInfo,
    pub candidates: Vec<Candidate>,
    pub max_score: u32,
    /// All ten finger scores; only for notes without any candidate.
    pub score_table: Option<Vec<FingerScore>>,
    pub key: KeyInfo,
    pub frames: Vec<FrameContext>,
    pub neighbors: Vec<Neighbor>,
}

pub fn frame_image_url(frame_idx: u64) -> String {
    format!("/frames/{frame_idx}.png")
}

pub fn note_context(session: &Session, note_id: u32) -> Result<NoteContext> {
    let annotation = session.annotation();
    let idx = annotation.index_of(note_id).ok_or(ServiceError::NotFound(note_id))?;
    let entry = &annotation.entries[idx];
    let note = session.performance().note(note_id).ok_or(ServiceError::NotFound(note_id))?;

    let layout = KeyLayout::standard();
    let key = layout
        .key(note.pitch)
        .map(|k| KeyInfo { pitch: k.pitch, name: pitch_name(k.pitch), black: k.black, parts: k.parts.clone() })
        .ok_or_else(|| ServiceError::Validation(format!("pitch {} is outside the 88-key range", note.pitch)))?;

    let images = session.state().bundle.frames_dir.is_some();
    let all = session.frames();
    let frames = all[covering_frames(all, note.onset_s, note.offset_s)]
        .iter()
        .map(|f| FrameContext {
            frame_idx: f.frame_idx,
            t_s: f.t_s,
            image_url: images.then(|| frame_image_url(f.frame_idx)),
            hands: f
                .hands
                .iter()
                .map(|h| HandContext {
                    side: h.side,
                    score: h.score,
                    floating: h.floating,
                    depth: h.depth.map(|d| d.d),
                    fingertips: h.fingertips,
                })
                .collect(),
        })
        .collect();

    let score_table = (entry.status == Status::PendingNone).then(|| {
        FingerId::all().map(|f| FingerScore { hand: f.hand, finger: f.finger, score: entry.scores[f.index()] }).collect()
    });

    let lo = idx.saturating_sub(NEIGHBOR_SPAN);
    let hi = (idx + NEIGHBOR_SPAN + 1).min(annotation.entries.len());
    let neighbors = (lo..hi)
        .filter(|&i| i != idx)
        .map(|i| {
            let e = &annotation.entries[i];
            Neighbor {
                offset: i as i32 - idx as i32,
                note_id: e.note_id,
                onset_s: e.onset_s,
                pitch: e.pitch,
                name: pitch_name(e.pitch),
                status: e.status,
                hand: e.label.map(|f| f.hand),
                finger: e.label.map(|f| f.finger),
            }
        })
        .collect();

    Ok(NoteContext {
        note: NoteInfo {
            note_id,
            onset_s: note.onset_s,
            offset_s: note.offset_s,
            pitch: note.pitch,
            name: pitch_name(note.pitch),
            velocity: note.velocity,
            status: entry.status,
            hand: entry.label.map(|f| f.hand),
            finger: entry.label.map(|f| f.finger),
        },
        candidates: entry.candidates.clone(),
        max_score: entry.max_score,
        score_table,
        key,
        frames,
        neighbors,
    })
}
