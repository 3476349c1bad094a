//! Per-frame hand landmarks as produced by an external pose detector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hand::Hand;

pub const LANDMARK_COUNT: usize = 21;
pub const MAX_HANDS_PER_FRAME: usize = 4;

pub const WRIST: usize = 0;
pub const INDEX_MCP: usize = 5;
pub const RING_MCP: usize = 13;
/// Fingertip landmark of fingers 1 (thumb) to 5.
pub const FINGERTIPS: [usize; 5] = [4, 8, 12, 16, 20];

#[derive(Debug, Error)]
pub enum LandmarkError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

/// One detected hand. Landmarks are normalized image coordinates (u, v).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHand", into = "RawHand")]
pub struct HandObservation {
    pub side: Hand,
    pub score: f64,
    pub landmarks: [[f64; 2]; LANDMARK_COUNT],
}

impl HandObservation {
    pub fn landmark(&self, idx: usize) -> [f64; 2] {
        self.landmarks[idx]
    }

    pub fn fingertip(&self, finger: u8) -> [f64; 2] {
        self.landmarks[FINGERTIPS[usize::from(finger - 1)]]
    }
}

#[derive(Serialize, Deserialize)]
struct RawHand {
    side: Hand,
    #[serde(default = "default_score")]
    score: f64,
    lm: Vec<Vec<f64>>,
}

fn default_score() -> f64 {
    1.0
}

impl TryFrom<RawHand> for HandObservation {
    type Error = String;

    fn try_from(raw: RawHand) -> Result<Self, String> {
        if raw.lm.len() != LANDMARK_COUNT {
            return Err(format!("expected {LANDMARK_COUNT} landmarks, got {}", raw.lm.len()));
        }
        if !(0.0..=1.0).contains(&raw.score) {
            return Err(format!("hand score {} outside [0, 1]", raw.score));
        }
        let mut landmarks = [[0.0; 2]; LANDMARK_COUNT];
        for (i, p) in raw.lm.iter().enumerate() {
            // A trailing detector z, if present, is ignored.
            if p.len() < 2 || !p[0].is_finite() || !p[1].is_finite() {
                return Err(format!("landmark {i} is not a finite [u, v] pair"));
            }
            landmarks[i] = [p[0], p[1]];
        }
        Ok(HandObservation { side: raw.side, score: raw.score, landmarks })
    }
}

impl From<HandObservation> for RawHand {
    fn from(h: HandObservation) -> Self {
        RawHand { side: h.side, score: h.score, lm: h.landmarks.iter().map(|p| p.to_vec()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    #[serde(rename = "frame")]
    pub frame_idx: u64,
    /// Midpoint of the time interval covered by the frame.
    #[serde(rename = "t")]
    pub t_s: f64,
    #[serde(default)]
    pub hands: Vec<HandObservation>,
}

impl LandmarkFrame {
    pub fn hands_above(&self, min_score: f64) -> impl Iterator<Item = &HandObservation> {
        self.hands.iter().filter(move |h| h.score >= min_score)
    }
}

/// Reads one frame object per non-empty line and sorts by frame index.
pub fn parse_landmarks_jsonl(text: &str) -> Result<Vec<LandmarkFrame>, LandmarkError> {
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let frame: LandmarkFrame =
            serde_json::from_str(line).map_err(|source| LandmarkError::Json { line: line_no, source })?;
        if frame.hands.len() > MAX_HANDS_PER_FRAME {
            return Err(LandmarkError::Invalid {
                line: line_no,
                reason: format!("{} hands in one frame (at most {MAX_HANDS_PER_FRAME})", frame.hands.len()),
            });
        }
        if !frame.t_s.is_finite() {
            return Err(LandmarkError::Invalid { line: line_no, reason: "non-finite timestamp".into() });
        }
        frames.push(frame);
    }
    frames.sort_by_key(|f| f.frame_idx);
    if let Some(w) = frames.windows(2).find(|w| w[0].frame_idx == w[1].frame_idx) {
        return Err(LandmarkError::Invalid { line: 0, reason: format!("duplicate frame {}", w[0].frame_idx) });
    }
    Ok(frames)
}

pub fn landmarks_to_jsonl(frames: &[LandmarkFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("frame serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(hands: &str) -> String {
        format!(r#"{{"frame":3,"t":0.05,"hands":[{hands}]}}"#)
    }

    fn lm(n: usize) -> String {
        let pts: Vec<String> = (0..n).map(|i| format!("[{},{},0.1]", i as f64 / 40.0, 0.5)).collect();
        format!("[{}]", pts.join(","))
    }

    #[test]
    fn parses_and_round_trips() {
        let text = line(&format!(r#"{{"side":"R","score":0.9,"lm":{}}}"#, lm(21)));
        let frames = parse_landmarks_jsonl(&text).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].frame_idx, 3);
        let h = &frames[0].hands[0];
        assert_eq!(h.side, Hand::Right);
        assert_eq!(h.fingertip(2), [8.0 / 40.0, 0.5]);
        let again = parse_landmarks_jsonl(&landmarks_to_jsonl(&frames)).unwrap();
        assert_eq!(again, frames);
    }

    #[test]
    fn rejects_wrong_landmark_count() {
        let text = line(&format!(r#"{{"side":"L","score":0.9,"lm":{}}}"#, lm(20)));
        assert!(matches!(parse_landmarks_jsonl(&text), Err(LandmarkError::Json { line: 1, .. })));
    }

    #[test]
    fn empty_hands_and_blank_lines() {
        let frames = parse_landmarks_jsonl("\n{\"frame\":1,\"t\":0.0}\n\n{\"frame\":0,\"t\":0.0,\"hands\":[]}\n").unwrap();
        assert_eq!(frames.iter().map(|f| f.frame_idx).collect::<Vec<_>>(), vec![0, 1]);
        assert!(frames.iter().all(|f| f.hands.is_empty()));
    }

    #[test]
    fn rejects_duplicates() {
        assert!(parse_landmarks_jsonl("{\"frame\":1,\"t\":0.0}\n{\"frame\":1,\"t\":0.1}").is_err());
    }
}
