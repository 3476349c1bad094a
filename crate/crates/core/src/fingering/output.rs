use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Candidate, FingeringAnnotation, NoteAnnotation, Status};
use crate::hand::{FingerId, Hand};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: finger {finger} outside 1-5")]
    InvalidFinger { line: usize, finger: u8 },
}

/// One exported note: `{note_id, onset_s, pitch, status, hand, finger, candidates, max_score}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingeringRow {
    pub note_id: u32,
    pub onset_s: f64,
    pub pitch: u8,
    pub status: Status,
    pub hand: Option<Hand>,
    pub finger: Option<u8>,
    pub candidates: Vec<Candidate>,
    pub max_score: u32,
}

impl FingeringRow {
    pub fn label(&self) -> Option<FingerId> {
        FingerId::new(self.hand?, self.finger?)
    }
}

impl From<&NoteAnnotation> for FingeringRow {
    fn from(e: &NoteAnnotation) -> Self {
        FingeringRow {
            note_id: e.note_id,
            onset_s: e.onset_s,
            pitch: e.pitch,
            status: e.status,
            hand: e.label.map(|f| f.hand),
            finger: e.label.map(|f| f.finger),
            candidates: e.candidates.clone(),
            max_score: e.max_score,
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    note_id: u32,
    onset_s: f64,
    pitch: u8,
    status: &'a str,
    hand: String,
    finger: String,
    candidates: String,
    max_score: u32,
}

impl FingeringAnnotation {
    pub fn rows(&self) -> Vec<FingeringRow> {
        self.entries.iter().map(FingeringRow::from).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            out.push_str(&serde_json::to_string(&row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    /// Same columns as the JSON lines; candidates are a JSON array in one cell.
    pub fn to_csv(&self) -> Result<String, OutputError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            w.serialize(CsvRow {
                note_id: row.note_id,
                onset_s: row.onset_s,
                pitch: row.pitch,
                status: row.status.as_str(),
                hand: row.hand.map(|h| h.to_string()).unwrap_or_default(),
                finger: row.finger.map(|f| f.to_string()).unwrap_or_default(),
                candidates: serde_json::to_string(&row.candidates).expect("candidates serialize"),
                max_score: row.max_score,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| OutputError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

pub fn parse_fingering_jsonl(text: &str) -> Result<Vec<FingeringRow>, OutputError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: FingeringRow = serde_json::from_str(line).map_err(|source| OutputError::Json { line: i + 1, source })?;
        if let Some(f) = row.finger {
            if !(1..=5).contains(&f) {
                return Err(OutputError::InvalidFinger { line: i + 1, finger: f });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
