use std::fs;
use std::path::{Path, PathBuf};

use pianotrace_core::fingering::FingeringAnnotation;
use pianotrace_core::midi::{split_by_hand, NoteEvent, Performance};
use serde::{Deserialize, Serialize};

use crate::bundle::{save_midi, write_file};
use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FingeringFormat {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportOptions {
    pub out_dir: PathBuf,
    pub format: FingeringFormat,
    pub allow_partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportReport {
    pub fingering: PathBuf,
    pub left_midi: PathBuf,
    pub right_midi: PathBuf,
    pub rows: usize,
    pub pending: usize,
    pub left_notes: usize,
    pub right_notes: usize,
    /// Notes without a hand (pending or unplayable), absent from both MIDI files.
    pub omitted_from_midi: Vec<u32>,
}

/// Writes the fingering file plus `left.mid` and `right.mid`. Refuses
/// pending notes unless `allow_partial` is set.
pub fn export_annotation(performance: &Performance, annotation: &FingeringAnnotation, opts: &ExportOptions) -> Result<ExportReport> {
    let pending = annotation.pending_count();
    if pending > 0 && !opts.allow_partial {
        return Err(ServiceError::PendingNotes { count: pending });
    }
    fs::create_dir_all(&opts.out_dir).map_err(ServiceError::io(&opts.out_dir))?;

    let fingering = opts.out_dir.join(match opts.format {
        FingeringFormat::Jsonl => "fingering.jsonl",
        FingeringFormat::Csv => "fingering.csv",
    });
    let text = match opts.format {
        FingeringFormat::Jsonl => annotation.to_jsonl(),
        FingeringFormat::Csv => annotation.to_csv().map_err(|e| ServiceError::Validation(e.to_string()))?,
    };
    write_file(&fingering, text)?;

    let (labeled, omitted): (Vec<&NoteEvent>, Vec<&NoteEvent>) = performance.notes.iter().partition(|n| annotation.hand_of(n.note_id).is_some());
    let omitted_from_midi: Vec<u32> = omitted.iter().map(|n| n.note_id).collect();
    let resolved = performance.with_notes(labeled.into_iter().copied().collect());
    let (left, right) = split_by_hand(&resolved, annotation).map_err(ServiceError::pipeline)?;

    let left_midi = opts.out_dir.join("left.mid");
    let right_midi = opts.out_dir.join("right.mid");
    save_midi(&left_midi, &left)?;
    save_midi(&right_midi, &right)?;
    log::info!(
        "exported {} rows ({pending} pending), {} left / {} right notes to {}",
        annotation.entries.len(),
        left.notes.len(),
        right.notes.len(),
        opts.out_dir.display()
    );
    Ok(ExportReport {
        fingering,
        left_midi,
        right_midi,
        rows: annotation.entries.len(),
        pending,
        left_notes: left.notes.len(),
        right_notes: right.notes.len(),
        omitted_from_midi,
    })
}

pub(crate) fn default_export_dir(session_dir: &Path) -> PathBuf {
    session_dir.join("export")
}
