//! Annotation sessions: a snapshot state file, the pipeline's initial
//! annotation and an append-only audit log from which the state can always
//! be rebuilt.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use pianotrace_core::fingering::{prepare_frames, run_pipeline, FingeringAnnotation, FingeringConfig, FingeringRow, PreparedFrame, Status, Summary};
use pianotrace_core::hand::{FingerId, Hand};
use pianotrace_core::midi::Performance;
use serde::{Deserialize, Serialize};

use crate::bundle::{read_text, BundlePaths};
use crate::error::{Result, ServiceError};
use crate::export::{default_export_dir, export_annotation, ExportOptions, ExportReport, FingeringFormat};

pub const STATE_FILE: &str = "state.json";
pub const INITIAL_FILE: &str = "initial.json";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const DEFAULT_ANNOTATOR: &str = "anonymous";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub created_at: String,
    pub bundle: BundlePaths,
    pub config: FingeringConfig,
    /// Number of audit entries reflected in `annotation`.
    pub audit_seq: u64,
    pub annotation: FingeringAnnotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub note_id: u32,
    pub hand: Option<Hand>,
    pub finger: Option<u8>,
    pub unplayable: bool,
    pub annotator: String,
    pub timestamp: String,
    #[serde(rename = "override")]
    pub override_auto: bool,
    pub previous_status: Status,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    #[serde(default)]
    pub hand: Option<Hand>,
    #[serde(default)]
    pub finger: Option<u8>,
    #[serde(default, rename = "override")]
    pub override_auto: bool,
    #[serde(default)]
    pub unplayable: bool,
    #[serde(default)]
    pub annotator: Option<String>,
}

impl LabelRequest {
    pub fn finger(hand: Hand, finger: u8) -> Self {
        LabelRequest { hand: Some(hand), finger: Some(finger), ..Default::default() }
    }

    pub fn unplayable() -> Self {
        LabelRequest { unplayable: true, ..Default::default() }
    }

    fn validated_label(&self) -> Result<Option<FingerId>> {
        if self.unplayable {
            if self.hand.is_some() || self.finger.is_some() {
                return Err(ServiceError::Validation("an unplayable mark carries no hand or finger".into()));
            }
            return Ok(None);
        }
        let hand = self.hand.ok_or_else(|| ServiceError::Validation("hand is required (L or R)".into()))?;
        let finger = self.finger.ok_or_else(|| ServiceError::Validation("finger is required (1-5)".into()))?;
        FingerId::new(hand, finger)
            .map(Some)
            .ok_or_else(|| ServiceError::Validation(format!("finger {finger} outside 1-5")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelOutcome {
    pub note: FingeringRow,
    pub pending: usize,
}

/// Checks the transition rules and applies the label in place.
fn apply(annotation: &mut FingeringAnnotation, note_id: u32, label: Option<FingerId>, override_auto: bool) -> Result<Status> {
    let entry = annotation.get_mut(note_id).ok_or(ServiceError::NotFound(note_id))?;
    let previous = entry.status;
    if previous == Status::Auto && !override_auto {
        return Err(ServiceError::Conflict(format!("note {note_id} is auto-labeled; set override to relabel it")));
    }
    entry.status = Status::Manual;
    entry.label = label;
    Ok(previous)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut f = File::create(&tmp).map_err(ServiceError::io(&tmp))?;
    f.write_all(bytes).map_err(ServiceError::io(&tmp))?;
    f.sync_all().map_err(ServiceError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(ServiceError::io(path))?;
    if let Some(dir) = path.parent() {
        // Persists the rename; not supported on every platform.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

/// Reads the audit log. A torn final line (crash mid-append) is cut off the
/// file so later appends start on a fresh line.
pub fn read_audit(path: &Path) -> Result<Vec<AuditEntry>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ServiceError::io(path)(e)),
    };
    let mut entries = Vec::new();
    let mut good_len = 0;
    let mut lines = text.split_inclusive('\n').peekable();
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            good_len += line.len();
            continue;
        }
        match serde_json::from_str::<AuditEntry>(line) {
            Ok(e) if line.ends_with('\n') => {
                entries.push(e);
                good_len += line.len();
            }
            res => {
                if lines.peek().is_some() {
                    let reason = res.err().map_or_else(|| "unterminated line".to_string(), |e| e.to_string());
                    return Err(ServiceError::parse(path)(format!("audit entry {}: {reason}", entries.len() + 1)));
                }
                log::warn!("{}: dropping torn final audit line", path.display());
                let f = OpenOptions::new().write(true).open(path).map_err(ServiceError::io(path))?;
                f.set_len(good_len as u64).map_err(ServiceError::io(path))?;
            }
        }
    }
    Ok(entries)
}

fn replay_entries(annotation: &mut FingeringAnnotation, entries: &[AuditEntry]) -> Result<()> {
    for e in entries {
        let label = match (e.unplayable, e.hand, e.finger) {
            (true, _, _) => None,
            (false, Some(h), Some(f)) => Some(FingerId::new(h, f).ok_or_else(|| {
                ServiceError::Validation(format!("audit entry {}: finger {f} outside 1-5", e.seq))
            })?),
            _ => return Err(ServiceError::Validation(format!("audit entry {} has no label", e.seq))),
        };
        apply(annotation, e.note_id, label, e.override_auto)?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct Session {
    dir: PathBuf,
    state: SessionState,
    performance: Performance,
    frames: Vec<PreparedFrame>,
}

impl Session {
    /// Runs the fingering pipeline on the bundle and persists a new session in
    /// `dir`. Nothing is written when loading or the pipeline fails.
    pub fn create(dir: &Path, bundle: &BundlePaths, config: FingeringConfig) -> Result<Session> {
        if dir.join(STATE_FILE).exists() {
            return Err(ServiceError::Conflict(format!("a session already exists in {}", dir.display())));
        }
        let bundle = bundle.absolute()?;
        let loaded = bundle.load()?;
        let out = run_pipeline(&loaded.landmarks, &loaded.performance, &loaded.geometry, &config).map_err(ServiceError::pipeline)?;

        fs::create_dir_all(dir).map_err(ServiceError::io(dir))?;
        let state = SessionState {
            session_id: uuid::Uuid::new_v4().to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            bundle,
            config,
            audit_seq: 0,
            annotation: out.annotation,
        };
        let initial = serde_json::to_vec_pretty(&state.annotation).expect("annotation serializes");
        write_atomic(&dir.join(INITIAL_FILE), &initial)?;
        let audit = dir.join(AUDIT_FILE);
        File::create(&audit).map_err(ServiceError::io(&audit))?;
        let session = Session { dir: dir.to_path_buf(), state, performance: loaded.performance, frames: out.frames };
        session.persist()?;
        log::info!(
            "session {} created in {}: {} notes, {} pending",
            session.state.session_id,
            dir.display(),
            session.state.annotation.entries.len(),
            session.pending_count()
        );
        Ok(session)
    }

    /// Loads the snapshot, re-applies audit entries newer than it (left by a
    /// crash between append and snapshot) and rebuilds the frame context.
    pub fn open(dir: &Path) -> Result<Session> {
        let state_path = dir.join(STATE_FILE);
        let mut state: SessionState =
            serde_json::from_str(&read_text(&state_path)?).map_err(|e| ServiceError::parse(&state_path)(e.to_string()))?;
        let entries = read_audit(&dir.join(AUDIT_FILE))?;
        let newer: Vec<AuditEntry> = entries.into_iter().filter(|e| e.seq > state.audit_seq).collect();
        let recovered = !newer.is_empty();
        if recovered {
            log::warn!("{}: applying {} audit entries missing from the snapshot", dir.display(), newer.len());
            replay_entries(&mut state.annotation, &newer)?;
            state.audit_seq = newer.last().map_or(state.audit_seq, |e| e.seq);
        }

        let loaded = state.bundle.load()?;
        let (frames, _) = prepare_frames(&loaded.landmarks, &loaded.geometry, &state.config).map_err(ServiceError::pipeline)?;
        let session = Session { dir: dir.to_path_buf(), state, performance: loaded.performance, frames };
        if recovered {
            session.persist()?;
        }
        Ok(session)
    }

    /// State rebuilt from the initial annotation and the whole audit log.
    pub fn replay(dir: &Path) -> Result<FingeringAnnotation> {
        let path = dir.join(INITIAL_FILE);
        let mut annotation: FingeringAnnotation =
            serde_json::from_str(&read_text(&path)?).map_err(|e| ServiceError::parse(&path)(e.to_string()))?;
        replay_entries(&mut annotation, &read_audit(&dir.join(AUDIT_FILE))?)?;
        Ok(annotation)
    }

    fn persist(&self) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.state).expect("state serializes");
        write_atomic(&self.dir.join(STATE_FILE), &bytes)
    }

    /// Validates, appends the audit entry, then snapshots the new state.
    pub fn submit_label(&mut self, note_id: u32, req: &LabelRequest) -> Result<LabelOutcome> {
        let label = req.validated_label()?;
        let mut annotation = self.state.annotation.clone();
        let previous_status = apply(&mut annotation, note_id, label, req.override_auto)?;

        let entry = AuditEntry {
            seq: self.state.audit_seq + 1,
            note_id,
            hand: label.map(|f| f.hand),
            finger: label.map(|f| f.finger),
            unplayable: req.unplayable,
            annotator: req.annotator.clone().unwrap_or_else(|| DEFAULT_ANNOTATOR.to_string()),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            override_auto: req.override_auto,
            previous_status,
        };
        let path = self.dir.join(AUDIT_FILE);
        let mut f = OpenOptions::new().append(true).create(true).open(&path).map_err(ServiceError::io(&path))?;
        let line = serde_json::to_string(&entry).expect("audit entry serializes") + "\n";
        f.write_all(line.as_bytes()).map_err(ServiceError::io(&path))?;
        f.sync_data().map_err(ServiceError::io(&path))?;

        self.state.annotation = annotation;
        self.state.audit_seq = entry.seq;
        self.persist()?;
        let note = FingeringRow::from(self.state.annotation.get(note_id).expect("labeled note exists"));
        Ok(LabelOutcome { note, pending: self.pending_count() })
    }

    pub fn export(&self, out_dir: Option<&Path>, format: FingeringFormat, allow_partial: bool) -> Result<ExportReport> {
        let opts = ExportOptions {
            out_dir: out_dir.map_or_else(|| default_export_dir(&self.dir), Path::to_path_buf),
            format,
            allow_partial,
        };
        export_annotation(&self.performance, &self.state.annotation, &opts)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn annotation(&self) -> &FingeringAnnotation {
        &self.state.annotation
    }

    pub fn performance(&self) -> &Performance {
        &self.performance
    }

    pub fn frames(&self) -> &[PreparedFrame] {
        &self.frames
    }

    pub fn pending_count(&self) -> usize {
        self.state.annotation.pending_count()
    }

    pub fn summary(&self) -> Summary {
        self.state.annotation.summary()
    }
}
