//! A recording bundle: transcribed MIDI, hand landmarks, keyboard geometry
//! and an optional directory of pre-extracted frame images.

use std::fs;
use std::path::{Path, PathBuf};

use pianotrace_core::fingering::FingeringRow;
use pianotrace_core::geometry::KeyboardGeometry;
use pianotrace_core::landmarks::{landmarks_to_jsonl, parse_landmarks_jsonl, LandmarkFrame};
use pianotrace_core::midi::{parse_midi_with_warnings, write_midi, Performance};
use pianotrace_core::synth::Scene;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const MIDI_FILE: &str = "performance.mid";
pub const LANDMARKS_FILE: &str = "landmarks.jsonl";
pub const GEOMETRY_FILE: &str = "geometry.json";
pub const FRAMES_DIR: &str = "frames";
pub const REFERENCE_FILE: &str = "reference_fingering.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundlePaths {
    pub midi: PathBuf,
    pub landmarks: PathBuf,
    pub geometry: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub performance: Performance,
    pub landmarks: Vec<LandmarkFrame>,
    pub geometry: KeyboardGeometry,
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(ServiceError::io(path))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(ServiceError::io(path))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(ServiceError::io(path))
}

pub fn load_midi(path: &Path) -> Result<Performance> {
    let (p, warnings) = parse_midi_with_warnings(&read_bytes(path)?).map_err(|e| ServiceError::parse(path)(e.to_string()))?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(p)
}

pub fn save_midi(path: &Path, p: &Performance) -> Result<()> {
    let bytes = write_midi(p).map_err(|e| ServiceError::Validation(format!("{}: {e}", path.display())))?;
    write_file(path, bytes)
}

pub fn load_landmarks(path: &Path) -> Result<Vec<LandmarkFrame>> {
    parse_landmarks_jsonl(&read_text(path)?).map_err(|e| ServiceError::parse(path)(e.to_string()))
}

pub fn load_geometry(path: &Path) -> Result<KeyboardGeometry> {
    KeyboardGeometry::from_json_str(&read_text(path)?).map_err(|e| ServiceError::parse(path)(e.to_string()))
}

impl BundlePaths {
    /// Standard file names inside `dir`; the frame directory is used when present.
    pub fn in_dir(dir: &Path) -> Self {
        let frames = dir.join(FRAMES_DIR);
        BundlePaths {
            midi: dir.join(MIDI_FILE),
            landmarks: dir.join(LANDMARKS_FILE),
            geometry: dir.join(GEOMETRY_FILE),
            frames_dir: frames.is_dir().then_some(frames),
        }
    }

    /// Same paths made absolute against the current directory.
    pub fn absolute(&self) -> Result<Self> {
        let abs = |p: &Path| std::path::absolute(p).map_err(ServiceError::io(p));
        Ok(BundlePaths {
            midi: abs(&self.midi)?,
            landmarks: abs(&self.landmarks)?,
            geometry: abs(&self.geometry)?,
            frames_dir: self.frames_dir.as_deref().map(abs).transpose()?,
        })
    }

    pub fn load(&self) -> Result<Bundle> {
        let geometry = load_geometry(&self.geometry)?;
        let landmarks = load_landmarks(&self.landmarks)?;
        let performance = load_midi(&self.midi)?;
        if let Some(dir) = &self.frames_dir {
            if !dir.is_dir() {
                return Err(ServiceError::Io {
                    path: dir.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "frame directory not found"),
                });
            }
        }
        Ok(Bundle { performance, landmarks, geometry })
    }
}

/// Writes the scene's MIDI, landmarks, geometry and scripted fingering into
/// `dir` (created if needed).
pub fn write_synthetic_bundle(dir: &Path, scene: &Scene) -> Result<BundlePaths> {
    fs::create_dir_all(dir).map_err(ServiceError::io(dir))?;
    let paths = BundlePaths::in_dir(dir);
    let performance = scene.performance();
    save_midi(&paths.midi, &performance)?;
    write_file(&paths.landmarks, landmarks_to_jsonl(&scene.frames()))?;
    write_file(&paths.geometry, scene.geometry().to_json_string() + "\n")?;

    let mut reference = String::new();
    for (n, finger) in performance.notes.iter().zip(scene.expected_fingers()) {
        let row = FingeringRow {
            note_id: n.note_id,
            onset_s: n.onset_s,
            pitch: n.pitch,
            status: if finger.is_some() {
                pianotrace_core::fingering::Status::Manual
            } else {
                pianotrace_core::fingering::Status::PendingNone
            },
            hand: finger.map(|f| f.hand),
            finger: finger.map(|f| f.finger),
            candidates: Vec::new(),
            max_score: 0,
        };
        reference.push_str(&serde_json::to_string(&row).expect("row serializes"));
        reference.push('\n');
    }
    write_file(&dir.join(REFERENCE_FILE), reference)?;
    Ok(paths)
}
