#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pianotrace_annotate::{write_synthetic_bundle, BundlePaths};
use pianotrace_core::fingering::Status;
use pianotrace_core::synth::{practice_scene, PracticeOptions};

/// Two scale cycles with a lifted pause, then a hover note and an unseen note.
pub fn small_bundle(dir: &Path) -> BundlePaths {
    let opts = PracticeOptions { duration_s: 10.0, note_s: 0.25, ambiguous_tail: true, ..Default::default() };
    write_synthetic_bundle(dir, &practice_scene(&opts)).unwrap()
}

pub fn with_frames_dir(paths: &BundlePaths, dir: &Path) -> BundlePaths {
    std::fs::create_dir_all(dir).unwrap();
    BundlePaths { frames_dir: Some(dir.to_path_buf()), ..paths.clone() }
}

pub fn first_with(session: &pianotrace_annotate::Session, status: Status) -> u32 {
    session.annotation().entries.iter().find(|e| e.status == status).unwrap_or_else(|| panic!("no {status:?} note")).note_id
}

pub fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

pub fn session_dir(root: &Path) -> PathBuf {
    root.join("session")
}
