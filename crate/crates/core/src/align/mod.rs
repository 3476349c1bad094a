//! Audio-to-MIDI fine alignment: constant-Q features, banded DTW and
//! timestamp warping.

mod audio;
mod cqt;
mod dtw;
mod render;
mod warp;

use thiserror::Error;

pub use audio::{downmix_mean, read_wav, resample, write_wav, AudioBuffer};
pub use cqt::{extract_features, CqtConfig, FeatureSequence, DB_FLOOR, FEATURE_HOP, FEATURE_SAMPLE_RATE};
pub use dtw::{band_radius, banded_dtw, banded_dtw_with, cosine_distance, in_band, DtwResult, WarpPath, DEFAULT_BAND_S};
pub use render::{midi_to_hz, render_sinusoidal, render_sinusoidal_raw, PARTIAL_AMPLITUDES};
pub use warp::{warp_midi, TimeWarp, WarpDirection, WarpOutcome, MIN_NOTE_DURATION_S};

use crate::midi::Performance;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("{path}: {source}")]
    Wav { path: String, source: hound::Error },
    #[error("empty input sequence")]
    EmptyInput,
    #[error("the end of a {n}x{m} grid is unreachable within a band of {radius} frames; use a larger band")]
    BandUnreachable { n: usize, m: usize, radius: usize },
    #[error("feature data: {0}")]
    Features(String),
}

/// Result of aligning a performance to a recording.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub warped: WarpOutcome,
    pub dtw: DtwResult,
    pub rendition: FeatureSequence,
    pub recording: FeatureSequence,
}

/// Renders (or takes) the MIDI rendition, extracts features from both
/// signals at the feature rate, and warps the performance onto the recording.
/// `recording` must already be mono at the feature sample rate.
pub fn align_performance(
    p: &Performance,
    recording: &[f32],
    rendition: Option<&[f32]>,
    cfg: &CqtConfig,
    band_s: f64,
) -> Result<Alignment, AlignError> {
    if recording.is_empty() {
        return Err(AlignError::EmptyInput);
    }
    let rendered;
    let rendition = match rendition {
        Some(r) => r,
        None => {
            rendered = render_sinusoidal(p, cfg.sample_rate);
            &rendered
        }
    };
    if rendition.is_empty() {
        return Err(AlignError::EmptyInput);
    }
    let x = extract_features(rendition, cfg);
    let y = extract_features(recording, cfg);
    let dtw = banded_dtw(&x, &y, band_radius(band_s, cfg))?;
    let warped = warp_midi(p, &dtw.path, WarpDirection::RenditionIsX, cfg.frame_seconds());
    Ok(Alignment { warped, dtw, rendition: x, recording: y })
}
