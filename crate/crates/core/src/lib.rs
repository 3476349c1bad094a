//! Building blocks for annotating piano performance recordings: MIDI I/O,
//! keyboard geometry, hand depth, fingering detection, audio alignment,
//! loudness normalization, audio-visual onset filtering and evaluation.

pub mod align;
pub mod avfilter;
pub mod depth;
pub mod fingering;
pub mod geometry;
pub mod hand;
pub mod landmarks;
pub mod loudness;
pub mod metrics;
pub mod midi;
pub mod synth;
