//! Optional TOML configuration. Command-line flags override these values.

use std::path::Path;

use pianotrace_core::align::{CqtConfig, DEFAULT_BAND_S};
use pianotrace_core::avfilter::FilterConfig;
use pianotrace_core::fingering::FingeringConfig;
use pianotrace_core::loudness::GLOBAL_TARGET_LUFS;
use pianotrace_core::metrics::{FINGERING_FIRST_NOTES, ONSET_TOLERANCE_S};
use pianotrace_core::midi::DEFAULT_PEDAL_THRESHOLD;
use serde::{Deserialize, Serialize};

use crate::bundle::read_text;
use crate::error::{Result, ServiceError};
use crate::http::DEFAULT_BIND;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub fingering: FingeringConfig,
    pub avfilter: FilterConfig,
    pub cqt: CqtConfig,
    pub align: AlignSection,
    pub loudness: LoudnessSection,
    pub eval: EvalSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSection {
    pub band_s: f64,
}

impl Default for AlignSection {
    fn default() -> Self {
        AlignSection { band_s: DEFAULT_BAND_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoudnessSection {
    pub global_target_lufs: f64,
}

impl Default for LoudnessSection {
    fn default() -> Self {
        LoudnessSection { global_target_lufs: GLOBAL_TARGET_LUFS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub onset_tolerance_s: f64,
    pub pedal_extension: bool,
    pub pedal_threshold: u8,
    pub fingering_first_notes: usize,
    /// Finger pairs counted as equivalent, e.g. `[[1, 2]]`.
    pub substitutions: Vec<(u8, u8)>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            onset_tolerance_s: ONSET_TOLERANCE_S,
            pedal_extension: false,
            pedal_threshold: DEFAULT_PEDAL_THRESHOLD,
            fingering_first_notes: FINGERING_FIRST_NOTES,
            substitutions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub bind: String,
}

impl Default for ServeSection {
    fn default() -> Self {
        ServeSection { bind: DEFAULT_BIND.to_string() }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Config::default()),
            Some(p) => Config::from_toml_str(&read_text(p)?).map_err(|e| ServiceError::parse(p)(e.to_string())),
        }
    }
}
