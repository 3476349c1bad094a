use serde::{Deserialize, Serialize};

use super::dtw::WarpPath;
use crate::midi::{NoteEvent, PedalEvent, Performance};

pub const MIN_NOTE_DURATION_S: f64 = 0.001;

/// Which side of the path holds the MIDI rendition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpDirection {
    /// The rendition is the first sequence; times map from X to Y.
    RenditionIsX,
    RenditionIsY,
}

/// Piecewise-linear frame map built from a warp path: each source frame maps
/// to the mean of the target frames it is paired with.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWarp {
    knots: Vec<f64>,
    frame_s: f64,
}

impl TimeWarp {
    pub fn from_path(path: &WarpPath, direction: WarpDirection, frame_s: f64) -> Self {
        let n_src = match direction {
            WarpDirection::RenditionIsX => path.n,
            WarpDirection::RenditionIsY => path.m,
        };
        let mut sum = vec![0.0; n_src];
        let mut count = vec![0usize; n_src];
        for &(i, j) in &path.points {
            let (s, t) = match direction {
                WarpDirection::RenditionIsX => (i, j),
                WarpDirection::RenditionIsY => (j, i),
            };
            sum[s] += t as f64;
            count[s] += 1;
        }
        let knots = sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect();
        TimeWarp { knots, frame_s }
    }

    /// Maps seconds on the rendition timeline to the other timeline. The flag
    /// is set when the time fell outside the path and was clamped.
    pub fn map(&self, t: f64) -> (f64, bool) {
        let last = (self.knots.len() - 1) as f64;
        let x = t / self.frame_s;
        let clamped = !(0.0..=last).contains(&x);
        let x = x.clamp(0.0, last);
        let i = (x.floor() as usize).min(self.knots.len() - 1);
        let y = if i + 1 < self.knots.len() {
            let frac = x - i as f64;
            self.knots[i] * (1.0 - frac) + self.knots[i + 1] * frac
        } else {
            self.knots[i]
        };
        (y * self.frame_s, clamped)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpOutcome {
    pub performance: Performance,
    pub clamped_events: usize,
    pub lengthened_notes: usize,
}

/// Applies the path to every onset, offset and pedal time. Note ids are kept.
pub fn warp_midi(p: &Performance, path: &WarpPath, direction: WarpDirection, frame_s: f64) -> WarpOutcome {
    let warp = TimeWarp::from_path(path, direction, frame_s);
    let mut clamped = 0;
    let mut lengthened = 0;
    let mut map = |t: f64| {
        let (y, c) = warp.map(t);
        clamped += usize::from(c);
        y
    };
    let notes: Vec<NoteEvent> = p
        .notes
        .iter()
        .map(|n| {
            let onset_s = map(n.onset_s);
            let mut offset_s = map(n.offset_s);
            if offset_s < onset_s + MIN_NOTE_DURATION_S {
                offset_s = onset_s + MIN_NOTE_DURATION_S;
                lengthened += 1;
            }
            NoteEvent { onset_s, offset_s, ..n.clone() }
        })
        .collect();
    let pedals: Vec<PedalEvent> = p.pedals.iter().map(|e| PedalEvent { time_s: map(e.time_s), ..e.clone() }).collect();
    if clamped > 0 {
        log::warn!("{clamped} event times fell outside the aligned range and were clamped");
    }
    let mut performance = p.with_notes(notes);
    performance.pedals = pedals;
    WarpOutcome { performance, clamped_events: clamped, lengthened_notes: lengthened }
}
