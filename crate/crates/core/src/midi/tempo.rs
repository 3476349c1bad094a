use serde::{Deserialize, Serialize};

/// Microseconds per quarter note assumed before the first tempo event.
pub const DEFAULT_TEMPO_US: u32 = 500_000;

/// A set-tempo event at an absolute tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TempoChange {
    pub tick: u64,
    pub us_per_quarter: u32,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    tick: u64,
    seconds: f64,
    sec_per_tick: f64,
}

/// Piecewise-linear tick <-> seconds conversion built from a tempo map.
#[derive(Debug, Clone)]
pub struct TempoMap {
    segments: Vec<Segment>,
}

impl TempoMap {
    pub fn new(ticks_per_quarter: u16, changes: &[TempoChange]) -> Self {
        let tpq = f64::from(ticks_per_quarter.max(1));
        let spt = |us: u32| f64::from(us) * 1e-6 / tpq;

        let mut sorted: Vec<TempoChange> = changes.to_vec();
        sorted.sort_by_key(|c| c.tick);

        let mut segments = vec![Segment {
            tick: 0,
            seconds: 0.0,
            sec_per_tick: spt(DEFAULT_TEMPO_US),
        }];
        for change in sorted {
            let last = *segments.last().unwrap();
            let seconds = last.seconds + (change.tick - last.tick) as f64 * last.sec_per_tick;
            let seg = Segment {
                tick: change.tick,
                seconds,
                sec_per_tick: spt(change.us_per_quarter),
            };
            // A later event at the same tick replaces the earlier one.
            if last.tick == change.tick {
                *segments.last_mut().unwrap() = Segment { seconds: last.seconds, ..seg };
            } else {
                segments.push(seg);
            }
        }
        TempoMap { segments }
    }

    pub fn tick_to_seconds(&self, tick: u64) -> f64 {
        let idx = self.segments.partition_point(|s| s.tick <= tick) - 1;
        let seg = self.segments[idx];
        seg.seconds + (tick - seg.tick) as f64 * seg.sec_per_tick
    }

    /// Fractional tick position of a time in seconds (negative times clamp to 0).
    pub fn seconds_to_ticks(&self, seconds: f64) -> f64 {
        let seconds = seconds.max(0.0);
        let idx = self.segments.partition_point(|s| s.seconds <= seconds).max(1) - 1;
        let seg = self.segments[idx];
        seg.tick as f64 + (seconds - seg.seconds) / seg.sec_per_tick
    }

    pub fn seconds_to_tick(&self, seconds: f64) -> u64 {
        self.seconds_to_ticks(seconds).round().max(0.0) as u64
    }

    /// Length in seconds of the tick interval that contains `seconds`.
    pub fn tick_quantum_at(&self, seconds: f64) -> f64 {
        let idx = self.segments.partition_point(|s| s.seconds <= seconds.max(0.0)).max(1) - 1;
        self.segments[idx].sec_per_tick
    }
}
