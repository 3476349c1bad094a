use std::f64::consts::PI;

use crate::midi::{NoteEvent, Performance};

pub const PARTIAL_AMPLITUDES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
pub const ATTACK_S: f64 = 0.010;
pub const DECAY_TIME_CONSTANT_S: f64 = 0.8;
pub const RENDER_PEAK: f32 = 0.5;

pub fn midi_to_hz(pitch: u8) -> f64 {
    440.0 * 2f64.powf((f64::from(pitch) - 69.0) / 12.0)
}

fn add_note(out: &mut [f64], n: &NoteEvent, sr: f64) {
    let start = (n.onset_s * sr).round().max(0.0) as usize;
    let end = ((n.offset_s * sr).round() as usize).min(out.len());
    let f0 = midi_to_hz(n.pitch);
    let gain = f64::from(n.velocity) / 127.0;
    for (k, s) in out.iter_mut().enumerate().take(end).skip(start) {
        let t = (k - start) as f64 / sr;
        let env = (t / ATTACK_S).min(1.0) * (-t / DECAY_TIME_CONSTANT_S).exp();
        let mut v = 0.0;
        for (h, a) in PARTIAL_AMPLITUDES.iter().enumerate() {
            let f = f0 * (h + 1) as f64;
            if f < sr / 2.0 {
                v += a * (2.0 * PI * f * t).sin();
            }
        }
        *s += gain * env * v;
    }
}

/// Sum of additive note renders before normalization.
pub fn render_sinusoidal_raw(p: &Performance, sample_rate: u32) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let len = (p.end_time() * sr).ceil() as usize;
    let mut out = vec![0.0; len];
    for n in &p.notes {
        add_note(&mut out, n, sr);
    }
    out
}

/// Additive render with four harmonics per note, peak-normalized to 0.5.
pub fn render_sinusoidal(p: &Performance, sample_rate: u32) -> Vec<f32> {
    let raw = render_sinusoidal_raw(p, sample_rate);
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { f64::from(RENDER_PEAK) / peak } else { 0.0 };
    raw.iter().map(|v| (v * scale) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(id: u32, onset: f64, offset: f64, pitch: u8) -> NoteEvent {
        NoteEvent { note_id: id, onset_s: onset, offset_s: offset, pitch, velocity: 100 }
    }

    #[test]
    fn single_a4_peaks_at_440() {
        let p = Performance::new(vec![note(0, 0.0, 1.0, 69)], Vec::new(), 480, Vec::new());
        let x = render_sinusoidal(&p, 22050);
        assert_eq!(x.len(), 22050);
        let peak = x.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-6);
        // Goertzel-style probe at a few frequencies.
        let power = |f: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &s) in x.iter().enumerate() {
                let ph = 2.0 * PI * f * k as f64 / 22050.0;
                re += f64::from(s) * ph.cos();
                im += f64::from(s) * ph.sin();
            }
            re * re + im * im
        };
        let p440 = power(440.0);
        for f in [220.0, 430.0, 450.0, 880.0, 1320.0] {
            assert!(power(f) < p440, "{f}");
        }
    }

    #[test]
    fn empty_performance_is_silent() {
        assert!(render_sinusoidal(&Performance::default(), 22050).is_empty());
    }

    #[test]
    fn simultaneous_notes_superpose() {
        let a = note(0, 0.1, 0.6, 60);
        let b = note(1, 0.1, 0.4, 67);
        let both = render_sinusoidal_raw(&Performance::new(vec![a.clone(), b.clone()], Vec::new(), 480, Vec::new()), 22050);
        let solo_a = render_sinusoidal_raw(&Performance::new(vec![a], Vec::new(), 480, Vec::new()), 22050);
        let solo_b = render_sinusoidal_raw(&Performance::new(vec![b], Vec::new(), 480, Vec::new()), 22050);
        for (k, v) in both.iter().enumerate() {
            let sum = solo_a[k] + solo_b.get(k).copied().unwrap_or(0.0);
            assert!((v - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn attack_ramps_from_zero() {
        let raw = render_sinusoidal_raw(&Performance::new(vec![note(0, 0.0, 0.1, 69)], Vec::new(), 480, Vec::new()), 22050);
        assert_eq!(raw[0], 0.0);
        let early = raw[..22].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let later = raw[220..440].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(early < 0.2 * later);
    }
}
