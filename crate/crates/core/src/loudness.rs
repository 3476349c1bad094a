//! Gated integrated loudness (BS.1770-4) and the per-file normalization
//! targets derived from rendition loudness.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GLOBAL_TARGET_LUFS: f64 = -23.0;
pub const ABSOLUTE_GATE_LUFS: f64 = -70.0;
pub const RELATIVE_GATE_LU: f64 = -10.0;
pub const BLOCK_S: f64 = 0.4;
pub const BLOCK_STEP_S: f64 = 0.1;
pub const MAX_GAIN_DB: f64 = 40.0;
const LOUDNESS_OFFSET: f64 = -0.691;

#[derive(Debug, Error, PartialEq)]
pub enum LoudnessError {
    #[error("input is {0:.3} s long; at least one 400 ms block is needed")]
    TooShort(f64),
    #[error("no channels")]
    NoChannels,
    #[error("channels differ in length")]
    RaggedChannels,
    #[error("empty loudness list")]
    EmptyList,
    #[error("loudness value {0} is not finite")]
    NonFinite(f64),
    #[error("gain of {0:.1} dB exceeds the +40 dB limit; the measurement is suspect")]
    GainTooLarge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[1] * y1 - self.a[2] * y2;
                (x2, x1, y2, y1) = (x1, x0, y1, y0);
                y0
            })
            .collect()
    }

    /// Magnitude response in dB at `freq`.
    pub fn gain_db(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq / sample_rate;
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        20.0 * (eval(&self.b) / eval(&self.a)).log10()
    }
}

/// The two K-weighting stages (high shelf, then high-pass) for a sample rate,
/// from the analog prototype through the bilinear transform.
pub fn k_weighting(sample_rate: f64) -> [Biquad; 2] {
    let (f0, gain_db, q) = (1681.974450955533, 3.999843853973347, 0.7071752369554196);
    let k = (PI * f0 / sample_rate).tan();
    let vh = 10f64.powf(gain_db / 20.0);
    let vb = vh.powf(0.4996667741545416);
    let a0 = 1.0 + k / q + k * k;
    let shelf = Biquad {
        b: [(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0],
        a: [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
    };
    let (f0, q) = (38.13547087602444, 0.5003270373238773);
    let k = (PI * f0 / sample_rate).tan();
    let a0 = 1.0 + k / q + k * k;
    let highpass = Biquad { b: [1.0, -2.0, 1.0], a: [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0] };
    [shelf, highpass]
}

/// Combined K-weighting response plus the -0.691 dB loudness offset.
pub fn k_weighted_gain_db(freq: f64, sample_rate: f64) -> f64 {
    let [s, h] = k_weighting(sample_rate);
    s.gain_db(freq, sample_rate) + h.gain_db(freq, sample_rate) + LOUDNESS_OFFSET
}

fn channel_weight(index: usize) -> f64 {
    if index < 3 {
        1.0
    } else {
        1.41
    }
}

/// Integrated loudness in LUFS. Mono is a single full-weight channel.
/// Returns negative infinity when every block is gated out.
pub fn integrated_loudness(channels: &[Vec<f32>], sample_rate: u32) -> Result<f64, LoudnessError> {
    let first = channels.first().ok_or(LoudnessError::NoChannels)?;
    if channels.iter().any(|c| c.len() != first.len()) {
        return Err(LoudnessError::RaggedChannels);
    }
    let sr = f64::from(sample_rate);
    let block = (BLOCK_S * sr).round() as usize;
    let step = (BLOCK_STEP_S * sr).round() as usize;
    if first.len() < block {
        return Err(LoudnessError::TooShort(first.len() as f64 / sr));
    }
    let n_blocks = (first.len() - block) / step + 1;
    let [shelf, hp] = k_weighting(sr);

    let mut energies = vec![0.0; n_blocks];
    for (c, ch) in channels.iter().enumerate() {
        let x: Vec<f64> = ch.iter().map(|&v| f64::from(v)).collect();
        let y = hp.run(&shelf.run(&x));
        let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
        // Prefix sums keep block means exact up to rounding.
        let mut prefix = vec![0.0; sq.len() + 1];
        for (i, v) in sq.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v;
        }
        for (j, e) in energies.iter_mut().enumerate() {
            let s = j * step;
            *e += channel_weight(c) * (prefix[s + block] - prefix[s]) / block as f64;
        }
    }

    let loudness = |z: f64| LOUDNESS_OFFSET + 10.0 * z.log10();
    let abs_gated: Vec<f64> = energies.iter().copied().filter(|&z| loudness(z) > ABSOLUTE_GATE_LUFS).collect();
    if abs_gated.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let rel_gate = loudness(mean(&abs_gated)) + RELATIVE_GATE_LU;
    let gated: Vec<f64> = abs_gated.into_iter().filter(|&z| loudness(z) > rel_gate).collect();
    if gated.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(loudness(mean(&gated)))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-file targets: every rendition loudness shifted by one offset so the
/// targets average to `global_target`.
pub fn compute_targets(rendition_lufs: &[f64], global_target: f64) -> Result<Vec<f64>, LoudnessError> {
    if rendition_lufs.is_empty() {
        return Err(LoudnessError::EmptyList);
    }
    if let Some(&bad) = rendition_lufs.iter().find(|v| !v.is_finite()) {
        return Err(LoudnessError::NonFinite(bad));
    }
    let offset = global_target - mean(rendition_lufs);
    Ok(rendition_lufs.iter().map(|l| l + offset).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoudnessReport {
    pub integrated_lufs: f64,
    pub target_lufs: f64,
    pub gain_applied_db: f64,
    pub clipped_samples: usize,
}

/// Applies the uniform gain that moves `measured` to `target`. No limiting;
/// samples beyond full scale are counted, not altered.
pub fn normalize_to(channels: &[Vec<f32>], measured: f64, target: f64) -> Result<(Vec<Vec<f32>>, LoudnessReport), LoudnessError> {
    if !measured.is_finite() {
        return Err(LoudnessError::NonFinite(measured));
    }
    if !target.is_finite() {
        return Err(LoudnessError::NonFinite(target));
    }
    let gain_db = target - measured;
    if gain_db > MAX_GAIN_DB {
        return Err(LoudnessError::GainTooLarge(gain_db));
    }
    let out: Vec<Vec<f32>> = if gain_db == 0.0 {
        channels.to_vec()
    } else {
        let g = 10f64.powf(gain_db / 20.0);
        channels.iter().map(|c| c.iter().map(|&v| (f64::from(v) * g) as f32).collect()).collect()
    };
    let clipped_samples = out.iter().flatten().filter(|v| v.abs() > 1.0).count();
    if clipped_samples > 0 {
        log::warn!("{clipped_samples} samples exceed full scale after a {gain_db:.2} dB gain");
    }
    Ok((out, LoudnessReport { integrated_lufs: measured, target_lufs: target, gain_applied_db: gain_db, clipped_samples }))
}
