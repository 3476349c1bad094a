use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AlignError;

pub const FEATURE_SAMPLE_RATE: u32 = 22050;
pub const FEATURE_HOP: usize = 64;
pub const DB_FLOOR: f32 = -80.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CqtConfig {
    pub sample_rate: u32,
    pub hop: usize,
    pub n_bins: usize,
    pub bins_per_octave: usize,
    pub fmin: f64,
}

impl Default for CqtConfig {
    fn default() -> Self {
        CqtConfig { sample_rate: FEATURE_SAMPLE_RATE, hop: FEATURE_HOP, n_bins: 84, bins_per_octave: 12, fmin: 32.7032 }
    }
}

impl CqtConfig {
    pub fn bin_frequency(&self, k: usize) -> f64 {
        self.fmin * 2f64.powf(k as f64 / self.bins_per_octave as f64)
    }

    pub fn q(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    pub fn frame_seconds(&self) -> f64 {
        self.hop as f64 / f64::from(self.sample_rate)
    }
}

/// Row-major `frames x bins` log-magnitude matrix in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub n_frames: usize,
    pub n_bins: usize,
    pub sample_rate: u32,
    pub hop: usize,
    pub data: Vec<f32>,
}

impl FeatureSequence {
    pub fn frame(&self, i: usize) -> &[f32] {
        &self.data[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn frame_seconds(&self) -> f64 {
        self.hop as f64 / f64::from(self.sample_rate)
    }

    pub fn argmax_bin(&self, i: usize) -> usize {
        let f = self.frame(i);
        (0..f.len()).fold(0, |best, k| if f[k] > f[best] { k } else { best })
    }

    /// Binary dump: u32 LE header length, JSON header, then f32 LE data.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let header = serde_json::json!({
            "frames": self.n_frames,
            "bins": self.n_bins,
            "sample_rate": self.sample_rate,
            "hop": self.hop,
            "dtype": "f32le",
            "layout": "row-major",
        })
        .to_string();
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, AlignError> {
        let bad = |m: &str| AlignError::Features(m.to_string());
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        let h: serde_json::Value = serde_json::from_slice(&header).map_err(|e| bad(&e.to_string()))?;
        let field = |k: &str| h[k].as_u64().ok_or_else(|| bad(&format!("header field {k} missing")));
        let (n_frames, n_bins) = (field("frames")? as usize, field("bins")? as usize);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| bad(&e.to_string()))?;
        if bytes.len() != n_frames * n_bins * 4 {
            return Err(bad("data length does not match header"));
        }
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(FeatureSequence { n_frames, n_bins, sample_rate: field("sample_rate")? as u32, hop: field("hop")? as usize, data })
    }
}

struct Kernel {
    re: Vec<f64>,
    im: Vec<f64>,
}

fn kernels(cfg: &CqtConfig) -> Vec<Kernel> {
    let q = cfg.q();
    let sr = f64::from(cfg.sample_rate);
    (0..cfg.n_bins)
        .map(|k| {
            let f = cfg.bin_frequency(k);
            let n = (q * sr / f).ceil() as usize;
            let (mut re, mut im) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for i in 0..n {
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
                let phase = -2.0 * PI * f * (i as f64 - n as f64 / 2.0) / sr;
                re.push(w * phase.cos() / n as f64);
                im.push(w * phase.sin() / n as f64);
            }
            Kernel { re, im }
        })
        .collect()
}

/// Constant-Q log-magnitude features by direct windowed kernels. Frame `t`
/// is centered on sample `t * hop`, zero padded at the edges.
pub fn extract_features(samples: &[f32], cfg: &CqtConfig) -> FeatureSequence {
    let n_frames = samples.len().div_ceil(cfg.hop);
    let ks = kernels(cfg);
    let x: Vec<f64> = samples.iter().map(|&s| f64::from(s)).collect();

    let mut mags: Vec<f64> = vec![0.0; n_frames * cfg.n_bins];
    mags.par_chunks_mut(cfg.n_bins).enumerate().for_each(|(t, row)| {
        let center = (t * cfg.hop) as isize;
        for (k, kern) in ks.iter().enumerate() {
            let n = kern.re.len() as isize;
            let start = center - n / 2;
            let lo = (-start).max(0) as usize;
            let hi = ((x.len() as isize - start).min(n)).max(0) as usize;
            let (mut re, mut im) = (0.0, 0.0);
            if lo < hi {
                let xs = &x[(start + lo as isize) as usize..(start + hi as isize) as usize];
                for ((s, a), b) in xs.iter().zip(&kern.re[lo..hi]).zip(&kern.im[lo..hi]) {
                    re += s * a;
                    im += s * b;
                }
            }
            row[k] = (re * re + im * im).sqrt();
        }
    });

    let peak = mags.iter().copied().fold(0.0, f64::max);
    let data = mags
        .iter()
        .map(|&m| if peak > 0.0 && m > 0.0 { ((20.0 * (m / peak).log10()) as f32).max(DB_FLOOR) } else { DB_FLOOR })
        .collect();
    FeatureSequence { n_frames, n_bins: cfg.n_bins, sample_rate: cfg.sample_rate, hop: cfg.hop, data }
}
