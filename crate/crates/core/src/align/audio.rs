use std::f64::consts::PI;
use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::AlignError;

/// Decoded audio, one vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f32>>,
}

impl AudioBuffer {
    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Self {
        AudioBuffer { sample_rate, channels: vec![samples] }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Reads 8/16/24/32-bit integer or 32-bit float PCM WAV.
pub fn read_wav(path: &Path) -> Result<AudioBuffer, AlignError> {
    let io_err = |e: hound::Error| AlignError::Wav { path: path.display().to_string(), source: e };
    let mut reader = hound::WavReader::open(path).map_err(io_err)?;
    let spec = reader.spec();
    let n_ch = usize::from(spec.channels);
    let interleaved: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>().map_err(io_err)?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader.samples::<i32>().map(|s| s.map(|v| v as f32 * scale)).collect::<Result<_, _>>().map_err(io_err)?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &s) in frame.iter().enumerate() {
            channels[c].push(s);
        }
    }
    Ok(AudioBuffer { sample_rate: spec.sample_rate, channels })
}

/// Writes 32-bit float WAV.
pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<(), AlignError> {
    let io_err = |e: hound::Error| AlignError::Wav { path: path.display().to_string(), source: e };
    let spec = WavSpec {
        channels: audio.channels.len().max(1) as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(io_err)?;
    for i in 0..audio.len() {
        for ch in &audio.channels {
            w.write_sample(ch[i]).map_err(io_err)?;
        }
    }
    w.finalize().map_err(io_err)
}

/// Mean over channels.
pub fn downmix_mean(audio: &AudioBuffer) -> Vec<f32> {
    let n = audio.len();
    if audio.channels.len() == 1 {
        return audio.channels[0].clone();
    }
    let k = audio.channels.len() as f32;
    (0..n).map(|i| audio.channels.iter().map(|c| c[i]).sum::<f32>() / k).collect()
}

const SINC_ZERO_CROSSINGS: f64 = 32.0;

/// Band-limited resampling with a Hann-windowed sinc kernel.
pub fn resample(samples: &[f32], from_rate: u32, to_rate: u32) -> Vec<f32> {
    if from_rate == to_rate || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = f64::from(to_rate) / f64::from(from_rate);
    // Cutoff relative to the input Nyquist, slightly below the lower of the two.
    let cutoff = ratio.min(1.0) * 0.95;
    let half_width = SINC_ZERO_CROSSINGS / cutoff;
    let n_out = (samples.len() as f64 * ratio).ceil() as usize;
    let sinc = |x: f64| if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };

    (0..n_out)
        .map(|i| {
            let center = i as f64 / ratio;
            let lo = (center - half_width).ceil().max(0.0) as usize;
            let hi = ((center + half_width).floor() as usize).min(samples.len() - 1);
            let mut acc = 0.0;
            for (k, &s) in samples.iter().enumerate().take(hi + 1).skip(lo) {
                let x = k as f64 - center;
                let window = 0.5 + 0.5 * (PI * x / half_width).cos();
                acc += f64::from(s) * cutoff * sinc(cutoff * x) * window;
            }
            acc as f32
        })
        .collect()
}
