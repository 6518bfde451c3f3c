use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{resample_linear, AudioClip, MelSpectrogram};
use crate::error::{Error, Result};

/// Added to mel energies before taking the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    /// Seconds.
    pub window_length: f64,
    /// Seconds.
    pub hop_length: f64,
    pub fft_size: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub target_frames: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_mels: 64,
            window_length: 0.025,
            hop_length: 0.010,
            fft_size: 512,
            f_min: 0.0,
            f_max: 8_000.0,
            target_frames: 32,
        }
    }
}

impl MelConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_length * self.sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_length * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate == 0 {
            return Err(Error::Argument("sample_rate must be positive".into()));
        }
        if self.n_mels == 0 {
            return Err(Error::Argument("n_mels must be at least 1".into()));
        }
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::Argument(format!(
                "need 0 <= f_min < f_max <= {nyquist}, got f_min={} f_max={}",
                self.f_min, self.f_max
            )));
        }
        if self.window_samples() == 0 || self.hop_samples() == 0 {
            return Err(Error::Argument("window and hop must span at least one sample".into()));
        }
        if self.fft_size < self.window_samples() {
            return Err(Error::Argument(format!(
                "fft_size {} shorter than the {}-sample window",
                self.fft_size,
                self.window_samples()
            )));
        }
        if self.target_frames == 0 {
            return Err(Error::Argument("target_frames must be at least 1".into()));
        }
        Ok(())
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// `1 + floor((len - win) / hop)`, or zero when the input is shorter than one window.
pub fn frame_count(len: usize, win: usize, hop: usize) -> usize {
    if len < win || hop == 0 {
        0
    } else {
        1 + (len - win) / hop
    }
}

/// Triangular filters on the HTK mel scale, evaluated at FFT bin centre frequencies.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    filters: Vec<Vec<f64>>,
    centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Self {
        let n_bins = fft_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = |k: usize| k as f64 * sample_rate as f64 / fft_size as f64;
        let filters = (0..n_mels)
            .map(|m| {
                let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = bin_hz(k);
                        let up = (f - left) / (center - left);
                        let down = (right - f) / (right - center);
                        up.min(down).max(0.0)
                    })
                    .collect()
            })
            .collect();
        Self {
            filters,
            centers: edges[1..=n_mels].to_vec(),
        }
    }

    pub fn from_config(cfg: &MelConfig) -> Self {
        Self::new(cfg.n_mels, cfg.fft_size, cfg.sample_rate, cfg.f_min, cfg.f_max)
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    /// Centre frequency of each filter in Hz.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// One-sided power spectrum `|X_k|^2`, `k = 0..=fft_size/2`, of a frame
/// zero-padded to `fft_size`.
pub fn power_spectrum(frame: &[f64], fft: &Arc<dyn Fft<f64>>) -> Vec<f64> {
    let n = fft.len();
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft.process(&mut buf);
    buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// Log mel spectrogram of `clip`, resampled to `cfg.sample_rate` if needed.
///
/// Output is `n_mels x frame_count(len, win, hop)`; no length fixing is applied.
pub fn log_mel(clip: &AudioClip, cfg: &MelConfig) -> Result<MelSpectrogram> {
    cfg.validate()?;
    let resampled;
    let samples = if clip.sample_rate() == cfg.sample_rate {
        clip.samples()
    } else {
        resampled = resample_linear(clip.samples(), clip.sample_rate(), cfg.sample_rate);
        &resampled[..]
    };
    let (win, hop) = (cfg.window_samples(), cfg.hop_samples());
    let n_frames = frame_count(samples.len(), win, hop);
    if n_frames == 0 {
        return Err(Error::TooShort {
            samples: samples.len(),
            needed: win,
        });
    }
    let window = hann_window(win);
    let bank = MelFilterbank::from_config(cfg);
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
    let mut out = MelSpectrogram::zeros(cfg.n_mels, n_frames);
    let mut frame = vec![0.0; win];
    for t in 0..n_frames {
        let start = t * hop;
        for (i, f) in frame.iter_mut().enumerate() {
            *f = samples[start + i] * window[i];
        }
        let mel = bank.apply(&power_spectrum(&frame, &fft));
        for (b, e) in mel.into_iter().enumerate() {
            out.bin_mut(b)[t] = (e + LOG_FLOOR).ln();
        }
    }
    Ok(out)
}
