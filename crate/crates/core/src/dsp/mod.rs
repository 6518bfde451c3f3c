//! Audio clips to fixed-shape, per-bin-normalized log mel spectrograms.
//!
//! The recipe is a Hann-windowed STFT (25 ms window, 10 ms hop at 16 kHz),
//! an HTK-scale triangular filterbank over the one-sided power spectrum, and
//! natural-log compression with a small floor. Variable-length phoneme clips
//! are brought to a common frame count with [`fix_length`], and per-bin
//! statistics are fitted on a training corpus with [`MelNormalizer`].

mod cache;
mod mel;
mod wav;

pub use cache::{read_cache, write_cache, CACHE_MAGIC};
pub use mel::{
    frame_count, hann_window, hz_to_mel, log_mel, mel_to_hz, power_spectrum, MelConfig,
    MelFilterbank, LOG_FLOOR,
};
pub use wav::{load_wav, resample_linear, write_wav_16bit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono audio, amplitudes nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Argument("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Argument("audio clip has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Argument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A log mel spectrogram stored mel-major: `data[bin * n_frames + frame]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSpectrogram {
    n_mels: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl MelSpectrogram {
    pub fn new(n_mels: usize, n_frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_mels * n_frames {
            return Err(Error::Shape(format!(
                "{} values do not fill a {n_mels}x{n_frames} grid",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite spectrogram value at {i}")));
        }
        Ok(Self {
            n_mels,
            n_frames,
            data,
        })
    }

    pub fn zeros(n_mels: usize, n_frames: usize) -> Self {
        Self {
            n_mels,
            n_frames,
            data: vec![0.0; n_mels * n_frames],
        }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_mels, self.n_frames)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.n_frames + frame]
    }

    pub fn bin(&self, bin: usize) -> &[f64] {
        &self.data[bin * self.n_frames..(bin + 1) * self.n_frames]
    }

    pub fn bin_mut(&mut self, bin: usize) -> &mut [f64] {
        &mut self.data[bin * self.n_frames..(bin + 1) * self.n_frames]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Center-crops or symmetrically zero-pads along time to `target_frames`.
///
/// When padding an odd number of frames the extra frame goes on the right.
pub fn fix_length(spec: &MelSpectrogram, target_frames: usize) -> MelSpectrogram {
    let n = spec.n_frames;
    let mut out = MelSpectrogram::zeros(spec.n_mels, target_frames);
    if n >= target_frames {
        let start = (n - target_frames) / 2;
        for b in 0..spec.n_mels {
            out.bin_mut(b)
                .copy_from_slice(&spec.bin(b)[start..start + target_frames]);
        }
    } else {
        let left = (target_frames - n) / 2;
        for b in 0..spec.n_mels {
            out.bin_mut(b)[left..left + n].copy_from_slice(spec.bin(b));
        }
    }
    out
}

/// Per-bin standard-deviation floor.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-mel-bin mean and standard deviation fitted on a training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl MelNormalizer {
    /// Fits population statistics over every frame of every spectrogram.
    pub fn fit<'a, I>(corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a MelSpectrogram>,
    {
        let mut n_mels = None;
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut specs = Vec::new();
        for spec in corpus {
            match n_mels {
                None => {
                    n_mels = Some(spec.n_mels);
                    sum = vec![0.0; spec.n_mels];
                }
                Some(m) if m != spec.n_mels => {
                    return Err(Error::Shape(format!(
                        "corpus mixes {m} and {} mel bins",
                        spec.n_mels
                    )))
                }
                Some(_) => {}
            }
            for (b, s) in sum.iter_mut().enumerate() {
                *s += spec.bin(b).iter().sum::<f64>();
            }
            count += spec.n_frames;
            specs.push(spec);
        }
        let n_mels = n_mels.ok_or_else(|| Error::InsufficientData("empty corpus".into()))?;
        if count == 0 {
            return Err(Error::InsufficientData("corpus has no frames".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        // two-pass variance for accuracy on log-domain offsets
        let mut sq = vec![0.0; n_mels];
        for spec in &specs {
            for (b, acc) in sq.iter_mut().enumerate() {
                *acc += spec.bin(b).iter().map(|v| (v - mean[b]).powi(2)).sum::<f64>();
            }
        }
        let std = sq
            .iter()
            .map(|s| (s / count as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, spec: &MelSpectrogram) -> Result<MelSpectrogram> {
        if spec.n_mels != self.mean.len() {
            return Err(Error::Shape(format!(
                "normalizer has {} bins, spectrogram has {}",
                self.mean.len(),
                spec.n_mels
            )));
        }
        let mut out = spec.clone();
        for b in 0..spec.n_mels {
            let (m, s) = (self.mean[b], self.std[b]);
            for v in out.bin_mut(b) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

/// Fits per-bin statistics on `corpus` and returns the normalized corpus
/// together with the statistics for reuse on held-out data.
pub fn normalize_per_bin(corpus: &[MelSpectrogram]) -> Result<(Vec<MelSpectrogram>, MelNormalizer)> {
    let norm = MelNormalizer::fit(corpus)?;
    let out = corpus.iter().map(|s| norm.apply(s)).collect::<Result<_>>()?;
    Ok((out, norm))
}
