//! Synthetic paired datasets with planted phoneme→AM effects.
//!
//! Every AM owns a band of `n_mels / n_ams` consecutive mel bins. A clip's
//! band is the filtered-noise base with its band mean replaced by
//! `OFFSET + GAIN * (beta * am + noise_std * xi)`, where `xi` is standard
//! normal and drawn per clip. Unplanted pairs use `beta = 0`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::anthropometry::{write_am_csv, AmVector};
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::experiment::{assemble_dataset, write_mel_cache, Dataset, LabelledClip};

pub const OFFSET: f64 = -4.0;
pub const GAIN: f64 = 1.0;
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub phoneme: String,
    pub am: String,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub clips_per_phoneme_per_subject: usize,
    pub phoneme_labels: Vec<String>,
    pub am_names: Vec<String>,
    pub planted: Vec<PlantedEffect>,
    pub noise_std: f64,
    pub seed: u64,
    pub n_mels: usize,
    pub n_frames: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_subjects: 100,
            clips_per_phoneme_per_subject: 5,
            phoneme_labels: vec!["a".into(), "b".into()],
            am_names: vec!["am0".into(), "am1".into()],
            planted: vec![PlantedEffect {
                phoneme: "a".into(),
                am: "am0".into(),
                beta: 1.0,
            }],
            noise_std: 0.3,
            seed: 0,
            n_mels: 64,
            n_frames: 32,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.n_subjects < 2 {
            return bad("n_subjects must be at least 2".into());
        }
        if self.phoneme_labels.is_empty() || self.am_names.is_empty() {
            return bad("phoneme_labels and am_names must be non-empty".into());
        }
        if self.n_frames == 0 || self.am_names.len() > self.n_mels {
            return bad(format!(
                "{} AMs do not fit in {} mel bins",
                self.am_names.len(),
                self.n_mels
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be a finite non-negative number".into());
        }
        for p in &self.planted {
            if !(0.0..=1.0).contains(&p.beta) {
                return bad(format!("beta {} for ({}, {}) outside [0, 1]", p.beta, p.phoneme, p.am));
            }
            if !self.phoneme_labels.contains(&p.phoneme) || !self.am_names.contains(&p.am) {
                return bad(format!("planted pair ({}, {}) is not in the label sets", p.phoneme, p.am));
            }
        }
        Ok(())
    }

    pub fn beta(&self, phoneme: &str, am: &str) -> f64 {
        self.planted
            .iter()
            .rev()
            .find(|p| p.phoneme == phoneme && p.am == am)
            .map_or(0.0, |p| p.beta)
    }

    /// Mel bin range of the band that carries AM `k`.
    pub fn band(&self, k: usize) -> std::ops::Range<usize> {
        let w = self.n_mels / self.am_names.len();
        k * w..(k + 1) * w
    }

    pub fn band_of(&self, am: &str) -> Option<std::ops::Range<usize>> {
        self.am_names.iter().position(|a| a == am).map(|k| self.band(k))
    }
}

/// Record of what was planted, written as `ground_truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub offset: f64,
    pub gain: f64,
    pub bands: BTreeMap<String, [usize; 2]>,
    pub planted: Vec<PlantedEffect>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Raw standard-normal AM draws.
    pub ams: Vec<AmVector>,
    pub clips: Vec<LabelledClip>,
    pub truth: GroundTruth,
}

impl SyntheticData {
    pub fn to_dataset(&self) -> Result<Dataset> {
        assemble_dataset(&self.ams, self.clips.clone())
    }

    /// Writes `ams.csv`, `mels/` and `ground_truth.json` under `root`.
    pub fn write(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        write_am_csv(root.join("ams.csv"), &self.ams)?;
        write_mel_cache(root.join("mels"), &self.clips)?;
        let json = serde_json::to_string_pretty(&self.truth)
            .map_err(|e| Error::Format(format!("ground truth: {e}")))?;
        let p = root.join(GROUND_TRUTH_FILE);
        std::fs::write(&p, json).map_err(|e| Error::io(p, e))
    }
}

fn phoneme_envelope(p: usize, n_mels: usize) -> Vec<f64> {
    let phase = 0.7 * (p as f64 + 1.0);
    (0..n_mels)
        .map(|m| -6.0 + 1.5 * (phase + 6.0 * m as f64 / n_mels as f64).sin())
        .collect()
}

/// Envelope plus white noise smoothed with a 3x3 box filter.
fn base_spectrogram(env: &[f64], n_frames: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n_mels = env.len();
    let white: Vec<f64> = (0..n_mels * n_frames).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = vec![0.0; white.len()];
    for m in 0..n_mels {
        for t in 0..n_frames {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for dm in m.saturating_sub(1)..(m + 2).min(n_mels) {
                for dt in t.saturating_sub(1)..(t + 2).min(n_frames) {
                    acc += white[dm * n_frames + dt];
                    cnt += 1.0;
                }
            }
            out[m * n_frames + t] = env[m] + acc / cnt;
        }
    }
    out
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ams: Vec<AmVector> = (0..spec.n_subjects)
        .map(|s| AmVector {
            subject_id: format!("s{s:05}"),
            values: spec
                .am_names
                .iter()
                .map(|a| (a.clone(), rng.sample(StandardNormal)))
                .collect(),
        })
        .collect();
    let betas: Vec<Vec<f64>> = spec
        .phoneme_labels
        .iter()
        .map(|p| spec.am_names.iter().map(|a| spec.beta(p, a)).collect())
        .collect();
    let envs: Vec<Vec<f64>> = (0..spec.phoneme_labels.len())
        .map(|p| phoneme_envelope(p, spec.n_mels))
        .collect();
    let nf = spec.n_frames;
    let mut clips = Vec::with_capacity(spec.n_subjects * spec.phoneme_labels.len() * spec.clips_per_phoneme_per_subject);
    for subj in &ams {
        for (p, label) in spec.phoneme_labels.iter().enumerate() {
            for _ in 0..spec.clips_per_phoneme_per_subject {
                let mut data = base_spectrogram(&envs[p], nf, &mut rng);
                for (k, (_, z)) in subj.values.iter().enumerate() {
                    let xi: f64 = rng.sample(StandardNormal);
                    let target = OFFSET + GAIN * (betas[p][k] * z + spec.noise_std * xi);
                    let band = &mut data[spec.band(k).start * nf..spec.band(k).end * nf];
                    let mean = band.iter().sum::<f64>() / band.len() as f64;
                    for x in band.iter_mut() {
                        *x += target - mean;
                    }
                }
                for x in &mut data {
                    *x = *x as f32 as f64;
                }
                clips.push(LabelledClip {
                    subject_id: subj.subject_id.clone(),
                    phoneme: label.clone(),
                    spec: MelSpectrogram::new(spec.n_mels, nf, data)?,
                });
            }
        }
    }
    let bands = spec
        .am_names
        .iter()
        .enumerate()
        .map(|(k, a)| (a.clone(), [spec.band(k).start, spec.band(k).end]))
        .collect();
    let planted = spec.planted.iter().filter(|p| p.beta > 0.0).cloned().collect();
    Ok(SyntheticData {
        ams,
        clips,
        truth: GroundTruth {
            spec: spec.clone(),
            offset: OFFSET,
            gain: GAIN,
            bands,
            planted,
        },
    })
}

/// Mean value over the mel bins in `band`.
pub fn planted_summary(clip: &MelSpectrogram, band: std::ops::Range<usize>) -> f64 {
    let cells: Vec<f64> = band.flat_map(|m| clip.bin(m).iter().copied()).collect();
    cells.iter().sum::<f64>() / cells.len() as f64
}

/// Inverse of the planting map: `beta * am + noise`.
pub fn recover(summary: f64) -> f64 {
    (summary - OFFSET) / GAIN
}
