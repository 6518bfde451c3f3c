//! Browser bindings: log mel heatmap of a synthetic tone, the one-sided
//! confidence bound on a set of ratios, and a planted-effect scatter.

use phonoface::dsp::{log_mel, AudioClip, MelConfig};
use phonoface::stats::{decide_pair, t_critical, RepeatResult};
use phonoface::synthgen::{generate, planted_summary, recover, PlantedEffect, SyntheticSpec};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Heatmap {
    n_mels: usize,
    n_frames: usize,
    data: Vec<f64>,
}

#[wasm_bindgen]
impl Heatmap {
    #[wasm_bindgen(getter)]
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    #[wasm_bindgen(getter)]
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// Mel-major log energies.
    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }
}

/// Log mel spectrogram of a tone sweeping linearly from `f0` to `f1` Hz plus
/// optional white noise, sampled at 16 kHz.
pub fn tone_heatmap(f0: f64, f1: f64, duration: f64, noise: f64) -> Result<Heatmap, String> {
    if !(duration > 0.0 && duration <= 5.0) {
        return Err("duration must lie in (0, 5] seconds".into());
    }
    let sr = 16_000.0;
    let n = (duration * sr) as usize;
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let phase = 2.0 * std::f64::consts::PI * (f0 * t + 0.5 * (f1 - f0) * t * t / duration);
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let white = (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            0.5 * phase.sin() + noise * white
        })
        .collect();
    let clip = AudioClip::new(samples, 16_000).map_err(|e| e.to_string())?;
    let spec = log_mel(&clip, &MelConfig::default()).map_err(|e| e.to_string())?;
    Ok(Heatmap {
        n_mels: spec.n_mels(),
        n_frames: spec.n_frames(),
        data: spec.into_data(),
    })
}

#[wasm_bindgen(js_name = toneHeatmap)]
pub fn tone_heatmap_js(f0: f64, f1: f64, duration: f64, noise: f64) -> Result<Heatmap, JsError> {
    tone_heatmap(f0, f1, duration, noise).map_err(|e| JsError::new(&e))
}

/// `[mean, sd, t, ci_lower, ci_upper, predictable (0/1), score]` for the given ratios.
pub fn ratio_bound(ratios: &[f64], alpha: f64) -> Result<Vec<f64>, String> {
    let repeats = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| RepeatResult::new(i, r, 1.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let t = t_critical(alpha, ratios.len().saturating_sub(1)).map_err(|e| e.to_string())?;
    let p = decide_pair("", "", repeats, alpha).map_err(|e| e.to_string())?;
    Ok(vec![
        p.mean_ratio,
        p.std_ratio,
        t,
        p.ci_lower,
        p.ci_upper,
        p.predictable as u8 as f64,
        p.score,
    ])
}

#[wasm_bindgen(js_name = ratioBound)]
pub fn ratio_bound_js(ratios: &[f64], alpha: f64) -> Result<Vec<f64>, JsError> {
    ratio_bound(ratios, alpha).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Scatter {
    am: Vec<f64>,
    recovered: Vec<f64>,
    r2: f64,
}

#[wasm_bindgen]
impl Scatter {
    pub fn am(&self) -> Vec<f64> {
        self.am.clone()
    }

    pub fn recovered(&self) -> Vec<f64> {
        self.recovered.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn r2(&self) -> f64 {
        self.r2
    }
}

/// Planted summary statistic against the AM value for `n_subjects` synthetic
/// subjects with one clip each.
pub fn planted_scatter(beta: f64, noise_std: f64, n_subjects: usize, seed: u64) -> Result<Scatter, String> {
    let spec = SyntheticSpec {
        n_subjects,
        clips_per_phoneme_per_subject: 1,
        phoneme_labels: vec!["a".into()],
        am_names: vec!["am".into()],
        planted: vec![PlantedEffect {
            phoneme: "a".into(),
            am: "am".into(),
            beta,
        }],
        noise_std,
        seed,
        n_mels: 16,
        n_frames: 16,
    };
    let data = generate(&spec).map_err(|e| e.to_string())?;
    let am: Vec<f64> = data.ams.iter().map(|v| v.values[0].1).collect();
    let recovered: Vec<f64> = data
        .clips
        .iter()
        .map(|c| recover(planted_summary(&c.spec, spec.band(0))))
        .collect();
    let n = am.len() as f64;
    let (mx, my) = (am.iter().sum::<f64>() / n, recovered.iter().sum::<f64>() / n);
    let sxy: f64 = am.iter().zip(&recovered).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = am.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = recovered.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    Ok(Scatter { am, recovered, r2 })
}

#[wasm_bindgen(js_name = plantedScatter)]
pub fn planted_scatter_js(beta: f64, noise_std: f64, n_subjects: usize, seed: u32) -> Result<Scatter, JsError> {
    planted_scatter(beta, noise_std, n_subjects, seed as u64).map_err(|e| JsError::new(&e))
}
