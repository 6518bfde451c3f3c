use std::f64::consts::PI;

use phonoface::dsp::{frame_count, log_mel, AudioClip, MelConfig, MelFilterbank};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_log_mel(x: &[f64], cfg: &MelConfig) -> Vec<Vec<f64>> {
    let sr = cfg.sample_rate as f64;
    let win = (cfg.window_length * sr).round() as usize;
    let hop = (cfg.hop_length * sr).round() as usize;
    let n = cfg.fft_size;
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let (lo, hi) = (mel(cfg.f_min), mel(cfg.f_max));
    let pts: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| inv(lo + i as f64 * (hi - lo) / (cfg.n_mels as f64 + 1.0)))
        .collect();
    let mut frames = Vec::new();
    let mut start = 0;
    while start + win <= x.len() {
        let mut power = vec![0.0; n / 2 + 1];
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for t in 0..win {
                let w = 0.5 * (1.0 - (2.0 * PI * t as f64 / win as f64).cos());
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                re += w * x[start + t] * ang.cos();
                im += w * x[start + t] * ang.sin();
            }
            *p = re * re + im * im;
        }
        let row: Vec<f64> = (0..cfg.n_mels)
            .map(|m| {
                let mut e = 0.0;
                for (k, p) in power.iter().enumerate() {
                    let f = k as f64 * sr / n as f64;
                    let w = if f <= pts[m] || f >= pts[m + 2] {
                        0.0
                    } else if f <= pts[m + 1] {
                        (f - pts[m]) / (pts[m + 1] - pts[m])
                    } else {
                        (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1])
                    };
                    e += w * p;
                }
                (e + 1e-10).ln()
            })
            .collect();
        frames.push(row);
        start += hop;
    }
    frames
}

#[test]
fn log_mel_matches_naive_dft_reference() {
    let cfg = MelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let len = rng.random_range(400..1400);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = log_mel(&AudioClip::new(x.clone(), 16_000).unwrap(), &cfg).unwrap();
        let want = naive_log_mel(&x, &cfg);
        assert_eq!(got.n_frames(), want.len());
        for (t, row) in want.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                worst = worst.max((got.get(m, t) - v).abs());
            }
        }
    }
    assert!(worst < 1e-6, "max abs deviation {worst}");
}

#[test]
fn sine_localizes_to_nearest_filter() {
    let cfg = MelConfig::default();
    let x: Vec<f64> = (0..16_000)
        .map(|n| (2.0 * PI * 1000.0 * n as f64 / 16_000.0).sin())
        .collect();
    let spec = log_mel(&AudioClip::new(x, 16_000).unwrap(), &cfg).unwrap();
    let centers = MelFilterbank::from_config(&cfg).centers().to_vec();
    let nearest = (0..cfg.n_mels)
        .min_by(|&a, &b| (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs()))
        .unwrap();
    for t in 0..spec.n_frames() {
        let peak = (0..cfg.n_mels)
            .max_by(|&a, &b| spec.get(a, t).total_cmp(&spec.get(b, t)))
            .unwrap();
        assert_eq!(peak, nearest, "frame {t}");
    }
}

#[test]
fn one_second_gives_98_frames() {
    let spec = log_mel(&AudioClip::new(vec![0.1; 16_000], 16_000).unwrap(), &MelConfig::default()).unwrap();
    assert_eq!(spec.shape(), (64, 98));
}

proptest! {
    #[test]
    fn frame_count_formula(len in 400usize..5000, hop in 1usize..400) {
        let cfg = MelConfig { hop_length: hop as f64 / 16_000.0, ..MelConfig::default() };
        let spec = log_mel(&AudioClip::new(vec![0.01; len], 16_000).unwrap(), &cfg).unwrap();
        prop_assert_eq!(spec.n_frames(), 1 + (len - 400) / hop);
        prop_assert_eq!(spec.n_frames(), frame_count(len, 400, hop));
    }

    #[test]
    fn parseval_on_filterbank_input(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame: Vec<f64> = (0..512).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fft = rustfft::FftPlanner::new().plan_fft_forward(512);
        let p = phonoface::dsp::power_spectrum(&frame, &fft);
        let two_sided: f64 = p[0] + p[256] + 2.0 * p[1..256].iter().sum::<f64>();
        let energy: f64 = frame.iter().map(|x| x * x).sum();
        prop_assert!((two_sided / 512.0 - energy).abs() < 1e-9 * energy.max(1.0));
    }
}
