//! Chance-level comparison and the one-sided confidence bound on the mean
//! estimator/chance MSE ratio over repeated random splits.
//!
//! For each (phoneme, AM) pair the repeats yield ratios `r_k = ε_k / ε^C_k`.
//! With `μ` the mean, `σ` the sample standard deviation and `ν = N - 1`,
//!
//! ```text
//! CI_l = μ - t_{1-α,ν} σ / √N
//! CI_u = μ + t_{1-α,ν} σ / √N
//! ```
//!
//! and the AM counts as predictable from the phoneme iff `CI_u < 1`.
//! `1 - CI_u` is the pair's score.

mod report;
mod student_t;

pub use report::{
    fmt_sig9, read_marginals_csv, read_results_csv, write_marginals_csv, write_results_csv,
    MarginalRow, ResultRow, MARGINALS_HEADER, RESULTS_HEADER,
};
pub use student_t::{beta_inc, cdf as t_cdf, ln_gamma, t_critical, upper_tail as t_upper_tail};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of repeats and significance level used by the study.
pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat_index: usize,
    /// Estimator MSE on the hypothesis-testing split.
    pub epsilon: f64,
    /// Chance-level MSE on the same split.
    pub epsilon_chance: f64,
    pub ratio: f64,
}

impl RepeatResult {
    pub fn new(repeat_index: usize, epsilon: f64, epsilon_chance: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Argument(format!("invalid estimator MSE {epsilon}")));
        }
        if !(epsilon_chance > 0.0) {
            return Err(Error::DegeneratePair {
                repeat: repeat_index,
            });
        }
        let ratio = epsilon / epsilon_chance;
        if !ratio.is_finite() {
            return Err(Error::DegeneratePair {
                repeat: repeat_index,
            });
        }
        Ok(Self {
            repeat_index,
            epsilon,
            epsilon_chance,
            ratio,
        })
    }
}

/// Constant predictor: mean of the training targets.
pub fn chance_estimator(train_targets: &[f64]) -> Result<f64> {
    if train_targets.is_empty() {
        return Err(Error::Argument("chance level of an empty training set".into()));
    }
    Ok(train_targets.iter().sum::<f64>() / train_targets.len() as f64)
}

/// Mean squared deviation of `test_targets` from the constant `c`.
pub fn chance_mse(c: f64, test_targets: &[f64]) -> Result<f64> {
    if test_targets.is_empty() {
        return Err(Error::Argument("chance MSE of an empty test set".into()));
    }
    Ok(test_targets.iter().map(|m| (c - m).powi(2)).sum::<f64>() / test_targets.len() as f64)
}

/// Mean and sample standard deviation (N - 1 divisor). Identical inputs give
/// exactly that value and zero spread.
pub fn mean_and_sample_std(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 values, got {}",
            xs.len()
        )));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Ok((xs[0], 0.0));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// One-sided confidence bounds on the mean ratio.
pub fn ci_bounds(ratios: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let (mean, sd) = mean_and_sample_std(ratios)?;
    let t = t_critical(alpha, ratios.len() - 1)?;
    let half = t * sd / (ratios.len() as f64).sqrt();
    Ok((mean - half, mean + half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTestResult {
    pub phoneme: String,
    pub am: String,
    pub repeats: Vec<RepeatResult>,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub predictable: bool,
    /// `1 - ci_upper`.
    pub score: f64,
}

pub fn decide_pair(
    phoneme: &str,
    am: &str,
    repeats: Vec<RepeatResult>,
    alpha: f64,
) -> Result<PairTestResult> {
    if let Some(r) = repeats.iter().find(|r| !(r.epsilon_chance > 0.0)) {
        return Err(Error::DegeneratePair {
            repeat: r.repeat_index,
        });
    }
    let ratios: Vec<f64> = repeats.iter().map(|r| r.ratio).collect();
    let (mean_ratio, std_ratio) = mean_and_sample_std(&ratios)?;
    let (ci_lower, ci_upper) = ci_bounds(&ratios, alpha)?;
    Ok(PairTestResult {
        phoneme: phoneme.to_string(),
        am: am.to_string(),
        repeats,
        mean_ratio,
        std_ratio,
        ci_lower,
        ci_upper,
        predictable: ci_upper < 1.0,
        score: 1.0 - ci_upper,
    })
}

/// The phoneme × AM grid of pair results with unweighted marginal mean scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictabilityMatrix {
    pub grid: BTreeMap<(String, String), PairTestResult>,
    pub phoneme_means: BTreeMap<String, f64>,
    pub am_means: BTreeMap<String, f64>,
}

fn ranked(map: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut v: Vec<_> = map.iter().map(|(k, &s)| (k.clone(), s)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

impl PredictabilityMatrix {
    pub fn get(&self, phoneme: &str, am: &str) -> Option<&PairTestResult> {
        self.grid.get(&(phoneme.to_string(), am.to_string()))
    }

    /// Phonemes by descending mean score (ties by label).
    pub fn ranked_phonemes(&self) -> Vec<(String, f64)> {
        ranked(&self.phoneme_means)
    }

    pub fn ranked_ams(&self) -> Vec<(String, f64)> {
        ranked(&self.am_means)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Builds the matrix and its row/column means. When `requested` labels are
/// given, any phoneme or AM without a single entry is left out of the
/// marginals and logged.
pub fn aggregate(
    entries: impl IntoIterator<Item = PairTestResult>,
    requested_phonemes: &[String],
    requested_ams: &[String],
) -> PredictabilityMatrix {
    let grid: BTreeMap<_, _> = entries
        .into_iter()
        .map(|r| ((r.phoneme.clone(), r.am.clone()), r))
        .collect();
    let mut rows: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut cols: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((p, a), r) in &grid {
        let e = rows.entry(p.clone()).or_default();
        e.0 += r.score;
        e.1 += 1;
        let e = cols.entry(a.clone()).or_default();
        e.0 += r.score;
        e.1 += 1;
    }
    for (kind, requested, present) in [
        ("phoneme", requested_phonemes, &rows),
        ("AM", requested_ams, &cols),
    ] {
        let missing: BTreeSet<_> = requested.iter().filter(|l| !present.contains_key(*l)).collect();
        if !missing.is_empty() {
            log::warn!("no results for {kind} marginal(s) {missing:?}; omitted");
        }
    }
    let mean = |m: BTreeMap<String, (f64, usize)>| {
        m.into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect::<BTreeMap<_, _>>()
    };
    PredictabilityMatrix {
        grid,
        phoneme_means: mean(rows),
        am_means: mean(cols),
    }
}
