//! Results and marginals CSV files. Reals are written with 9 significant digits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PredictabilityMatrix;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 8] = [
    "phoneme",
    "am",
    "mean_ratio",
    "ci_lower",
    "ci_upper",
    "score",
    "predictable",
    "n_repeats",
];
pub const MARGINALS_HEADER: [&str; 4] = ["kind", "label", "mean_score", "rank"];

/// Formats like C's `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub phoneme: String,
    pub am: String,
    pub mean_ratio: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub score: f64,
    pub predictable: bool,
    pub n_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub kind: String,
    pub label: String,
    pub mean_score: f64,
    pub rank: usize,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

pub fn write_results_csv(path: impl AsRef<Path>, m: &PredictabilityMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(RESULTS_HEADER).map_err(|e| csv_err(path, e))?;
    for r in m.grid.values() {
        w.write_record([
            r.phoneme.clone(),
            r.am.clone(),
            fmt_sig9(r.mean_ratio),
            fmt_sig9(r.ci_lower),
            fmt_sig9(r.ci_upper),
            fmt_sig9(r.score),
            r.predictable.to_string(),
            r.repeats.len().to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_marginals_csv(path: impl AsRef<Path>, m: &PredictabilityMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(MARGINALS_HEADER).map_err(|e| csv_err(path, e))?;
    for (kind, ranked) in [("phoneme", m.ranked_phonemes()), ("am", m.ranked_ams())] {
        for (i, (label, score)) in ranked.into_iter().enumerate() {
            w.write_record([kind.to_string(), label, fmt_sig9(score), (i + 1).to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(Error::Format(format!(
            "{}: header {found:?}, expected {header:?}",
            path.display()
        )));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_err(path, e))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    read_rows(path.as_ref(), &RESULTS_HEADER)
}

pub fn read_marginals_csv(path: impl AsRef<Path>) -> Result<Vec<MarginalRow>> {
    read_rows(path.as_ref(), &MARGINALS_HEADER)
}
