//! Repeated-split study over (phoneme, AM) pairs.
//!
//! Every repeat of every pair draws its randomness from
//! [`pair_seed`]`(base_seed, phoneme, am, repeat)`, so results do not depend
//! on scheduling order or worker count.

mod dataset;

pub use dataset::{
    assemble_dataset, compute_cohort, extract_clips, load_dataset, read_mel_cache, write_mel_cache, LabelledClip,
    MEL_INDEX,
};

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anthropometry::AmVector;
use crate::dsp::{MelConfig, MelNormalizer, MelSpectrogram};
use crate::error::{Error, Result};
use crate::estimator::{mse, predict_set, train, Example, RegressorConfig};
use crate::segments::{inventory_from_labels, PhonemeInventory, DEFAULT_MIN_COUNT};
use crate::stats::{
    aggregate, chance_estimator, chance_mse, decide_pair, PairTestResult, PredictabilityMatrix,
    RepeatResult,
};

pub const VERSION_TAG: &str = concat!("phonoface ", env!("CARGO_PKG_VERSION"));

/// Minimum pool size for a pair.
pub const MIN_POOL: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub subject_id: String,
    pub spec: MelSpectrogram,
}

/// Normalized AMs per subject and log mel clips per phoneme.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    subjects: BTreeMap<String, AmVector>,
    clips: BTreeMap<String, Vec<Clip>>,
}

impl Dataset {
    pub fn new(subjects: BTreeMap<String, AmVector>, clips: BTreeMap<String, Vec<Clip>>) -> Result<Self> {
        let mut shape = None;
        for (ph, list) in &clips {
            for c in list {
                if !subjects.contains_key(&c.subject_id) {
                    return Err(Error::InsufficientData(format!(
                        "clip of /{ph}/ references unknown subject {}",
                        c.subject_id
                    )));
                }
                match shape {
                    None => shape = Some(c.spec.shape()),
                    Some(s) if s != c.spec.shape() => {
                        return Err(Error::Shape(format!(
                            "clip shapes {:?} and {:?} differ",
                            s,
                            c.spec.shape()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { subjects, clips })
    }

    pub fn subjects(&self) -> &BTreeMap<String, AmVector> {
        &self.subjects
    }

    pub fn clips(&self) -> &BTreeMap<String, Vec<Clip>> {
        &self.clips
    }

    pub fn phonemes(&self) -> impl Iterator<Item = &str> {
        self.clips.keys().map(String::as_str)
    }

    /// AM names in definition order, taken from the first subject.
    pub fn am_names(&self) -> Vec<String> {
        self.subjects
            .values()
            .next()
            .map(|v| v.names().map(str::to_string).collect())
            .unwrap_or_default()
    }

    pub fn inventory(&self, min_count: usize) -> PhonemeInventory {
        inventory_from_labels(
            self.clips
                .iter()
                .flat_map(|(p, v)| std::iter::repeat_n(p.as_str(), v.len())),
            min_count,
        )
    }

    /// Clips of `phoneme` whose subject carries `am`, with the AM as target.
    pub fn pool(&self, phoneme: &str, am: &str) -> Vec<(&Clip, f64)> {
        self.clips
            .get(phoneme)
            .map(|v| {
                v.iter()
                    .filter_map(|c| self.subjects[&c.subject_id].get(am).map(|t| (c, t)))
                    .collect()
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub sample_cap: usize,
    /// Train, model-selection and hypothesis-testing fractions.
    pub fractions: [f64; 3],
    pub n_repeats: usize,
    pub alpha: f64,
    pub base_seed: u64,
    /// Keep every subject's clips inside a single split.
    pub subject_disjoint: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            sample_cap: 5000,
            fractions: [0.7, 0.1, 0.2],
            n_repeats: 10,
            alpha: 0.05,
            base_seed: 0,
            subject_disjoint: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Argument("split fractions must be positive".into()));
        }
        if (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Argument("split fractions must sum to 1".into()));
        }
        if self.n_repeats < 2 {
            return Err(Error::Argument("at least 2 repeats are required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Argument("alpha must lie in (0, 0.5)".into()));
        }
        if self.sample_cap < MIN_POOL {
            return Err(Error::Argument(format!("sample_cap must be at least {MIN_POOL}")));
        }
        Ok(())
    }
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const SEED_RULE: &str = "fnv1a64(le64(base_seed) | 0x1f | utf8(phoneme) | 0x1f | utf8(am) | 0x1f | le64(repeat)); \
split shuffle = ChaCha8(seed); estimator seed = splitmix64(seed + estimator.seed)";

/// Seed for one repeat of one pair.
pub fn pair_seed(base_seed: u64, phoneme: &str, am: &str, repeat: usize) -> u64 {
    let mut buf = Vec::with_capacity(32 + phoneme.len() + am.len());
    buf.extend_from_slice(&base_seed.to_le_bytes());
    buf.push(0x1f);
    buf.extend_from_slice(phoneme.as_bytes());
    buf.push(0x1f);
    buf.extend_from_slice(am.as_bytes());
    buf.push(0x1f);
    buf.extend_from_slice(&(repeat as u64).to_le_bytes());
    fnv1a64(&buf)
}

pub fn estimator_seed(pair_seed: u64, cfg: &RegressorConfig) -> u64 {
    splitmix64(pair_seed.wrapping_add(cfg.seed))
}

/// Index sets into a sample pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val1: Vec<usize>,
    pub val2: Vec<usize>,
}

impl Splits {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val1.len(), self.val2.len())
    }
}

fn floor_frac(f: f64, n: usize) -> usize {
    (f * n as f64 + 1e-9).floor() as usize
}

/// Shuffles `0..pool_len`, keeps the first `sample_cap`, and cuts it into
/// `floor(f_v1 n)` / `floor(f_v2 n)` held-out indices with the remainder for training.
pub fn make_splits(pool_len: usize, spec: &SplitSpec, seed: u64) -> Result<Splits> {
    if pool_len < MIN_POOL {
        return Err(Error::InsufficientData(format!(
            "pool of {pool_len} samples is below the minimum of {MIN_POOL}"
        )));
    }
    let mut idx: Vec<usize> = (0..pool_len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(spec.sample_cap);
    let n = idx.len();
    let n1 = floor_frac(spec.fractions[1], n);
    let n2 = floor_frac(spec.fractions[2], n);
    let val2 = idx.split_off(n - n2);
    let val1 = idx.split_off(n - n2 - n1);
    Ok(Splits {
        train: idx,
        val1,
        val2,
    })
}

/// Like [`make_splits`] but assigns whole subjects: subjects are shuffled,
/// then the hypothesis-testing and model-selection splits are filled in turn
/// until each reaches its target size.
pub fn make_subject_splits(subject_of: &[&str], spec: &SplitSpec, seed: u64) -> Result<Splits> {
    if subject_of.len() < MIN_POOL {
        return Err(Error::InsufficientData(format!(
            "pool of {} samples is below the minimum of {MIN_POOL}",
            subject_of.len()
        )));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in subject_of.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut subjects: Vec<&str> = groups.keys().copied().collect();
    if subjects.len() < 3 {
        return Err(Error::InsufficientData(
            "subject-disjoint splits need at least 3 subjects".into(),
        ));
    }
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken = Vec::new();
    for s in subjects {
        if taken.len() >= spec.sample_cap {
            break;
        }
        taken.push(s);
    }
    let n: usize = taken.iter().map(|s| groups[s].len()).sum::<usize>().min(spec.sample_cap);
    let (t1, t2) = (floor_frac(spec.fractions[1], n).max(1), floor_frac(spec.fractions[2], n).max(1));
    let mut out = Splits {
        train: Vec::new(),
        val1: Vec::new(),
        val2: Vec::new(),
    };
    let mut used = 0usize;
    for s in taken {
        let g = &groups[s];
        if used + g.len() > spec.sample_cap {
            break;
        }
        used += g.len();
        let dst = if out.val2.len() < t2 {
            &mut out.val2
        } else if out.val1.len() < t1 {
            &mut out.val1
        } else {
            &mut out.train
        };
        dst.extend_from_slice(g);
    }
    if out.train.is_empty() || out.val1.is_empty() || out.val2.is_empty() {
        return Err(Error::InsufficientData(
            "too few subjects to populate all three splits".into(),
        ));
    }
    Ok(out)
}

/// Everything a repeat derives before training: splits, normalization fitted
/// on the training split, and the chance level.
#[derive(Debug, Clone)]
pub struct RepeatPlan {
    pub seed: u64,
    pub splits: Splits,
    pub normalizer: MelNormalizer,
    pub chance_level: f64,
}

pub fn plan_repeat(
    pool: &[(&Clip, f64)],
    phoneme: &str,
    am: &str,
    spec: &SplitSpec,
    repeat: usize,
) -> Result<RepeatPlan> {
    let seed = pair_seed(spec.base_seed, phoneme, am, repeat);
    let splits = if spec.subject_disjoint {
        let subjects: Vec<&str> = pool.iter().map(|(c, _)| c.subject_id.as_str()).collect();
        make_subject_splits(&subjects, spec, seed)?
    } else {
        make_splits(pool.len(), spec, seed)?
    };
    let normalizer = MelNormalizer::fit(splits.train.iter().map(|&i| &pool[i].0.spec))?;
    let train_targets: Vec<f64> = splits.train.iter().map(|&i| pool[i].1).collect();
    let chance_level = chance_estimator(&train_targets)?;
    Ok(RepeatPlan {
        seed,
        splits,
        normalizer,
        chance_level,
    })
}

fn as_examples(v: &[(MelSpectrogram, f64)]) -> Vec<Example<'_>> {
    v.iter().map(|(s, t)| (s, *t)).collect()
}

fn run_repeat(
    pool: &[(&Clip, f64)],
    phoneme: &str,
    am: &str,
    spec: &SplitSpec,
    cfg: &RegressorConfig,
    repeat: usize,
) -> Result<RepeatResult> {
    let plan = plan_repeat(pool, phoneme, am, spec, repeat)?;
    let prep = |idx: &[usize]| -> Result<Vec<(MelSpectrogram, f64)>> {
        idx.iter()
            .map(|&i| Ok((plan.normalizer.apply(&pool[i].0.spec)?, pool[i].1)))
            .collect()
    };
    let (tr, v1, v2) = (
        prep(&plan.splits.train)?,
        prep(&plan.splits.val1)?,
        prep(&plan.splits.val2)?,
    );
    let cfg = RegressorConfig {
        seed: estimator_seed(plan.seed, cfg),
        ..cfg.clone()
    };
    let report = train(&cfg, &as_examples(&tr), &as_examples(&v1))?;
    let test_specs: Vec<&MelSpectrogram> = v2.iter().map(|(s, _)| s).collect();
    let test_targets: Vec<f64> = v2.iter().map(|(_, t)| *t).collect();
    let preds = predict_set(&report.selected_params, &test_specs)?;
    let epsilon = mse(&preds, &test_targets)?;
    let epsilon_chance = chance_mse(plan.chance_level, &test_targets)?;
    RepeatResult::new(repeat, epsilon, epsilon_chance)
}

/// Trains and tests one pair over `spec.n_repeats` random splits.
pub fn run_pair(
    dataset: &Dataset,
    phoneme: &str,
    am: &str,
    spec: &SplitSpec,
    cfg: &RegressorConfig,
) -> Result<PairTestResult> {
    spec.validate()?;
    cfg.validate()?;
    let pool = dataset.pool(phoneme, am);
    let ctx = |repeat: usize| {
        move |e: Error| Error::Pair {
            phoneme: phoneme.to_string(),
            am: am.to_string(),
            repeat,
            source: Box::new(e),
        }
    };
    if pool.len() < MIN_POOL {
        return Err(ctx(0)(Error::InsufficientData(format!(
            "pool of {} samples is below the minimum of {MIN_POOL}",
            pool.len()
        ))));
    }
    let repeats = (0..spec.n_repeats)
        .into_par_iter()
        .map(|r| run_repeat(&pool, phoneme, am, spec, cfg, r).map_err(ctx(r)))
        .collect::<Result<Vec<_>>>()?;
    decide_pair(phoneme, am, repeats, spec.alpha).map_err(|e| match e {
        Error::DegeneratePair { repeat } => ctx(repeat)(Error::DegeneratePair { repeat }),
        other => ctx(0)(other),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairFilter {
    pub phonemes: Option<Vec<String>>,
    pub ams: Option<Vec<String>>,
}

/// Run configuration file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Dataset root; relative paths resolve against the config file's directory.
    pub dataset: PathBuf,
    pub am_definitions: Option<PathBuf>,
    pub min_count: usize,
    pub mel: MelConfig,
    pub split: SplitSpec,
    pub estimator: RegressorConfig,
    pub pairs: PairFilter,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("."),
            am_definitions: None,
            min_count: DEFAULT_MIN_COUNT,
            mel: MelConfig::default(),
            split: SplitSpec::default(),
            estimator: RegressorConfig::default(),
            pairs: PairFilter::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.dataset.is_relative() {
            cfg.dataset = base.join(&cfg.dataset);
        }
        if let Some(d) = cfg.am_definitions.as_mut() {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub phoneme: String,
    pub am: String,
    pub seeds: Vec<u64>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Reproducibility record written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed_rule: String,
    pub split: SplitSpec,
    pub estimator: RegressorConfig,
    pub pairs: Vec<PairRecord>,
    pub workers: usize,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixRun {
    pub matrix: PredictabilityMatrix,
    pub manifest: RunManifest,
}

/// Pairs selected by the filter among phonemes meeting `min_count`.
pub fn select_pairs(dataset: &Dataset, filter: &PairFilter, min_count: usize) -> Vec<(String, String)> {
    let inv = dataset.inventory(min_count);
    let want = |allow: &Option<Vec<String>>, x: &str| allow.as_ref().is_none_or(|v| v.iter().any(|a| a == x));
    let ams: Vec<String> = dataset
        .am_names()
        .into_iter()
        .filter(|a| want(&filter.ams, a))
        .collect();
    inv.retained
        .iter()
        .filter(|p| want(&filter.phonemes, p))
        .flat_map(|p| ams.iter().map(move |a| (p.clone(), a.clone())))
        .collect()
}

/// Runs every selected pair on a pool of `workers` threads. Failed pairs are
/// recorded in the manifest; the run fails only if every pair fails.
pub fn run_matrix(
    dataset: &Dataset,
    spec: &SplitSpec,
    cfg: &RegressorConfig,
    filter: &PairFilter,
    min_count: usize,
    workers: usize,
) -> Result<MatrixRun> {
    spec.validate()?;
    cfg.validate()?;
    let pairs = select_pairs(dataset, filter, min_count);
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no (phoneme, AM) pairs meet the selection".into()));
    }
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Run(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<PairTestResult>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(p, a)| run_pair(dataset, p, a, spec, cfg))
            .collect()
    });
    let mut records = Vec::with_capacity(pairs.len());
    let mut ok = Vec::new();
    let mut first_error = None;
    for ((p, a), out) in pairs.iter().zip(outcomes) {
        let seeds = (0..spec.n_repeats)
            .map(|r| pair_seed(spec.base_seed, p, a, r))
            .collect();
        let (status, error) = match out {
            Ok(r) => {
                ok.push(r);
                ("ok", None)
            }
            Err(e) => {
                log::warn!("{e}");
                let msg = e.to_string();
                first_error.get_or_insert(e);
                ("failed", Some(msg))
            }
        };
        records.push(PairRecord {
            phoneme: p.clone(),
            am: a.clone(),
            seeds,
            status: status.into(),
            error,
        });
    }
    if let (true, Some(e)) = (ok.is_empty(), first_error) {
        return Err(Error::Run(format!("all {} pairs failed; first: {e}", records.len())));
    }
    let phonemes: Vec<String> = pairs.iter().map(|(p, _)| p.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let ams: Vec<String> = pairs.iter().map(|(_, a)| a.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let matrix = aggregate(ok, &phonemes, &ams);
    Ok(MatrixRun {
        matrix,
        manifest: RunManifest {
            version: VERSION_TAG.into(),
            seed_rule: SEED_RULE.into(),
            split: spec.clone(),
            estimator: cfg.clone(),
            pairs: records,
            workers: workers.max(1),
            elapsed_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

/// Writes `results.csv`, `marginals.csv` and `manifest.json` into `out_dir`.
pub fn write_run_outputs(out_dir: impl AsRef<Path>, run: &MatrixRun) -> Result<()> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    crate::stats::write_results_csv(out.join("results.csv"), &run.matrix)?;
    crate::stats::write_marginals_csv(out.join("marginals.csv"), &run.matrix)?;
    let json = serde_json::to_string_pretty(&run.manifest)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let p = out.join("manifest.json");
    std::fs::write(&p, json).map_err(|e| Error::io(p, e))
}
