//! Phoneme alignments, per-phoneme audio slicing and the phoneme inventory.
//!
//! Alignment files are UTF-8 TSV with one row per phoneme interval:
//! `utterance_id<TAB>subject_id<TAB>label<TAB>start_sec<TAB>end_sec`.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::AudioClip;
use crate::error::{Error, Result};

/// Overlap between consecutive intervals tolerated before a row is rejected (seconds).
pub const OVERLAP_TOLERANCE: f64 = 0.005;

/// Paper default; overridable per run.
pub const DEFAULT_MIN_COUNT: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeInterval {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeAlignment {
    pub utterance_id: String,
    pub subject_id: String,
    pub entries: Vec<PhonemeInterval>,
}

struct Row {
    line: usize,
    utterance: String,
    subject: String,
    interval: PhonemeInterval,
}

fn parse_rows(text: &str, source_name: &str) -> Result<Vec<Row>> {
    let err = |line, message: String| Error::Parse {
        source_name: source_name.to_string(),
        row: line,
        message,
    };
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = raw.split('\t').collect();
        if f.len() != 5 {
            return Err(err(line, format!("expected 5 tab-separated fields, got {}", f.len())));
        }
        let time = |s: &str, what| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| err(line, format!("non-numeric {what} time {s:?}")))
        };
        let (start, end) = (time(f[3], "start")?, time(f[4], "end")?);
        let label = f[2].trim();
        if label.is_empty() {
            return Err(err(line, "empty phoneme label".into()));
        }
        if start < 0.0 {
            return Err(err(line, format!("negative start {start}")));
        }
        if end <= start {
            return Err(err(line, format!("end {end} is not after start {start}")));
        }
        rows.push(Row {
            line,
            utterance: f[0].trim().to_string(),
            subject: f[1].trim().to_string(),
            interval: PhonemeInterval {
                label: label.to_string(),
                start,
                end,
            },
        });
    }
    Ok(rows)
}

fn finish(rows: Vec<Row>, source_name: &str) -> Result<Vec<PhonemeAlignment>> {
    let mut by_utt: BTreeMap<String, (String, Vec<(usize, PhonemeInterval)>)> = BTreeMap::new();
    for r in rows {
        let slot = by_utt
            .entry(r.utterance.clone())
            .or_insert_with(|| (r.subject.clone(), Vec::new()));
        if slot.0 != r.subject {
            return Err(Error::Parse {
                source_name: source_name.to_string(),
                row: r.line,
                message: format!(
                    "utterance {} assigned to subjects {} and {}",
                    r.utterance, slot.0, r.subject
                ),
            });
        }
        slot.1.push((r.line, r.interval));
    }
    let mut out = Vec::with_capacity(by_utt.len());
    for (utt, (subject, mut items)) in by_utt {
        items.sort_by(|a, b| a.1.start.total_cmp(&b.1.start));
        for w in items.windows(2) {
            if w[1].1.start < w[0].1.end - OVERLAP_TOLERANCE {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    row: w[1].0,
                    message: format!(
                        "interval starting at {} overlaps previous ending at {}",
                        w[1].1.start, w[0].1.end
                    ),
                });
            }
        }
        out.push(PhonemeAlignment {
            utterance_id: utt,
            subject_id: subject,
            entries: items.into_iter().map(|(_, e)| e).collect(),
        });
    }
    Ok(out)
}

/// Parses TSV text that may cover several utterances; result is ordered by utterance id.
pub fn parse_alignments_str(text: &str, source_name: &str) -> Result<Vec<PhonemeAlignment>> {
    finish(parse_rows(text, source_name)?, source_name)
}

pub fn parse_alignments(path: impl AsRef<Path>) -> Result<Vec<PhonemeAlignment>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alignments_str(&text, &path.display().to_string())
}

/// Parses a single-utterance alignment file.
pub fn parse_alignment(path: impl AsRef<Path>) -> Result<PhonemeAlignment> {
    let path = path.as_ref();
    let mut all = parse_alignments(path)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        n => Err(Error::Parse {
            source_name: path.display().to_string(),
            row: 0,
            message: format!("expected exactly one utterance, found {n}"),
        }),
    }
}

/// Reads every `*.tsv` under `path` (or `path` itself when it is a file).
pub fn load_alignment_tree(path: impl AsRef<Path>) -> Result<Vec<PhonemeAlignment>> {
    let path = path.as_ref();
    if path.is_file() {
        return parse_alignments(path);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(parse_alignments(f)?);
    }
    Ok(out)
}

pub fn serialize_alignment(al: &PhonemeAlignment) -> String {
    let mut s = String::new();
    for e in &al.entries {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            al.utterance_id, al.subject_id, e.label, e.start, e.end
        ));
    }
    s
}

/// Samples `[round(start*sr), round(end*sr))`.
pub fn slice_clip(clip: &AudioClip, start: f64, end: f64) -> Result<AudioClip> {
    if !(start >= 0.0 && start < end && end <= clip.duration() + 1e-12) {
        return Err(Error::Range(format!(
            "interval ({start}, {end}) outside clip of {} s",
            clip.duration()
        )));
    }
    let sr = clip.sample_rate() as f64;
    let a = (start * sr).round() as usize;
    let b = ((end * sr).round() as usize).min(clip.len());
    if a >= b {
        return Err(Error::Range(format!(
            "interval ({start}, {end}) covers no samples"
        )));
    }
    AudioClip::new(clip.samples()[a..b].to_vec(), clip.sample_rate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeInventory {
    pub counts: BTreeMap<String, usize>,
    pub retained: BTreeSet<String>,
    pub min_count: usize,
}

impl PhonemeInventory {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_retained(&self, label: &str) -> bool {
        self.retained.contains(label)
    }

    /// Retained labels by descending count, ties broken by label.
    pub fn ranked(&self) -> Vec<(&str, usize)> {
        let mut v: Vec<_> = self.counts.iter().map(|(k, &c)| (k.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

pub fn inventory_from_labels<'a, I>(labels: I, min_count: usize) -> PhonemeInventory
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l.to_string()).or_insert(0) += 1;
    }
    let retained = counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(k, _)| k.clone())
        .collect();
    PhonemeInventory {
        counts,
        retained,
        min_count,
    }
}

pub fn build_inventory(alignments: &[PhonemeAlignment], min_count: usize) -> PhonemeInventory {
    inventory_from_labels(
        alignments
            .iter()
            .flat_map(|a| a.entries.iter().map(|e| e.label.as_str())),
        min_count,
    )
}
