//! On-disk dataset layout.
//!
//! ```text
//! <root>/ams.csv            subject_id,<am names...>   (raw values), or
//! <root>/landmarks/*.csv    index,x,y,z per subject (file stem = subject id)
//! <root>/mels/index.tsv     file<TAB>subject_id<TAB>phoneme, PFMS files alongside, or
//! <root>/alignments/*.tsv + <root>/audio/<utterance_id>.wav
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::anthropometry::{
    compute_am_vector, normalize_ams, parse_landmarks, read_am_csv, AmDefinition, AmVector,
};
use crate::dsp::{fix_length, load_wav, log_mel, read_cache, write_cache, AudioClip, MelConfig};
use crate::error::{Error, Result};
use crate::segments::{load_alignment_tree, slice_clip, PhonemeAlignment};

use super::{Clip, Dataset};

pub const MEL_INDEX: &str = "index.tsv";

/// A labelled clip prior to pairing with subject AMs.
#[derive(Debug, Clone)]
pub struct LabelledClip {
    pub subject_id: String,
    pub phoneme: String,
    pub spec: crate::dsp::MelSpectrogram,
}

pub fn write_mel_cache(dir: impl AsRef<Path>, clips: &[LabelledClip]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = String::from("file\tsubject_id\tphoneme\n");
    for (i, c) in clips.iter().enumerate() {
        let name = format!("clip_{i:07}.pfms");
        write_cache(dir.join(&name), &c.spec)?;
        index.push_str(&format!("{name}\t{}\t{}\n", c.subject_id, c.phoneme));
    }
    let p = dir.join(MEL_INDEX);
    std::fs::write(&p, index).map_err(|e| Error::io(p, e))
}

pub fn read_mel_cache(dir: impl AsRef<Path>) -> Result<Vec<LabelledClip>> {
    let dir = dir.as_ref();
    let p = dir.join(MEL_INDEX);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                source_name: p.display().to_string(),
                row: i + 1,
                message: format!("expected 3 fields, got {}", f.len()),
            });
        }
        out.push(LabelledClip {
            subject_id: f[1].to_string(),
            phoneme: f[2].to_string(),
            spec: read_cache(dir.join(f[0]))?,
        });
    }
    Ok(out)
}

/// Slices every aligned phoneme out of `<audio_dir>/<utterance_id>.wav` and
/// converts it to a fixed-length log mel spectrogram. Intervals shorter than
/// one analysis window are skipped; the number skipped is returned.
pub fn extract_clips(
    audio_dir: impl AsRef<Path>,
    alignments: &[PhonemeAlignment],
    mel: &MelConfig,
) -> Result<(Vec<LabelledClip>, usize)> {
    let audio_dir = audio_dir.as_ref();
    let mut out = Vec::new();
    let mut skipped = 0;
    for al in alignments {
        let wav: AudioClip = load_wav(audio_dir.join(format!("{}.wav", al.utterance_id)))?;
        for e in &al.entries {
            let piece = slice_clip(&wav, e.start, e.end)?;
            match log_mel(&piece, mel) {
                Ok(spec) => out.push(LabelledClip {
                    subject_id: al.subject_id.clone(),
                    phoneme: e.label.clone(),
                    spec: fix_length(&spec, mel.target_frames),
                }),
                Err(Error::TooShort { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((out, skipped))
}

fn list_files(dir: &Path, ext: &str) -> Result<Vec<std::path::PathBuf>> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    Ok(v)
}

pub fn compute_cohort(landmarks_dir: impl AsRef<Path>, defs: &[AmDefinition]) -> Result<Vec<AmVector>> {
    list_files(landmarks_dir.as_ref(), "csv")?
        .into_iter()
        .map(|f| compute_am_vector(&parse_landmarks(&f)?, defs))
        .collect()
}

/// Loads AMs (z-normalized over the cohort) and clips from `root`.
pub fn load_dataset(root: impl AsRef<Path>, defs: &[AmDefinition], mel: &MelConfig) -> Result<Dataset> {
    let root = root.as_ref();
    let raw = if root.join("ams.csv").is_file() {
        read_am_csv(root.join("ams.csv"))?
    } else if root.join("landmarks").is_dir() {
        compute_cohort(root.join("landmarks"), defs)?
    } else {
        return Err(Error::InsufficientData(format!(
            "{}: neither ams.csv nor landmarks/ found",
            root.display()
        )));
    };
    let clips = if root.join("mels").join(MEL_INDEX).is_file() {
        read_mel_cache(root.join("mels"))?
    } else if root.join("alignments").exists() && root.join("audio").is_dir() {
        let als = load_alignment_tree(root.join("alignments"))?;
        let (clips, skipped) = extract_clips(root.join("audio"), &als, mel)?;
        if skipped > 0 {
            log::warn!("skipped {skipped} intervals shorter than one analysis window");
        }
        clips
    } else {
        return Err(Error::InsufficientData(format!(
            "{}: neither mels/index.tsv nor alignments/ + audio/ found",
            root.display()
        )));
    };
    assemble_dataset(&raw, clips)
}

/// Z-normalizes raw AMs over the cohort and groups clips by phoneme. Clips
/// whose subject has no AMs are dropped.
pub fn assemble_dataset(raw_ams: &[AmVector], clips: Vec<LabelledClip>) -> Result<Dataset> {
    let (normalized, _) = normalize_ams(raw_ams)?;
    let subjects: BTreeMap<String, AmVector> = normalized
        .into_iter()
        .map(|v| (v.subject_id.clone(), v))
        .collect();
    let mut by_phoneme: BTreeMap<String, Vec<Clip>> = BTreeMap::new();
    let mut orphans = 0usize;
    for c in clips {
        if !subjects.contains_key(&c.subject_id) {
            orphans += 1;
            continue;
        }
        by_phoneme.entry(c.phoneme).or_default().push(Clip {
            subject_id: c.subject_id,
            spec: c.spec,
        });
    }
    if orphans > 0 {
        log::warn!("dropped {orphans} clips whose subject has no AMs");
    }
    Dataset::new(subjects, by_phoneme)
}
