use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phonoface::anthropometry::{compute_am_vector, load_am_definitions, parse_landmarks, write_am_csv};
use phonoface::dsp::MelConfig;
use phonoface::experiment::{extract_clips, load_dataset, run_matrix, write_mel_cache, write_run_outputs, RunConfig};
use phonoface::segments::{build_inventory, load_alignment_tree, DEFAULT_MIN_COUNT};
use phonoface::stats::{fmt_sig9, read_marginals_csv, read_results_csv};
use phonoface::synthgen::{generate, SyntheticSpec};
use phonoface::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Phoneme-level predictability of facial measurements from speech.
#[derive(Debug, Parser)]
#[command(name = "phonoface", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slice aligned phonemes out of WAV files and cache fixed-length log mel spectrograms.
    ExtractMel {
        /// Directory holding <utterance_id>.wav files.
        #[arg(long)]
        audio_dir: PathBuf,
        /// Alignment TSV file or directory of TSV files.
        #[arg(long)]
        align: PathBuf,
        /// Output cache directory (index.tsv plus one .pfms file per clip).
        #[arg(long)]
        out_cache: PathBuf,
        /// JSON mel configuration; defaults apply to omitted fields.
        #[arg(long)]
        mel_config: Option<PathBuf>,
    },
    /// Compute anthropometric measurements for every landmark file in a directory.
    ComputeAm {
        /// Directory of per-subject landmark CSV files (index,x,y,z).
        #[arg(long)]
        landmarks_dir: PathBuf,
        /// JSON list of measurement definitions.
        #[arg(long)]
        ams: PathBuf,
        /// Output CSV (subject_id, one column per measurement, raw values).
        #[arg(long)]
        out: PathBuf,
    },
    /// Count phoneme occurrences in alignments and mark those meeting the minimum count.
    Inventory {
        /// Alignment TSV file or directory of TSV files.
        #[arg(long)]
        align: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
        min_count: usize,
    },
    /// Generate a synthetic dataset with planted effects.
    Synth {
        /// JSON synthetic dataset specification.
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and test every selected (phoneme, measurement) pair.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv, marginals.csv and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of available cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print ranked marginals and the top pairs from a finished run.
    Report {
        /// Run output directory or results.csv path.
        #[arg(long)]
        results: PathBuf,
        /// Number of top pairs to list.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> phonoface::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn extract_mel(audio_dir: &Path, align: &Path, out: &Path, mel: Option<&Path>) -> phonoface::Result<()> {
    let mel: MelConfig = match mel {
        Some(p) => read_json(p)?,
        None => MelConfig::default(),
    };
    mel.validate()?;
    let alignments = load_alignment_tree(align)?;
    let (clips, skipped) = extract_clips(audio_dir, &alignments, &mel)?;
    write_mel_cache(out, &clips)?;
    eprintln!(
        "wrote {} clips from {} utterances to {} ({skipped} too short, skipped)",
        clips.len(),
        alignments.len(),
        out.display()
    );
    Ok(())
}

fn compute_am(landmarks_dir: &Path, ams: &Path, out: &Path) -> phonoface::Result<()> {
    let defs = load_am_definitions(ams)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(landmarks_dir)
        .map_err(|e| Error::Format(format!("{}: {e}", landmarks_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let rows = files
        .iter()
        .map(|f| {
            compute_am_vector(&parse_landmarks(f)?, &defs)
                .map_err(|e| Error::Format(format!("{}: {e}", f.display())))
        })
        .collect::<phonoface::Result<Vec<_>>>()?;
    write_am_csv(out, &rows)?;
    eprintln!("wrote {} measurements for {} subjects to {}", defs.len(), rows.len(), out.display());
    Ok(())
}

fn inventory(align: &Path, min_count: usize) -> phonoface::Result<()> {
    let inv = build_inventory(&load_alignment_tree(align)?, min_count);
    println!("{:<12} {:>10}  retained", "phoneme", "count");
    for (label, count) in inv.ranked() {
        println!("{label:<12} {count:>10}  {}", if inv.is_retained(label) { "yes" } else { "no" });
    }
    eprintln!("{} of {} phonemes have at least {min_count} occurrences", inv.retained.len(), inv.counts.len());
    Ok(())
}

fn synth(spec: &Path, out: &Path) -> phonoface::Result<()> {
    let spec: SyntheticSpec = read_json(spec)?;
    let data = generate(&spec)?;
    data.write(out)?;
    eprintln!("wrote {} subjects and {} clips to {}", data.ams.len(), data.clips.len(), out.display());
    Ok(())
}

fn run(config: &Path, out: &Path, workers: usize) -> phonoface::Result<()> {
    let cfg = RunConfig::load(config)?;
    let defs = match &cfg.am_definitions {
        Some(p) => load_am_definitions(p)?,
        None => phonoface::anthropometry::table1_definitions(),
    };
    let dataset = load_dataset(&cfg.dataset, &defs, &cfg.mel)?;
    let result = run_matrix(&dataset, &cfg.split, &cfg.estimator, &cfg.pairs, cfg.min_count, workers)?;
    write_run_outputs(out, &result)?;
    let failed = result.manifest.pairs.iter().filter(|p| p.status != "ok").count();
    eprintln!(
        "{} pairs tested, {failed} failed, {:.1}s; outputs in {}",
        result.matrix.len(),
        result.manifest.elapsed_seconds,
        out.display()
    );
    Ok(())
}

fn report(results: &Path, top: usize) -> phonoface::Result<()> {
    let (results_csv, dir) = if results.is_dir() {
        (results.join("results.csv"), results.to_path_buf())
    } else {
        (results.to_path_buf(), results.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let mut rows = read_results_csv(&results_csv)?;
    let marginals_csv = dir.join("marginals.csv");
    if marginals_csv.is_file() {
        let marginals = read_marginals_csv(&marginals_csv)?;
        for (kind, title) in [("phoneme", "Phonemes"), ("am", "Measurements")] {
            println!("{title} by mean score (1 - CI_u):");
            for m in marginals.iter().filter(|m| m.kind == kind) {
                println!("  {:>3}. {:<12} {:>12}", m.rank, m.label, fmt_sig9(m.mean_score));
            }
            println!();
        }
    }
    rows.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.phoneme.cmp(&b.phoneme))
            .then_with(|| a.am.cmp(&b.am))
    });
    println!("Top {} pairs:", top.min(rows.len()));
    println!("  {:<10} {:<12} {:>12} {:>12}  predictable", "phoneme", "am", "mean_ratio", "score");
    for r in rows.iter().take(top) {
        println!(
            "  {:<10} {:<12} {:>12} {:>12}  {}",
            r.phoneme,
            r.am,
            fmt_sig9(r.mean_ratio),
            fmt_sig9(r.score),
            r.predictable
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::ExtractMel {
            audio_dir,
            align,
            out_cache,
            mel_config,
        } => extract_mel(audio_dir, align, out_cache, mel_config.as_deref()),
        Command::ComputeAm { landmarks_dir, ams, out } => compute_am(landmarks_dir, ams, out),
        Command::Inventory { align, min_count } => inventory(align, *min_count),
        Command::Synth { spec, out } => synth(spec, out),
        Command::Run { config, out, workers } => {
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if workers == 0 {
                eprintln!("error: --workers must be at least 1");
                return ExitCode::from(EXIT_USAGE);
            }
            run(config, out, workers)
        }
        Command::Report { results, top } => report(results, *top),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_runtime() { EXIT_RUNTIME } else { EXIT_DATA })
        }
    }
}
