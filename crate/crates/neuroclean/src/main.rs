use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neuroclean::io::{read_json, read_recording, sidecar_path, write_json, write_recording, IoError};
use neuroclean::run::{run_to_dir, stage_name_from_path, RunError, SystemClock};
use neuroclean_core::ml::{evaluate_pipeline_steps, Band, EvalConfig};
use neuroclean_core::model::{NRemove, PipelineConfig, Recording};
use neuroclean_core::pipeline::RunOptions;
use neuroclean_core::qa::{one_over_f_similarity, snr_db};
use neuroclean_core::synth::{generate, SynthSpec};
use serde::Serialize;

/// Unsupervised cleaning of multichannel electrophysiology recordings.
#[derive(Debug, Parser)]
#[command(name = "neuroclean", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean one recording and write the result, stage log and optional extras.
    Run {
        /// Little-endian f32 payload (`.ncr`).
        #[arg(long)]
        input: PathBuf,
        /// JSON sidecar. Defaults to the input path with a `.json` extension.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// JSON file whose keys are PipelineConfig field names. Missing keys take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Also cut trials around the recording's events.
        #[arg(long)]
        epoch: bool,
        /// Write the raw input and each stage's output as `NN_stage.ncr`.
        #[arg(long)]
        keep_intermediates: bool,
        /// Overrides `random_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `line_freq_hz` (50 or 60).
        #[arg(long)]
        line_freq: Option<f64>,
        /// Overrides `zapline_n_remove`: `auto` or a component count.
        #[arg(long)]
        zapline_nremove: Option<NRemove>,
        /// Overrides `dbscan_eps`.
        #[arg(long)]
        dbscan_eps: Option<f64>,
        /// Overrides `dbscan_min_samples`.
        #[arg(long)]
        dbscan_min_samples: Option<usize>,
        /// Overrides `mara_standardize`.
        #[arg(long, value_parser = parse_on_off)]
        mara_standardize: Option<bool>,
    },
    /// Compare two recordings of the same shape.
    Qa {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
    },
    /// Decode trial classes from each `.ncr` in a directory, one stage per file.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Comma-separated bands: theta, alpha, beta, low_gamma, high_gamma,
        /// low_ripple, high_ripple, multi_unit, full.
        #[arg(long, value_delimiter = ',', value_parser = parse_band)]
        bands: Vec<Band>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic recording with a ground-truth manifest.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(format!("expected on or off, got {s:?}")),
    }
}

fn parse_band(s: &str) -> Result<Band, String> {
    s.parse().map_err(|e: neuroclean_core::error::Error| e.to_string())
}

enum Failure {
    /// Bad input, configuration or usage (exit 1).
    Validation(String),
    /// A processing stage failed (exit 2).
    Fatal(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn load(data: &Path, sidecar: Option<&Path>) -> Result<Recording, Failure> {
    let sidecar = sidecar.map_or_else(|| sidecar_path(data), Path::to_path_buf);
    Ok(read_recording(data, &sidecar)?)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            input,
            sidecar,
            config,
            output,
            epoch,
            keep_intermediates,
            seed,
            line_freq,
            zapline_nremove,
            dbscan_eps,
            dbscan_min_samples,
            mara_standardize,
        } => {
            let recording = load(&input, sidecar.as_deref())?;
            let mut cfg: PipelineConfig = match config {
                Some(path) => read_json(&path)?,
                None => PipelineConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.random_seed = seed;
            }
            if line_freq.is_some() {
                cfg.line_freq_hz = line_freq;
            }
            if let Some(n) = zapline_nremove {
                cfg.zapline_n_remove = n;
            }
            if let Some(eps) = dbscan_eps {
                cfg.dbscan_eps = eps;
            }
            if let Some(m) = dbscan_min_samples {
                cfg.dbscan_min_samples = m;
            }
            if let Some(on) = mara_standardize {
                cfg.mara_standardize = on;
            }
            let opts = RunOptions {
                keep_intermediates,
                epoch,
            };
            let (run, artifacts) =
                run_to_dir(&recording, &cfg, opts, &output, &mut SystemClock::default()).map_err(|e| match e {
                    RunError::Stage { .. } => Failure::Fatal(e.to_string()),
                    RunError::Io(_) | RunError::Invalid(_) => Failure::Validation(e.to_string()),
                })?;
            println!(
                "cleaned {} of {} channels kept, {} stages logged to {}",
                run.recording.active_channels().len(),
                run.recording.n_channels(),
                run.reports.len(),
                artifacts.log.display()
            );
            Ok(())
        }
        Command::Qa { before, after } => {
            #[derive(Serialize)]
            struct Summary {
                snr_db: Option<f64>,
                one_over_f_before: f64,
                one_over_f_after: f64,
            }
            let before = load(&before, None)?;
            let after = load(&after, None)?;
            let invalid = |e: neuroclean_core::error::Error| Failure::Validation(e.to_string());
            let snr = snr_db(&before, &after).map_err(invalid)?;
            let summary = Summary {
                snr_db: snr.is_finite().then_some(snr),
                one_over_f_before: one_over_f_similarity(&before).map_err(invalid)?,
                one_over_f_after: one_over_f_similarity(&after).map_err(invalid)?,
            };
            println!("{}", serde_json::to_string_pretty(&summary).expect("plain numbers serialize"));
            Ok(())
        }
        Command::Eval {
            input,
            report,
            bands,
            repeats,
            seed,
        } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&input)
                .map_err(|e| Failure::Validation(format!("{}: {e}", input.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "ncr"))
                .collect();
            files.sort();
            // A run directory also holds cleaned/epoched outputs; keep only
            // the numbered stage files when there are any.
            let numbered = |p: &PathBuf| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(|c: char| c.is_ascii_digit()));
            if files.iter().any(numbered) {
                files.retain(numbered);
            }
            if files.is_empty() {
                return Err(Failure::Validation(format!("no .ncr files in {}", input.display())));
            }
            let mut stages = Vec::with_capacity(files.len());
            for path in &files {
                stages.push((stage_name_from_path(path), load(path, None)?));
            }
            let events = stages[0].1.events.clone();
            let mut cfg = EvalConfig::default();
            if !bands.is_empty() {
                cfg.bands = bands;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let result = evaluate_pipeline_steps(&stages, &events, &cfg).map_err(|e| Failure::Fatal(e.to_string()))?;
            for cell in &result.cells {
                println!("{:<12} {:<16} mean test accuracy {:.3}", cell.band, cell.stage, cell.mean_mlr_test());
            }
            write_json(&result, &report)?;
            Ok(())
        }
        Command::Synth { spec, output } => {
            let spec: SynthSpec = read_json(&spec)?;
            let (recording, truth) = generate(&spec).map_err(|e| Failure::Validation(e.to_string()))?;
            std::fs::create_dir_all(&output).map_err(|e| Failure::Validation(format!("{}: {e}", output.display())))?;
            let data = output.join("recording.ncr");
            write_recording(&recording, &data, &sidecar_path(&data))?;
            write_json(&truth, &output.join("manifest.json"))?;
            println!("wrote {}", data.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            log::error!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Fatal(msg)) => {
            log::error!("{msg}");
            ExitCode::from(2)
        }
    }
}
