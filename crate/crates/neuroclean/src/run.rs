//! Runs the pipeline and lays its artifacts out in a directory:
//!
//! ```text
//! out/
//!   cleaned.ncr, cleaned.json     final continuous recording
//!   epoched.ncr, epoched.json     trials back to back (with --epoch)
//!   stages.jsonl                  one StageReport per executed stage
//!   00_raw.ncr, 01_bandpass.ncr…  inputs and stage outputs (with --keep-intermediates)
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use neuroclean_core::model::{PipelineConfig, Recording, StageReport};
use neuroclean_core::pipeline::{run_pipeline, Clock, PipelineError, PipelineRun, RunOptions};

use crate::io::{append_stage_log, sidecar_path, write_recording, IoError};

pub const CLEANED: &str = "cleaned.ncr";
pub const EPOCHED: &str = "epoched.ncr";
pub const STAGE_LOG: &str = "stages.jsonl";

/// Wall-clock milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_ms(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Io(#[from] IoError),
    #[error("{0}")]
    Invalid(String),
    /// A stage failed; the log holds the stages completed before it.
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub cleaned: PathBuf,
    pub epoched: Option<PathBuf>,
    pub log: PathBuf,
    pub intermediates: Vec<PathBuf>,
}

fn write_log(reports: &[StageReport], path: &Path) -> Result<(), IoError> {
    if path.exists() {
        fs::remove_file(path).map_err(|source| IoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    for report in reports {
        append_stage_log(report, path)?;
    }
    Ok(())
}

fn write_pair(recording: &Recording, path: PathBuf) -> Result<PathBuf, IoError> {
    write_recording(recording, &path, &sidecar_path(&path))?;
    Ok(path)
}

/// Runs the pipeline on `recording` and writes everything under `out_dir`,
/// creating it if needed. A stage failure still writes the partial log.
pub fn run_to_dir(
    recording: &Recording,
    cfg: &PipelineConfig,
    opts: RunOptions,
    out_dir: &Path,
    clock: &mut dyn Clock,
) -> Result<(PipelineRun, RunArtifacts), RunError> {
    fs::create_dir_all(out_dir).map_err(|source| IoError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let log = out_dir.join(STAGE_LOG);
    let run = match run_pipeline(recording, cfg, opts, clock) {
        Ok(run) => run,
        Err(PipelineError::Invalid(msgs)) => return Err(RunError::Invalid(msgs.join("; "))),
        Err(PipelineError::Stage { stage, error, reports }) => {
            write_log(&reports, &log)?;
            log::error!("stage {stage} failed after {} completed stages", reports.len());
            return Err(RunError::Stage {
                stage,
                message: error.to_string(),
            });
        }
    };
    write_log(&run.reports, &log)?;
    for r in &run.reports {
        log::info!(
            "{}: {} channels, {} components rejected, {:.1} ms",
            r.stage_name,
            r.rejected_channel_indices.len(),
            r.rejected_component_indices.len(),
            r.wall_time_ms
        );
        if let Some(w) = r.warning() {
            log::warn!("{}: {w}", r.stage_name);
        }
    }

    let mut intermediates = Vec::new();
    if opts.keep_intermediates {
        intermediates.push(write_pair(recording, out_dir.join("00_raw.ncr"))?);
        for (i, (name, rec)) in run.intermediates.iter().enumerate() {
            intermediates.push(write_pair(rec, out_dir.join(format!("{:02}_{name}.ncr", i + 1)))?);
        }
    }
    let cleaned = write_pair(&run.recording, out_dir.join(CLEANED))?;
    let epoched = match &run.epoched {
        Some(ep) => {
            let rec = ep
                .to_recording(&run.recording.channel_mask)
                .map_err(|e| RunError::Invalid(e.to_string()))?;
            Some(write_pair(&rec, out_dir.join(EPOCHED))?)
        }
        None => None,
    };
    Ok((
        run,
        RunArtifacts {
            cleaned,
            epoched,
            log,
            intermediates,
        },
    ))
}

/// Stage name encoded in an intermediate file name (`03_channel_reject.ncr`
/// → `channel_reject`). Other names are returned whole.
pub fn stage_name_from_path(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    match stem.split_once('_') {
        Some((prefix, rest)) if !prefix.is_empty() && prefix.bytes().all(|b| b.is_ascii_digit()) => rest.to_string(),
        _ => stem.to_string(),
    }
}
