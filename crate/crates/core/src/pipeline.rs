//! Fixed-order stage chain: bandpass, line removal, bad-channel rejection,
//! ICA with cluster-based component rejection, then optional epoching.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::channel_reject::{reject_bad_channels, BcrConfig};
use crate::dsp::iir::{design_butterworth, filtfilt};
use crate::epoch::epoch;
use crate::error::{Error, Result};
use crate::ica::{decompose, ComponentDecomposition, IcaConfig};
use crate::mara::{reject_components, MaraConfig};
use crate::model::{effective_high_cutoff, validate, EpochedData, PipelineConfig, Recording, StageReport, ValidationError};
use crate::qa::{artifact_probability, one_over_f_similarity, retention_ratios, snr_db, ArtifactScoreConfig, QaMetrics};
use crate::zapline::{apply_zapline, ZaplineConfig};

pub const STAGE_NAMES: [&str; 5] = ["bandpass", "zapline", "channel_reject", "ica_mara", "epoch"];

/// Source of stage wall times. Use [`NoClock`] when output must be
/// reproducible byte for byte.
pub trait Clock {
    fn now_ms(&mut self) -> f64;
}

/// Reports every wall time as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub keep_intermediates: bool,
    pub epoch: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    /// Continuous output of the last cleaning stage.
    pub recording: Recording,
    pub epoched: Option<EpochedData>,
    pub reports: Vec<StageReport>,
    /// `(stage name, output)` for every executed cleaning stage, when kept.
    pub intermediates: Vec<(String, Recording)>,
    pub decomposition: Option<ComponentDecomposition>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    /// The input or configuration failed validation; nothing ran.
    Invalid(Vec<String>),
    /// A stage failed. `reports` holds every stage completed before it.
    Stage {
        stage: String,
        error: Error,
        reports: Vec<StageReport>,
    },
}

impl core::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PipelineError::Invalid(msgs) => write!(f, "invalid input: {}", msgs.join("; ")),
            PipelineError::Stage { stage, error, .. } => write!(f, "stage {stage} failed: {error}"),
        }
    }
}

impl core::error::Error for PipelineError {}

/// Zero-phase Butterworth bandpass of the active channels; highpass only when
/// the upper edge is at or above Nyquist.
pub fn apply_bandpass(recording: &Recording, cfg: &PipelineConfig) -> Result<(Recording, StageReport)> {
    let fs = recording.sampling_rate_hz;
    let hi = effective_high_cutoff(cfg, fs);
    let filter = design_butterworth(cfg.bandpass_order, cfg.bandpass_low_hz, hi, fs)?;
    let mut out = recording.clone();
    for c in recording.active_channels() {
        let y = filtfilt(&filter, recording.channel(c))?;
        out.channel_mut(c).copy_from_slice(&y);
    }
    let mut report = StageReport::new("bandpass")
        .param("low_hz", cfg.bandpass_low_hz)
        .param("order", cfg.bandpass_order)
        .param("highpass_only", hi.is_none());
    if let Some(h) = hi {
        report.set_param("high_hz", h);
    }
    Ok((out, report))
}

struct Runner<'a> {
    raw: &'a Recording,
    cfg: &'a PipelineConfig,
    clock: &'a mut dyn Clock,
    reports: Vec<StageReport>,
    n_components: usize,
}

impl Runner<'_> {
    fn fail(&mut self, stage: &str, error: Error) -> PipelineError {
        PipelineError::Stage {
            stage: stage.to_string(),
            error,
            reports: core::mem::take(&mut self.reports),
        }
    }

    fn metrics(&self, rec: &Recording, so_far: &[StageReport]) -> Result<QaMetrics> {
        let (retained, rejected) = retention_ratios(so_far, rec.n_channels(), self.n_components);
        Ok(QaMetrics {
            one_over_f_similarity: Some(one_over_f_similarity(rec)?),
            channels_retained_fraction: Some(retained),
            components_rejected_fraction: rejected,
            ..QaMetrics::default()
        })
    }

    /// Fills QA and timing and appends the report.
    fn finish(&mut self, input: &Recording, output: &Recording, mut report: StageReport, started: f64) -> Result<()> {
        report.qa_before = self.metrics(input, &self.reports)?;
        let mut all = self.reports.clone();
        all.push(report.clone());
        let mut after = self.metrics(output, &all)?;
        after.snr_db = Some(snr_db(input, output)?);
        after.snr_vs_raw_db = Some(snr_db(self.raw, output)?);
        after.artifact_probabilities = report.qa_after.artifact_probabilities.take();
        report.qa_after = after;
        report.wall_time_ms = self.clock.now_ms() - started;
        self.reports.push(report);
        Ok(())
    }

    fn skip(&mut self, stage: &str, current: &Recording, why: &str) -> Result<()> {
        let started = self.clock.now_ms();
        let mut report = StageReport::new(stage).param("skipped", true);
        report.warn(why);
        self.finish(current, current, report, started)
    }
}

/// Runs the enabled stages in fixed order on `recording`.
///
/// Disabled stages are omitted from the log; stages whose prerequisites are
/// missing (no line frequency, no events) are logged as skipped with a
/// warning. Any other stage error aborts the run.
pub fn run_pipeline(
    recording: &Recording,
    cfg: &PipelineConfig,
    opts: RunOptions,
    clock: &mut dyn Clock,
) -> core::result::Result<PipelineRun, PipelineError> {
    let problems: Vec<ValidationError> = validate(recording);
    if !problems.is_empty() {
        return Err(PipelineError::Invalid(problems.iter().map(|p| p.to_string()).collect()));
    }
    cfg.check().map_err(|e| PipelineError::Invalid(alloc::vec![e.to_string()]))?;

    let mut run = Runner {
        raw: recording,
        cfg,
        clock,
        reports: Vec::new(),
        n_components: 0,
    };
    let mut current = recording.clone();
    let mut intermediates = Vec::new();
    let mut decomposition = None;
    let keep = |intermediates: &mut Vec<(String, Recording)>, name: &str, rec: &Recording| {
        if opts.keep_intermediates {
            intermediates.push((name.to_string(), rec.clone()));
        }
    };

    macro_rules! stage {
        ($name:expr, $body:expr) => {{
            let started = run.clock.now_ms();
            let outcome: Result<(Recording, StageReport)> = $body;
            match outcome.and_then(|(out, report)| run.finish(&current, &out, report, started).map(|_| out)) {
                Ok(out) => {
                    current = out;
                    keep(&mut intermediates, $name, &current);
                }
                Err(e) => return Err(run.fail($name, e)),
            }
        }};
    }

    if cfg.stages.bandpass {
        stage!("bandpass", apply_bandpass(&current, run.cfg));
    }

    if cfg.stages.zapline {
        match cfg.line_freq_hz.or(current.line_freq_hz) {
            Some(f) => stage!("zapline", apply_zapline(&current, &ZaplineConfig::from_pipeline(run.cfg, f))),
            None => {
                if let Err(e) = run.skip("zapline", &current, "no line frequency configured") {
                    return Err(run.fail("zapline", e));
                }
            }
        }
    }

    if cfg.stages.channel_reject {
        stage!("channel_reject", reject_bad_channels(&current, &BcrConfig::from(run.cfg)));
    }

    if cfg.stages.ica_mara {
        stage!("ica_mara", {
            decompose(&current, &IcaConfig::from(run.cfg)).and_then(|dec| {
                run.n_components = dec.n_components();
                let out = reject_components(&current, &dec, &MaraConfig::from(run.cfg))?;
                let mut report = out.report;
                report.qa_after.artifact_probabilities =
                    Some(artifact_probability(&out.features, &ArtifactScoreConfig::default())?);
                decomposition = Some(dec);
                Ok((out.recording, report))
            })
        });
    }

    let mut epoched = None;
    if opts.epoch {
        let started = run.clock.now_ms();
        if current.events.is_empty() {
            if let Err(e) = run.skip("epoch", &current, "recording has no events") {
                return Err(run.fail("epoch", e));
            }
        } else {
            match epoch(&current, &current.events, cfg.epoch_len_p) {
                Ok(data) => {
                    let mut report = StageReport::new("epoch")
                        .param("epoch_len_p", cfg.epoch_len_p)
                        .param("n_events", current.events.len())
                        .param("n_trials", data.trials.len());
                    let dropped = current.events.len() - data.trials.len();
                    if dropped > 0 {
                        report.warn(alloc::format!("{dropped} trial(s) crossed the recording bounds"));
                    }
                    report.qa_before = match run.metrics(&current, &run.reports) {
                        Ok(m) => m,
                        Err(e) => return Err(run.fail("epoch", e)),
                    };
                    report.wall_time_ms = run.clock.now_ms() - started;
                    run.reports.push(report);
                    epoched = Some(data);
                }
                Err(e) => return Err(run.fail("epoch", e)),
            }
        }
    }

    Ok(PipelineRun {
        recording: current,
        epoched,
        reports: run.reports,
        intermediates,
        decomposition,
    })
}
