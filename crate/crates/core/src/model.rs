//! Shared data model passed between pipeline stages.
//!
//! A [`Recording`] is an immutable-by-convention `channels × samples` matrix of
//! voltages in microvolts. Stages never remove channels: a rejected channel is
//! zeroed and its `channel_mask` entry cleared, so every stage sees the same
//! shape.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qa::QaMetrics;

/// A timed behavioral event, addressed by sample offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub sample_index: usize,
    pub label: String,
    /// Shift (in samples) applied to the epoch center for this event.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub offset: i64,
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

impl Event {
    pub fn new(sample_index: usize, label: impl Into<String>) -> Self {
        Self {
            sample_index,
            label: label.into(),
            offset: 0,
        }
    }
}

/// Multichannel voltage recording, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    n_channels: usize,
    n_samples: usize,
    data: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub line_freq_hz: Option<f64>,
    pub events: Vec<Event>,
    pub channel_mask: Vec<bool>,
}

impl Recording {
    /// Builds a recording from a flat channel-major buffer. All channels start
    /// active.
    pub fn new(n_channels: usize, n_samples: usize, data: Vec<f64>, sampling_rate_hz: f64) -> Result<Self> {
        if data.len() != n_channels * n_samples {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {}x{}",
                data.len(),
                n_channels,
                n_samples
            )));
        }
        Ok(Self {
            n_channels,
            n_samples,
            data,
            sampling_rate_hz,
            line_freq_hz: None,
            events: Vec::new(),
            channel_mask: vec![true; n_channels],
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], sampling_rate_hz: f64) -> Result<Self> {
        let n_samples = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_samples) {
            return Err(Error::LengthMismatch(bad.len(), n_samples));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), n_samples, data, sampling_rate_hz)
    }

    pub fn with_events(mut self, events: Vec<Event>) -> Self {
        self.events = events;
        self
    }

    pub fn with_line_freq(mut self, line_freq_hz: Option<f64>) -> Self {
        self.line_freq_hz = line_freq_hz;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_samples.max(1))
    }

    /// Indices of channels whose mask bit is set.
    pub fn active_channels(&self) -> Vec<usize> {
        (0..self.n_channels).filter(|&c| self.channel_mask[c]).collect()
    }

    /// Zeroes a channel and clears its mask bit.
    pub fn reject_channel(&mut self, c: usize) {
        self.channel_mut(c).fill(0.0);
        self.channel_mask[c] = false;
    }

    /// Replaces the samples while keeping metadata. Inactive rows are forced
    /// to zero.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::LengthMismatch(data.len(), self.data.len()));
        }
        let mut out = Self { data, ..self.clone_meta() };
        for c in 0..out.n_channels {
            if !out.channel_mask[c] {
                out.channel_mut(c).fill(0.0);
            }
        }
        Ok(out)
    }

    fn clone_meta(&self) -> Self {
        Self {
            n_channels: self.n_channels,
            n_samples: self.n_samples,
            data: Vec::new(),
            sampling_rate_hz: self.sampling_rate_hz,
            line_freq_hz: self.line_freq_hz,
            events: self.events.clone(),
            channel_mask: self.channel_mask.clone(),
        }
    }

    /// Marks all-zero rows as inactive. Used after ingestion, where the mask
    /// is not stored.
    pub fn infer_mask_from_zero_rows(&mut self) {
        for c in 0..self.n_channels {
            self.channel_mask[c] = self.channel(c).iter().any(|&v| v != 0.0);
        }
    }

    /// Copies the active rows into one vector per channel.
    pub fn active_rows(&self) -> Vec<Vec<f64>> {
        self.active_channels()
            .into_iter()
            .map(|c| self.channel(c).to_vec())
            .collect()
    }
}

/// A violated [`Recording`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationError {
    NoChannels,
    TooFewSamples(usize),
    NonPositiveRate(f64),
    NonFinite { channel: usize, sample: usize },
    EventOutOfRange { event: usize, sample_index: usize },
    EmptyLabel { event: usize },
    MaskLength(usize),
    MaskedChannelNotZero(usize),
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoChannels => write!(f, "recording has no channels"),
            Self::TooFewSamples(n) => write!(f, "recording has {n} samples, need at least 2"),
            Self::NonPositiveRate(fs) => write!(f, "sampling rate {fs} is not positive"),
            Self::NonFinite { channel, sample } => {
                write!(f, "non-finite sample at ({channel},{sample})")
            }
            Self::EventOutOfRange { event, sample_index } => {
                write!(f, "event out of range: event {event} at sample {sample_index}")
            }
            Self::EmptyLabel { event } => write!(f, "event {event} has an empty label"),
            Self::MaskLength(n) => write!(f, "channel mask has length {n}"),
            Self::MaskedChannelNotZero(c) => write!(f, "masked channel {c} is not zero"),
        }
    }
}

/// Checks every recording invariant; returns one entry per violated invariant.
pub fn validate(recording: &Recording) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    if recording.n_channels == 0 {
        errors.push(ValidationError::NoChannels);
    }
    if recording.n_samples < 2 {
        errors.push(ValidationError::TooFewSamples(recording.n_samples));
    }
    let fs = recording.sampling_rate_hz;
    if !(fs > 0.0 && fs.is_finite()) {
        errors.push(ValidationError::NonPositiveRate(fs));
    }
    if let Some(i) = recording.data.iter().position(|v| !v.is_finite()) {
        let n = recording.n_samples.max(1);
        errors.push(ValidationError::NonFinite {
            channel: i / n,
            sample: i % n,
        });
    }
    if let Some((i, e)) = recording
        .events
        .iter()
        .enumerate()
        .find(|(_, e)| e.sample_index >= recording.n_samples)
    {
        errors.push(ValidationError::EventOutOfRange {
            event: i,
            sample_index: e.sample_index,
        });
    }
    if let Some(i) = recording.events.iter().position(|e| e.label.is_empty()) {
        errors.push(ValidationError::EmptyLabel { event: i });
    }
    if recording.channel_mask.len() != recording.n_channels {
        errors.push(ValidationError::MaskLength(recording.channel_mask.len()));
    } else if let Some(c) = (0..recording.n_channels)
        .find(|&c| !recording.channel_mask[c] && recording.channel(c).iter().any(|&v| v != 0.0))
    {
        errors.push(ValidationError::MaskedChannelNotZero(c));
    }
    errors
}

/// Fixed-length trials cut around events.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochedData {
    /// Each trial is channel-major, `n_channels × epoch_len`.
    pub trials: Vec<Trial>,
    pub epoch_len: usize,
    pub n_channels: usize,
    pub sampling_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub data: Vec<f64>,
    pub label: String,
    /// Event sample index the trial was cut around; stable across reorderings.
    pub key: u64,
}

impl EpochedData {
    pub fn trial_channel(&self, trial: usize, c: usize) -> &[f64] {
        &self.trials[trial].data[c * self.epoch_len..(c + 1) * self.epoch_len]
    }
}

/// Rule (c) of bad-channel rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutlierRule {
    /// Flag median-normalized SD above `Q75 + 1.5·IQR`.
    #[default]
    Iqr,
    /// Flag median-normalized SD above `Q75`.
    LiteralQuartile,
}

/// Number of DSS components ZapLine removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NRemove {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for NRemove {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            NRemove::Auto => s.serialize_str("auto"),
            NRemove::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for NRemove {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => Ok(NRemove::Fixed(k as usize)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl core::str::FromStr for NRemove {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(NRemove::Auto);
        }
        s.parse::<usize>()
            .map(NRemove::Fixed)
            .map_err(|_| format!("expected `auto` or a component count, got `{s}`"))
    }
}

/// Which stages run. Disabled stages are skipped with a logged note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    pub bandpass: bool,
    pub zapline: bool,
    pub channel_reject: bool,
    pub ica_mara: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self {
            bandpass: true,
            zapline: true,
            channel_reject: true,
            ica_mara: true,
        }
    }
}

/// Every tunable of the pipeline. Field names are the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub bandpass_low_hz: f64,
    pub bandpass_high_hz: f64,
    /// Butterworth order applied at each band edge.
    pub bandpass_order: usize,
    /// Mains frequency. Falls back to the recording's own value when unset.
    pub line_freq_hz: Option<f64>,
    pub zapline_n_remove: NRemove,
    pub zapline_bias_bandwidth_hz: f64,
    pub zapline_notch_halfwidth_hz: f64,
    pub bcr_sd_low_uv: f64,
    pub bcr_sd_high_uv: f64,
    pub bcr_max_iters: usize,
    pub bcr_outlier_rule: OutlierRule,
    pub ica_tol: f64,
    pub ica_max_iter: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_samples: usize,
    pub mara_standardize: bool,
    pub mara_skew_window_s: f64,
    pub mara_fit_band_hz: (f64, f64),
    pub epoch_len_p: usize,
    pub random_seed: u64,
    pub stages: StageToggles,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bandpass_low_hz: 1.0,
            bandpass_high_hz: 500.0,
            bandpass_order: 4,
            line_freq_hz: None,
            zapline_n_remove: NRemove::Auto,
            zapline_bias_bandwidth_hz: 0.5,
            zapline_notch_halfwidth_hz: 2.0,
            bcr_sd_low_uv: 0.1,
            bcr_sd_high_uv: 100.0,
            bcr_max_iters: 5,
            bcr_outlier_rule: OutlierRule::Iqr,
            ica_tol: 1e-4,
            ica_max_iter: 200,
            dbscan_eps: 2.0,
            dbscan_min_samples: 2,
            mara_standardize: true,
            mara_skew_window_s: 15.0,
            mara_fit_band_hz: (2.0, 35.0),
            epoch_len_p: 500,
            random_seed: 0,
            stages: StageToggles::default(),
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.bandpass_low_hz > 0.0 && self.bandpass_low_hz < self.bandpass_high_hz) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < bandpass_low_hz < bandpass_high_hz, got {} and {}",
                self.bandpass_low_hz, self.bandpass_high_hz
            )));
        }
        if let Some(f) = self.line_freq_hz {
            if f != 50.0 && f != 60.0 {
                return Err(Error::InvalidConfig(format!("line_freq_hz must be 50 or 60, got {f}")));
            }
        }
        if self.bandpass_order == 0 || self.epoch_len_p < 2 || self.dbscan_min_samples == 0 {
            return Err(Error::InvalidConfig(String::from(
                "bandpass_order, dbscan_min_samples must be positive and epoch_len_p at least 2",
            )));
        }
        if !(self.dbscan_eps > 0.0) || !(self.mara_skew_window_s > 0.0) {
            return Err(Error::InvalidConfig(String::from(
                "dbscan_eps and mara_skew_window_s must be positive",
            )));
        }
        Ok(())
    }
}

/// Upper bandpass edge actually applied, or `None` when it sits at or above
/// Nyquist and the filter degrades to a highpass.
pub fn effective_high_cutoff(config: &PipelineConfig, sampling_rate_hz: f64) -> Option<f64> {
    if sampling_rate_hz <= 2.0 * config.bandpass_high_hz {
        None
    } else {
        Some(config.bandpass_high_hz)
    }
}

/// A loosely typed parameter recorded in a stage report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Floats(Vec<f64>),
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<u64> for ParamValue {
    fn from(v: u64) -> Self {
        Self::Int(v as i64)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        // JSON has no infinities.
        Self::Float(v.clamp(-f64::MAX, f64::MAX))
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        Self::Text(String::from(v))
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        Self::Floats(v)
    }
}

/// Per-stage log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage_name: String,
    pub params: BTreeMap<String, ParamValue>,
    pub rejected_channel_indices: Vec<usize>,
    pub rejected_component_indices: Vec<usize>,
    pub qa_before: QaMetrics,
    pub qa_after: QaMetrics,
    pub wall_time_ms: f64,
}

impl StageReport {
    pub fn new(stage_name: impl Into<String>) -> Self {
        Self {
            stage_name: stage_name.into(),
            params: BTreeMap::new(),
            rejected_channel_indices: Vec::new(),
            rejected_component_indices: Vec::new(),
            qa_before: QaMetrics::default(),
            qa_after: QaMetrics::default(),
            wall_time_ms: 0.0,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(String::from(key), value.into());
        self
    }

    pub fn set_param(&mut self, key: &str, value: impl Into<ParamValue>) {
        self.params.insert(String::from(key), value.into());
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        match self.params.get_mut("warning") {
            Some(ParamValue::Text(existing)) => {
                existing.push_str("; ");
                existing.push_str(&message);
            }
            _ => {
                self.params.insert(String::from("warning"), ParamValue::Text(message));
            }
        }
    }

    pub fn warning(&self) -> Option<&str> {
        match self.params.get("warning") {
            Some(ParamValue::Text(t)) => Some(t),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn four_channel() -> Recording {
        let data = (0..40).map(|v| v as f64).collect();
        Recording::new(4, 10, data, 100.0).unwrap()
    }

    #[test]
    fn valid_recording_has_no_errors() {
        let rec = four_channel().with_events(vec![Event::new(3, "Reach")]);
        assert!(validate(&rec).is_empty());
    }

    #[test]
    fn nan_is_reported_with_position() {
        let mut rec = four_channel();
        rec.channel_mut(2)[7] = f64::NAN;
        let errs = validate(&rec);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].to_string(), "non-finite sample at (2,7)");
    }

    #[test]
    fn event_at_end_is_out_of_range() {
        let rec = four_channel().with_events(vec![Event::new(10, "Grasp")]);
        let errs = validate(&rec);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].to_string().starts_with("event out of range"));
    }

    #[test]
    fn masked_channel_must_be_zero() {
        let mut rec = four_channel();
        rec.channel_mask[1] = false;
        assert_eq!(validate(&rec), vec![ValidationError::MaskedChannelNotZero(1)]);
        rec.reject_channel(1);
        assert!(validate(&rec).is_empty());
    }

    #[test]
    fn high_cutoff_dropped_at_or_above_nyquist() {
        let cfg = PipelineConfig::default();
        assert_eq!(effective_high_cutoff(&cfg, 1000.0), None);
        assert_eq!(effective_high_cutoff(&cfg, 2000.0), Some(500.0));
        assert_eq!(effective_high_cutoff(&cfg, 256.0), None);
    }

    #[test]
    fn defaults_match_documented_values() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.bandpass_low_hz, 1.0);
        assert_eq!(cfg.bandpass_high_hz, 500.0);
        assert_eq!(cfg.bcr_sd_low_uv, 0.1);
        assert_eq!(cfg.bcr_sd_high_uv, 100.0);
        assert_eq!(cfg.bcr_max_iters, 5);
        assert_eq!(cfg.dbscan_eps, 2.0);
        assert_eq!(cfg.dbscan_min_samples, 2);
        assert_eq!(cfg.epoch_len_p, 500);
        assert_eq!(cfg.mara_skew_window_s, 15.0);
        assert!(cfg.check().is_ok());
    }

    #[test]
    fn config_rejects_inverted_band() {
        let cfg = PipelineConfig {
            bandpass_low_hz: 40.0,
            bandpass_high_hz: 10.0,
            ..PipelineConfig::default()
        };
        assert!(cfg.check().is_err());
    }

    #[test]
    fn n_remove_parses() {
        assert_eq!("auto".parse::<NRemove>(), Ok(NRemove::Auto));
        assert_eq!("3".parse::<NRemove>(), Ok(NRemove::Fixed(3)));
        assert!("x".parse::<NRemove>().is_err());
    }
}
