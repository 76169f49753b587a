//! Iterative bad-channel rejection from per-channel standard deviation.
//!
//! Each pass recomputes SD statistics over the channels still active and
//! flags a channel when its SD is below the flat threshold, above the hot
//! threshold, or when its median-normalized SD is an upper outlier of the
//! active population. Flagged channels are zeroed. Passes stop after
//! `max_iters` or once a pass flags nothing.

use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::stats::{percentile_sorted, sample_sd};
use crate::error::{Error, Result};
use crate::model::{OutlierRule, PipelineConfig, Recording, StageReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    /// Sample standard deviation per channel (µV); zero for masked channels.
    pub sd_uv: Vec<f64>,
    /// `sd / median(sd over active channels)`; zero for masked channels.
    pub normalized_sd: Vec<f64>,
}

/// Per-channel SD with the `N − 1` denominator, normalized by the median over
/// active channels.
pub fn channel_sd(recording: &Recording) -> ChannelStats {
    let n = recording.n_channels();
    let mut sd_uv = vec![0.0; n];
    let mut active_sd = Vec::new();
    for c in recording.active_channels() {
        sd_uv[c] = sample_sd(recording.channel(c));
        active_sd.push(sd_uv[c]);
    }
    active_sd.sort_by(f64::total_cmp);
    let median = percentile_sorted(&active_sd, 50.0);
    let normalized_sd = (0..n)
        .map(|c| {
            if recording.channel_mask[c] && median > 0.0 {
                sd_uv[c] / median
            } else {
                0.0
            }
        })
        .collect();
    ChannelStats { sd_uv, normalized_sd }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcrConfig {
    pub sd_low_uv: f64,
    pub sd_high_uv: f64,
    pub max_iters: usize,
    pub rule: OutlierRule,
}

impl Default for BcrConfig {
    fn default() -> Self {
        Self::from(&PipelineConfig::default())
    }
}

impl From<&PipelineConfig> for BcrConfig {
    fn from(cfg: &PipelineConfig) -> Self {
        Self {
            sd_low_uv: cfg.bcr_sd_low_uv,
            sd_high_uv: cfg.bcr_sd_high_uv,
            max_iters: cfg.bcr_max_iters,
            rule: cfg.bcr_outlier_rule,
        }
    }
}

fn flag_channels(recording: &Recording, cfg: &BcrConfig) -> Vec<usize> {
    let stats = channel_sd(recording);
    let active = recording.active_channels();
    let mut norm: Vec<f64> = active.iter().map(|&c| stats.normalized_sd[c]).collect();
    norm.sort_by(f64::total_cmp);
    let q75 = percentile_sorted(&norm, 75.0);
    let cutoff = match cfg.rule {
        OutlierRule::Iqr => q75 + 1.5 * (q75 - percentile_sorted(&norm, 25.0)),
        OutlierRule::LiteralQuartile => q75,
    };
    active
        .into_iter()
        .filter(|&c| {
            let sd = stats.sd_uv[c];
            sd < cfg.sd_low_uv || sd > cfg.sd_high_uv || stats.normalized_sd[c] > cutoff
        })
        .collect()
}

/// Runs the iterative rejection and zeroes every flagged channel.
pub fn reject_bad_channels(recording: &Recording, cfg: &BcrConfig) -> Result<(Recording, StageReport)> {
    let initially_active = recording.active_channels().len();
    if initially_active < 2 {
        return Err(Error::InsufficientChannels {
            needed: 2,
            got: initially_active,
        });
    }
    let mut out = recording.clone();
    let mut rejected = Vec::new();
    let mut iterations = 0;
    let mut per_iteration = Vec::new();
    while iterations < cfg.max_iters {
        iterations += 1;
        let flagged = flag_channels(&out, cfg);
        per_iteration.push(flagged.len() as f64);
        if flagged.is_empty() {
            break;
        }
        for &c in &flagged {
            out.reject_channel(c);
        }
        rejected.extend(flagged);
    }
    let survivors = out.active_channels().len();
    if survivors < 2 {
        return Err(Error::AllChannelsRejected { survivors });
    }
    rejected.sort_unstable();
    let mut report = StageReport::new("channel_reject")
        .param("sd_low_uv", cfg.sd_low_uv)
        .param("sd_high_uv", cfg.sd_high_uv)
        .param("max_iters", cfg.max_iters)
        .param(
            "outlier_rule",
            match cfg.rule {
                OutlierRule::Iqr => "iqr",
                OutlierRule::LiteralQuartile => "literal_quartile",
            },
        )
        .param("iterations", iterations)
        .param("flagged_per_iteration", per_iteration);
    report.rejected_channel_indices = rejected;
    Ok((out, report))
}
