//! Per-stage quality metrics.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dsp::stats::{mad, mean, median, pearson};
use crate::dsp::welch::{log_log_spectrum, welch_psd, PsdEstimate, WelchParams, ONE_OVER_F_BAND_HZ};
use crate::error::{Error, Result};
use crate::mara::MaraFeatureMatrix;
use crate::model::{Recording, StageReport};

/// Magnitude at which SNR values are clipped when serialized.
pub const SNR_CAP_DB: f64 = 300.0;

mod capped_db {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|x| x.clamp(-SNR_CAP_DB, SNR_CAP_DB)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QaMetrics {
    /// SNR of this stage's output against its own input; `+∞` when nothing changed.
    #[serde(with = "capped_db", default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    /// SNR against the raw pipeline input.
    #[serde(with = "capped_db", default, skip_serializing_if = "Option::is_none")]
    pub snr_vs_raw_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_over_f_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_probabilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels_retained_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components_rejected_fraction: Option<f64>,
}

/// `10·log10(P(after) / P(before − after))` over channels active in both.
///
/// Returns `+∞` for a zero residual and `−∞` when the output is all zeros.
pub fn snr_db(before: &Recording, after: &Recording) -> Result<f64> {
    if before.n_channels() != after.n_channels() || before.n_samples() != after.n_samples() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{}×{} vs {}×{}",
            before.n_channels(),
            before.n_samples(),
            after.n_channels(),
            after.n_samples()
        )));
    }
    let (mut signal, mut residual) = (0.0, 0.0);
    for c in 0..before.n_channels() {
        if !(before.channel_mask[c] && after.channel_mask[c]) {
            continue;
        }
        for (b, a) in before.channel(c).iter().zip(after.channel(c)) {
            signal += a * a;
            residual += (b - a) * (b - a);
        }
    }
    Ok(if residual == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / residual).log10()
    })
}

/// Pearson r between `ln P(f)` and `ln(1/f)` over the 1/f band.
pub fn psd_one_over_f_similarity(psd: &PsdEstimate, fs: f64) -> Result<f64> {
    let (ln_f, ln_p) = log_log_spectrum(psd, fs, ONE_OVER_F_BAND_HZ)?;
    let ln_inv_f: Vec<f64> = ln_f.iter().map(|v| -v).collect();
    pearson(&ln_p, &ln_inv_f)
}

/// Mean over active channels of the per-channel 1/f similarity.
pub fn one_over_f_similarity(recording: &Recording) -> Result<f64> {
    let fs = recording.sampling_rate_hz;
    let params = WelchParams::default_for(fs, recording.n_samples());
    let active = recording.active_channels();
    if active.is_empty() {
        return Err(Error::InsufficientChannels { needed: 1, got: 0 });
    }
    let mut scores = Vec::with_capacity(active.len());
    for c in active {
        let psd = welch_psd(recording.channel(c), fs, params)?;
        scores.push(psd_one_over_f_similarity(&psd, fs)?);
    }
    Ok(mean(&scores))
}

/// Which features enter the artifact score and how far out a component must
/// sit (in summed robust z units) to reach probability 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactScoreConfig {
    pub offset: f64,
    pub use_skewness: bool,
    pub use_lambda: bool,
    pub use_fit_error: bool,
}

impl Default for ArtifactScoreConfig {
    fn default() -> Self {
        Self {
            offset: 2.0,
            use_skewness: true,
            use_lambda: true,
            use_fit_error: true,
        }
    }
}

/// Signed robust z-scores (`(x − median) / (1.4826·MAD)`). When the MAD is
/// zero the mean absolute deviation (scaled to match a Gaussian SD) is used
/// instead; a population with no spread at all gives zeros.
pub fn robust_z(values: &[f64]) -> Vec<f64> {
    let med = median(values);
    let mut scale = 1.4826 * mad(values);
    if scale <= 0.0 {
        let mean_abs = mean(&values.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
        scale = 1.2533 * mean_abs;
    }
    values
        .iter()
        .map(|v| if scale > 0.0 { (v - med) / scale } else { 0.0 })
        .collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-component artifact probability: logistic of the summed robust
/// z-scores of local skewness, λ and fit error, shifted by `offset`.
pub fn artifact_probability(features: &MaraFeatureMatrix, cfg: &ArtifactScoreConfig) -> Result<Vec<f64>> {
    let n = features.n_components();
    if n < 3 {
        return Err(Error::DegeneratePopulation(n));
    }
    let mut total = alloc::vec![0.0; n];
    for (use_it, col) in [(cfg.use_skewness, 4), (cfg.use_lambda, 2), (cfg.use_fit_error, 3)] {
        if use_it {
            for (t, z) in total.iter_mut().zip(robust_z(&features.column(col))) {
                *t += z;
            }
        }
    }
    Ok(total.into_iter().map(|t| logistic(t - cfg.offset)).collect())
}

/// Fraction of channels never rejected, and fraction of ICA components
/// rejected (`None` when no decomposition ran).
pub fn retention_ratios(reports: &[StageReport], n_channels: usize, n_components: usize) -> (f64, Option<f64>) {
    let rejected: BTreeSet<usize> = reports
        .iter()
        .flat_map(|r| r.rejected_channel_indices.iter().copied())
        .collect();
    let retained = if n_channels == 0 {
        0.0
    } else {
        (n_channels - rejected.len().min(n_channels)) as f64 / n_channels as f64
    };
    let components = (n_components > 0).then(|| {
        let k: usize = reports.iter().map(|r| r.rejected_component_indices.len()).sum();
        k.min(n_components) as f64 / n_components as f64
    });
    (retained, components)
}
