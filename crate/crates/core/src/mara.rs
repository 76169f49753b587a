//! Cluster-MARA: five spectral/statistical features per independent
//! component, DBSCAN on the (standardized) feature rows, and removal of the
//! components left outside every cluster.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dbscan::{cluster_count, dbscan, NOISE};
use crate::dsp::stats::{linear_fit, skewness};
use crate::dsp::welch::{band_power, log_log_spectrum, welch_psd, WelchParams, ONE_OVER_F_BAND_HZ};
use crate::error::Result;
use crate::ica::ComponentDecomposition;
use crate::model::{PipelineConfig, Recording, StageReport};

pub const N_FEATURES: usize = 5;

/// Column order of [`MaraFeatureMatrix`].
pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["spatial_range", "alpha_log_power", "lambda", "fit_error", "mean_local_skewness"];

/// Floor applied before taking logarithms of ranges and powers.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaraFeatureMatrix {
    /// One row per component.
    pub raw: Vec<[f64; N_FEATURES]>,
    /// Per-column z-scores of `raw`; columns with zero spread become 0.
    pub standardized: Vec<[f64; N_FEATURES]>,
}

impl MaraFeatureMatrix {
    pub fn from_raw(raw: Vec<[f64; N_FEATURES]>) -> Self {
        let standardized = standardize_columns(&raw);
        Self { raw, standardized }
    }

    pub fn n_components(&self) -> usize {
        self.raw.len()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.raw.iter().map(|r| r[k]).collect()
    }
}

/// Z-scores with the population standard deviation.
pub fn standardize_columns(rows: &[[f64; N_FEATURES]]) -> Vec<[f64; N_FEATURES]> {
    let n = rows.len() as f64;
    let mut out = rows.to_vec();
    for k in 0..N_FEATURES {
        let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[k] - mean) * (r[k] - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        for row in &mut out {
            row[k] = if sd > 1e-12 * mean.abs().max(1.0) { (row[k] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// `ln(max − min)` of a mixing-matrix column.
pub fn feature_spatial_range(column: &[f64]) -> f64 {
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min).max(LOG_FLOOR).ln()
}

/// Log of the mean Welch PSD over 8–13 Hz.
pub fn feature_alpha_power(source: &[f64], fs: f64) -> Result<f64> {
    let psd = welch_psd(source, fs, WelchParams::default_for(fs, source.len()))?;
    Ok(band_power(&psd, 8.0, 13.0)?.max(LOG_FLOOR).ln())
}

/// Least-squares fit of `ln P(f) = a − λ·ln f` over `band` (upper edge
/// capped at 90% of Nyquist). Returns `(λ, rms residual)`.
pub fn feature_one_over_f_fit_in(source: &[f64], fs: f64, band: (f64, f64)) -> Result<(f64, f64)> {
    let psd = welch_psd(source, fs, WelchParams::default_for(fs, source.len()))?;
    let (ln_f, ln_p) = log_log_spectrum(&psd, fs, band)?;
    // log_log_spectrum guarantees ≥ 2 distinct frequencies.
    let (_, slope, rms) = linear_fit(&ln_f, &ln_p).expect("distinct frequencies");
    Ok((-slope, rms))
}

pub fn feature_one_over_f_fit(source: &[f64], fs: f64) -> Result<(f64, f64)> {
    feature_one_over_f_fit_in(source, fs, ONE_OVER_F_BAND_HZ)
}

/// Mean `|skewness|` over consecutive non-overlapping windows of
/// `window_s` seconds. A trailing partial window counts when it holds at
/// least 3 samples; signals shorter than one window are treated as a single
/// window. Constant windows contribute 0.
pub fn feature_local_skewness(source: &[f64], fs: f64, window_s: f64) -> f64 {
    let w = ((window_s * fs).round() as usize).max(3);
    let abs_skew = |x: &[f64]| skewness(x).map_or(0.0, f64::abs);
    if source.len() <= w {
        return abs_skew(source);
    }
    let values: Vec<f64> = source
        .chunks(w)
        .filter(|c| c.len() >= 3)
        .map(abs_skew)
        .collect();
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaraConfig {
    pub eps: f64,
    pub min_samples: usize,
    /// Cluster standardized features (default) or raw ones.
    pub standardize: bool,
    pub skew_window_s: f64,
    pub fit_band_hz: (f64, f64),
    /// Experimental: reject these cluster labels instead of the noise label.
    pub reject_labels: Option<Vec<i32>>,
}

impl Default for MaraConfig {
    fn default() -> Self {
        Self::from(&PipelineConfig::default())
    }
}

impl From<&PipelineConfig> for MaraConfig {
    fn from(cfg: &PipelineConfig) -> Self {
        Self {
            eps: cfg.dbscan_eps,
            min_samples: cfg.dbscan_min_samples,
            standardize: cfg.mara_standardize,
            skew_window_s: cfg.mara_skew_window_s,
            fit_band_hz: cfg.mara_fit_band_hz,
            reject_labels: None,
        }
    }
}

/// Feature rows for every component of a decomposition.
pub fn compute_features(dec: &ComponentDecomposition, fs: f64, cfg: &MaraConfig) -> Result<MaraFeatureMatrix> {
    let mut raw = Vec::with_capacity(dec.n_components());
    for (k, source) in dec.sources.iter().enumerate() {
        let column: Vec<f64> = dec.mixing.column(k).iter().copied().collect();
        let (lambda, fit_error) = feature_one_over_f_fit_in(source, fs, cfg.fit_band_hz)?;
        raw.push([
            feature_spatial_range(&column),
            feature_alpha_power(source, fs)?,
            lambda,
            fit_error,
            feature_local_skewness(source, fs, cfg.skew_window_s),
        ]);
    }
    Ok(MaraFeatureMatrix::from_raw(raw))
}

/// Everything the rejection step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MaraOutcome {
    pub recording: Recording,
    pub report: StageReport,
    pub features: MaraFeatureMatrix,
    pub labels: Vec<i32>,
}

/// Clusters the component features, zeroes the rejected sources and mixes
/// the rest back into channel space. `input` is the recording the
/// decomposition was computed from; masked channels come back as zeros.
pub fn reject_components(input: &Recording, dec: &ComponentDecomposition, cfg: &MaraConfig) -> Result<MaraOutcome> {
    let fs = input.sampling_rate_hz;
    let features = compute_features(dec, fs, cfg)?;
    let points = if cfg.standardize { &features.standardized } else { &features.raw };
    let labels = dbscan(points, cfg.eps, cfg.min_samples);
    let rejected: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| match &cfg.reject_labels {
            Some(set) => set.contains(l),
            None => **l == NOISE,
        })
        .map(|(k, _)| k)
        .collect();

    let mut report = StageReport::new("ica_mara")
        .param("dbscan_eps", cfg.eps)
        .param("dbscan_min_samples", cfg.min_samples)
        .param("standardize", cfg.standardize)
        .param("n_components", dec.n_components())
        .param("n_clusters", cluster_count(&labels))
        .param("ica_converged", dec.converged)
        .param("ica_iterations", dec.iterations)
        .param("labels", labels.iter().map(|&l| f64::from(l)).collect::<Vec<f64>>());
    if !dec.converged {
        report.warn("ICA did not converge; using the last iterate");
    }

    let recording = if rejected.is_empty() {
        input.clone()
    } else if rejected.len() == dec.n_components() {
        report.warn(String::from("every component was marked for rejection; output left unchanged"));
        input.clone()
    } else {
        let rows = dec.reconstruct_without(&rejected);
        let mut out = input.clone();
        for (row, &c) in rows.iter().zip(&dec.channel_index_map) {
            out.channel_mut(c).copy_from_slice(row);
        }
        report.rejected_component_indices = rejected;
        out
    };
    Ok(MaraOutcome {
        recording,
        report,
        features,
        labels,
    })
}
