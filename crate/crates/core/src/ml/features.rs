use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mix;
use crate::dsp::iir::{design_butterworth, filtfilt};
use crate::error::{Error, Result};
use crate::model::{EpochedData, Recording};

/// Frequency bands used to segment recordings before classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Theta,
    Alpha,
    Beta,
    LowGamma,
    HighGamma,
    LowRipple,
    HighRipple,
    MultiUnit,
    Full,
}

impl Band {
    pub const ALL: [Band; 9] = [
        Band::Theta,
        Band::Alpha,
        Band::Beta,
        Band::LowGamma,
        Band::HighGamma,
        Band::LowRipple,
        Band::HighRipple,
        Band::MultiUnit,
        Band::Full,
    ];

    /// Band edges in Hz; `None` for the unfiltered signal.
    pub fn edges_hz(self) -> Option<(f64, f64)> {
        match self {
            Band::Theta => Some((4.0, 7.0)),
            Band::Alpha => Some((8.0, 15.0)),
            Band::Beta => Some((15.0, 30.0)),
            Band::LowGamma => Some((30.0, 70.0)),
            Band::HighGamma => Some((70.0, 100.0)),
            Band::LowRipple => Some((100.0, 150.0)),
            Band::HighRipple => Some((150.0, 200.0)),
            Band::MultiUnit => Some((200.0, 500.0)),
            Band::Full => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::LowGamma => "low_gamma",
            Band::HighGamma => "high_gamma",
            Band::LowRipple => "low_ripple",
            Band::HighRipple => "high_ripple",
            Band::MultiUnit => "multi_unit",
            Band::Full => "full",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Band::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown band {s:?}")))
    }
}

/// Butterworth order per band edge. Steep enough that a tone one bin of
/// width inside a narrow band (10 Hz in 8–15 Hz) survives zero-phase
/// filtering within 5%.
pub const BAND_FILTER_ORDER: usize = 8;

/// Zero-phase bandpass of every active channel to `band`. An upper edge at
/// or above Nyquist degrades to a highpass.
pub fn band_segment(recording: &Recording, band: Band) -> Result<Recording> {
    let Some((lo, hi)) = band.edges_hz() else {
        return Ok(recording.clone());
    };
    let fs = recording.sampling_rate_hz;
    let hi = (hi < fs / 2.0).then_some(hi);
    let filter = design_butterworth(BAND_FILTER_ORDER, lo, hi, fs)?;
    let mut out = recording.clone();
    for c in recording.active_channels() {
        let y = filtfilt(&filter, recording.channel(c))?;
        out.channel_mut(c).copy_from_slice(&y);
    }
    Ok(out)
}

/// Trials × features matrix with integer-coded labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub class_names: Vec<String>,
    /// Stable per-trial identity (event sample index) used for seeded splits.
    pub keys: Vec<u64>,
    pub band: Band,
}

impl FeatureDataset {
    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.n_classes()];
        for &c in &self.y {
            counts[c] += 1;
        }
        counts
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureDataset {
        FeatureDataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            class_names: self.class_names.clone(),
            keys: rows.iter().map(|&i| self.keys[i]).collect(),
            band: self.band,
        }
    }

    /// Keeps the listed feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Vec<Vec<f64>> {
        self.x.iter().map(|row| columns.iter().map(|&c| row[c]).collect()).collect()
    }
}

/// Mean absolute amplitude of each channel over each trial.
pub fn mean_spectral_amplitude(epoched: &EpochedData, band: Band) -> FeatureDataset {
    let mut class_names: Vec<String> = epoched.trials.iter().map(|t| t.label.clone()).collect();
    class_names.sort();
    class_names.dedup();
    let p = epoched.epoch_len as f64;
    let mut x = Vec::with_capacity(epoched.trials.len());
    let mut y = Vec::with_capacity(epoched.trials.len());
    let mut keys = Vec::with_capacity(epoched.trials.len());
    for (k, trial) in epoched.trials.iter().enumerate() {
        x.push(
            (0..epoched.n_channels)
                .map(|c| epoched.trial_channel(k, c).iter().map(|v| v.abs()).sum::<f64>() / p)
                .collect(),
        );
        y.push(class_names.binary_search(&trial.label).expect("label collected above"));
        keys.push(trial.key);
    }
    FeatureDataset {
        x,
        y,
        class_names,
        keys,
        band,
    }
}

/// Rows of `data` grouped by class, each group ordered by a seeded hash of
/// the trial key so that the order does not depend on row order.
pub(crate) fn seeded_class_groups(data: &FeatureDataset, seed: u64, stream: u64) -> Vec<Vec<usize>> {
    let mut groups = alloc::vec![Vec::new(); data.n_classes()];
    for (i, &c) in data.y.iter().enumerate() {
        groups[c].push(i);
    }
    for g in &mut groups {
        g.sort_by_key(|&i| (mix(seed, stream, data.keys[i]), data.keys[i], i));
    }
    groups
}

/// Random undersampling of every class down to the minority count.
pub fn balance_classes(data: &FeatureDataset, seed: u64) -> Result<FeatureDataset> {
    let counts = data.class_counts();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::TooFewClasses(present));
    }
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::ClassTooSmall {
            class: data.class_names[class].clone(),
            count,
        });
    }
    let m = *counts.iter().min().expect("at least two classes");
    let mut rows: Vec<usize> = seeded_class_groups(data, seed, 0)
        .into_iter()
        .flat_map(|g| g.into_iter().take(m))
        .collect();
    rows.sort_unstable();
    Ok(data.subset(&rows))
}
