use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::features::{balance_classes, band_segment, mean_spectral_amplitude, seeded_class_groups, Band, FeatureDataset};
use super::knn::knn1_accuracy;
use super::mlr::{rank_features, train_mlr, MlrParams, Standardizer};
use super::roc::{roc_auc_ovr_micro, roc_curve_ovr_micro};
use super::search::{incremental_feature_search, shuffled_labels, SearchConfig};
use super::{accuracy, mix};
use crate::dsp::stats::mean;
use crate::epoch::epoch;
use crate::error::Result;
use crate::model::{Event, Recording};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub bands: Vec<Band>,
    /// Number of independent train/test splits.
    pub repeats: usize,
    pub epoch_len: usize,
    pub test_fraction: f64,
    pub seed: u64,
    /// Balance classes before splitting (default) or only the training part after.
    pub balance_first: bool,
    /// Run the incremental feature search on the first split's training part.
    pub search: Option<SearchConfig>,
    pub mlr: MlrParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bands: alloc::vec![Band::Full],
            repeats: 100,
            epoch_len: 500,
            test_fraction: 0.2,
            seed: 0,
            balance_first: true,
            search: None,
            mlr: MlrParams::default(),
        }
    }
}

/// Accuracy distributions for one (band, stage) pair; one entry per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub band: Band,
    pub stage: String,
    pub n_trials: usize,
    pub class_names: Vec<String>,
    pub mlr_test_accuracy: Vec<f64>,
    pub mlr_train_accuracy: Vec<f64>,
    pub knn_test_accuracy: Vec<f64>,
    pub mlr_shuffled_accuracy: Vec<f64>,
    pub knn_shuffled_accuracy: Vec<f64>,
    pub roc_auc: Vec<f64>,
    /// Pooled `(fpr, tpr)` curve of the first split.
    pub roc_curve: Vec<(f64, f64)>,
    pub search: Option<super::search::SearchResult>,
}

impl EvalCell {
    pub fn mean_mlr_test(&self) -> f64 {
        mean(&self.mlr_test_accuracy)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    pub fn cell(&self, band: Band, stage: &str) -> Option<&EvalCell> {
        self.cells.iter().find(|c| c.band == band && c.stage == stage)
    }
}

/// Stratified split: within each class a seeded share of `test_fraction`
/// (at least one trial when the class has two or more) goes to the test set.
pub fn split_train_test(data: &FeatureDataset, test_fraction: f64, seed: u64, split: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for group in seeded_class_groups(data, seed, 1 + split) {
        let n = group.len();
        let mut k = ((n as f64) * test_fraction).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        }
        test.extend_from_slice(&group[..k.min(n)]);
        train.extend_from_slice(&group[k.min(n)..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn evaluate_dataset(data: &FeatureDataset, stage: &str, cfg: &EvalConfig) -> Result<EvalCell> {
    let base = if cfg.balance_first { balance_classes(data, cfg.seed)? } else { data.clone() };
    let k = base.n_classes();
    let mut cell = EvalCell {
        band: data.band,
        stage: String::from(stage),
        n_trials: base.x.len(),
        class_names: base.class_names.clone(),
        mlr_test_accuracy: Vec::with_capacity(cfg.repeats),
        mlr_train_accuracy: Vec::with_capacity(cfg.repeats),
        knn_test_accuracy: Vec::with_capacity(cfg.repeats),
        mlr_shuffled_accuracy: Vec::with_capacity(cfg.repeats),
        knn_shuffled_accuracy: Vec::with_capacity(cfg.repeats),
        roc_auc: Vec::with_capacity(cfg.repeats),
        roc_curve: Vec::new(),
        search: None,
    };
    for split in 0..cfg.repeats {
        let (train_rows, test_rows) = split_train_test(&base, cfg.test_fraction, cfg.seed, split as u64);
        let mut train = base.subset(&train_rows);
        if !cfg.balance_first {
            train = balance_classes(&train, mix(cfg.seed, split as u64, 0))?;
        }
        let test = base.subset(&test_rows);
        let scaler = Standardizer::fit(&train.x);
        let tr_x = scaler.transform(&train.x);
        let te_x = scaler.transform(&test.x);

        let model = train_mlr(&tr_x, &train.y, k, &cfg.mlr);
        cell.mlr_test_accuracy.push(accuracy(&model.predict(&te_x), &test.y));
        cell.mlr_train_accuracy.push(accuracy(&model.predict(&tr_x), &train.y));
        cell.knn_test_accuracy.push(knn1_accuracy(&tr_x, &train.y, &te_x, &test.y));
        let probs = model.predict_proba(&te_x);
        cell.roc_auc.push(roc_auc_ovr_micro(&probs, &test.y)?);
        if split == 0 {
            cell.roc_curve = roc_curve_ovr_micro(&probs, &test.y)?;
            if let Some(search_cfg) = &cfg.search {
                let ranking = rank_features(&model);
                cell.search = Some(incremental_feature_search(&train, &ranking, search_cfg)?);
            }
        }

        let y_s = shuffled_labels(&train.y, &train.keys, mix(cfg.seed, split as u64, 1));
        let shuffled = train_mlr(&tr_x, &y_s, k, &cfg.mlr);
        cell.mlr_shuffled_accuracy.push(accuracy(&shuffled.predict(&te_x), &test.y));
        cell.knn_shuffled_accuracy.push(knn1_accuracy(&tr_x, &y_s, &te_x, &test.y));
    }
    Ok(cell)
}

/// Band-segments, epochs and classifies every stage's recording, producing
/// one accuracy distribution per (band, stage).
pub fn evaluate_pipeline_steps(stages: &[(String, Recording)], events: &[Event], cfg: &EvalConfig) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for &band in &cfg.bands {
        for (name, recording) in stages {
            let segmented = band_segment(recording, band)?;
            let epoched = epoch(&segmented, events, cfg.epoch_len)?;
            let data = mean_spectral_amplitude(&epoched, band);
            report.cells.push(evaluate_dataset(&data, name, cfg)?);
        }
    }
    Ok(report)
}
