use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureDataset;
use super::knn::knn1_accuracy;
use super::mlr::{train_mlr, MlrParams, Standardizer};
use super::roc::roc_auc_ovr_micro;
use super::{accuracy, mix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Repetitions per feature count, each with fresh folds and a fresh shuffle.
    pub repeats: usize,
    pub k_folds: usize,
    pub epsilon: f64,
    pub patience: usize,
    pub seed: u64,
    /// Stop at this many features even without an early stop.
    pub max_features: Option<usize>,
    pub mlr: MlrParams,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            repeats: 10,
            k_folds: 5,
            epsilon: 1e-3,
            patience: 30,
            seed: 0,
            max_features: None,
            mlr: MlrParams::default(),
        }
    }
}

/// Mean accuracies per feature count `d = d_values[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub ranking: Vec<usize>,
    pub d_values: Vec<usize>,
    pub mlr_real: Vec<f64>,
    pub mlr_shuffled: Vec<f64>,
    pub mlr_train: Vec<f64>,
    pub knn_real: Vec<f64>,
    pub knn_shuffled: Vec<f64>,
    /// Fold-mean micro-averaged AUC of the real-label MLR.
    pub mlr_auc: Vec<f64>,
    /// Feature count at which the early-stop rule fired.
    pub stop_d: Option<usize>,
}

/// Fold index per row. Within each class, rows are ordered by a hash of
/// `(seed, stream, key)` and dealt round-robin, so the assignment depends
/// only on labels and keys.
pub fn stratified_folds(y: &[usize], keys: &[u64], k: usize, seed: u64, stream: u64) -> Vec<usize> {
    let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
    let mut folds = vec![0; y.len()];
    let mut offset = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        members.sort_by_key(|&i| (mix(seed, stream, keys[i]), keys[i], i));
        for (rank, &i) in members.iter().enumerate() {
            folds[i] = (rank + offset) % k;
        }
        // Rotate the start so small classes do not all pile into fold 0.
        offset += members.len();
    }
    folds
}

/// Labels permuted by a seeded shuffle applied in key order.
pub(crate) fn shuffled_labels(y: &[usize], keys: &[u64], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    let mut labels: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..labels.len()).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let mut out = vec![0; y.len()];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = labels[pos];
    }
    out
}

#[derive(Default)]
struct FoldScores {
    mlr: f64,
    mlr_train: f64,
    knn: f64,
    auc: f64,
    auc_folds: usize,
}

fn cross_validate(x: &[Vec<f64>], y: &[usize], folds: &[usize], k: usize, n_classes: usize, params: &MlrParams) -> FoldScores {
    let mut s = FoldScores::default();
    let mut used = 0;
    for f in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| folds[i] == f);
        if test.is_empty() || train.is_empty() {
            continue;
        }
        used += 1;
        let pick = |rows: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
            (rows.iter().map(|&i| x[i].clone()).collect(), rows.iter().map(|&i| y[i]).collect())
        };
        let (tr_x, tr_y) = pick(&train);
        let (te_x, te_y) = pick(&test);
        let scaler = Standardizer::fit(&tr_x);
        let tr_x = scaler.transform(&tr_x);
        let te_x = scaler.transform(&te_x);
        let model = train_mlr(&tr_x, &tr_y, n_classes, params);
        s.mlr += accuracy(&model.predict(&te_x), &te_y);
        s.mlr_train += accuracy(&model.predict(&tr_x), &tr_y);
        s.knn += knn1_accuracy(&tr_x, &tr_y, &te_x, &te_y);
        if let Ok(auc) = roc_auc_ovr_micro(&model.predict_proba(&te_x), &te_y) {
            s.auc += auc;
            s.auc_folds += 1;
        }
    }
    let used = used.max(1) as f64;
    s.mlr /= used;
    s.mlr_train /= used;
    s.knn /= used;
    s
}

/// Early-stop rule: no improvement of at least `epsilon` within the last
/// `patience` feature counts.
fn should_stop(history: &[f64], patience: usize, epsilon: f64) -> bool {
    let d = history.len();
    if patience == 0 || d <= patience {
        return false;
    }
    let base = history[d - 1 - patience];
    let best = history[d - patience..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best - base < epsilon
}

/// Fits models on the top-`d` ranked features for `d = 1, 2, …` with
/// repeated stratified K-fold CV on real and shuffled labels.
pub fn incremental_feature_search(data: &FeatureDataset, ranking: &[usize], cfg: &SearchConfig) -> Result<SearchResult> {
    if cfg.k_folds < 2 || data.x.len() < cfg.k_folds {
        return Err(Error::InvalidConfig(alloc::format!(
            "need k_folds ≥ 2 and at least k_folds trials, got k = {} with {} trials",
            cfg.k_folds,
            data.x.len()
        )));
    }
    let present = data.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::TooFewClasses(present));
    }
    let n_classes = data.n_classes();
    let d_max = cfg.max_features.unwrap_or(ranking.len()).min(ranking.len());
    let mut out = SearchResult {
        ranking: ranking.to_vec(),
        d_values: Vec::new(),
        mlr_real: Vec::new(),
        mlr_shuffled: Vec::new(),
        mlr_train: Vec::new(),
        knn_real: Vec::new(),
        knn_shuffled: Vec::new(),
        mlr_auc: Vec::new(),
        stop_d: None,
    };
    let r = cfg.repeats.max(1) as f64;
    for d in 1..=d_max {
        let x_d = data.select_features(&ranking[..d]);
        let mut acc = [0.0; 6];
        let mut auc_sum = 0.0;
        let mut auc_n = 0;
        for rep in 0..cfg.repeats.max(1) {
            let folds = stratified_folds(&data.y, &data.keys, cfg.k_folds, cfg.seed, rep as u64);
            let real = cross_validate(&x_d, &data.y, &folds, cfg.k_folds, n_classes, &cfg.mlr);
            let y_s = shuffled_labels(&data.y, &data.keys, mix(cfg.seed, d as u64, rep as u64));
            let shuf = cross_validate(&x_d, &y_s, &folds, cfg.k_folds, n_classes, &cfg.mlr);
            for (a, v) in acc.iter_mut().zip([real.mlr, shuf.mlr, real.mlr_train, real.knn, shuf.knn, 0.0]) {
                *a += v;
            }
            auc_sum += real.auc;
            auc_n += real.auc_folds;
        }
        out.d_values.push(d);
        out.mlr_real.push(acc[0] / r);
        out.mlr_shuffled.push(acc[1] / r);
        out.mlr_train.push(acc[2] / r);
        out.knn_real.push(acc[3] / r);
        out.knn_shuffled.push(acc[4] / r);
        out.mlr_auc.push(if auc_n > 0 { auc_sum / auc_n as f64 } else { f64::NAN });
        if should_stop(&out.mlr_real, cfg.patience, cfg.epsilon) {
            out.stop_d = Some(d);
            break;
        }
    }
    Ok(out)
}
