//! Classification-based assessment of how clean a recording is: per-channel
//! mean spectral amplitude features, multinomial logistic regression and
//! 1-nearest-neighbour classifiers, label-shuffled baselines, ranked
//! incremental feature search and micro-averaged ROC analysis.

mod eval;
mod features;
mod knn;
mod mlr;
mod roc;
mod search;

pub use eval::{evaluate_pipeline_steps, split_train_test, EvalCell, EvalConfig, EvalReport};
pub use features::{balance_classes, band_segment, mean_spectral_amplitude, Band, FeatureDataset};
pub use knn::{knn1_accuracy, knn1_predict};
pub use mlr::{rank_features, train_mlr, MlrModel, MlrParams, Standardizer};
pub use roc::{roc_auc_ovr_micro, roc_curve_ovr_micro};
pub use search::{incremental_feature_search, stratified_folds, SearchConfig, SearchResult};

/// SplitMix64 finalizer over a seed and two stream coordinates. Used to
/// derive order-independent per-trial sort keys and per-run RNG seeds.
pub(crate) fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fraction of equal entries.
pub(crate) fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
