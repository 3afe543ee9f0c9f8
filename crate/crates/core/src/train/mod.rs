//! Training, evaluation, metrics and the experiment driver.

mod baseline;
mod experiment;
mod metrics;
mod trainer;

pub use baseline::baseline_common_neighbors;
pub use experiment::*;
pub use metrics::{balanced_weights, macro_f1, predict, roc_auc, select_threshold, weighted_bce};
pub use trainer::*;
