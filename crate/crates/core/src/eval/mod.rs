//! Metrics, cross-validation, hyperparameter search and the trial harness.

mod cv;
mod metrics;
mod search;
mod trials;

pub use cv::{kfold_cv, stratified_folds, CvOptions, CvResult, FoldResult};
pub use metrics::{accuracy, auc, recall, Metrics, METRIC_NAMES};
pub use search::{grid_search, random_search, search, ParamRange, Sampled, SearchMode, SearchResult, SearchSpace};
pub use trials::{
    default_spaces, fit_trial, prepare_trial, run_trials, run_trials_with, FamilySummary, FittedFamily,
    PreparedTrial, ProtocolConfig, TrialOutcome, TrialReport,
};
