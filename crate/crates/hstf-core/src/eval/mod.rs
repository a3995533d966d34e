//! Evaluation harness: imbalance scenarios, repeated randomized runs,
//! P/R/F-beta/FPR/TPR metrics, ROC/AUC, cross-corpus generalization,
//! and the training-cost benchmark.

pub mod experiment;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod timing;

pub use experiment::{config_hash, run_experiment, ExperimentReport, MeanMetrics, RepeatMetrics};
pub use metrics::{
    compute_metrics, confusion_at, f_beta, fpr_from_pr, pairwise_auc, roc_sweep, ConfusionCounts,
    PointMetrics, RocCurve, RocPoint,
};
pub use scenario::{
    build_scenario, preset, preset_names, EvalPlan, ReferenceRow, Scenario, SplitIndices,
    BTHT2018_REFERENCE, RATIO_GRID,
};
pub use timing::{timing_benchmark, TimingRow};
