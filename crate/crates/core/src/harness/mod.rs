//! Scenario configuration, end-to-end runs, experiments and their outputs.

mod experiments;
mod pipeline;
mod report;
mod scenario;

pub use experiments::{
    ablate_similarity, emit_plot_data, rss_error_grid, sweep, Ablation, SweepBase, SweepParam, SweepPoint, ABLATIONS,
};
pub use pipeline::{
    cluster, cluster_with, evaluate_series, online_time, original_series, prepare, reconstruct_lr_series,
    reconstruct_nn_series, reconstruction_mae, run_pipeline, similarity, synth_online, Artifacts, DbKind, Locator,
    Method, Offline, Online,
};
pub use report::{EstimateRecord, EvaluationReport};
pub use scenario::{Scenario, StageSeeds};
