//! Clustering of reference points into monitor-point groups.

mod affinity;
mod similarity;

pub use affinity::{affinity_propagation, ApParams, ClusterModel};
pub use similarity::{
    build_similarity, combine_factors, delta_from_drifts, median, rss_difference, time_variation_similarity,
    total_drift, DeltaOrientation, FactorWeights, SimilarityMatrix, Square, DELTA_EPSILON,
};
