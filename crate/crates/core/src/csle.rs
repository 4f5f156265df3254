//! Cluster-scaled weighted k-nearest-neighbor positioning and the plain
//! WkNN baseline.

use crate::error::{Result, SalcError};
use crate::geometry::Point2;
use crate::radio::RssSnapshot;
use crate::romac::ClusterModel;

/// Lower bound on the cluster spread used to scale RSS mismatches (dB).
pub const SIGMA_FLOOR_DB: f64 = 0.5;
/// Lower bound on a distance before it is inverted into a weight.
pub const DISTANCE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub xy: Point2,
    /// `(rp_index, weight)` of every neighbor that contributed.
    pub selected: Vec<(usize, f64)>,
    pub k: usize,
}

/// Population standard deviation of each cluster's reconstructed RSS per AP,
/// indexed `[cluster][ap]`.
pub fn cluster_spread(adaptive: &RssSnapshot, cm: &ClusterModel) -> Vec<Vec<f64>> {
    cm.clusters()
        .iter()
        .map(|members| {
            (0..adaptive.n_aps())
                .map(|l| {
                    let n = members.len() as f64;
                    let mean = members.iter().map(|&i| adaptive.get(i, l)).sum::<f64>() / n;
                    let var = members
                        .iter()
                        .map(|&i| (adaptive.get(i, l) - mean).powi(2))
                        .sum::<f64>()
                        / n;
                    var.sqrt()
                })
                .collect()
        })
        .collect()
}

/// Modified distance: RSS mismatch at `(n, l)` scaled by the spread of `n`'s
/// cluster for AP `l`.
pub fn med(n: usize, l: usize, adaptive: &RssSnapshot, cm: &ClusterModel, user: &[f64]) -> f64 {
    let spread = cluster_spread(adaptive, cm);
    med_with_spread(n, l, adaptive, cm, user, &spread)
}

fn med_with_spread(
    n: usize,
    l: usize,
    adaptive: &RssSnapshot,
    cm: &ClusterModel,
    user: &[f64],
    spread: &[Vec<f64>],
) -> f64 {
    let sigma = spread[cm.cluster_of(n)][l].max(SIGMA_FLOOR_DB);
    (adaptive.get(n, l) - user[l]).abs() / sigma
}

/// Indices of the `k` largest weights, highest first; lower index wins ties.
pub fn top_k(weights: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| (i, weights[i])).collect()
}

fn check_query(adaptive: &RssSnapshot, user: &[f64], k: usize) -> Result<()> {
    if user.len() != adaptive.n_aps() {
        return Err(SalcError::Shape {
            expected: format!("{} user readings", adaptive.n_aps()),
            got: user.len().to_string(),
        });
    }
    if k == 0 || k > adaptive.n_points() {
        return Err(SalcError::invalid(format!(
            "k must be in 1..={}, got {k}",
            adaptive.n_points()
        )));
    }
    Ok(())
}

/// Per-AP top-`k` inverse-MED weights.
pub fn weights(adaptive: &RssSnapshot, cm: &ClusterModel, user: &[f64], k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    check_query(adaptive, user, k)?;
    let spread = cluster_spread(adaptive, cm);
    Ok((0..adaptive.n_aps())
        .map(|l| {
            let w: Vec<f64> = (0..adaptive.n_points())
                .map(|n| 1.0 / med_with_spread(n, l, adaptive, cm, user, &spread).max(DISTANCE_FLOOR))
                .collect();
            top_k(&w, k)
        })
        .collect())
}

/// Single top-`k` set from the per-AP MEDs fused into one distance,
/// `sqrt(sum_l med(n, l)^2)`.
pub fn joint_weights(adaptive: &RssSnapshot, cm: &ClusterModel, user: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
    check_query(adaptive, user, k)?;
    let spread = cluster_spread(adaptive, cm);
    let w: Vec<f64> = (0..adaptive.n_points())
        .map(|n| {
            let d = (0..adaptive.n_aps())
                .map(|l| med_with_spread(n, l, adaptive, cm, user, &spread).powi(2))
                .sum::<f64>()
                .sqrt();
            1.0 / d.max(DISTANCE_FLOOR)
        })
        .collect();
    Ok(top_k(&w, k))
}

/// How per-AP modified distances turn into neighbor sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fusion {
    /// One top-`k` set per AP, pooled in the weighted average.
    PerAp,
    /// One top-`k` set over the fused distance.
    #[default]
    Joint,
}

impl std::str::FromStr for Fusion {
    type Err = SalcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-ap" | "per_ap" => Ok(Fusion::PerAp),
            "joint" => Ok(Fusion::Joint),
            other => Err(SalcError::invalid(format!("unknown fusion {other:?}"))),
        }
    }
}

/// Weighted average of the selected RP positions over every AP's set.
pub fn estimate(weights: &[Vec<(usize, f64)>], rp_positions: &[Point2]) -> Result<PositionEstimate> {
    let selected: Vec<(usize, f64)> = weights.iter().flatten().copied().collect();
    let total: f64 = selected.iter().map(|&(_, w)| w).sum();
    if !(total > 0.0) || selected.iter().any(|&(_, w)| !(w > 0.0) || !w.is_finite()) {
        return Err(SalcError::invalid("position estimate needs finite positive weights"));
    }
    let mut xy = Point2::default();
    for &(n, w) in &selected {
        xy = xy + rp_positions[n] * w;
    }
    Ok(PositionEstimate {
        xy: xy * (1.0 / total),
        k: weights.iter().map(Vec::len).max().unwrap_or(0),
        selected,
    })
}

/// Cluster-scaled location estimate in one call.
pub fn locate(
    adaptive: &RssSnapshot,
    cm: &ClusterModel,
    rp_positions: &[Point2],
    user: &[f64],
    k: usize,
    fusion: Fusion,
) -> Result<PositionEstimate> {
    match fusion {
        Fusion::PerAp => estimate(&weights(adaptive, cm, user, k)?, rp_positions),
        Fusion::Joint => estimate(&[joint_weights(adaptive, cm, user, k)?], rp_positions),
    }
}

/// Plain WkNN: inverse Euclidean RSS-vector distance, no cluster scaling.
pub fn wknn_baseline(db: &RssSnapshot, rp_positions: &[Point2], user: &[f64], k: usize) -> Result<PositionEstimate> {
    check_query(db, user, k)?;
    let w: Vec<f64> = (0..db.n_points())
        .map(|n| {
            let d = db
                .row(n)
                .iter()
                .zip(user)
                .map(|(a, u)| (a - u).powi(2))
                .sum::<f64>()
                .sqrt();
            1.0 / d.max(DISTANCE_FLOOR)
        })
        .collect();
    estimate(&[top_k(&w, k)], rp_positions)
}
