use crate::error::{Result, SalcError};
use crate::floorplan::{SnappedPoints, SspMatrix};
use crate::radio::RssDatabase;

/// Floor on the aggregated time-variation difference before inversion.
pub const DELTA_EPSILON: f64 = 1e-6;

/// How the normalized time-variation factor enters the similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaOrientation {
    /// `s = -(... + w_delta * delta)`: larger delta lowers similarity.
    #[default]
    Literal,
    /// Uses `1 - delta`, so pairs with similar time variation are more similar.
    Inverted,
}

impl std::str::FromStr for DeltaOrientation {
    type Err = SalcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "inverted" => Ok(Self::Inverted),
            other => Err(SalcError::invalid(format!("unknown delta orientation {other:?}"))),
        }
    }
}

/// Weights of the RSS, skeleton-path and time-variation factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorWeights {
    pub rss: f64,
    pub ssp: f64,
    pub delta: f64,
}

impl FactorWeights {
    pub const EQUAL: FactorWeights = FactorWeights {
        rss: 1.0 / 3.0,
        ssp: 1.0 / 3.0,
        delta: 1.0 / 3.0,
    };
    pub const RSS_ONLY: FactorWeights = FactorWeights { rss: 1.0, ssp: 0.0, delta: 0.0 };
    pub const SSP_ONLY: FactorWeights = FactorWeights { rss: 0.0, ssp: 1.0, delta: 0.0 };
    pub const DELTA_ONLY: FactorWeights = FactorWeights { rss: 0.0, ssp: 0.0, delta: 1.0 };

    fn validate(&self) -> Result<()> {
        let w = [self.rss, self.ssp, self.delta];
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || w.iter().all(|&x| x == 0.0) {
            return Err(SalcError::invalid(format!(
                "factor weights must be non-negative and not all zero, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Square {
    n: usize,
    data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(SalcError::Shape {
                expected: format!("{n}x{n}"),
                got: data.len().to_string(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(|(_, &v)| v)
    }

    /// Min-max rescales off-diagonal entries to `[0, 1]`; the diagonal is zeroed.
    /// A constant matrix maps to all zeros.
    pub fn min_max_normalized(&self) -> Self {
        let (lo, hi) = self
            .off_diagonal()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        Self::from_fn(self.n, |i, j| {
            if i == j || !(span > 0.0) {
                0.0
            } else {
                (self.get(i, j) - lo) / span
            }
        })
    }
}

/// Joint similarity with its constituent factors.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub s: Square,
    pub d_rss: Square,
    pub d_ssp: Square,
    pub delta: Square,
    pub weights: FactorWeights,
}

/// Mean absolute RSS difference between points `i` and `j` over every AP
/// and every non-reference sample.
pub fn rss_difference(i: usize, j: usize, db: &RssDatabase) -> f64 {
    let samples = db.varying_samples();
    let mut sum = 0.0;
    for l in 0..db.n_aps() {
        let (a, b) = (db.series(i, l), db.series(j, l));
        for k in samples.clone() {
            sum += (a[k] - b[k]).abs();
        }
    }
    sum / (db.n_aps() * samples.len()) as f64
}

/// Sum over APs and samples of a point's drift from its reference reading.
pub fn total_drift(n: usize, db: &RssDatabase) -> f64 {
    let mut sum = 0.0;
    for l in 0..db.n_aps() {
        let s = db.series(n, l);
        for k in 1..db.n_samples() {
            sum += s[k] - s[0];
        }
    }
    sum
}

/// Inverse of the absolute difference in total drift of two points, floored
/// at [`DELTA_EPSILON`].
pub fn time_variation_similarity(i: usize, j: usize, db: &RssDatabase) -> f64 {
    delta_from_drifts(total_drift(i, db), total_drift(j, db))
}

pub fn delta_from_drifts(drift_i: f64, drift_j: f64) -> f64 {
    1.0 / (drift_i - drift_j).abs().max(DELTA_EPSILON)
}

/// Median of a non-empty slice (mean of the two middle values when even).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Combines normalized factor matrices into the joint similarity and sets the
/// diagonal preference (column median, or `preference` when given).
pub fn combine_factors(
    d_rss: Square,
    d_ssp: Square,
    delta: Square,
    weights: FactorWeights,
    orientation: DeltaOrientation,
    preference: Option<f64>,
) -> Result<SimilarityMatrix> {
    weights.validate()?;
    let n = d_rss.n();
    if n < 2 {
        return Err(SalcError::invalid("similarity needs at least 2 reference points"));
    }
    let (nr, ns, nd) = (
        d_rss.min_max_normalized(),
        d_ssp.min_max_normalized(),
        delta.min_max_normalized(),
    );
    let mut s = Square::from_fn(n, |i, j| {
        if i == j {
            return 0.0;
        }
        let dv = match orientation {
            DeltaOrientation::Literal => nd.get(i, j),
            DeltaOrientation::Inverted => 1.0 - nd.get(i, j),
        };
        -(weights.rss * nr.get(i, j) + weights.ssp * ns.get(i, j) + weights.delta * dv)
    });
    for j in 0..n {
        let pref = match preference {
            Some(p) => p,
            None => {
                let column: Vec<f64> = (0..n).filter(|&i| i != j).map(|i| s.get(i, j)).collect();
                median(&column)
            }
        };
        s.set(j, j, pref);
    }
    Ok(SimilarityMatrix {
        s,
        d_rss,
        d_ssp,
        delta,
        weights,
    })
}

/// Builds every factor from the offline database and skeleton geometry.
pub fn build_similarity(
    db: &RssDatabase,
    rps: &SnappedPoints,
    ssp: &SspMatrix,
    weights: FactorWeights,
    orientation: DeltaOrientation,
    preference: Option<f64>,
) -> Result<SimilarityMatrix> {
    let n = db.n_points();
    if n < 2 {
        return Err(SalcError::invalid("similarity needs at least 2 reference points"));
    }
    if rps.len() != n {
        return Err(SalcError::Shape {
            expected: format!("{n} snapped points"),
            got: rps.len().to_string(),
        });
    }
    let drifts: Vec<f64> = (0..n).map(|i| total_drift(i, db)).collect();
    let mut d_rss = Square::zeros(n);
    let mut delta = Square::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let r = rss_difference(i, j, db);
            d_rss.set(i, j, r);
            d_rss.set(j, i, r);
            let t = delta_from_drifts(drifts[i], drifts[j]);
            delta.set(i, j, t);
            delta.set(j, i, t);
        }
    }
    let d_ssp = Square::from_vec(n, rps.matrix(ssp)?)?;
    combine_factors(d_rss, d_ssp, delta, weights, orientation, preference)
}
