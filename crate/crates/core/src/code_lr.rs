//! Per-(RP, AP) linear maps from a cluster's monitor point to its members.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SalcError};
use crate::floorplan::parse_tok;
use crate::radio::{MpSlice, RssDatabase, RssSnapshot};
use crate::romac::ClusterModel;

/// Parameter change below which a fit is considered converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrParams {
    pub eta: f64,
    pub epochs: usize,
}

impl Default for LrParams {
    fn default() -> Self {
        Self { eta: 0.1, epochs: 200 }
    }
}

/// Fitted coefficient and bias of one (RP, AP) pair, in dB units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub coeff: f64,
    pub bias: f64,
    /// The monitor series had zero variance; `coeff = 0`, `bias = mean`.
    pub degenerate: bool,
    pub epochs_run: usize,
}

/// Fits `y ≈ c x + b` by gradient descent on the squared error, with the
/// input standardized to zero mean and unit variance. One update per epoch
/// from the gradient accumulated over the samples in order.
pub fn fit_pair(x: &[f64], y: &[f64], params: LrParams) -> LinearFit {
    assert_eq!(x.len(), y.len(), "series lengths differ");
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let var_x = x.iter().map(|v| (v - mean_x).powi(2)).sum::<f64>() / n;
    if !(var_x.sqrt() > 1e-12) {
        return LinearFit {
            coeff: 0.0,
            bias: y.iter().sum::<f64>() / n,
            degenerate: true,
            epochs_run: 0,
        };
    }
    let sd_x = var_x.sqrt();
    let (mut c, mut b) = (0.0_f64, 0.0_f64);
    let mut epochs_run = 0;
    for _ in 0..params.epochs {
        epochs_run += 1;
        let (mut gc, mut gb) = (0.0, 0.0);
        for (&xv, &yv) in x.iter().zip(y) {
            let z = (xv - mean_x) / sd_x;
            let err = c * z + b - yv;
            gc += err * z;
            gb += err;
        }
        let dc = params.eta * gc / n;
        let db = params.eta * gb / n;
        c -= dc;
        b -= db;
        if dc.abs().max(db.abs()) < CONVERGENCE_TOL {
            break;
        }
    }
    LinearFit {
        coeff: c / sd_x,
        bias: b - c * mean_x / sd_x,
        degenerate: false,
        epochs_run,
    }
}

/// Coefficients and biases for every (RP, AP) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelSet {
    n_rp: usize,
    n_ap: usize,
    coeff: Vec<f64>,
    bias: Vec<f64>,
    degenerate: Vec<bool>,
}

impl LinearModelSet {
    pub fn from_parts(n_rp: usize, n_ap: usize, coeff: Vec<f64>, bias: Vec<f64>, degenerate: Vec<bool>) -> Result<Self> {
        let len = n_rp * n_ap;
        if coeff.len() != len || bias.len() != len || degenerate.len() != len {
            return Err(SalcError::Shape {
                expected: format!("{n_rp}x{n_ap}"),
                got: format!("{}/{}/{}", coeff.len(), bias.len(), degenerate.len()),
            });
        }
        if coeff.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(SalcError::invalid("linear model parameters must be finite"));
        }
        Ok(Self {
            n_rp,
            n_ap,
            coeff,
            bias,
            degenerate,
        })
    }

    pub fn n_rp(&self) -> usize {
        self.n_rp
    }

    pub fn n_ap(&self) -> usize {
        self.n_ap
    }

    pub fn coeff(&self, n: usize, l: usize) -> f64 {
        self.coeff[n * self.n_ap + l]
    }

    pub fn bias(&self, n: usize, l: usize) -> f64 {
        self.bias[n * self.n_ap + l]
    }

    pub fn is_degenerate(&self, n: usize, l: usize) -> bool {
        self.degenerate[n * self.n_ap + l]
    }

    /// Model parameter file: header, then `n l c b degenerate_flag` per pair.
    pub fn to_text(&self) -> String {
        let mut s = format!("lrmodel {} {}\n", self.n_rp, self.n_ap);
        for n in 0..self.n_rp {
            for l in 0..self.n_ap {
                let _ = writeln!(
                    s,
                    "{n} {l} {} {} {}",
                    self.coeff(n, l),
                    self.bias(n, l),
                    u8::from(self.is_degenerate(n, l))
                );
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hi, header) = lines.next().ok_or_else(|| SalcError::parse(1, "empty model file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let ["lrmodel", nr, na] = h[..] else {
            return Err(SalcError::parse(hi + 1, "expected `lrmodel N_rp N_ap`"));
        };
        let (n_rp, n_ap): (usize, usize) = (parse_tok(nr, hi + 1)?, parse_tok(na, hi + 1)?);
        let mut coeff = vec![f64::NAN; n_rp * n_ap];
        let mut bias = vec![f64::NAN; n_rp * n_ap];
        let mut degenerate = vec![false; n_rp * n_ap];
        for (i, line) in lines {
            let ln = i + 1;
            let t: Vec<&str> = line.split_whitespace().collect();
            let [n, l, c, b, d] = t[..] else {
                return Err(SalcError::parse(ln, "expected `n l c b flag`"));
            };
            let (n, l): (usize, usize) = (parse_tok(n, ln)?, parse_tok(l, ln)?);
            if n >= n_rp || l >= n_ap {
                return Err(SalcError::parse(ln, "index out of range"));
            }
            let k = n * n_ap + l;
            coeff[k] = parse_tok(c, ln)?;
            bias[k] = parse_tok(b, ln)?;
            degenerate[k] = parse_tok::<u8>(d, ln)? != 0;
        }
        Self::from_parts(n_rp, n_ap, coeff, bias, degenerate)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Trains one model per (RP, AP) from the RP's exemplar series over the
/// non-reference samples of the offline database.
pub fn fit(db: &RssDatabase, cm: &ClusterModel, params: LrParams) -> Result<LinearModelSet> {
    if cm.n_points() != db.n_points() {
        return Err(SalcError::Shape {
            expected: format!("{} clustered points", db.n_points()),
            got: cm.n_points().to_string(),
        });
    }
    let samples = db.varying_samples();
    let (n_rp, n_ap) = (db.n_points(), db.n_aps());
    let mut coeff = Vec::with_capacity(n_rp * n_ap);
    let mut bias = Vec::with_capacity(n_rp * n_ap);
    let mut degenerate = Vec::with_capacity(n_rp * n_ap);
    for n in 0..n_rp {
        let mu = cm.exemplar_of(n);
        for l in 0..n_ap {
            let x = &db.series(mu, l)[samples.clone()];
            let y = &db.series(n, l)[samples.clone()];
            let f = fit_pair(x, y, params);
            coeff.push(f.coeff);
            bias.push(f.bias);
            degenerate.push(f.degenerate);
        }
    }
    LinearModelSet::from_parts(n_rp, n_ap, coeff, bias, degenerate)
}

/// Adaptive database at the online instant: each RP's value is its linear
/// map applied to its exemplar's live reading.
pub fn reconstruct(models: &LinearModelSet, cm: &ClusterModel, mp_now: &MpSlice) -> Result<RssSnapshot> {
    if cm.n_points() != models.n_rp() {
        return Err(SalcError::Shape {
            expected: format!("{} clustered points", models.n_rp()),
            got: cm.n_points().to_string(),
        });
    }
    if mp_now.rss.n_aps() != models.n_ap() {
        return Err(SalcError::Shape {
            expected: format!("{} APs", models.n_ap()),
            got: mp_now.rss.n_aps().to_string(),
        });
    }
    let mut values = Vec::with_capacity(models.n_rp() * models.n_ap());
    for n in 0..models.n_rp() {
        let mu = cm.exemplar_of(n);
        let reading = mp_now.reading(mu).ok_or(SalcError::MissingExemplar {
            cluster: cm.cluster_of(n),
            exemplar: mu,
        })?;
        for (l, &x) in reading.iter().enumerate() {
            values.push(models.coeff(n, l) * x + models.bias(n, l));
        }
    }
    RssSnapshot::new(models.n_rp(), models.n_ap(), values)
}
