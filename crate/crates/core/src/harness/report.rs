use std::fmt::Write as _;

use crate::error::{Result, SalcError};
use crate::floorplan::parse_tok;
use crate::geometry::Point2;

/// One located test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub tp_index: usize,
    pub truth: Point2,
    pub estimate: Point2,
    pub error_m: f64,
}

impl EstimateRecord {
    pub fn new(tp_index: usize, truth: Point2, estimate: Point2) -> Self {
        Self {
            tp_index,
            truth,
            estimate,
            error_m: truth.dist(estimate),
        }
    }
}

/// Per-TP errors of one database/locator combination.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub label: String,
    pub records: Vec<EstimateRecord>,
}

impl EvaluationReport {
    pub fn new(label: impl Into<String>, records: Vec<EstimateRecord>) -> Self {
        Self {
            label: label.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn sorted_errors(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.records.iter().map(|r| r.error_m).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Mean error in meters; NaN for an empty report.
    pub fn mean_error(&self) -> f64 {
        self.records.iter().map(|r| r.error_m).sum::<f64>() / self.records.len() as f64
    }

    /// Median error in meters; NaN for an empty report.
    pub fn median_error(&self) -> f64 {
        let e = self.sorted_errors();
        match e.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => e[n / 2],
            n => 0.5 * (e[n / 2 - 1] + e[n / 2]),
        }
    }

    /// Empirical CDF as `(error_m, cumulative)` steps, ending at 1.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let e = self.sorted_errors();
        let n = e.len() as f64;
        e.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n)).collect()
    }

    pub const HEADER: &'static str = "tp_index,true_x,true_y,est_x,est_y,error_m";

    /// CSV of the records.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.tp_index, r.truth.x, r.truth.y, r.estimate.x, r.estimate.y, r.error_m
            );
        }
        s
    }

    pub fn parse_csv(label: impl Into<String>, text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim();
            if line.is_empty() || line == Self::HEADER {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(SalcError::parse(ln, format!("expected 6 fields, got {}", f.len())));
            }
            let num = |k: usize| parse_tok::<f64>(f[k], ln);
            records.push(EstimateRecord {
                tp_index: parse_tok(f[0], ln)?,
                truth: Point2::new(num(1)?, num(2)?),
                estimate: Point2::new(num(3)?, num(4)?),
                error_m: num(5)?,
            });
        }
        Ok(Self::new(label, records))
    }
}
