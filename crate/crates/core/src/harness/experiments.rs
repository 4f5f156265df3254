use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Result, SalcError};
use crate::radio::RssDatabase;
use crate::romac::{ClusterModel, FactorWeights};

use super::pipeline::{cluster_with, prepare, synth_online, Artifacts, DbKind, Locator, Method};
use super::report::EvaluationReport;
use super::scenario::Scenario;

/// Scenario knob varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    Eta,
    Gamma,
    Preference,
}

impl FromStr for SweepParam {
    type Err = SalcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepParam::K),
            "eta" => Ok(SweepParam::Eta),
            "gamma" => Ok(SweepParam::Gamma),
            "preference" => Ok(SweepParam::Preference),
            other => Err(SalcError::invalid(format!("cannot sweep {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub n_clusters: usize,
    /// `None` when training diverged.
    pub report: Option<EvaluationReport>,
}

impl SweepPoint {
    pub fn diverged(&self) -> bool {
        self.report.is_none()
    }

    pub fn mean_error(&self) -> f64 {
        self.report.as_ref().map_or(f64::INFINITY, EvaluationReport::mean_error)
    }
}

const SWEEP_METHOD: Method = Method::new(Locator::Csle, DbKind::Nn);

/// A trained baseline run that sweeps branch from. Values equal to the
/// scenario's own setting reuse the baseline models instead of retraining.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub scenario: Scenario,
    pub artifacts: Artifacts,
}

impl SweepBase {
    pub fn new(sc: &Scenario) -> Result<Self> {
        let artifacts = Artifacts::build(sc, &[SWEEP_METHOD])?;
        Ok(Self {
            scenario: sc.clone(),
            artifacts,
        })
    }

    fn current(&self, param: SweepParam) -> Option<f64> {
        let sc = &self.scenario;
        match param {
            SweepParam::K => Some(sc.k as f64),
            SweepParam::Eta => Some(sc.nn.eta),
            SweepParam::Gamma => Some(sc.nn.gamma),
            SweepParam::Preference => sc.preference,
        }
    }

    fn point(&self, param: SweepParam, value: f64) -> Result<SweepPoint> {
        let base = &self.scenario;
        if param == SweepParam::K || self.current(param) == Some(value) {
            let k = if param == SweepParam::K { value as usize } else { base.k };
            return Ok(SweepPoint {
                value,
                n_clusters: self.artifacts.clusters.n_clusters(),
                report: Some(self.artifacts.evaluate(SWEEP_METHOD, k, base.fusion)?),
            });
        }
        let mut sc = base.clone();
        match param {
            SweepParam::Eta => sc.nn.eta = value,
            SweepParam::Gamma => sc.nn.gamma = value,
            SweepParam::Preference => sc.preference = Some(value),
            SweepParam::K => unreachable!(),
        }
        sc.validate()?;
        let mut art = self.artifacts.clone();
        if param == SweepParam::Preference {
            art.clusters = cluster_with(&sc, &art.offline, sc.omega)?;
        }
        let report = match art.train_nn(&sc.nn) {
            Ok(()) => Some(art.evaluate(SWEEP_METHOD, sc.k, sc.fusion)?),
            Err(e) if matches!(e.root(), SalcError::Divergence { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(SweepPoint {
            value,
            n_clusters: art.clusters.n_clusters(),
            report,
        })
    }

    /// One evaluation of CsLE over the CODE-NN map per value.
    pub fn run(&self, param: SweepParam, values: &[f64]) -> Result<Vec<SweepPoint>> {
        values.par_iter().map(|&v| self.point(param, v)).collect()
    }
}

/// Trains the baseline and sweeps `param` over `values`; `k` reuses the
/// trained models, the other knobs retrain (and `preference` reclusters).
pub fn sweep(sc: &Scenario, param: SweepParam, values: &[f64]) -> Result<Vec<SweepPoint>> {
    SweepBase::new(sc)?.run(param, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub name: &'static str,
    pub weights: FactorWeights,
    pub clusters: ClusterModel,
    pub report: EvaluationReport,
}

pub const ABLATIONS: [(&str, FactorWeights); 4] = [
    ("rss", FactorWeights::RSS_ONLY),
    ("ssp", FactorWeights::SSP_ONLY),
    ("delta", FactorWeights::DELTA_ONLY),
    ("combined", FactorWeights::EQUAL),
];

/// Clusters with each single factor and with all three, feeding CODE-NN and
/// CsLE from each clustering.
pub fn ablate_similarity(sc: &Scenario) -> Result<Vec<Ablation>> {
    let offline = prepare(sc)?;
    let online = synth_online(sc, &offline)?;
    ABLATIONS
        .par_iter()
        .map(|&(name, weights)| {
            let clusters = cluster_with(sc, &offline, weights)?;
            let mut art = Artifacts {
                offline: offline.clone(),
                clusters: clusters.clone(),
                online: online.clone(),
                lr: None,
                nn: None,
                adaptive_lr: None,
                adaptive_nn: None,
            };
            art.train_nn(&sc.nn)?;
            let mut report = art.evaluate(SWEEP_METHOD, sc.k, sc.fusion)?;
            report.label = format!("{name}:{}", report.label);
            Ok(Ablation {
                name,
                weights,
                clusters,
                report,
            })
        })
        .collect()
}

/// Per-(instant, RP, AP) absolute error of a reconstructed map.
pub fn rss_error_grid(series: &RssDatabase, truth: &RssDatabase) -> String {
    let mut s = String::from("sample,time,rp,x,y,ap,error_db\n");
    for k in 0..series.n_samples().min(truth.n_samples()) {
        for (n, p) in series.positions().iter().enumerate() {
            for l in 0..series.n_aps() {
                let e = (series.get(n, l, k) - truth.get(n, l, k)).abs();
                let _ = writeln!(s, "{k},{},{n},{},{},{l},{e}", series.time_labels()[k], p.x, p.y);
            }
        }
    }
    s
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes `summary.csv`, `cdf_<label>.csv` per report and, for each
/// `(label, reconstructed)` map, `rss_error_<label>.csv` against `truth`.
pub fn emit_plot_data(
    reports: &[EvaluationReport],
    maps: &[(&str, &RssDatabase)],
    truth: Option<&RssDatabase>,
    out_dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut summary = String::from("label,n,mean_error_m,median_error_m\n");
    for r in reports {
        if !r.is_empty() {
            let _ = writeln!(summary, "{},{},{},{}", r.label, r.len(), r.mean_error(), r.median_error());
        }
        let mut cdf = String::from("error_m,cumulative\n");
        for (e, c) in r.cdf() {
            let _ = writeln!(cdf, "{e},{c}");
        }
        std::fs::write(dir.join(format!("cdf_{}.csv", file_label(&r.label))), cdf)?;
        std::fs::write(dir.join(format!("records_{}.csv", file_label(&r.label))), r.to_csv())?;
    }
    std::fs::write(dir.join("summary.csv"), summary)?;
    if let Some(truth) = truth {
        for (label, series) in maps {
            std::fs::write(
                dir.join(format!("rss_error_{}.csv", file_label(label))),
                rss_error_grid(series, truth),
            )?;
        }
    }
    Ok(())
}
