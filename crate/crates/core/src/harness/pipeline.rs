use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::code_lr::{self, LinearModelSet};
use crate::code_nn::{reconstruct_nn, train_all, NnModelSet, NnParams};
use crate::csle::{self, Fusion};
use crate::error::{Result, SalcError};
use crate::floorplan::{build_skeleton, shortest_path_matrix, SnappedPoints, Skeleton};
use crate::geometry::Point2;
use crate::radio::{build_database, mp_stream, synth_rss, RssDatabase, RssSnapshot};
use crate::romac::{affinity_propagation, build_similarity, ClusterModel, FactorWeights, SimilarityMatrix};

use super::report::{EstimateRecord, EvaluationReport};
use super::scenario::Scenario;

/// Radio map used at the online instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DbKind {
    /// The empty-environment reference, never updated.
    Original,
    /// Noise-free ground truth at the online instant.
    True,
    Lr,
    Nn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Locator {
    Csle,
    Wknn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Method {
    pub locator: Locator,
    pub db: DbKind,
}

impl Method {
    pub const fn new(locator: Locator, db: DbKind) -> Self {
        Self { locator, db }
    }

    /// Every locator paired with every database.
    pub fn all() -> Vec<Method> {
        let mut out = Vec::new();
        for db in [DbKind::Original, DbKind::True, DbKind::Lr, DbKind::Nn] {
            for locator in [Locator::Csle, Locator::Wknn] {
                out.push(Method::new(locator, db));
            }
        }
        out
    }
}

impl fmt::Display for DbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DbKind::Original => "original",
            DbKind::True => "true",
            DbKind::Lr => "lr",
            DbKind::Nn => "nn",
        })
    }
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Locator::Csle => "csle",
            Locator::Wknn => "wknn",
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.locator, self.db)
    }
}

impl FromStr for DbKind {
    type Err = SalcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" => Ok(DbKind::Original),
            "true" => Ok(DbKind::True),
            "lr" => Ok(DbKind::Lr),
            "nn" => Ok(DbKind::Nn),
            other => Err(SalcError::invalid(format!("unknown database {other:?}"))),
        }
    }
}

impl FromStr for Locator {
    type Err = SalcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csle" => Ok(Locator::Csle),
            "wknn" => Ok(Locator::Wknn),
            other => Err(SalcError::invalid(format!("unknown locator {other:?}"))),
        }
    }
}

/// Parses `locator+db`, e.g. `csle+nn`.
impl FromStr for Method {
    type Err = SalcError;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['+', ':'])
            .ok_or_else(|| SalcError::invalid(format!("method must look like csle+nn, got {s:?}")))?;
        Ok(Method::new(a.parse()?, b.parse()?))
    }
}

/// Offline side: skeleton geometry and the RP database.
#[derive(Debug, Clone)]
pub struct Offline {
    pub skeleton: Skeleton,
    pub snapped: SnappedPoints,
    pub db: RssDatabase,
}

/// Online side: one instant per test point.
#[derive(Debug, Clone, PartialEq)]
pub struct Online {
    /// Noisy RP readings at every online instant; monitor points read their rows.
    pub monitor: RssDatabase,
    /// Noise-free RP readings at every online instant.
    pub truth: RssDatabase,
    /// Noisy user readings, one TP per row.
    pub users: RssSnapshot,
    pub tps: Vec<Point2>,
}

impl Online {
    pub fn n_tps(&self) -> usize {
        self.tps.len()
    }
}

/// Time label at which test point `i` is measured.
pub fn online_time(sc: &Scenario, i: usize) -> usize {
    sc.samples + i
}

pub fn prepare(sc: &Scenario) -> Result<Offline> {
    let skeleton = build_skeleton(&sc.map).map_err(|e| e.at_stage("skeleton"))?;
    let rps = sc.reference_points();
    let snapped = SnappedPoints::new(&rps, &skeleton).map_err(|e| e.at_stage("skeleton"))?;
    let db = build_database(&rps, &sc.aps, &sc.environment(), sc.samples).map_err(|e| e.at_stage("synth"))?;
    Ok(Offline { skeleton, snapped, db })
}

pub fn similarity(sc: &Scenario, off: &Offline, weights: FactorWeights) -> Result<SimilarityMatrix> {
    let ssp = shortest_path_matrix(&off.skeleton);
    build_similarity(&off.db, &off.snapped, &ssp, weights, sc.delta_orientation, sc.preference)
        .map_err(|e| e.at_stage("cluster"))
}

pub fn cluster_with(sc: &Scenario, off: &Offline, weights: FactorWeights) -> Result<ClusterModel> {
    let s = similarity(sc, off, weights)?;
    affinity_propagation(&s.s, sc.ap).map_err(|e| e.at_stage("cluster"))
}

pub fn cluster(sc: &Scenario, off: &Offline) -> Result<ClusterModel> {
    cluster_with(sc, off, sc.omega)
}

pub fn synth_online(sc: &Scenario, off: &Offline) -> Result<Online> {
    let env = sc.environment();
    let truth_env = env.noiseless();
    let tps = sc.test_points();
    if tps.is_empty() {
        return Err(SalcError::invalid("scenario has no test points").at_stage("synth"));
    }
    let rps = off.db.positions();
    let times: Vec<usize> = (0..tps.len()).map(|i| online_time(sc, i)).collect();
    let series = |env: &crate::radio::Environment| {
        let mut values = Vec::with_capacity(rps.len() * sc.aps.len() * times.len());
        for p in rps {
            for ap in &sc.aps {
                values.extend(times.iter().map(|&t| synth_rss(*p, ap, env, t)));
            }
        }
        RssDatabase::new(rps.to_vec(), sc.aps.len(), times.clone(), values)
    };
    let monitor = series(&env).map_err(|e| e.at_stage("synth"))?;
    let truth = series(&truth_env).map_err(|e| e.at_stage("synth"))?;
    let users = RssSnapshot::from_fn(tps.len(), sc.aps.len(), |i, l| synth_rss(tps[i], &sc.aps[l], &env, times[i]));
    Ok(Online {
        monitor,
        truth,
        users,
        tps,
    })
}

/// Stacks per-instant snapshots into a database over the online time labels.
fn stack(template: &RssDatabase, snaps: &[RssSnapshot]) -> Result<RssDatabase> {
    let (np, na) = (template.n_points(), template.n_aps());
    let mut values = Vec::with_capacity(np * na * snaps.len());
    for n in 0..np {
        for l in 0..na {
            values.extend(snaps.iter().map(|s| s.get(n, l)));
        }
    }
    RssDatabase::new(template.positions().to_vec(), na, template.time_labels().to_vec(), values)
}

pub fn reconstruct_lr_series(models: &LinearModelSet, cm: &ClusterModel, online: &Online) -> Result<RssDatabase> {
    let snaps = (0..online.n_tps())
        .map(|i| code_lr::reconstruct(models, cm, &mp_stream(&online.monitor, cm.exemplars(), i)?))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("reconstruct"))?;
    stack(&online.monitor, &snaps)
}

pub fn reconstruct_nn_series(models: &NnModelSet, reference: &RssSnapshot, online: &Online) -> Result<RssDatabase> {
    let snaps = (0..online.n_tps())
        .map(|i| reconstruct_nn(models, &mp_stream(&online.monitor, &models.exemplars, i)?, reference))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("reconstruct"))?;
    stack(&online.monitor, &snaps)
}

/// The reference snapshot repeated over the online instants.
pub fn original_series(off: &Offline, online: &Online) -> Result<RssDatabase> {
    let reference = off.db.reference();
    stack(&online.monitor, &vec![reference; online.n_tps()])
}

/// Every persisted intermediate of a pipeline run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub offline: Offline,
    pub clusters: ClusterModel,
    pub online: Online,
    pub lr: Option<LinearModelSet>,
    pub nn: Option<NnModelSet>,
    pub adaptive_lr: Option<RssDatabase>,
    pub adaptive_nn: Option<RssDatabase>,
}

const FILES: [&str; 10] = [
    "skeleton.txt",
    "offline.rssdb",
    "clusters.txt",
    "monitor.rssdb",
    "truth.rssdb",
    "users.rssdb",
    "lr.model",
    "nn.model",
    "adaptive_lr.rssdb",
    "adaptive_nn.rssdb",
];

fn users_db(online: &Online) -> Result<RssDatabase> {
    RssDatabase::new(online.tps.clone(), online.users.n_aps(), vec![0], online.users.values().to_vec())
}

impl Artifacts {
    /// Runs every stage needed by `methods`.
    pub fn build(sc: &Scenario, methods: &[Method]) -> Result<Self> {
        let offline = prepare(sc)?;
        let clusters = cluster(sc, &offline)?;
        let online = synth_online(sc, &offline)?;
        let mut art = Artifacts {
            offline,
            clusters,
            online,
            lr: None,
            nn: None,
            adaptive_lr: None,
            adaptive_nn: None,
        };
        if methods.iter().any(|m| m.db == DbKind::Lr) {
            art.train_lr(sc)?;
        }
        if methods.iter().any(|m| m.db == DbKind::Nn) {
            art.train_nn(&sc.nn)?;
        }
        Ok(art)
    }

    pub fn train_lr(&mut self, sc: &Scenario) -> Result<()> {
        let models = code_lr::fit(&self.offline.db, &self.clusters, sc.lr).map_err(|e| e.at_stage("train-lr"))?;
        self.adaptive_lr = Some(reconstruct_lr_series(&models, &self.clusters, &self.online)?);
        self.lr = Some(models);
        Ok(())
    }

    pub fn train_nn(&mut self, params: &NnParams) -> Result<()> {
        let (models, _) = train_all(&self.offline.db, &self.clusters, params).map_err(|e| e.at_stage("train-nn"))?;
        self.adaptive_nn = Some(reconstruct_nn_series(&models, &self.offline.db.reference(), &self.online)?);
        self.nn = Some(models);
        Ok(())
    }

    pub fn rp_positions(&self) -> &[Point2] {
        self.offline.db.positions()
    }

    /// Radio map of `kind` over the online instants.
    pub fn series(&self, kind: DbKind) -> Result<RssDatabase> {
        let missing = |what: &str| SalcError::invalid(format!("{what} model has not been trained"));
        match kind {
            DbKind::Original => original_series(&self.offline, &self.online),
            DbKind::True => Ok(self.online.truth.clone()),
            DbKind::Lr => self.adaptive_lr.clone().ok_or_else(|| missing("CODE-LR")),
            DbKind::Nn => self.adaptive_nn.clone().ok_or_else(|| missing("CODE-NN")),
        }
    }

    pub fn evaluate(&self, method: Method, k: usize, fusion: Fusion) -> Result<EvaluationReport> {
        let series = self.series(method.db)?;
        evaluate_series(&series, &self.clusters, &self.online, method, k, fusion)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, text: String| std::fs::write(dir.join(name), text);
        write(FILES[0], self.offline.skeleton.to_text())?;
        write(FILES[1], self.offline.db.to_text())?;
        write(FILES[2], self.clusters.to_text())?;
        write(FILES[3], self.online.monitor.to_text())?;
        write(FILES[4], self.online.truth.to_text())?;
        write(FILES[5], users_db(&self.online)?.to_text())?;
        if let Some(m) = &self.lr {
            write(FILES[6], m.to_text())?;
        }
        if let Some(m) = &self.nn {
            write(FILES[7], m.to_text())?;
        }
        if let Some(db) = &self.adaptive_lr {
            write(FILES[8], db.to_text())?;
        }
        if let Some(db) = &self.adaptive_nn {
            write(FILES[9], db.to_text())?;
        }
        Ok(())
    }

    /// Reloads a saved run. Trained models without a saved adaptive database
    /// are reconstructed again from the monitor readings.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = |i: usize| dir.join(FILES[i]);
        let optional = |i: usize| path(i).exists().then(|| path(i));
        let skeleton = Skeleton::parse(&std::fs::read_to_string(path(0))?)?;
        let db = RssDatabase::load(path(1))?;
        let snapped = SnappedPoints::new(db.positions(), &skeleton)?;
        let clusters = ClusterModel::load(path(2))?;
        let users = RssDatabase::load(path(5))?;
        let online = Online {
            monitor: RssDatabase::load(path(3))?,
            truth: RssDatabase::load(path(4))?,
            users: users.snapshot(0),
            tps: users.positions().to_vec(),
        };
        let offline = Offline { skeleton, snapped, db };
        let lr = optional(6).map(LinearModelSet::load).transpose()?;
        let nn = optional(7).map(NnModelSet::load).transpose()?;
        let adaptive_lr = match (optional(8), &lr) {
            (Some(p), _) => Some(RssDatabase::load(p)?),
            (None, Some(m)) => Some(reconstruct_lr_series(m, &clusters, &online)?),
            (None, None) => None,
        };
        let adaptive_nn = match (optional(9), &nn) {
            (Some(p), _) => Some(RssDatabase::load(p)?),
            (None, Some(m)) => Some(reconstruct_nn_series(m, &offline.db.reference(), &online)?),
            (None, None) => None,
        };
        Ok(Artifacts {
            offline,
            clusters,
            online,
            lr,
            nn,
            adaptive_lr,
            adaptive_nn,
        })
    }
}

/// Locates every TP against the radio map column of its instant.
pub fn evaluate_series(
    series: &RssDatabase,
    cm: &ClusterModel,
    online: &Online,
    method: Method,
    k: usize,
    fusion: Fusion,
) -> Result<EvaluationReport> {
    let rps = series.positions();
    let records = (0..online.n_tps())
        .map(|i| {
            let snap = series.snapshot(i);
            let user = online.users.row(i);
            let est = match method.locator {
                Locator::Csle => csle::locate(&snap, cm, rps, user, k, fusion)?,
                Locator::Wknn => csle::wknn_baseline(&snap, rps, user, k)?,
            };
            Ok(EstimateRecord::new(i, online.tps[i], est.xy))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("locate"))?;
    Ok(EvaluationReport::new(method.to_string(), records))
}

/// Mean absolute RSS error of a reconstructed series against the truth, over
/// every RP, AP and instant.
pub fn reconstruction_mae(series: &RssDatabase, truth: &RssDatabase) -> f64 {
    (0..truth.n_samples())
        .map(|k| series.snapshot(k).mae(&truth.snapshot(k)))
        .sum::<f64>()
        / truth.n_samples() as f64
}

/// Full run: one report per requested method.
pub fn run_pipeline(sc: &Scenario, methods: &[Method]) -> Result<Vec<EvaluationReport>> {
    let art = Artifacts::build(sc, methods)?;
    methods.iter().map(|&m| art.evaluate(m, sc.k, sc.fusion)).collect()
}
