use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use salc::code_lr::{self, LinearModelSet};
use salc::code_nn::{train_all, NnModelSet};
use salc::floorplan::{build_skeleton, FloorMap, SnappedPoints, Skeleton};
use salc::harness::{
    ablate_similarity, cluster, emit_plot_data, evaluate_series, prepare, reconstruct_lr_series, reconstruct_nn_series,
    reconstruction_mae, synth_online, Artifacts, DbKind, Method, Offline, Online, Scenario, SweepBase, SweepParam,
};
use salc::radio::RssDatabase;
use salc::romac::ClusterModel;
use salc::{Result, SalcError};

/// Crowd-adaptive indoor localization: radio-map simulation, clustering,
/// database reconstruction and positioning.
#[derive(Parser)]
#[command(name = "salc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file; the bundled two-room scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Master seed; overrides the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for artifacts and outputs.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let sc = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::reference(),
        };
        Ok(match self.seed {
            Some(s) => sc.with_seed(s),
            None => sc,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract the skeleton graph of a map file (or the scenario's map).
    Skeleton {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Synthesize the offline database and the online readings.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Cluster reference points from the synthesized offline database.
    Cluster {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the per-(RP, AP) linear models.
    TrainLr {
        #[command(flatten)]
        common: Common,
    },
    /// Train the per-AP networks.
    TrainNn {
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the adaptive database at every online instant.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// `lr` or `nn`.
        #[arg(long, default_value = "nn")]
        model: DbKind,
    },
    /// Locate every test point against saved artifacts.
    Locate {
        #[command(flatten)]
        common: Common,
        /// Locator and database, e.g. `csle+nn`.
        #[arg(long, default_value = "csle+nn")]
        method: Method,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the whole pipeline and write reports and plot data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Repeatable; every combination when omitted.
        #[arg(long)]
        method: Vec<Method>,
    },
    /// Re-run with one parameter varied.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of k, eta, gamma, preference.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Cluster with each similarity factor alone and all together.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
}

fn write(path: &Path, text: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn load_offline(c: &Common) -> Result<Offline> {
    let skeleton = Skeleton::parse(&std::fs::read_to_string(c.path("skeleton.txt"))?)?;
    let db = RssDatabase::load(c.path("offline.rssdb"))?;
    let snapped = SnappedPoints::new(db.positions(), &skeleton)?;
    Ok(Offline { skeleton, snapped, db })
}

fn load_online(c: &Common) -> Result<Online> {
    let users = RssDatabase::load(c.path("users.rssdb"))?;
    Ok(Online {
        monitor: RssDatabase::load(c.path("monitor.rssdb"))?,
        truth: RssDatabase::load(c.path("truth.rssdb"))?,
        users: users.snapshot(0),
        tps: users.positions().to_vec(),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Skeleton { common, map } => {
            let map = match map {
                Some(p) => FloorMap::load(p)?,
                None => common.scenario()?.map,
            };
            let sk = build_skeleton(&map)?;
            println!("{} vertices, {} edges", sk.n_vertices(), sk.edges().len());
            write(&common.path("skeleton.txt"), sk.to_text())
        }
        Command::Synth { common } => {
            let sc = common.scenario()?;
            let off = prepare(&sc)?;
            let online = synth_online(&sc, &off)?;
            let users = RssDatabase::new(online.tps.clone(), online.users.n_aps(), vec![0], online.users.values().to_vec())?;
            println!(
                "{} RPs, {} APs, {} samples; {} test points",
                off.db.n_points(),
                off.db.n_aps(),
                off.db.n_samples(),
                online.n_tps()
            );
            write(&common.path("skeleton.txt"), off.skeleton.to_text())?;
            write(&common.path("offline.rssdb"), off.db.to_text())?;
            write(&common.path("monitor.rssdb"), online.monitor.to_text())?;
            write(&common.path("truth.rssdb"), online.truth.to_text())?;
            write(&common.path("users.rssdb"), users.to_text())
        }
        Command::Cluster { common } => {
            let sc = common.scenario()?;
            let off = load_offline(&common)?;
            let cm = cluster(&sc, &off)?;
            println!(
                "{} clusters (converged: {}, {} iterations), exemplars {:?}",
                cm.n_clusters(),
                cm.converged,
                cm.iterations,
                cm.exemplars()
            );
            write(&common.path("clusters.txt"), cm.to_text())
        }
        Command::TrainLr { common } => {
            let sc = common.scenario()?;
            let off = load_offline(&common)?;
            let cm = ClusterModel::load(common.path("clusters.txt"))?;
            let models = code_lr::fit(&off.db, &cm, sc.lr).map_err(|e| e.at_stage("train-lr"))?;
            write(&common.path("lr.model"), models.to_text())
        }
        Command::TrainNn { common } => {
            let sc = common.scenario()?;
            let off = load_offline(&common)?;
            let cm = ClusterModel::load(common.path("clusters.txt"))?;
            let (models, report) = train_all(&off.db, &cm, &sc.nn).map_err(|e| e.at_stage("train-nn"))?;
            for (l, (p, f)) in report.pretrain.iter().zip(&report.finetune).enumerate() {
                println!("AP {l}: pretrain loss {:.5}, finetune loss {:.5}", p.final_loss, f.final_loss);
            }
            write(&common.path("nn.model"), models.to_text())
        }
        Command::Reconstruct { common, model } => {
            let off = load_offline(&common)?;
            let online = load_online(&common)?;
            let (name, series) = match model {
                DbKind::Lr => {
                    let cm = ClusterModel::load(common.path("clusters.txt"))?;
                    let m = LinearModelSet::load(common.path("lr.model"))?;
                    ("adaptive_lr.rssdb", reconstruct_lr_series(&m, &cm, &online)?)
                }
                DbKind::Nn => {
                    let m = NnModelSet::load(common.path("nn.model"))?;
                    ("adaptive_nn.rssdb", reconstruct_nn_series(&m, &off.db.reference(), &online)?)
                }
                other => return Err(SalcError::invalid(format!("nothing to reconstruct for {other}"))),
            };
            println!("RSS MAE vs truth: {:.4} dB", reconstruction_mae(&series, &online.truth));
            write(&common.path(name), series.to_text())
        }
        Command::Locate { common, method, k } => {
            let sc = common.scenario()?;
            let art = Artifacts::load(&common.out_dir)?;
            let series = art.series(method.db)?;
            let report = evaluate_series(&series, &art.clusters, &art.online, method, k.unwrap_or(sc.k), sc.fusion)?;
            println!(
                "{}: mean {:.4} m, median {:.4} m over {} TPs",
                report.label,
                report.mean_error(),
                report.median_error(),
                report.len()
            );
            write(&common.path(&format!("records_{}.csv", method.to_string().replace('+', "_"))), report.to_csv())
        }
        Command::Evaluate { common, method } => {
            let sc = common.scenario()?;
            let methods = if method.is_empty() { Method::all() } else { method };
            let art = Artifacts::build(&sc, &methods)?;
            art.save(&common.out_dir)?;
            let reports = methods
                .iter()
                .map(|&m| art.evaluate(m, sc.k, sc.fusion))
                .collect::<Result<Vec<_>>>()?;
            for r in &reports {
                println!("{:<16} mean {:.4} m  median {:.4} m", r.label, r.mean_error(), r.median_error());
            }
            let mut maps = Vec::new();
            for (label, db) in [("lr", &art.adaptive_lr), ("nn", &art.adaptive_nn)] {
                if let Some(db) = db {
                    println!("{label} RSS MAE vs truth: {:.4} dB", reconstruction_mae(db, &art.online.truth));
                    maps.push((label, db));
                }
            }
            let original = art.series(DbKind::Original)?;
            maps.push(("original", &original));
            emit_plot_data(&reports, &maps, Some(&art.online.truth), &common.out_dir)
        }
        Command::Sweep { common, param, values } => {
            let sc = common.scenario()?;
            let points = SweepBase::new(&sc)?.run(param, &values)?;
            let mut csv = String::from("value,n_clusters,diverged,mean_error_m,median_error_m\n");
            for p in &points {
                let (mean, median) = p
                    .report
                    .as_ref()
                    .map_or((f64::NAN, f64::NAN), |r| (r.mean_error(), r.median_error()));
                println!(
                    "{:>10} clusters {:>3}  {}",
                    p.value,
                    p.n_clusters,
                    if p.diverged() { "diverged".to_string() } else { format!("mean {mean:.4} m  median {median:.4} m") }
                );
                csv.push_str(&format!("{},{},{},{mean},{median}\n", p.value, p.n_clusters, p.diverged()));
            }
            let reports: Vec<_> = points
                .iter()
                .filter_map(|p| p.report.clone().map(|mut r| {
                    r.label = format!("{param:?}_{}", p.value).to_lowercase();
                    r
                }))
                .collect();
            emit_plot_data(&reports, &[], None, &common.out_dir)?;
            write(&common.path("sweep.csv"), csv)
        }
        Command::Ablate { common } => {
            let sc = common.scenario()?;
            let runs = ablate_similarity(&sc)?;
            for a in &runs {
                println!(
                    "{:<9} {} clusters  mean {:.4} m  median {:.4} m",
                    a.name,
                    a.clusters.n_clusters(),
                    a.report.mean_error(),
                    a.report.median_error()
                );
                write(&common.path(&format!("clusters_{}.txt", a.name)), a.clusters.to_text())?;
            }
            let reports: Vec<_> = runs.into_iter().map(|a| a.report).collect();
            emit_plot_data(&reports, &[], None, &common.out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
