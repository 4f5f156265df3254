use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::network::{Dense, Network, DEFAULT_HIDDEN};
use crate::error::{Result, SalcError};
use crate::floorplan::parse_tok;
use crate::radio::{MpSlice, RssDatabase, RssSnapshot};
use crate::romac::ClusterModel;

/// One training example for a single AP: monitor-point drifts in, RP drifts
/// out (raw and cluster-averaged).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub averaged_target: Vec<f64>,
}

/// Drift of every sample after the reference, for AP `l`.
pub fn preprocess(db: &RssDatabase, cm: &ClusterModel, l: usize) -> Vec<DeltaSample> {
    let n_rp = db.n_points();
    (1..db.n_samples())
        .map(|k| {
            let drift = |n: usize| db.get(n, l, k) - db.get(n, l, 0);
            let input = cm.exemplars().iter().map(|&mu| drift(mu)).collect();
            let target: Vec<f64> = (0..n_rp).map(drift).collect();
            let mut averaged_target = vec![0.0; n_rp];
            for members in cm.clusters() {
                let mean = members.iter().map(|&n| target[n]).sum::<f64>() / members.len() as f64;
                for &n in members {
                    averaged_target[n] = mean;
                }
            }
            DeltaSample {
                input,
                target,
                averaged_target,
            }
        })
        .collect()
}

/// Gradient-descent settings for one training phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub gamma: f64,
    pub eta: f64,
    pub iters: usize,
    /// `None` trains on the full batch every iteration.
    pub batch_size: Option<usize>,
    pub batch_seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            eta: 0.1,
            iters: 2000,
            batch_size: None,
            batch_seed: 0,
        }
    }
}

/// Loss trace of a training phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Loss on the batch used at each iteration, before its update.
    pub losses: Vec<f64>,
    /// Full-data loss after the last update.
    pub final_loss: f64,
}

#[derive(Clone, Copy)]
enum Target {
    Averaged,
    Raw,
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flatten().collect();
    let n = flat.len() / width.max(1);
    Array2::from_shape_vec((n, width), flat).expect("uniform rows")
}

fn descend(mut net: Network, samples: &[DeltaSample], target: Target, p: TrainParams) -> Result<(Network, TrainLog)> {
    if samples.is_empty() {
        return Err(SalcError::invalid("no training samples"));
    }
    if !(p.gamma > 0.0) {
        return Err(SalcError::invalid(format!("Huber threshold must be > 0, got {}", p.gamma)));
    }
    if let Some(s) = samples.iter().find(|s| s.input.len() != net.n_in() || s.target.len() != net.n_out()) {
        return Err(SalcError::Shape {
            expected: format!("{} -> {}", net.n_in(), net.n_out()),
            got: format!("{} -> {}", s.input.len(), s.target.len()),
        });
    }
    let inputs = stack(samples.iter().map(|s| s.input.clone()), net.n_in());
    let targets = stack(
        samples.iter().map(|s| match target {
            Target::Averaged => s.averaged_target.clone(),
            Target::Raw => s.target.clone(),
        }),
        net.n_out(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(p.batch_seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let batch = p.batch_size.unwrap_or(samples.len()).clamp(1, samples.len());
    let mut log = TrainLog::default();
    for _ in 0..p.iters {
        if batch == samples.len() {
            let (loss, grads) = net.loss_and_gradients(inputs.view(), targets.view(), p.gamma);
            if !loss.is_finite() {
                return Err(SalcError::Divergence { eta: p.eta });
            }
            log.losses.push(loss);
            net.apply_step(&grads, p.eta);
            continue;
        }
        // one epoch of shuffled mini-batches; the last batch may be short
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(batch) {
            let bx = inputs.select(Axis(0), idx);
            let by = targets.select(Axis(0), idx);
            let (loss, grads) = net.loss_and_gradients(bx.view(), by.view(), p.gamma);
            if !loss.is_finite() {
                return Err(SalcError::Divergence { eta: p.eta });
            }
            epoch_loss += loss * idx.len() as f64;
            net.apply_step(&grads, p.eta);
        }
        log.losses.push(epoch_loss / samples.len() as f64);
    }
    let (final_loss, _) = net.loss_and_gradients(inputs.view(), targets.view(), p.gamma);
    if !final_loss.is_finite() || !net.is_finite() {
        return Err(SalcError::Divergence { eta: p.eta });
    }
    log.final_loss = final_loss;
    Ok((net, log))
}

/// Pre-training against the cluster-averaged targets.
pub fn pretrain(init: Network, samples: &[DeltaSample], p: TrainParams) -> Result<(Network, TrainLog)> {
    descend(init, samples, Target::Averaged, p)
}

/// Fine-tuning against the per-RP targets, starting from the pre-trained
/// parameters.
pub fn finetune(pretrained: Network, samples: &[DeltaSample], p: TrainParams) -> Result<(Network, TrainLog)> {
    descend(pretrained, samples, Target::Raw, p)
}

/// Complete configuration for training all per-AP networks.
#[derive(Debug, Clone, PartialEq)]
pub struct NnParams {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub eta: f64,
    pub pretrain_iters: usize,
    pub finetune_iters: usize,
    pub batch_size: Option<usize>,
    pub init_seed: u64,
    pub batch_seed: u64,
}

impl Default for NnParams {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            gamma: 1.0,
            eta: 0.1,
            pretrain_iters: 2000,
            finetune_iters: 2000,
            batch_size: None,
            init_seed: 0,
            batch_seed: 0,
        }
    }
}

impl NnParams {
    fn phase(&self, iters: usize, ap: usize) -> TrainParams {
        TrainParams {
            gamma: self.gamma,
            eta: self.eta,
            iters,
            batch_size: self.batch_size,
            batch_seed: self.batch_seed.wrapping_add(ap as u64),
        }
    }
}

/// Trained networks, one per AP, keyed to the monitor points they read.
#[derive(Debug, Clone, PartialEq)]
pub struct NnModelSet {
    pub exemplars: Vec<usize>,
    pub n_rp: usize,
    pub init_seed: u64,
    pub networks: Vec<Network>,
}

/// Final losses of each phase per AP.
#[derive(Debug, Clone, PartialEq)]
pub struct NnTrainReport {
    pub pretrain: Vec<TrainLog>,
    pub finetune: Vec<TrainLog>,
}

/// Trains one network per AP: pre-training on cluster-averaged drifts, then
/// fine-tuning on per-RP drifts.
pub fn train_all(db: &RssDatabase, cm: &ClusterModel, p: &NnParams) -> Result<(NnModelSet, NnTrainReport)> {
    if db.n_samples() < 2 {
        return Err(SalcError::invalid("network training needs samples beyond the reference"));
    }
    let n_mp = cm.n_clusters();
    let per_ap: Vec<Result<(Network, TrainLog, TrainLog)>> = (0..db.n_aps())
        .into_par_iter()
        .map(|l| {
            let samples = preprocess(db, cm, l);
            let init = Network::init(n_mp, &p.hidden, db.n_points(), p.init_seed.wrapping_add(l as u64));
            let (pre, pre_log) = pretrain(init, &samples, p.phase(p.pretrain_iters, l))?;
            let (fine, fine_log) = finetune(pre, &samples, p.phase(p.finetune_iters, l))?;
            Ok((fine, pre_log, fine_log))
        })
        .collect();
    let mut networks = Vec::new();
    let mut report = NnTrainReport {
        pretrain: Vec::new(),
        finetune: Vec::new(),
    };
    for r in per_ap {
        let (net, a, b) = r?;
        networks.push(net);
        report.pretrain.push(a);
        report.finetune.push(b);
    }
    Ok((
        NnModelSet {
            exemplars: cm.exemplars().to_vec(),
            n_rp: db.n_points(),
            init_seed: p.init_seed,
            networks,
        },
        report,
    ))
}

/// Adaptive database: predicted drift added to each RP's reference reading.
pub fn reconstruct_nn(models: &NnModelSet, mp_now: &MpSlice, reference: &RssSnapshot) -> Result<RssSnapshot> {
    let n_ap = models.networks.len();
    if reference.n_points() != models.n_rp || reference.n_aps() != n_ap {
        return Err(SalcError::Shape {
            expected: format!("{}x{} reference", models.n_rp, n_ap),
            got: format!("{}x{}", reference.n_points(), reference.n_aps()),
        });
    }
    let mut readings = Vec::with_capacity(models.exemplars.len());
    for (m, &mu) in models.exemplars.iter().enumerate() {
        let row = mp_now
            .reading(mu)
            .ok_or(SalcError::MissingExemplar { cluster: m, exemplar: mu })?;
        readings.push(row);
    }
    let mut out = vec![0.0; models.n_rp * n_ap];
    for (l, net) in models.networks.iter().enumerate() {
        let input: Vec<f64> = models
            .exemplars
            .iter()
            .zip(&readings)
            .map(|(&mu, row)| row[l] - reference.get(mu, l))
            .collect();
        let drift = net.forward(&input)?;
        for (n, d) in drift.iter().enumerate() {
            out[n * n_ap + l] = d + reference.get(n, l);
        }
    }
    RssSnapshot::new(models.n_rp, n_ap, out)
}

impl NnModelSet {
    /// Parameter file with a shape header, then every layer of every AP.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let hidden = self.networks.first().map(Network::hidden_sizes).unwrap_or_default();
        let hidden: Vec<String> = hidden.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            s,
            "nnmodel n_ap={} n_mp={} n_rp={} seed={} hidden={}",
            self.networks.len(),
            self.exemplars.len(),
            self.n_rp,
            self.init_seed,
            hidden.join(",")
        );
        let ex: Vec<String> = self.exemplars.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "exemplars {}", ex.join(" "));
        for (l, net) in self.networks.iter().enumerate() {
            let _ = writeln!(s, "ap {l}");
            for (h, layer) in net.layers().iter().enumerate() {
                let _ = writeln!(s, "layer {h} {} {}", layer.n_out(), layer.n_in());
                for row in layer.w.rows() {
                    s.push('w');
                    for v in row {
                        let _ = write!(s, " {v}");
                    }
                    s.push('\n');
                }
                s.push('b');
                for v in &layer.b {
                    let _ = write!(s, " {v}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (ln, header) = lines.next().ok_or_else(|| SalcError::parse(1, "empty model file"))?;
        let mut fields = std::collections::HashMap::new();
        let mut toks = header.split_whitespace();
        if toks.next() != Some("nnmodel") {
            return Err(SalcError::parse(ln, "expected `nnmodel` header"));
        }
        for kv in toks {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| SalcError::parse(ln, format!("bad header field {kv:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| SalcError::parse(ln, format!("missing header field {k}")))
        };
        let n_ap: usize = parse_tok(get("n_ap")?, ln)?;
        let n_rp: usize = parse_tok(get("n_rp")?, ln)?;
        let init_seed: u64 = parse_tok(get("seed")?, ln)?;
        let (ln, ex_line) = lines.next().ok_or_else(|| SalcError::parse(ln + 1, "missing exemplars"))?;
        let exemplars = ex_line
            .strip_prefix("exemplars")
            .ok_or_else(|| SalcError::parse(ln, "expected `exemplars`"))?
            .split_whitespace()
            .map(|t| parse_tok::<usize>(t, ln))
            .collect::<Result<Vec<_>>>()?;

        let mut networks: Vec<Vec<Dense>> = Vec::new();
        let mut current: Option<(usize, usize, Vec<f64>)> = None;
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut t = line.split_whitespace();
            match t.next() {
                Some("ap") => networks.push(Vec::new()),
                Some("layer") => {
                    let v: Vec<usize> = t.map(|x| parse_tok(x, ln)).collect::<Result<_>>()?;
                    let [_, rows, cols] = v[..] else {
                        return Err(SalcError::parse(ln, "expected `layer h rows cols`"));
                    };
                    current = Some((rows, cols, Vec::with_capacity(rows * cols)));
                }
                Some("w") => {
                    let (_, _, buf) = current
                        .as_mut()
                        .ok_or_else(|| SalcError::parse(ln, "weights before layer header"))?;
                    for x in t {
                        buf.push(parse_tok(x, ln)?);
                    }
                }
                Some("b") => {
                    let (rows, cols, buf) = current
                        .take()
                        .ok_or_else(|| SalcError::parse(ln, "bias before layer header"))?;
                    let w = Array2::from_shape_vec((rows, cols), buf)
                        .map_err(|e| SalcError::parse(ln, e.to_string()))?;
                    let b: Vec<f64> = t.map(|x| parse_tok(x, ln)).collect::<Result<_>>()?;
                    networks
                        .last_mut()
                        .ok_or_else(|| SalcError::parse(ln, "layer outside an `ap` block"))?
                        .push(Dense { w, b: Array1::from(b) });
                }
                _ => return Err(SalcError::parse(ln, format!("unrecognized record {line:?}"))),
            }
        }
        if networks.len() != n_ap {
            return Err(SalcError::parse(0, format!("expected {n_ap} networks, found {}", networks.len())));
        }
        let networks = networks
            .into_iter()
            .map(Network::from_layers)
            .collect::<Result<Vec<_>>>()?;
        for net in &networks {
            if net.n_in() != exemplars.len() || net.n_out() != n_rp {
                return Err(SalcError::Shape {
                    expected: format!("{} -> {}", exemplars.len(), n_rp),
                    got: format!("{} -> {}", net.n_in(), net.n_out()),
                });
            }
        }
        Ok(Self {
            exemplars,
            n_rp,
            init_seed,
            networks,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
