//! Property checks shared by the per-module suites and the acceptance run.
//! Each takes generated inputs and fails through `TestCaseError`.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng;

use salc::code_lr::{self, fit_pair, LinearModelSet, LrParams};
use salc::code_nn::{finetune, huber, huber_derivative, pretrain, train_all, DeltaSample, Network, NnParams, TrainParams};
use salc::csle::{self, Fusion};
use salc::floorplan::{build_skeleton, shortest_path_matrix, FloorMap, SnappedPoints};
use salc::harness::{run_pipeline, Artifacts, Method};
use salc::radio::{build_database, synth_rss, AccessPoint, CrowdZone, Environment, MpSlice, RssDatabase, RssSnapshot};
use salc::romac::{affinity_propagation, ApParams, ClusterModel};
use salc::{Point2, Rect};

use super::*;

type Outcome = Result<(), TestCaseError>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

// ---------------------------------------------------------------- floorplan

pub fn ssp_matches_floyd_warshall(seed: u64, n: usize, connected: bool) -> Outcome {
    let sk = random_skeleton(&mut rng(seed), n, connected);
    let d = shortest_path_matrix(&sk);
    let oracle = floyd_warshall(&sk);
    for v in 0..n {
        for w in 0..n {
            let (a, b) = (d.get(v, w), oracle[v * n + w]);
            if a.is_infinite() || b.is_infinite() {
                prop_assert_eq!(a, b, "reachability differs at ({}, {})", v, w);
            } else {
                prop_assert!((a - b).abs() <= 1e-9, "({v}, {w}): {a} vs {b}");
            }
        }
    }
    Ok(())
}

pub fn ssp_symmetric_and_bounded(seed: u64, n_vertices: usize, n_points: usize) -> Outcome {
    let mut r = rng(seed);
    let sk = random_skeleton(&mut r, n_vertices, true);
    let pts: Vec<Point2> = (0..n_points)
        .map(|_| Point2::new(r.random_range(-2.0..22.0), r.random_range(-2.0..22.0)))
        .collect();
    let snapped = SnappedPoints::new(&pts, &sk).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let m = snapped.matrix(&shortest_path_matrix(&sk)).unwrap();
    for i in 0..n_points {
        prop_assert_eq!(m[i * n_points + i], 0.0);
        for j in 0..n_points {
            let v = m[i * n_points + j];
            prop_assert_eq!(v, m[j * n_points + i]);
            prop_assert!(v >= 0.0);
            let gap = (snapped.snap_distance(i) - snapped.snap_distance(j)).abs();
            prop_assert!(i == j || v >= gap - 1e-12, "{v} < {gap}");
        }
    }
    Ok(())
}

pub fn ssp_open_room_bound(cols: usize, rows: usize, res: f64, seed: u64) -> Outcome {
    let map = FloorMap::walled_room(cols, rows, res).unwrap();
    let sk = build_skeleton(&map).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut r = rng(seed);
    let pts: Vec<Point2> = (0..12)
        .map(|_| {
            Point2::new(
                r.random_range(res..map.width_m() - res),
                r.random_range(res..map.height_m() - res),
            )
        })
        .collect();
    let snapped = SnappedPoints::new(&pts, &sk).unwrap();
    let m = snapped.matrix(&shortest_path_matrix(&sk)).unwrap();
    let max_snap = (0..pts.len()).map(|i| snapped.snap_distance(i)).fold(0.0, f64::max);
    let slack = 2.0 * (2.0 * res * 2f64.sqrt());
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            let bound = pts[i].dist(pts[j]) + 2.0 * max_snap + slack;
            prop_assert!(m[i * pts.len() + j] <= bound, "({i}, {j}): {} > {bound}", m[i * pts.len() + j]);
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- radio

fn random_env(r: &mut impl Rng, seed: u64) -> Environment {
    let zones = (0..r.random_range(0..4))
        .map(|_| {
            let a = Point2::new(r.random_range(0.0..10.0), r.random_range(0.0..10.0));
            let b = Point2::new(r.random_range(0.0..10.0), r.random_range(0.0..10.0));
            CrowdZone {
                area: Rect::from_corners(a, b),
                extra_attenuation_db: r.random_range(0.0..10.0),
                temporal_jitter_db: r.random_range(0.0..5.0),
            }
        })
        .collect();
    Environment::new(r.random_range(20.0..40.0), r.random_range(0.0..3.0), zones, seed).unwrap()
}

fn random_aps(r: &mut impl Rng) -> Vec<AccessPoint> {
    (0..r.random_range(1..4))
        .map(|_| {
            let p = Point2::new(r.random_range(0.0..10.0), r.random_range(0.0..10.0));
            AccessPoint::new(p, r.random_range(10.0..25.0), 2400.0).unwrap()
        })
        .collect()
}

fn random_points(r: &mut impl Rng, n: usize) -> Vec<Point2> {
    (0..n)
        .map(|_| Point2::new(r.random_range(0.0..10.0), r.random_range(0.0..10.0)))
        .collect()
}

pub fn rss_decays_with_distance(d1: f64, d2: f64, seed: u64) -> Outcome {
    let (near, far) = (d1.min(d2), d1.max(d2));
    prop_assume!(far - near > 1e-9);
    let mut r = rng(seed);
    let env = random_env(&mut r, seed).empty();
    let ap = AccessPoint::new(Point2::new(0.0, 0.0), 20.0, 2400.0).unwrap();
    let t = r.random_range(0..50);
    let angle: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let at = |d: f64| Point2::new(d * angle.cos(), d * angle.sin());
    prop_assert!(synth_rss(at(near), &ap, &env, t) > synth_rss(at(far), &ap, &env, t));
    Ok(())
}

pub fn database_deterministic(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let env = random_env(&mut r, seed);
    let aps = random_aps(&mut r);
    let pts = random_points(&mut r, 10);
    let a = build_database(&pts, &aps, &env, 6).unwrap();
    let b = build_database(&pts, &aps, &env.clone(), 6).unwrap();
    prop_assert_eq!(a.to_text(), b.to_text());
    Ok(())
}

pub fn reference_sample_pure(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let env = random_env(&mut r, seed);
    let aps = random_aps(&mut r);
    let pts = random_points(&mut r, 10);
    let crowded = build_database(&pts, &aps, &env, 4).unwrap();
    let empty = build_database(&pts, &aps, &env.empty(), 4).unwrap();
    prop_assert_eq!(crowded.reference(), empty.reference());
    Ok(())
}

// -------------------------------------------------------------------- romac

pub fn ap_partition(seed: u64, n: usize, pref_scale: f64) -> Outcome {
    let s = random_similarity(&mut rng(seed), n, pref_scale);
    let cm = affinity_propagation(&s, ApParams::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    check_partition(&cm, n)
}

pub fn check_partition(cm: &ClusterModel, n: usize) -> Outcome {
    prop_assert_eq!(cm.n_points(), n);
    let mut seen = vec![0usize; n];
    for members in cm.clusters() {
        for &i in members {
            seen[i] += 1;
        }
    }
    prop_assert!(seen.iter().all(|&c| c == 1), "cover counts {:?}", seen);
    for &mu in cm.exemplars() {
        prop_assert_eq!(cm.exemplar_of(mu), mu);
    }
    for i in 0..n {
        prop_assert!(cm.exemplars().contains(&cm.exemplar_of(i)));
    }
    prop_assert_eq!(cm.n_clusters(), cm.exemplars().len());
    Ok(())
}

pub fn ap_scaling_invariant(seed: u64, n: usize, power: i32) -> Outcome {
    let s = random_similarity(&mut rng(seed), n, 1.0);
    let c = 2f64.powi(power);
    let a = affinity_propagation(&s, ApParams::default()).unwrap();
    let b = affinity_propagation(&s.scaled(c), ApParams::default()).unwrap();
    prop_assert_eq!(a.assignment(), b.assignment());
    prop_assert_eq!(a.exemplars(), b.exemplars());
    Ok(())
}

pub fn ap_deterministic(seed: u64, n: usize) -> Outcome {
    let s = random_similarity(&mut rng(seed), n, 1.0);
    let p = ApParams::default();
    prop_assert_eq!(affinity_propagation(&s, p).unwrap(), affinity_propagation(&s.clone(), p).unwrap());
    Ok(())
}

// ------------------------------------------------------------------ code-lr

/// Realistic exemplar series: dB levels with a few dB of drift.
fn lr_fixture(r: &mut impl Rng, len: usize, noise: f64) -> (Vec<f64>, Vec<f64>) {
    let level = r.random_range(-90.0..-30.0);
    let spread = r.random_range(1.0..6.0);
    let (c, b) = (r.random_range(-2.0..2.0), r.random_range(-40.0..40.0));
    let x: Vec<f64> = (0..len).map(|_| level + spread * r.random_range(-1.0..1.0)).collect();
    let y = x.iter().map(|&v| c * v + b + noise * r.random_range(-1.0..1.0)).collect();
    (x, y)
}

pub fn lr_matches_ols(seed: u64, len: usize) -> Outcome {
    let mut r = rng(seed);
    let (x, y) = lr_fixture(&mut r, len, 1.0);
    let fit = fit_pair(&x, &y, LrParams::default());
    let (c, b) = ols(&x, &y);
    prop_assert!((fit.coeff - c).abs() < 1e-3, "coeff {} vs {c}", fit.coeff);
    prop_assert!((fit.bias - b).abs() < 1e-3, "bias {} vs {b}", fit.bias);
    Ok(())
}

/// Squared training error of the fit never exceeds that of the constant
/// mean, which sits inside the model family. Arbitrary data, outliers
/// included.
pub fn lr_fit_not_worse_than_mean(seed: u64, len: usize) -> Outcome {
    let mut r = rng(seed);
    let noise = r.random_range(0.0..5.0);
    let (x, mut y) = lr_fixture(&mut r, len, noise);
    if r.random_bool(0.3) {
        let i = r.random_range(0..len);
        y[i] += r.random_range(-50.0..50.0);
    }
    let fit = fit_pair(&x, &y, LrParams::default());
    let mean = y.iter().sum::<f64>() / len as f64;
    let sse_fit: f64 = x.iter().zip(&y).map(|(a, b)| (fit.coeff * a + fit.bias - b).powi(2)).sum();
    let sse_mean: f64 = y.iter().map(|b| (mean - b).powi(2)).sum();
    prop_assert!(sse_fit / len as f64 <= sse_mean / len as f64 + 1e-6, "{sse_fit} > {sse_mean}");
    Ok(())
}

pub fn random_clusters(r: &mut impl Rng, n: usize) -> ClusterModel {
    let m = r.random_range(1..=n.min(5));
    let mut exemplars: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = r.random_range(i..n);
        exemplars.swap(i, j);
    }
    exemplars.truncate(m);
    let assignment = (0..n)
        .map(|i| if exemplars.contains(&i) { i } else { exemplars[r.random_range(0..m)] })
        .collect();
    ClusterModel::from_assignment(assignment).unwrap()
}

pub fn lr_reconstruct_linear(seed: u64, scale: f64) -> Outcome {
    let mut r = rng(seed);
    let (n_rp, n_ap) = (r.random_range(2..12), r.random_range(1..4));
    let cm = random_clusters(&mut r, n_rp);
    let coeff = (0..n_rp * n_ap).map(|_| r.random_range(-2.0..2.0)).collect();
    let bias = (0..n_rp * n_ap).map(|_| r.random_range(-50.0..50.0)).collect();
    let models = LinearModelSet::from_parts(n_rp, n_ap, coeff, bias, vec![false; n_rp * n_ap]).unwrap();
    let slice = |f: &mut dyn FnMut() -> f64| MpSlice {
        exemplars: cm.exemplars().to_vec(),
        rss: RssSnapshot::from_fn(cm.n_clusters(), n_ap, |_, _| f()),
    };
    let x = slice(&mut || r.random_range(-90.0..-30.0));
    let scaled = MpSlice {
        exemplars: x.exemplars.clone(),
        rss: RssSnapshot::from_fn(cm.n_clusters(), n_ap, |m, l| scale * x.rss.get(m, l)),
    };
    let zero = slice(&mut || 0.0);
    let at = |s: &MpSlice| code_lr::reconstruct(&models, &cm, s).unwrap();
    let (fx, fa, f0) = (at(&x), at(&scaled), at(&zero));
    for n in 0..n_rp {
        for l in 0..n_ap {
            let lhs = fa.get(n, l) - f0.get(n, l);
            let rhs = scale * (fx.get(n, l) - f0.get(n, l));
            prop_assert!(close(lhs, rhs, 1e-12), "({n}, {l}): {lhs} vs {rhs}");
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ code-nn

/// Flattened analytic and central-difference gradients for one random draw,
/// or `None` when a hidden unit sits too close to its rectifier kink.
pub fn gradient_pair(seed: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut r = rng(seed);
    let n_in = r.random_range(1..5);
    let n_out = r.random_range(1..5);
    let hidden: Vec<usize> = (0..r.random_range(1..3)).map(|_| r.random_range(2..7)).collect();
    let mut net = Network::init(n_in, &hidden, n_out, seed);
    for layer in net.layers_mut() {
        layer.b.mapv_inplace(|_| r.random_range(-0.5..0.5));
    }
    let batch = r.random_range(1..5);
    let gamma = r.random_range(0.1..3.0);
    let inputs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..n_in).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    if min_hidden_preactivation(&net, &inputs) < 1e-4 {
        return None;
    }
    // half the residuals sit just inside or just outside the Huber threshold,
    // 0.01-0.1% away so a difference step never crosses it; the rest are
    // spread across both branches
    let targets: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| {
            let pred = forward_oracle(&net, x);
            pred.iter()
                .map(|&p| {
                    let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                    if r.random_bool(0.5) {
                        {
                        let side = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                        p + sign * gamma * (1.0 + side * r.random_range(1e-4..1e-3))
                    }
                    } else {
                        p + sign * r.random_range(0.0..3.0 * gamma)
                    }
                })
                .collect()
        })
        .collect();
    let x = ndarray::Array2::from_shape_vec((batch, n_in), inputs.concat()).unwrap();
    let y = ndarray::Array2::from_shape_vec((batch, n_out), targets.concat()).unwrap();
    let (_, grads) = net.loss_and_gradients(x.view(), y.view(), gamma);
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|g| g.w.iter().chain(g.b.iter()).copied().collect::<Vec<_>>())
        .collect();
    let h = 1e-6;
    let loss = |n: &Network| n.loss_and_gradients(x.view(), y.view(), gamma).0;
    let mut numeric = Vec::with_capacity(analytic.len());
    for h_idx in 0..net.layers().len() {
        let (rows, cols) = net.layers()[h_idx].w.dim();
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = net.clone();
                plus.layers_mut()[h_idx].w[[i, j]] += h;
                let mut minus = net.clone();
                minus.layers_mut()[h_idx].w[[i, j]] -= h;
                numeric.push((loss(&plus) - loss(&minus)) / (2.0 * h));
            }
        }
        for i in 0..rows {
            let mut plus = net.clone();
            plus.layers_mut()[h_idx].b[i] += h;
            let mut minus = net.clone();
            minus.layers_mut()[h_idx].b[i] -= h;
            numeric.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        }
    }
    Some((analytic, numeric))
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

pub fn gradient_matches_fd(seed: u64) -> Outcome {
    if let Some((a, n)) = gradient_pair(seed) {
        let e = relative_error(&a, &n);
        prop_assert!(e < 1e-4, "relative error {e}");
    }
    Ok(())
}

pub fn huber_continuous(gamma: f64) -> Outcome {
    // across a gap of 2 eps the loss may move by its slope (gamma) and the
    // slope by 1, plus rounding; any jump would be far larger
    let eps = 1e-9;
    let round = 1e-12 * (1.0 + gamma * gamma);
    for edge in [gamma, -gamma] {
        let (lo, hi) = (edge - eps, edge + eps);
        prop_assert!((huber(lo, gamma) - huber(hi, gamma)).abs() <= 2.0 * eps * gamma * 1.01 + round);
        prop_assert!((huber_derivative(lo, gamma) - huber_derivative(hi, gamma)).abs() <= 2.0 * eps * 1.01 + round);
    }
    Ok(())
}

pub fn huber_derivative_bounded(r: f64, gamma: f64) -> Outcome {
    prop_assert!(huber_derivative(r, gamma).abs() <= gamma);
    Ok(())
}

fn random_samples(r: &mut impl Rng, n: usize, n_in: usize, n_out: usize) -> Vec<DeltaSample> {
    (0..n)
        .map(|_| {
            let target: Vec<f64> = (0..n_out).map(|_| r.random_range(-3.0..3.0)).collect();
            DeltaSample {
                input: (0..n_in).map(|_| r.random_range(-3.0..3.0)).collect(),
                averaged_target: target.iter().map(|t| t * 0.5).collect(),
                target,
            }
        })
        .collect()
}

pub fn nn_shapes_kept(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let (n_in, n_out) = (r.random_range(1..5), r.random_range(1..9));
    let hidden: Vec<usize> = (0..r.random_range(0..3)).map(|_| r.random_range(1..6)).collect();
    let net = Network::init(n_in, &hidden, n_out, seed);
    let samples = random_samples(&mut r, 6, n_in, n_out);
    let p = TrainParams {
        iters: 5,
        eta: 0.01,
        batch_size: Some(r.random_range(1..8)),
        ..TrainParams::default()
    };
    let (trained, _) = pretrain(net.clone(), &samples, p).unwrap();
    prop_assert_eq!(trained.n_in(), n_in);
    prop_assert_eq!(trained.n_out(), n_out);
    prop_assert_eq!(trained.hidden_sizes(), hidden);
    prop_assert_eq!(trained.forward(&samples[0].input).unwrap().len(), n_out);
    Ok(())
}

pub fn warm_start_identity(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let (n_in, n_out) = (r.random_range(1..4), r.random_range(1..6));
    let net = Network::init(n_in, &[5, 4], n_out, seed);
    let samples = random_samples(&mut r, 5, n_in, n_out);
    let p = TrainParams {
        iters: 10,
        eta: 0.05,
        ..TrainParams::default()
    };
    let (pre, _) = pretrain(net, &samples, p).unwrap();
    let (same, _) = finetune(pre.clone(), &samples, TrainParams { iters: 0, ..p }).unwrap();
    prop_assert_eq!(&same, &pre);
    // the first fine-tuning loss is evaluated at exactly the pre-trained point
    let (_, log) = finetune(pre.clone(), &samples, TrainParams { iters: 1, ..p }).unwrap();
    let x = ndarray::Array2::from_shape_vec((5, n_in), samples.iter().flat_map(|s| s.input.clone()).collect()).unwrap();
    let y = ndarray::Array2::from_shape_vec((5, n_out), samples.iter().flat_map(|s| s.target.clone()).collect()).unwrap();
    prop_assert_eq!(log.losses[0], pre.loss_and_gradients(x.view(), y.view(), p.gamma).0);
    Ok(())
}

pub fn nn_training_deterministic(seed: u64, batch: Option<usize>) -> Outcome {
    let mut r = rng(seed);
    let (n_rp, n_ap) = (r.random_range(3..9), r.random_range(1..3));
    let cm = random_clusters(&mut r, n_rp);
    let db = RssDatabase::new(
        random_points(&mut r, n_rp),
        n_ap,
        (0..6).collect(),
        (0..n_rp * n_ap * 6).map(|_| r.random_range(-70.0..-40.0)).collect(),
    )
    .unwrap();
    let p = NnParams {
        hidden: vec![6, 4],
        pretrain_iters: 8,
        finetune_iters: 8,
        eta: 0.01,
        batch_size: batch,
        init_seed: seed,
        batch_seed: seed ^ 0x55,
        ..NnParams::default()
    };
    let (a, ra) = train_all(&db, &cm, &p).unwrap();
    let (b, rb) = train_all(&db, &cm, &p.clone()).unwrap();
    prop_assert_eq!(a, b);
    prop_assert_eq!(ra, rb);
    Ok(())
}

// --------------------------------------------------------------------- csle

/// Point-in-convex-hull test via the monotone-chain hull.
pub fn in_convex_hull(p: Point2, pts: &[Point2], eps: f64) -> bool {
    let mut v = pts.to_vec();
    v.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    v.dedup();
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let seg_dist = |a: Point2, b: Point2| {
        let ab = b - a;
        let len2 = ab.dot(ab);
        let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        p.dist(a + ab * t)
    };
    if v.len() == 1 {
        return p.dist(v[0]) <= eps;
    }
    let mut hull: Vec<Point2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 { Box::new(v.iter()) } else { Box::new(v.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return seg_dist(v[0], v[v.len() - 1]) <= eps;
    }
    (0..hull.len()).all(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        cross(a, b, p) >= -eps * a.dist(b).max(1.0) || seg_dist(a, b) <= eps
    })
}

fn random_weights(r: &mut impl Rng, n_rp: usize) -> Vec<Vec<(usize, f64)>> {
    (0..r.random_range(1..4))
        .map(|_| {
            (0..r.random_range(1..=n_rp))
                .map(|_| (r.random_range(0..n_rp), r.random_range(1e-3..10.0)))
                .collect()
        })
        .collect()
}

pub fn estimate_in_hull(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let n_rp = r.random_range(1..15);
    let rps = random_points(&mut r, n_rp);
    let w = random_weights(&mut r, n_rp);
    let est = csle::estimate(&w, &rps).unwrap();
    let selected: Vec<Point2> = est.selected.iter().map(|&(n, _)| rps[n]).collect();
    prop_assert!(in_convex_hull(est.xy, &selected, 1e-9), "{:?} outside {:?}", est.xy, selected);
    Ok(())
}

pub fn estimate_translation_equivariant(seed: u64, dx: f64, dy: f64) -> Outcome {
    let mut r = rng(seed);
    let n_rp = r.random_range(1..15);
    let rps = random_points(&mut r, n_rp);
    let w = random_weights(&mut r, n_rp);
    let shift = Point2::new(dx, dy);
    let moved: Vec<Point2> = rps.iter().map(|&p| p + shift).collect();
    let a = csle::estimate(&w, &rps).unwrap().xy;
    let b = csle::estimate(&w, &moved).unwrap().xy;
    prop_assert!((b - a - shift).norm() <= 1e-9 * (1.0 + shift.norm()), "{:?} vs {:?}", b - a, shift);
    Ok(())
}

pub fn estimate_weight_scale_invariant(seed: u64, c: f64) -> Outcome {
    let mut r = rng(seed);
    let n_rp = r.random_range(1..15);
    let rps = random_points(&mut r, n_rp);
    let w = random_weights(&mut r, n_rp);
    let scaled: Vec<Vec<(usize, f64)>> = w.iter().map(|s| s.iter().map(|&(n, v)| (n, v * c)).collect()).collect();
    let a = csle::estimate(&w, &rps).unwrap().xy;
    let b = csle::estimate(&scaled, &rps).unwrap().xy;
    prop_assert!((a - b).norm() <= 1e-9, "{a:?} vs {b:?}");
    Ok(())
}

pub fn relevance_monotone(seed: u64, toward: f64) -> Outcome {
    let mut r = rng(seed);
    let (n_rp, n_ap) = (r.random_range(2..12), r.random_range(1..4));
    let cm = random_clusters(&mut r, n_rp);
    let adaptive = RssSnapshot::from_fn(n_rp, n_ap, |_, _| r.random_range(-80.0..-40.0));
    let mut user: Vec<f64> = (0..n_ap).map(|_| r.random_range(-80.0..-40.0)).collect();
    let (n, l) = (r.random_range(0..n_rp), r.random_range(0..n_ap));
    let weight_of = |user: &[f64]| {
        csle::weights(&adaptive, &cm, user, n_rp).unwrap()[l]
            .iter()
            .find(|&&(i, _)| i == n)
            .map(|&(_, w)| w)
            .unwrap()
    };
    let before = weight_of(&user);
    user[l] += toward * (adaptive.get(n, l) - user[l]);
    prop_assert!(weight_of(&user) >= before);
    Ok(())
}

// ------------------------------------------------------------------ harness

pub fn pipeline_deterministic(seed: u64) -> Outcome {
    let sc = light_scenario(seed);
    let methods = Method::all();
    let a = run_pipeline(&sc, &methods).unwrap();
    let b = run_pipeline(&sc.clone(), &methods).unwrap();
    prop_assert_eq!(a, b);
    Ok(())
}

pub fn report_consistent(seed: u64) -> Outcome {
    let sc = light_scenario(seed);
    for report in run_pipeline(&sc, &Method::all()).unwrap() {
        let mean = report.records.iter().map(|r| r.error_m).sum::<f64>() / report.len() as f64;
        prop_assert!((mean - report.mean_error()).abs() <= 1e-9);
        for rec in &report.records {
            prop_assert!((rec.truth.dist(rec.estimate) - rec.error_m).abs() <= 1e-12);
        }
        let cdf = report.cdf();
        prop_assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(cdf.last().map(|c| c.1), Some(1.0));
    }
    Ok(())
}

pub fn stage_isolation(seed: u64) -> Outcome {
    let sc = light_scenario(seed);
    let methods = Method::all();
    let art = Artifacts::build(&sc, &methods).unwrap();
    let dir = tempfile::tempdir().unwrap();
    art.save(dir.path()).unwrap();
    let back = Artifacts::load(dir.path()).unwrap();
    for m in methods {
        prop_assert_eq!(
            art.evaluate(m, sc.k, Fusion::Joint).unwrap(),
            back.evaluate(m, sc.k, Fusion::Joint).unwrap()
        );
    }
    Ok(())
}
