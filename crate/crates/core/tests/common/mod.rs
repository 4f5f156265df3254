//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use salc::code_nn::Network;
use salc::floorplan::{Edge, Skeleton};
use salc::harness::Scenario;
use salc::romac::Square;
use salc::Point2;

pub mod props;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random planar graph: `n` scattered vertices, a random spanning tree
/// (split in two unless `connected`) plus extra chords.
pub fn random_skeleton(rng: &mut impl Rng, n: usize, connected: bool) -> Skeleton {
    let vertices: Vec<Point2> = (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)))
        .collect();
    let mut edges = Vec::new();
    let edge = |a: usize, b: usize| Edge {
        a,
        b,
        length: vertices[a].dist(vertices[b]),
    };
    let half = n / 2;
    for v in 1..n {
        let lo = if !connected && v >= half { half } else { 0 };
        if lo < v {
            edges.push(edge(rng.random_range(lo..v), v));
        }
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let crosses = !connected && (a < half) != (b < half);
        if a != b && !crosses {
            edges.push(edge(a, b));
        }
    }
    Skeleton::from_parts(vertices, edges).unwrap()
}

/// Floyd–Warshall over the skeleton's edges, row-major.
pub fn floyd_warshall(sk: &Skeleton) -> Vec<f64> {
    let n = sk.n_vertices();
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    for e in sk.edges() {
        let (a, b) = (e.a, e.b);
        if e.length < d[a * n + b] {
            d[a * n + b] = e.length;
            d[b * n + a] = e.length;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    d
}

/// Best net similarity over every non-empty exemplar set, each other point
/// joining its most similar exemplar.
pub fn brute_force_net_similarity(s: &Square) -> f64 {
    let n = s.n();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << n) {
        let mut net = 0.0;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                net += s.get(i, i);
            } else {
                net += (0..n)
                    .filter(|&e| mask & (1 << e) != 0)
                    .map(|e| s.get(i, e))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        best = best.max(net);
    }
    best
}

/// Negative squared distances between random points, diagonal = median of
/// the off-diagonal entries scaled by `pref_scale`.
pub fn random_similarity(rng: &mut impl Rng, n: usize, pref_scale: f64) -> Square {
    let pts: Vec<Point2> = (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
        .collect();
    let mut s = Square::from_fn(n, |i, j| if i == j { 0.0 } else { -pts[i].dist(pts[j]).powi(2) });
    let mut off: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| s.get(i, j))
        .collect();
    off.sort_by(f64::total_cmp);
    let median = off[off.len() / 2];
    for i in 0..n {
        s.set(i, i, median * pref_scale);
    }
    s
}

/// Closed-form simple least squares `y = c x + b`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let c = sxy / sxx;
    (c, my - c * mx)
}

/// Straight-line forward pass written against raw weight arrays.
pub fn forward_oracle(net: &Network, input: &[f64]) -> Vec<f64> {
    let mut a = input.to_vec();
    let last = net.layers().len() - 1;
    for (h, layer) in net.layers().iter().enumerate() {
        let mut z = vec![0.0; layer.w.nrows()];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut acc = layer.b[r];
            for (c, av) in a.iter().enumerate() {
                acc += layer.w[[r, c]] * av;
            }
            *zr = if h < last { acc.max(0.0) } else { acc };
        }
        a = z;
    }
    a
}

/// Smallest |pre-activation| over every hidden unit and sample; used to skip
/// draws that sit on a rectifier kink.
pub fn min_hidden_preactivation(net: &Network, inputs: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    let last = net.layers().len() - 1;
    for input in inputs {
        let mut a = input.clone();
        for (h, layer) in net.layers().iter().enumerate() {
            let mut z = vec![0.0; layer.w.nrows()];
            for (r, zr) in z.iter_mut().enumerate() {
                let mut acc = layer.b[r];
                for (c, av) in a.iter().enumerate() {
                    acc += layer.w[[r, c]] * av;
                }
                if h < last {
                    min = min.min(acc.abs());
                }
                *zr = if h < last { acc.max(0.0) } else { acc };
            }
            a = z;
        }
    }
    min
}

/// Reference scenario shrunk so a full run takes well under a second.
pub fn light_scenario(seed: u64) -> Scenario {
    let mut sc = Scenario::reference().with_seed(seed);
    sc.samples = 11;
    sc.tp_count = 20;
    sc.nn.hidden = vec![8, 8];
    sc.nn.pretrain_iters = 60;
    sc.nn.finetune_iters = 60;
    sc
}
