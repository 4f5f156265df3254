use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::similarity::Square;
use crate::error::{Result, SalcError};
use crate::floorplan::parse_tok;

/// Message-passing settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApParams {
    pub damping: f64,
    pub max_iter: usize,
    pub stable_iters: usize,
}

impl Default for ApParams {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 500,
            stable_iters: 10,
        }
    }
}

/// Clustering result: exemplars (monitor points), per-point exemplar, and
/// clusters ordered by ascending exemplar index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterModel {
    exemplars: Vec<usize>,
    exemplar_of: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    pub converged: bool,
    pub iterations: usize,
}

impl ClusterModel {
    /// Builds a model from a per-point exemplar assignment. Every exemplar
    /// must be assigned to itself.
    pub fn from_assignment(exemplar_of: Vec<usize>) -> Result<Self> {
        let n = exemplar_of.len();
        let mut exemplars: Vec<usize> = exemplar_of.clone();
        exemplars.sort_unstable();
        exemplars.dedup();
        for &mu in &exemplars {
            if mu >= n {
                return Err(SalcError::invalid(format!("exemplar {mu} out of range")));
            }
            if exemplar_of[mu] != mu {
                return Err(SalcError::invalid(format!("exemplar {mu} is not its own exemplar")));
            }
        }
        let clusters = exemplars
            .iter()
            .map(|&mu| (0..n).filter(|&i| exemplar_of[i] == mu).collect())
            .collect();
        Ok(Self {
            exemplars,
            exemplar_of,
            clusters,
            converged: true,
            iterations: 0,
        })
    }

    /// Sorted exemplar indices (the monitor points).
    pub fn exemplars(&self) -> &[usize] {
        &self.exemplars
    }

    pub fn exemplar_of(&self, i: usize) -> usize {
        self.exemplar_of[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.exemplar_of
    }

    /// Members of each cluster; entry `m` belongs to `exemplars()[m]`.
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    /// Position `m` of point `i`'s cluster.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.exemplars
            .binary_search(&self.exemplar_of[i])
            .expect("exemplar present")
    }

    pub fn n_points(&self) -> usize {
        self.exemplar_of.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.exemplars.len()
    }

    /// Sum of similarities to assigned exemplars plus exemplar preferences.
    pub fn net_similarity(&self, s: &Square) -> f64 {
        (0..self.n_points()).map(|i| s.get(i, self.exemplar_of[i])).sum()
    }

    /// One line per cluster: `m: exemplar : member,member,...`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# clusters={} converged={} iterations={}\n",
            self.n_clusters(),
            self.converged,
            self.iterations
        );
        for (m, (mu, members)) in self.exemplars.iter().zip(&self.clusters).enumerate() {
            let list: Vec<String> = members.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{m}: {mu} : {}", list.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut converged = true;
        let mut iterations = 0;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("converged", v)) => converged = parse_tok(v, ln)?,
                        Some(("iterations", v)) => iterations = parse_tok(v, ln)?,
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(':').map(str::trim).collect();
            let [_, mu, members] = parts[..] else {
                return Err(SalcError::parse(ln, "expected `m: exemplar : members`"));
            };
            let mu: usize = parse_tok(mu, ln)?;
            for tok in members.split(',').filter(|t| !t.is_empty()) {
                pairs.push((parse_tok::<usize>(tok.trim(), ln)?, mu));
            }
        }
        pairs.sort_unstable();
        let n = pairs.len();
        if pairs.iter().enumerate().any(|(i, &(p, _))| p != i) {
            return Err(SalcError::parse(0, format!("clusters do not partition 0..{n}")));
        }
        let mut model = Self::from_assignment(pairs.into_iter().map(|(_, mu)| mu).collect())?;
        model.converged = converged;
        model.iterations = iterations;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Index of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Exemplars are points whose own evidence `r + a` peaks on themselves;
/// everyone else joins the exemplar with the highest evidence.
fn assignment(r: &Square, a: &Square) -> Option<Vec<usize>> {
    let n = r.n();
    let evidence = |i: usize, j: usize| r.get(i, j) + a.get(i, j);
    let exemplars: Vec<usize> = (0..n)
        .filter(|&i| argmax((0..n).map(|j| evidence(i, j))) == i)
        .collect();
    if exemplars.is_empty() {
        return None;
    }
    Some(
        (0..n)
            .map(|i| exemplars[argmax(exemplars.iter().map(|&j| evidence(i, j)))])
            .collect(),
    )
}

/// Hard-assignment polish on the message-passing result: every point joins
/// its most similar exemplar, then each cluster moves its exemplar to the
/// member with the largest summed similarity from the cluster (preference
/// included). Repeats until the exemplar set is stable; the net similarity
/// never decreases.
fn refine(s: &Square, assignment: Vec<usize>) -> Vec<usize> {
    let n = s.n();
    let mut exemplars: Vec<usize> = (0..n).filter(|&i| assignment[i] == i).collect();
    let assign = |exemplars: &[usize]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                if exemplars.binary_search(&i).is_ok() {
                    i
                } else {
                    exemplars[argmax(exemplars.iter().map(|&e| s.get(i, e)))]
                }
            })
            .collect()
    };
    let mut current = assign(&exemplars);
    for _ in 0..n {
        let mut next = Vec::with_capacity(exemplars.len());
        for &e in &exemplars {
            let members: Vec<usize> = (0..n).filter(|&i| current[i] == e).collect();
            let score = |j: usize| members.iter().map(|&i| s.get(i, j)).sum::<f64>();
            let mut best = (e, score(e));
            for &j in &members {
                let v = score(j);
                if v > best.1 {
                    best = (j, v);
                }
            }
            next.push(best.0);
        }
        next.sort_unstable();
        if next == exemplars {
            break;
        }
        exemplars = next;
        current = assign(&exemplars);
    }
    current
}

/// Relative size of the fixed jitter added to every similarity so that
/// exactly symmetric points cannot trap the messages in an oscillation.
const TIE_BREAK: f64 = 1e-12;

fn with_tie_break(s: &Square) -> Square {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a1f);
    Square::from_fn(s.n(), |i, j| {
        let u: f64 = rng.random();
        s.get(i, j) + TIE_BREAK * s.get(i, j).abs() * u
    })
}

/// Affinity propagation over similarity `s` (diagonal = preferences).
///
/// Runs damped responsibility/availability updates until the assignment is
/// unchanged for `stable_iters` consecutive iterations. On hitting `max_iter`
/// the current assignment is returned with `converged = false`.
pub fn affinity_propagation(s: &Square, params: ApParams) -> Result<ClusterModel> {
    let n = s.n();
    if !(0.0..1.0).contains(&params.damping) {
        return Err(SalcError::invalid(format!("damping must be in [0, 1), got {}", params.damping)));
    }
    if n == 0 {
        return Err(SalcError::invalid("cannot cluster zero points"));
    }
    if n == 1 {
        return ClusterModel::from_assignment(vec![0]);
    }
    let s = &with_tie_break(s);
    let lambda = params.damping;
    let mut r = Square::zeros(n);
    let mut a = Square::zeros(n);
    let mut last: Option<Vec<usize>> = None;
    let mut stable = 0;
    let mut iterations = 0;

    for it in 1..=params.max_iter {
        iterations = it;
        // responsibilities
        for i in 0..n {
            let (mut first, mut second, mut first_j) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for j in 0..n {
                let v = a.get(i, j) + s.get(i, j);
                if v > first {
                    second = first;
                    first = v;
                    first_j = j;
                } else if v > second {
                    second = v;
                }
            }
            for j in 0..n {
                let competitor = if j == first_j { second } else { first };
                let fresh = s.get(i, j) - competitor;
                r.set(i, j, lambda * r.get(i, j) + (1.0 - lambda) * fresh);
            }
        }
        // availabilities
        for j in 0..n {
            let positive: f64 = (0..n)
                .filter(|&i| i != j)
                .map(|i| r.get(i, j).max(0.0))
                .sum();
            for i in 0..n {
                let fresh = if i == j {
                    positive
                } else {
                    (r.get(j, j) + positive - r.get(i, j).max(0.0)).min(0.0)
                };
                a.set(i, j, lambda * a.get(i, j) + (1.0 - lambda) * fresh);
            }
        }

        let current = assignment(&r, &a);
        if current.is_some() && current == last {
            stable += 1;
        } else {
            stable = 1;
        }
        last = current;
        if last.is_some() && stable >= params.stable_iters {
            let mut model = ClusterModel::from_assignment(refine(s, last.expect("checked")))?;
            model.iterations = iterations;
            return Ok(model);
        }
    }

    // No stable assignment: fall back to the best diagonal evidence if AP
    // never produced an exemplar.
    let fallback = last.unwrap_or_else(|| {
        let mu = argmax((0..n).map(|j| r.get(j, j) + a.get(j, j)));
        vec![mu; n]
    });
    let mut model = match ClusterModel::from_assignment(refine(s, fallback)) {
        Ok(m) => m,
        Err(_) => ClusterModel::from_assignment(vec![0; n])?,
    };
    model.converged = false;
    model.iterations = iterations;
    Ok(model)
}
