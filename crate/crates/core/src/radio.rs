//! Synthetic time-varying RSS: log-distance path loss plus crowd
//! attenuation zones and seeded Gaussian measurement noise.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SalcError};
use crate::floorplan::parse_tok;
use crate::geometry::{Point2, Rect};

/// Receiver distances are clamped to this floor before taking the log.
pub const DISTANCE_FLOOR_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessPoint {
    pub position: Point2,
    pub tx_power_dbm: f64,
    pub freq_mhz: f64,
}

impl AccessPoint {
    pub fn new(position: Point2, tx_power_dbm: f64, freq_mhz: f64) -> Result<Self> {
        if !tx_power_dbm.is_finite() || !(freq_mhz > 0.0) || !position.is_finite() {
            return Err(SalcError::invalid(format!(
                "access point needs finite power and positive frequency, got {tx_power_dbm} dBm / {freq_mhz} MHz"
            )));
        }
        Ok(Self {
            position,
            tx_power_dbm,
            freq_mhz,
        })
    }
}

/// A region where people block the signal. Any AP-to-receiver segment that
/// crosses it loses `extra_attenuation_db`, jittered per time sample by a
/// uniform draw in `±temporal_jitter_db` shared by all receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrowdZone {
    pub area: Rect,
    pub extra_attenuation_db: f64,
    pub temporal_jitter_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub path_loss_coeff: f64,
    pub noise_sigma_db: f64,
    pub crowd_zones: Vec<CrowdZone>,
    pub rng_seed: u64,
}

impl Environment {
    pub fn new(
        path_loss_coeff: f64,
        noise_sigma_db: f64,
        crowd_zones: Vec<CrowdZone>,
        rng_seed: u64,
    ) -> Result<Self> {
        if !(path_loss_coeff > 0.0) {
            return Err(SalcError::invalid("path-loss coefficient must be > 0"));
        }
        if !(noise_sigma_db >= 0.0) {
            return Err(SalcError::invalid("noise sigma must be >= 0"));
        }
        if let Some(z) = crowd_zones
            .iter()
            .find(|z| !(z.extra_attenuation_db >= 0.0) || !(z.temporal_jitter_db >= 0.0))
        {
            return Err(SalcError::invalid(format!("crowd zone with negative attenuation: {z:?}")));
        }
        Ok(Self {
            path_loss_coeff,
            noise_sigma_db,
            crowd_zones,
            rng_seed,
        })
    }

    /// Same environment with measurement noise switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            noise_sigma_db: 0.0,
            ..self.clone()
        }
    }

    /// Same environment with no crowd zones and no noise.
    pub fn empty(&self) -> Self {
        Self {
            noise_sigma_db: 0.0,
            crowd_zones: Vec::new(),
            ..self.clone()
        }
    }

    /// Attenuation of zone `zone` at time sample `t` (0 at the reference sample).
    pub fn zone_attenuation(&self, zone: usize, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        let z = &self.crowd_zones[zone];
        let jitter = if z.temporal_jitter_db > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[self.rng_seed, 0xC0D, zone as u64, t as u64]));
            rng.random_range(-z.temporal_jitter_db..=z.temporal_jitter_db)
        } else {
            0.0
        };
        (z.extra_attenuation_db + jitter).max(0.0)
    }

    /// Total crowd attenuation on the segment `tx -> rx` at sample `t`.
    pub fn crowd_attenuation(&self, rx: Point2, tx: Point2, t: usize) -> f64 {
        self.crowd_zones
            .iter()
            .enumerate()
            .filter(|(_, z)| z.area.intersects_segment(tx, rx))
            .map(|(i, _)| self.zone_attenuation(i, t))
            .sum()
    }

    fn noise(&self, rx: Point2, ap: &AccessPoint, t: usize) -> f64 {
        if t == 0 || self.noise_sigma_db == 0.0 {
            return 0.0;
        }
        let key = mix(&[
            self.rng_seed,
            0x5EED,
            rx.x.to_bits(),
            rx.y.to_bits(),
            ap.position.x.to_bits(),
            ap.position.y.to_bits(),
            t as u64,
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        Normal::new(0.0, self.noise_sigma_db)
            .expect("sigma validated")
            .sample(&mut rng)
    }
}

/// splitmix64-style fold of several words into one seed.
fn mix(words: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15_u64;
    for &w in words {
        let mut z = h ^ w.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Indoor path loss in dB: `20 log10(f_MHz) + P_d log10(d) - 28`.
pub fn path_loss_db(distance_m: f64, freq_mhz: f64, path_loss_coeff: f64) -> f64 {
    20.0 * freq_mhz.log10() + path_loss_coeff * distance_m.max(DISTANCE_FLOOR_M).log10() - 28.0
}

/// Received power (dB) at `pos` from `ap` at time sample `t`. Sample 0 is
/// the empty reference: no crowd attenuation and no noise.
pub fn synth_rss(pos: Point2, ap: &AccessPoint, env: &Environment, t: usize) -> f64 {
    let d = pos.dist(ap.position);
    let mut rss = ap.tx_power_dbm - path_loss_db(d, ap.freq_mhz, env.path_loss_coeff);
    if t > 0 {
        rss -= env.crowd_attenuation(pos, ap.position, t);
        rss += env.noise(pos, ap, t);
    }
    rss
}

/// RSS readings at one time instant, `[point][ap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RssSnapshot {
    n_points: usize,
    n_aps: usize,
    values: Vec<f64>,
}

impl RssSnapshot {
    pub fn new(n_points: usize, n_aps: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_points * n_aps {
            return Err(SalcError::Shape {
                expected: format!("{n_points}x{n_aps} values"),
                got: values.len().to_string(),
            });
        }
        Ok(Self {
            n_points,
            n_aps,
            values,
        })
    }

    pub fn from_fn(n_points: usize, n_aps: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_points * n_aps);
        for n in 0..n_points {
            for l in 0..n_aps {
                values.push(f(n, l));
            }
        }
        Self {
            n_points,
            n_aps,
            values,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn get(&self, n: usize, l: usize) -> f64 {
        self.values[n * self.n_aps + l]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_aps..(n + 1) * self.n_aps]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mean absolute difference against another snapshot of the same shape.
    pub fn mae(&self, other: &RssSnapshot) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "snapshot shapes differ");
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        sum / self.values.len() as f64
    }
}

/// Monitor-point readings at one instant, rows in ascending exemplar order.
#[derive(Debug, Clone, PartialEq)]
pub struct MpSlice {
    pub exemplars: Vec<usize>,
    pub rss: RssSnapshot,
}

impl MpSlice {
    /// Row of exemplar RP `mu`, if present.
    pub fn reading(&self, mu: usize) -> Option<&[f64]> {
        self.exemplars
            .binary_search(&mu)
            .ok()
            .map(|row| self.rss.row(row))
    }
}

/// Time series of RSS per (point, AP). Sample 0 is the empty-environment
/// reference `t_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RssDatabase {
    n_points: usize,
    n_aps: usize,
    time_labels: Vec<usize>,
    positions: Vec<Point2>,
    values: Vec<f64>,
}

impl RssDatabase {
    pub fn new(
        positions: Vec<Point2>,
        n_aps: usize,
        time_labels: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n_points = positions.len();
        let n = time_labels.len();
        if values.len() != n_points * n_aps * n {
            return Err(SalcError::Shape {
                expected: format!("{n_points}x{n_aps}x{n} values"),
                got: values.len().to_string(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SalcError::invalid("RSS database contains non-finite values"));
        }
        Ok(Self {
            n_points,
            n_aps,
            time_labels,
            positions,
            values,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_samples(&self) -> usize {
        self.time_labels.len()
    }

    pub fn time_labels(&self) -> &[usize] {
        &self.time_labels
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    pub fn get(&self, n: usize, l: usize, k: usize) -> f64 {
        self.values[(n * self.n_aps + l) * self.time_labels.len() + k]
    }

    /// All samples of point `n` from AP `l`.
    pub fn series(&self, n: usize, l: usize) -> &[f64] {
        let len = self.time_labels.len();
        let start = (n * self.n_aps + l) * len;
        &self.values[start..start + len]
    }

    /// Sample index range used for learning and similarity statistics: every
    /// sample after the reference, or the reference alone when it is all we have.
    pub fn varying_samples(&self) -> std::ops::Range<usize> {
        if self.n_samples() > 1 {
            1..self.n_samples()
        } else {
            0..1
        }
    }

    pub fn snapshot(&self, k: usize) -> RssSnapshot {
        RssSnapshot::from_fn(self.n_points, self.n_aps, |n, l| self.get(n, l, k))
    }

    /// The reference (`t_e`) snapshot.
    pub fn reference(&self) -> RssSnapshot {
        self.snapshot(0)
    }

    /// Structured text: header, positions, then one line per (point, AP)
    /// holding the time series.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rssdb {} {} {}", self.n_points, self.n_aps, self.n_samples());
        let times: Vec<String> = self.time_labels.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "times {}", times.join(" "));
        for (i, p) in self.positions.iter().enumerate() {
            let _ = writeln!(s, "pos {} {} {}", i, p.x, p.y);
        }
        for n in 0..self.n_points {
            for l in 0..self.n_aps {
                let _ = write!(s, "rss {n} {l}");
                for v in self.series(n, l) {
                    let _ = write!(s, " {v}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| SalcError::parse(1, "empty database"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let ["rssdb", np, na, ns] = h[..] else {
            return Err(SalcError::parse(ln, "expected `rssdb N_points N_ap N`"));
        };
        let (np, na, ns): (usize, usize, usize) =
            (parse_tok(np, ln)?, parse_tok(na, ln)?, parse_tok(ns, ln)?);
        let mut times = Vec::new();
        let mut positions = vec![None; np];
        let mut values = vec![f64::NAN; np * na * ns];
        for (ln, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.first().copied() {
                Some("times") => {
                    times = toks[1..]
                        .iter()
                        .map(|t| parse_tok::<usize>(t, ln))
                        .collect::<Result<_>>()?
                }
                Some("pos") if toks.len() == 4 => {
                    let i: usize = parse_tok(toks[1], ln)?;
                    let slot = positions
                        .get_mut(i)
                        .ok_or_else(|| SalcError::parse(ln, "position index out of range"))?;
                    *slot = Some(Point2::new(parse_tok(toks[2], ln)?, parse_tok(toks[3], ln)?));
                }
                Some("rss") if toks.len() == 3 + ns => {
                    let n: usize = parse_tok(toks[1], ln)?;
                    let l: usize = parse_tok(toks[2], ln)?;
                    if n >= np || l >= na {
                        return Err(SalcError::parse(ln, "rss row index out of range"));
                    }
                    for (k, t) in toks[3..].iter().enumerate() {
                        values[(n * na + l) * ns + k] = parse_tok(t, ln)?;
                    }
                }
                _ => return Err(SalcError::parse(ln, format!("unrecognized record {line:?}"))),
            }
        }
        if times.len() != ns {
            return Err(SalcError::parse(0, "time label count does not match header"));
        }
        let positions = positions
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| SalcError::parse(0, "missing point positions"))?;
        if values.iter().any(|v| v.is_nan()) {
            return Err(SalcError::parse(0, "missing rss rows"));
        }
        Self::new(positions, na, times, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Offline database over samples `0..n_samples`.
pub fn build_database(
    points: &[Point2],
    aps: &[AccessPoint],
    env: &Environment,
    n_samples: usize,
) -> Result<RssDatabase> {
    if n_samples == 0 {
        return Err(SalcError::invalid("n_samples must be >= 1"));
    }
    build_database_at(points, aps, env, &(0..n_samples).collect::<Vec<_>>())
}

/// Database sampled at explicit time labels (label 0 is the reference).
pub fn build_database_at(
    points: &[Point2],
    aps: &[AccessPoint],
    env: &Environment,
    times: &[usize],
) -> Result<RssDatabase> {
    let mut values = Vec::with_capacity(points.len() * aps.len() * times.len());
    for p in points {
        for ap in aps {
            values.extend(times.iter().map(|&t| synth_rss(*p, ap, env, t)));
        }
    }
    RssDatabase::new(points.to_vec(), aps.len(), times.to_vec(), values)
}

/// Snapshot of every point at time label `t`.
pub fn snapshot_at(points: &[Point2], aps: &[AccessPoint], env: &Environment, t: usize) -> RssSnapshot {
    RssSnapshot::from_fn(points.len(), aps.len(), |n, l| synth_rss(points[n], &aps[l], env, t))
}

/// Monitor-point rows of sample `k`, in ascending exemplar order.
pub fn mp_stream(db: &RssDatabase, exemplars: &[usize], k: usize) -> Result<MpSlice> {
    if k >= db.n_samples() {
        return Err(SalcError::invalid(format!("sample {k} out of range")));
    }
    let mut sorted = exemplars.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&bad) = sorted.iter().find(|&&m| m >= db.n_points()) {
        return Err(SalcError::invalid(format!(
            "exemplar {bad} out of range for {} points",
            db.n_points()
        )));
    }
    let rss = RssSnapshot::from_fn(sorted.len(), db.n_aps(), |m, l| db.get(sorted[m], l, k));
    Ok(MpSlice {
        exemplars: sorted,
        rss,
    })
}
