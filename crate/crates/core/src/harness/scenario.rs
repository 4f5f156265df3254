use std::path::{Path, PathBuf};

use crate::code_lr::LrParams;
use crate::code_nn::NnParams;
use crate::csle::Fusion;
use crate::error::{Result, SalcError};
use crate::floorplan::{parse_tok, FloorMap};
use crate::geometry::{Point2, Rect};
use crate::radio::{AccessPoint, CrowdZone, Environment};
use crate::romac::{ApParams, DeltaOrientation, FactorWeights};

const REFERENCE_MAP: &str = include_str!("../../fixtures/two_room.map");
const REFERENCE_SCENARIO: &str = include_str!("../../fixtures/reference.scenario");

/// Independent seeds for each randomized stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub synth: u64,
    pub tp: u64,
    pub init: u64,
    pub batch: u64,
}

impl StageSeeds {
    pub fn from_master(seed: u64) -> Self {
        let stage = |k: u64| seed.wrapping_mul(1_000_003).wrapping_add(k);
        Self {
            synth: stage(11),
            tp: stage(23),
            init: stage(37),
            batch: stage(41),
        }
    }
}

/// Everything needed to run the pipeline end to end.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: FloorMap,
    pub map_path: Option<PathBuf>,
    pub aps: Vec<AccessPoint>,
    pub rp_origin: Point2,
    pub rp_pitch: f64,
    pub rp_clearance: f64,
    pub tp_count: usize,
    pub tp_clearance: f64,
    pub tps: Vec<Point2>,
    pub path_loss: f64,
    pub noise_sigma: f64,
    pub crowd: Vec<CrowdZone>,
    /// Offline samples per RP, including the reference sample.
    pub samples: usize,
    pub omega: FactorWeights,
    pub delta_orientation: DeltaOrientation,
    pub preference: Option<f64>,
    pub ap: ApParams,
    pub lr: LrParams,
    pub nn: NnParams,
    pub k: usize,
    pub fusion: Fusion,
    pub seed: u64,
    pub seeds: StageSeeds,
}

impl Scenario {
    /// Built-in two-room crowded scenario.
    pub fn reference() -> Self {
        let map = FloorMap::parse(REFERENCE_MAP).expect("bundled map is valid");
        Self::parse_with_map(REFERENCE_SCENARIO, Some(map), None).expect("bundled scenario is valid")
    }

    /// Loads a scenario file; a relative `map` path resolves against the
    /// scenario's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_with_map(&text, None, path.parent())
    }

    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        Self::parse_with_map(text, None, base_dir)
    }

    fn parse_with_map(text: &str, map: Option<FloorMap>, base_dir: Option<&Path>) -> Result<Self> {
        let mut map = map;
        let mut map_path = None;
        let mut aps = Vec::new();
        let mut tps = Vec::new();
        let mut crowd = Vec::new();
        let mut sc = PartialScenario::default();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| SalcError::parse(ln, format!("expected `key = value`, got {line:?}")))?;
            let nums = || -> Result<Vec<f64>> { value.split_whitespace().map(|t| parse_tok(t, ln)).collect() };
            match key {
                "map" => {
                    if map.is_none() {
                        let p = base_dir.map_or_else(|| PathBuf::from(value), |d| d.join(value));
                        map = Some(FloorMap::load(&p)?);
                        map_path = Some(p);
                    }
                }
                "ap" => {
                    let v = nums()?;
                    let [x, y, p, f] = v[..] else {
                        return Err(SalcError::parse(ln, "ap = x y tx_power_dbm freq_mhz"));
                    };
                    aps.push(AccessPoint::new(Point2::new(x, y), p, f)?);
                }
                "tp" => {
                    let v = nums()?;
                    let [x, y] = v[..] else {
                        return Err(SalcError::parse(ln, "tp = x y"));
                    };
                    tps.push(Point2::new(x, y));
                }
                "crowd" => {
                    let v = nums()?;
                    let [x0, y0, x1, y1, att, jit] = v[..] else {
                        return Err(SalcError::parse(ln, "crowd = x0 y0 x1 y1 attenuation_db jitter_db"));
                    };
                    crowd.push(CrowdZone {
                        area: Rect::from_corners(Point2::new(x0, y0), Point2::new(x1, y1)),
                        extra_attenuation_db: att,
                        temporal_jitter_db: jit,
                    });
                }
                "rp_grid" => {
                    let v = nums()?;
                    let [x, y, pitch] = v[..] else {
                        return Err(SalcError::parse(ln, "rp_grid = origin_x origin_y pitch"));
                    };
                    sc.rp_origin = Point2::new(x, y);
                    sc.rp_pitch = pitch;
                }
                "omega" => {
                    let v = nums()?;
                    let [rss, ssp, delta] = v[..] else {
                        return Err(SalcError::parse(ln, "omega = w_rss w_ssp w_delta"));
                    };
                    sc.omega = FactorWeights { rss, ssp, delta };
                }
                "preference" => {
                    sc.preference = if value == "median" { None } else { Some(parse_tok(value, ln)?) };
                }
                "nn_hidden" => {
                    sc.nn.hidden = value
                        .split(',')
                        .map(|t| parse_tok(t.trim(), ln))
                        .collect::<Result<_>>()?;
                }
                "nn_batch" => {
                    sc.nn.batch_size = if value == "full" { None } else { Some(parse_tok(value, ln)?) };
                }
                "delta_orientation" => sc.delta_orientation = value.parse()?,
                "rp_clearance" => sc.rp_clearance = parse_tok(value, ln)?,
                "tp_count" => sc.tp_count = parse_tok(value, ln)?,
                "tp_clearance" => sc.tp_clearance = parse_tok(value, ln)?,
                "path_loss" => sc.path_loss = parse_tok(value, ln)?,
                "noise_sigma" => sc.noise_sigma = parse_tok(value, ln)?,
                "samples" => sc.samples = parse_tok(value, ln)?,
                "damping" => sc.ap.damping = parse_tok(value, ln)?,
                "max_iter" => sc.ap.max_iter = parse_tok(value, ln)?,
                "stable_iters" => sc.ap.stable_iters = parse_tok(value, ln)?,
                "lr_eta" => sc.lr.eta = parse_tok(value, ln)?,
                "lr_epochs" => sc.lr.epochs = parse_tok(value, ln)?,
                "nn_eta" => sc.nn.eta = parse_tok(value, ln)?,
                "nn_gamma" => sc.nn.gamma = parse_tok(value, ln)?,
                "pretrain_iters" => sc.nn.pretrain_iters = parse_tok(value, ln)?,
                "finetune_iters" => sc.nn.finetune_iters = parse_tok(value, ln)?,
                "k" => sc.k = parse_tok(value, ln)?,
                "csle_fusion" => sc.fusion = value.parse()?,
                "seed" => sc.seed = parse_tok(value, ln)?,
                "synth_seed" => sc.seed_overrides.0 = Some(parse_tok(value, ln)?),
                "tp_seed" => sc.seed_overrides.1 = Some(parse_tok(value, ln)?),
                "init_seed" => sc.seed_overrides.2 = Some(parse_tok(value, ln)?),
                "batch_seed" => sc.seed_overrides.3 = Some(parse_tok(value, ln)?),
                other => return Err(SalcError::parse(ln, format!("unknown key {other:?}"))),
            }
        }
        let map = map.ok_or_else(|| SalcError::invalid("scenario does not name a map"))?;
        let mut seeds = StageSeeds::from_master(sc.seed);
        let (s, t, i, b) = sc.seed_overrides;
        seeds.synth = s.unwrap_or(seeds.synth);
        seeds.tp = t.unwrap_or(seeds.tp);
        seeds.init = i.unwrap_or(seeds.init);
        seeds.batch = b.unwrap_or(seeds.batch);
        let mut scenario = Scenario {
            map,
            map_path,
            aps,
            rp_origin: sc.rp_origin,
            rp_pitch: sc.rp_pitch,
            rp_clearance: sc.rp_clearance,
            tp_count: if tps.is_empty() { sc.tp_count } else { tps.len() },
            tp_clearance: sc.tp_clearance,
            tps,
            path_loss: sc.path_loss,
            noise_sigma: sc.noise_sigma,
            crowd,
            samples: sc.samples,
            omega: sc.omega,
            delta_orientation: sc.delta_orientation,
            preference: sc.preference,
            ap: sc.ap,
            lr: sc.lr,
            nn: sc.nn,
            k: sc.k,
            fusion: sc.fusion,
            seed: sc.seed,
            seeds,
        };
        scenario.sync_seeds();
        scenario.validate()?;
        Ok(scenario)
    }

    /// Replaces the master seed and every stage seed derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.seeds = StageSeeds::from_master(seed);
        self.sync_seeds();
        self
    }

    fn sync_seeds(&mut self) {
        self.nn.init_seed = self.seeds.init;
        self.nn.batch_seed = self.seeds.batch;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SalcError::invalid(m));
        if self.aps.is_empty() {
            return bad("scenario needs at least one AP".into());
        }
        if !(self.rp_pitch > 0.0) {
            return bad(format!("rp pitch must be > 0, got {}", self.rp_pitch));
        }
        if self.samples < 2 {
            return bad(format!("samples must be >= 2 (reference plus one), got {}", self.samples));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if !(self.nn.gamma > 0.0) || !(self.nn.eta >= 0.0) || !(self.lr.eta > 0.0) {
            return bad("learning rates must be >= 0 and gamma > 0".into());
        }
        if !(0.0..1.0).contains(&self.ap.damping) {
            return bad(format!("damping must be in [0, 1), got {}", self.ap.damping));
        }
        Environment::new(self.path_loss, self.noise_sigma, self.crowd.clone(), 0)?;
        Ok(())
    }

    pub fn environment(&self) -> Environment {
        Environment::new(self.path_loss, self.noise_sigma, self.crowd.clone(), self.seeds.synth)
            .expect("validated")
    }

    /// Grid points over the map that are walkable with enough clearance.
    pub fn reference_points(&self) -> Vec<Point2> {
        let mut out = Vec::new();
        let mut y = self.rp_origin.y;
        while y < self.map.height_m() {
            let mut x = self.rp_origin.x;
            while x < self.map.width_m() {
                let p = Point2::new(x, y);
                if self.map.is_walkable_point(p) && self.map.clearance(p) >= self.rp_clearance {
                    out.push(p);
                }
                x += self.rp_pitch;
            }
            y += self.rp_pitch;
        }
        out
    }

    /// Explicit test points, or `tp_count` seeded random walkable points.
    pub fn test_points(&self) -> Vec<Point2> {
        use rand::{Rng, SeedableRng};
        if !self.tps.is_empty() {
            return self.tps.clone();
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seeds.tp);
        let mut out = Vec::with_capacity(self.tp_count);
        let mut attempts = 0usize;
        while out.len() < self.tp_count && attempts < 1_000_000 {
            attempts += 1;
            let p = Point2::new(
                rng.random_range(0.0..self.map.width_m()),
                rng.random_range(0.0..self.map.height_m()),
            );
            if self.map.is_walkable_point(p) && self.map.clearance(p) >= self.tp_clearance {
                out.push(p);
            }
        }
        out
    }
}

struct PartialScenario {
    rp_origin: Point2,
    rp_pitch: f64,
    rp_clearance: f64,
    tp_count: usize,
    tp_clearance: f64,
    path_loss: f64,
    noise_sigma: f64,
    samples: usize,
    omega: FactorWeights,
    delta_orientation: DeltaOrientation,
    preference: Option<f64>,
    ap: ApParams,
    lr: LrParams,
    nn: NnParams,
    k: usize,
    fusion: Fusion,
    seed: u64,
    seed_overrides: (Option<u64>, Option<u64>, Option<u64>, Option<u64>),
}

impl Default for PartialScenario {
    fn default() -> Self {
        Self {
            rp_origin: Point2::new(0.6, 0.6),
            rp_pitch: 1.2,
            rp_clearance: 0.25,
            tp_count: 89,
            tp_clearance: 0.3,
            path_loss: 30.0,
            noise_sigma: 1.0,
            samples: 10,
            omega: FactorWeights::EQUAL,
            delta_orientation: DeltaOrientation::Literal,
            preference: None,
            ap: ApParams::default(),
            lr: LrParams::default(),
            nn: NnParams::default(),
            k: 3,
            fusion: Fusion::default(),
            seed: 1,
            seed_overrides: (None, None, None, None),
        }
    }
}
