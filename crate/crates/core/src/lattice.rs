//! The inhomogeneous edge-probability field and seeded configurations.
//!
//! Edge midpoints always have one half-integer coordinate, so norms are kept
//! as *doubled* integers (`2·midpoint` is an integer pair) and only converted
//! to floating point inside `exp`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{probability_threshold, StreamKey};

/// Critical probability for bond percolation on ℤ².
pub const P_C: f64 = 0.5;

/// Largest coordinate magnitude with a unique global edge index.
pub const MAX_COORDINATE: u32 = (1 << 30) - 2;

/// Largest window radius for an on-the-fly configuration (threshold table size).
pub const MAX_LAZY_RADIUS: u32 = 1 << 22;

/// Largest site count of a materialized window.
pub const MAX_MATERIALIZED_SITES: u64 = 1 << 31;

/// Open probability `ρ = 1 - exp(-t·r^(-α))` at midpoint norm `r`.
#[inline]
pub fn rho(alpha: f64, time: f64, norm: f64) -> f64 {
    if time <= 0.0 {
        return 0.0;
    }
    if norm <= 0.0 {
        return 1.0;
    }
    -(-time * norm.powf(-alpha)).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParamsRepr")]
pub struct ModelParams {
    alpha: f64,
    time: f64,
    window_radius: u32,
}

#[derive(Deserialize)]
struct ModelParamsRepr {
    alpha: f64,
    time: f64,
    window_radius: u32,
}

impl TryFrom<ModelParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ModelParamsRepr) -> Result<Self> {
        ModelParams::new(r.alpha, r.time, r.window_radius)
    }
}

impl ModelParams {
    pub fn new(alpha: f64, time: f64, window_radius: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive and finite, got {alpha}")));
        }
        if !(time >= 0.0 && time.is_finite()) {
            return Err(invalid("t", format!("must be nonnegative and finite, got {time}")));
        }
        if window_radius < 1 {
            return Err(invalid("window_radius", "must be at least 1"));
        }
        if window_radius > MAX_COORDINATE {
            return Err(Error::Capacity {
                radius: window_radius.into(),
                limit: MAX_COORDINATE.into(),
            });
        }
        Ok(ModelParams {
            alpha,
            time,
            window_radius,
        })
    }

    /// Window of radius `⌈1.5·n(p_c - ε, t)⌉`, beyond which the origin cluster
    /// escapes with vanishing probability.
    pub fn with_default_window(alpha: f64, time: f64, epsilon: f64) -> Result<Self> {
        let probe = ModelParams::new(alpha, time, 1)?;
        let radius = default_window_radius(&probe, epsilon)?;
        ModelParams::new(alpha, time, radius)
    }

    pub fn with_window_radius(self, window_radius: u32) -> Result<Self> {
        ModelParams::new(self.alpha, self.time, window_radius)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn window_radius(&self) -> u32 {
        self.window_radius
    }

    /// ρ at a continuous L∞ norm.
    pub fn rho_at(&self, norm: f64) -> f64 {
        rho(self.alpha, self.time, norm)
    }

    /// `t^(2/α)`, the volume scale of the origin cluster.
    pub fn volume_scale(&self) -> f64 {
        self.time.powf(2.0 / self.alpha)
    }
}

pub fn default_window_radius(params: &ModelParams, epsilon: f64) -> Result<u32> {
    if !(epsilon > 0.0 && epsilon < P_C) {
        return Err(invalid("epsilon", format!("must lie in (0, 1/2), got {epsilon}")));
    }
    let n = characteristic_radius(P_C - epsilon, params)?.value;
    Ok(((1.5 * n).ceil() as u32).max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const ORIGIN: Site = Site { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }

    /// L∞ norm.
    #[inline]
    pub fn norm(self) -> u32 {
        self.x.unsigned_abs().max(self.y.unsigned_abs())
    }

    #[inline]
    pub fn offset(self, dx: i32, dy: i32) -> Site {
        Site::new(self.x + dx, self.y + dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Edge from `site` to `site + e₁`.
    Horizontal,
    /// Edge from `site` to `site + e₂`.
    Vertical,
}

/// Canonical name of a lattice edge: its lower-left endpoint and direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub site: Site,
    pub direction: Direction,
}

impl EdgeId {
    #[inline]
    pub const fn horizontal(x: i32, y: i32) -> Self {
        EdgeId {
            site: Site::new(x, y),
            direction: Direction::Horizontal,
        }
    }

    #[inline]
    pub const fn vertical(x: i32, y: i32) -> Self {
        EdgeId {
            site: Site::new(x, y),
            direction: Direction::Vertical,
        }
    }

    /// The edge joining two nearest-neighbour sites, if they are adjacent.
    pub fn between(a: Site, b: Site) -> Option<Self> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match (hi.x - lo.x, hi.y - lo.y) {
            (1, 0) => Some(EdgeId::horizontal(lo.x, lo.y)),
            (0, 1) => Some(EdgeId::vertical(lo.x, lo.y)),
            _ => None,
        }
    }

    #[inline]
    pub fn endpoints(self) -> (Site, Site) {
        match self.direction {
            Direction::Horizontal => (self.site, self.site.offset(1, 0)),
            Direction::Vertical => (self.site, self.site.offset(0, 1)),
        }
    }

    #[inline]
    pub fn doubled_midpoint(self) -> (i64, i64) {
        let (x, y) = (2 * i64::from(self.site.x), 2 * i64::from(self.site.y));
        match self.direction {
            Direction::Horizontal => (x + 1, y),
            Direction::Vertical => (x, y + 1),
        }
    }

    /// `2·‖midpoint‖∞`, an odd-or-even positive integer; never zero.
    #[inline]
    pub fn doubled_norm(self) -> u32 {
        let (x, y) = self.doubled_midpoint();
        x.unsigned_abs().max(y.unsigned_abs()) as u32
    }

    pub fn midpoint(self) -> (f64, f64) {
        let (x, y) = self.doubled_midpoint();
        (x as f64 / 2.0, y as f64 / 2.0)
    }

    /// Global index used as the random-number counter for this edge.
    ///
    /// Zig-zag coordinates packed as `zx << 32 | zy << 1 | dir`; unique for
    /// coordinates of magnitude below 2^30.
    #[inline]
    pub fn index(self) -> u64 {
        let zz = |v: i32| ((v << 1) ^ (v >> 31)) as u32 as u64;
        let dir = match self.direction {
            Direction::Horizontal => 0,
            Direction::Vertical => 1,
        };
        (zz(self.site.x) << 32) | (zz(self.site.y) << 1) | dir
    }

    /// Whether both endpoints lie in the square window of radius `radius`.
    #[inline]
    pub fn in_window(self, radius: u32) -> bool {
        let (a, b) = self.endpoints();
        a.norm() <= radius && b.norm() <= radius
    }
}

/// L∞ norm of an edge midpoint; at least 1/2.
pub fn edge_midpoint_norm(edge: EdgeId) -> f64 {
    f64::from(edge.doubled_norm()) / 2.0
}

/// ρ(midpoint(e), t).
pub fn open_probability(edge: EdgeId, params: &ModelParams) -> f64 {
    params.rho_at(edge_midpoint_norm(edge))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRadius {
    pub p: f64,
    /// n(p, t)
    pub value: f64,
    /// c_{p,α}
    pub coefficient: f64,
}

/// `n(p,t) = c_{p,α}·t^(1/α)` with `c_{p,α} = (-ln(1-p))^(-1/α)`.
pub fn characteristic_radius(p: f64, params: &ModelParams) -> Result<CharacteristicRadius> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    let alpha = params.alpha();
    let coefficient = (-(-p).ln_1p()).powf(-1.0 / alpha);
    let value = coefficient * params.time().powf(1.0 / alpha);
    Ok(CharacteristicRadius {
        p,
        value,
        coefficient,
    })
}

/// Anything that can answer "is this edge open?" over a centered square window.
pub trait BondField: Sync {
    fn window_radius(&self) -> u32;

    /// Open state of an edge inside the window.
    fn is_open(&self, edge: EdgeId) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Independent Bernoulli(ρ) edges at the given time.
    #[default]
    FixedTime,
    /// A uniform clock mark per edge shared across all times: open iff mark < ρ.
    CoupledClock,
}

fn edge_stream(seed: u64, mode: SamplingMode, time: f64) -> StreamKey {
    let root = StreamKey::new(seed).tag("edges");
    match mode {
        SamplingMode::CoupledClock => root,
        SamplingMode::FixedTime => root.tag("fixed-time").child(time.to_bits()),
    }
}

/// A configuration evaluated on demand from the keyed generator.
///
/// Bit-identical to the [`OpenConfiguration`] sampled from the same
/// `(params, seed, mode)`, but costs no memory per edge.
#[derive(Clone, Debug)]
pub struct LazyConfiguration {
    params: ModelParams,
    seed: u64,
    mode: SamplingMode,
    key: StreamKey,
    /// Indexed by doubled midpoint norm.
    thresholds: Vec<u64>,
}

impl LazyConfiguration {
    pub fn new(params: ModelParams, seed: u64, mode: SamplingMode) -> Result<Self> {
        let radius = params.window_radius();
        if radius > MAX_LAZY_RADIUS {
            return Err(Error::Capacity {
                radius: radius.into(),
                limit: MAX_LAZY_RADIUS.into(),
            });
        }
        let thresholds = (0..=2 * radius as usize + 1)
            .map(|d| probability_threshold(params.rho_at(d as f64 / 2.0)))
            .collect();
        Ok(LazyConfiguration {
            params,
            seed,
            mode,
            key: edge_stream(seed, mode, params.time()),
            thresholds,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// The uniform(0,1) clock mark of an edge.
    pub fn clock(&self, edge: EdgeId) -> f64 {
        self.key.uniform(edge.index())
    }

    pub fn materialize(&self) -> Result<OpenConfiguration> {
        let radius = self.params.window_radius();
        let mut config = OpenConfiguration::empty(self.params, Some(self.seed), self.mode)?;
        let side = config.side;
        config
            .open
            .par_iter_mut()
            .enumerate()
            .for_each(|(w, word)| {
                let mut bits = 0u64;
                for b in 0..64 {
                    let slot = w * 64 + b;
                    if let Some(edge) = slot_edge(slot, side, radius) {
                        if self.is_open(edge) {
                            bits |= 1 << b;
                        }
                    }
                }
                *word = bits;
            });
        if self.mode == SamplingMode::CoupledClock {
            let slots = 2 * config.site_count();
            let clocks = (0..slots)
                .into_par_iter()
                .map(|slot| match slot_edge(slot, side, radius) {
                    Some(edge) => self.clock(edge),
                    // Slots past the window edge hold no edge; infinity keeps `==` reflexive.
                    None => f64::INFINITY,
                })
                .collect();
            config.clocks = Some(clocks);
        }
        Ok(config)
    }
}

impl BondField for LazyConfiguration {
    fn window_radius(&self) -> u32 {
        self.params.window_radius()
    }

    #[inline]
    fn is_open(&self, edge: EdgeId) -> bool {
        self.key.unit_bits(edge.index()) < self.thresholds[edge.doubled_norm() as usize]
    }
}

/// Homogeneous bond percolation with a fixed open probability.
#[derive(Clone, Copy, Debug)]
pub struct HomogeneousField {
    p: f64,
    threshold: u64,
    key: StreamKey,
    window_radius: u32,
}

impl HomogeneousField {
    pub fn new(p: f64, key: StreamKey, window_radius: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
        }
        if window_radius > MAX_COORDINATE {
            return Err(Error::Capacity {
                radius: window_radius.into(),
                limit: MAX_COORDINATE.into(),
            });
        }
        Ok(HomogeneousField {
            p,
            threshold: probability_threshold(p),
            key,
            window_radius,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl BondField for HomogeneousField {
    fn window_radius(&self) -> u32 {
        self.window_radius
    }

    #[inline]
    fn is_open(&self, edge: EdgeId) -> bool {
        self.key.unit_bits(edge.index()) < self.threshold
    }
}

fn slot_edge(slot: usize, side: usize, radius: u32) -> Option<EdgeId> {
    let site = slot / 2;
    if site >= side * side {
        return None;
    }
    let r = radius as i32;
    let x = (site % side) as i32 - r;
    let y = (site / side) as i32 - r;
    if slot.is_multiple_of(2) {
        (x < r).then(|| EdgeId::horizontal(x, y))
    } else {
        (y < r).then(|| EdgeId::vertical(x, y))
    }
}

/// Open/closed state of every edge of a finite window, with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenConfiguration {
    params: ModelParams,
    seed: Option<u64>,
    mode: SamplingMode,
    side: usize,
    /// Two slots per site: `2·site_index` (horizontal), `2·site_index + 1` (vertical).
    open: Vec<u64>,
    clocks: Option<Vec<f64>>,
}

impl OpenConfiguration {
    fn empty(params: ModelParams, seed: Option<u64>, mode: SamplingMode) -> Result<Self> {
        let radius = params.window_radius();
        let side = 2 * u64::from(radius) + 1;
        if side * side > MAX_MATERIALIZED_SITES {
            return Err(Error::Capacity {
                radius: radius.into(),
                limit: ((MAX_MATERIALIZED_SITES as f64).sqrt() as u64 - 1) / 2,
            });
        }
        let side = side as usize;
        let words = (2 * side * side).div_ceil(64);
        Ok(OpenConfiguration {
            params,
            seed,
            mode,
            side,
            open: vec![0; words],
            clocks: None,
        })
    }

    /// A hand-built configuration (no seed provenance).
    pub fn from_fn(params: ModelParams, open: impl Fn(EdgeId) -> bool) -> Result<Self> {
        let mut config = OpenConfiguration::empty(params, None, SamplingMode::FixedTime)?;
        for edge in config.edges().collect::<Vec<_>>() {
            if open(edge) {
                config.set_open(edge, true);
            }
        }
        Ok(config)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn site_count(&self) -> usize {
        self.side * self.side
    }

    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn site_index(&self, site: Site) -> usize {
        let r = self.params.window_radius() as i32;
        (site.y + r) as usize * self.side + (site.x + r) as usize
    }

    #[inline]
    pub fn site_at(&self, index: usize) -> Site {
        let r = self.params.window_radius() as i32;
        Site::new((index % self.side) as i32 - r, (index / self.side) as i32 - r)
    }

    #[inline]
    fn slot(&self, edge: EdgeId) -> usize {
        let base = 2 * self.site_index(edge.site);
        match edge.direction {
            Direction::Horizontal => base,
            Direction::Vertical => base + 1,
        }
    }

    pub fn set_open(&mut self, edge: EdgeId, open: bool) {
        assert!(edge.in_window(self.params.window_radius()), "{edge:?} outside window");
        let slot = self.slot(edge);
        if open {
            self.open[slot / 64] |= 1 << (slot % 64);
        } else {
            self.open[slot / 64] &= !(1 << (slot % 64));
        }
    }

    /// Clock mark of an edge (coupled-clock configurations only).
    pub fn clock(&self, edge: EdgeId) -> Option<f64> {
        self.clocks.as_ref().map(|c| c[self.slot(edge)])
    }

    /// Every edge with both endpoints inside the window.
    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        let radius = self.params.window_radius();
        (0..2 * self.site_count()).filter_map(move |slot| slot_edge(slot, self.side, radius))
    }

    pub fn edge_count(&self) -> usize {
        let r = self.params.window_radius() as usize;
        2 * (2 * r) * (2 * r + 1)
    }

    pub fn open_edge_count(&self) -> usize {
        self.open.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn open_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges().filter(|&e| self.is_open(e))
    }
}

impl BondField for OpenConfiguration {
    fn window_radius(&self) -> u32 {
        self.params.window_radius()
    }

    #[inline]
    fn is_open(&self, edge: EdgeId) -> bool {
        let slot = self.slot(edge);
        self.open[slot / 64] >> (slot % 64) & 1 == 1
    }
}

/// Sample every edge of the window independently with probability ρ.
pub fn sample_configuration(
    params: ModelParams,
    seed: u64,
    mode: SamplingMode,
) -> Result<OpenConfiguration> {
    LazyConfiguration::new(params, seed, mode)?.materialize()
}

/// Run configuration accepted as JSON or as `key = value` lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    #[serde(alias = "time")]
    pub t: f64,
    #[serde(default)]
    pub window_radius: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SamplingMode,
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        let mut map = serde_json::Map::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                invalid("config", format!("line {}: expected key=value", lineno + 1))
            })?;
            let value = value.trim();
            let json = if let Ok(v) = value.parse::<u64>() {
                serde_json::Value::from(v)
            } else if let Ok(v) = value.parse::<f64>() {
                serde_json::Value::from(v)
            } else {
                serde_json::Value::from(value)
            };
            map.insert(key.trim().to_string(), json);
        }
        Ok(serde_json::from_value(serde_json::Value::Object(map))?)
    }

    /// Model parameters, with the default window when none is given.
    pub fn params(&self, epsilon: f64) -> Result<ModelParams> {
        match self.window_radius {
            Some(r) => ModelParams::new(self.alpha, self.t, r),
            None => ModelParams::with_default_window(self.alpha, self.t, epsilon),
        }
    }
}
