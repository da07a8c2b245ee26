//! Gradient-percolation fronts and their scaling exponents.
//!
//! A strip `[0, ℓ) × [0, N]`, periodic in x, has edges open with a probability
//! that falls from 1 at the bottom to 0 or near 0 at the top. The cluster of
//! the bottom row (kept open) has a front: the cluster sites that touch a
//! dual face reachable from above the strip. A face may be entered across
//! any edge except an open edge of the cluster, so the reachable faces are
//! the dual cluster of the top boundary and the front is the full hull.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::cluster::{flood, SiteBitmap, Visited};
use crate::error::{invalid, Error, Result};
use crate::lattice::{characteristic_radius, BondField, EdgeId, ModelParams, Site, P_C};
use crate::rng::{probability_threshold, StreamKey};
use crate::stats::{linear_fit, mean};

/// `erfc(ERFC_MEDIAN) = 1/2`.
pub const ERFC_MEDIAN: f64 = 0.476_936_276_204_469_9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientProfile {
    /// `p(y) = 1 - y/N`
    Linear,
    /// `p(y) = erfc(y / (2√τ))` with `√τ = N / (4·ERFC_MEDIAN)`, so `p(N/2) = 1/2`.
    Erf,
    /// `p(y) = f(2y/N)` with `f(u) = 1 - exp(-u^(-α) ln 2)`, the radial
    /// profile of the Poisson model seen along an axis, with `f(1) = 1/2` at mid-strip.
    PoissonRadial { alpha: f64 },
}

impl GradientProfile {
    /// Open probability at height `y` in a strip of height `n`.
    pub fn probability(&self, y: f64, n: f64) -> f64 {
        let p = match *self {
            GradientProfile::Linear => 1.0 - y / n,
            GradientProfile::Erf => {
                let sqrt_tau = n / (4.0 * ERFC_MEDIAN);
                libm::erfc(y / (2.0 * sqrt_tau))
            }
            GradientProfile::PoissonRadial { alpha } => radial_profile(alpha, 2.0 * y / n),
        };
        p.clamp(0.0, 1.0)
    }
}

/// `f(u) = 1 - exp(-u^(-α) ln 2)`, with `f(0) = 1`.
pub fn radial_profile(alpha: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    -(-u.powf(-alpha) * std::f64::consts::LN_2).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientStripParams {
    /// Height N.
    pub n: u32,
    /// Length ℓ_N.
    pub length: u32,
    pub profile: GradientProfile,
    pub seed: u64,
}

impl GradientStripParams {
    pub fn new(n: u32, length: u32, profile: GradientProfile, seed: u64) -> Result<Self> {
        if n < 32 {
            return Err(invalid("N", format!("must be at least 32, got {n}")));
        }
        if length < n {
            return Err(invalid("length", format!("must be at least N = {n}, got {length}")));
        }
        if let GradientProfile::PoissonRadial { alpha } = profile {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(invalid("alpha", "must be positive"));
            }
        }
        Ok(GradientStripParams {
            n,
            length,
            profile,
            seed,
        })
    }
}

/// Bond configuration of a periodic strip. Site `(x, y)` has `0 ≤ x < ℓ`,
/// `0 ≤ y ≤ N`; the horizontal edge at `(x, y)` joins it to `(x+1 mod ℓ, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StripConfiguration {
    params: GradientStripParams,
    width: usize,
    height: usize,
    open: Vec<bool>,
}

impl StripConfiguration {
    /// Hand-built strip; the bottom row is forced open.
    pub fn from_fn(params: GradientStripParams, open: impl Fn(EdgeId) -> bool) -> Self {
        let width = params.length as usize;
        let height = params.n as usize + 1;
        let mut cfg = StripConfiguration {
            params,
            width,
            height,
            open: vec![false; 2 * width * height],
        };
        for y in 0..height as i32 {
            for x in 0..width as i32 {
                let h = EdgeId::horizontal(x, y);
                let hs = cfg.slot(h);
                cfg.open[hs] = y == 0 || open(h);
                if y + 1 < height as i32 {
                    let v = EdgeId::vertical(x, y);
                    let vs = cfg.slot(v);
                    cfg.open[vs] = open(v);
                }
            }
        }
        cfg
    }

    pub fn params(&self) -> &GradientStripParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn slot(&self, e: EdgeId) -> usize {
        let base = 2 * (e.site.y as usize * self.width + e.site.x as usize);
        match e.direction {
            crate::lattice::Direction::Horizontal => base,
            crate::lattice::Direction::Vertical => base + 1,
        }
    }

    /// Open state; `x` is taken modulo ℓ.
    #[inline]
    pub fn is_open(&self, e: EdgeId) -> bool {
        let x = e.site.x.rem_euclid(self.width as i32);
        let y = e.site.y;
        if y < 0 || y as usize >= self.height {
            return false;
        }
        if e.direction == crate::lattice::Direction::Vertical && y as usize + 1 >= self.height {
            return false;
        }
        self.open[self.slot(EdgeId { site: Site::new(x, y), ..e })]
    }

    /// The same strip translated right by `dx`.
    pub fn translated(&self, dx: i32) -> Self {
        StripConfiguration::from_fn(self.params, |e| {
            self.is_open(EdgeId { site: e.site.offset(-dx, 0), ..e })
        })
    }
}

/// Sample a strip with edge probabilities from the profile at each edge
/// midpoint height; the bottom row is open.
pub fn simulate_strip(params: GradientStripParams) -> StripConfiguration {
    let n = f64::from(params.n);
    let thresholds: Vec<u64> = (0..=2 * params.n)
        .map(|d| probability_threshold(params.profile.probability(f64::from(d) / 2.0, n)))
        .collect();
    let key = StreamKey::new(params.seed)
        .tag("gradient-strip")
        .child(u64::from(params.n))
        .child(u64::from(params.length));
    let width = params.length as usize;
    StripConfiguration::from_fn(params, |e| {
        let counter = 2 * (e.site.y as u64 * width as u64 + e.site.x as u64)
            + u64::from(e.direction == crate::lattice::Direction::Vertical);
        let doubled_y = 2 * e.site.y as usize + usize::from(e.direction == crate::lattice::Direction::Vertical);
        key.unit_bits(counter) < thresholds[doubled_y]
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSample {
    /// N: strip height, or the radius the front is measured from.
    pub n: f64,
    /// Reference length: ℓ_N for strips.
    pub length_scale: f64,
    /// Sorted by (x, y).
    pub front_sites: Vec<Site>,
    /// RMS deviation of the front from the reference line.
    pub width: f64,
    pub max_deviation: f64,
    pub mean_height: f64,
    /// Number of front sites.
    pub length: u64,
}

impl FrontSample {
    fn from_deviations(n: f64, length_scale: f64, mut sites: Vec<Site>, deviation: impl Fn(Site) -> f64, height: impl Fn(Site) -> f64) -> Self {
        sites.sort_by_key(|s| (s.x, s.y));
        let devs: Vec<f64> = sites.iter().map(|&s| deviation(s)).collect();
        let heights: Vec<f64> = sites.iter().map(|&s| height(s)).collect();
        let width = (devs.iter().map(|d| d * d).sum::<f64>() / devs.len().max(1) as f64).sqrt();
        FrontSample {
            n,
            length_scale,
            width,
            max_deviation: devs.iter().map(|d| d.abs()).fold(0.0, f64::max),
            mean_height: if heights.is_empty() { f64::NAN } else { mean(&heights) },
            length: sites.len() as u64,
            front_sites: sites,
        }
    }

    /// Rows `x,front_height`, one per front site.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,front_height")?;
        for s in &self.front_sites {
            writeln!(out, "{},{}", s.x, s.y)?;
        }
        Ok(())
    }
}

/// Sites of the cluster attached to the bottom row.
pub fn bottom_cluster(strip: &StripConfiguration) -> Vec<bool> {
    let (w, h) = (strip.width, strip.height);
    let mut inside = vec![false; w * h];
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    inside[..w].fill(true);
    queue.extend((0..w).map(|x| (x, 0)));
    while let Some((x, y)) = queue.pop_front() {
        let xi = x as i32;
        let yi = y as i32;
        let left = (x + w - 1) % w;
        let right = (x + 1) % w;
        let moves = [
            (right, y, strip.is_open(EdgeId::horizontal(xi, yi))),
            (left, y, strip.is_open(EdgeId::horizontal(left as i32, yi))),
            (x, y + 1, y + 1 < h && strip.is_open(EdgeId::vertical(xi, yi))),
            (x, y.wrapping_sub(1), y > 0 && strip.is_open(EdgeId::vertical(xi, yi - 1))),
        ];
        for (nx, ny, open) in moves {
            if open && !inside[ny * w + nx] {
                inside[ny * w + nx] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    inside
}

/// Front of the bottom-attached cluster.
pub fn extract_front(strip: &StripConfiguration) -> Result<FrontSample> {
    let (w, h) = (strip.width, strip.height);
    let n = h - 1;
    let inside = bottom_cluster(strip);
    if !(0..w).all(|x| inside[x]) {
        return Err(Error::NoCrossing);
    }
    let member = |x: usize, y: usize| inside[y * w + x];
    // Face (x, v) has corners (x, v), (x+1, v), (x, v+1), (x+1, v+1); v = N lies above the strip.
    let wall_h = |x: usize, y: usize| strip.is_open(EdgeId::horizontal(x as i32, y as i32)) && member(x, y);
    let wall_v = |x: usize, y: usize| strip.is_open(EdgeId::vertical(x as i32, y as i32)) && member(x, y);
    let mut reached = vec![false; w * (n + 1)];
    let mut queue = VecDeque::new();
    for x in 0..w {
        reached[n * w + x] = true;
        queue.push_back((x, n));
    }
    while let Some((x, v)) = queue.pop_front() {
        let right = (x + 1) % w;
        let left = (x + w - 1) % w;
        let mut moves: [Option<(usize, usize)>; 4] = [None; 4];
        if v > 0 && !wall_h(x, v) {
            moves[0] = Some((x, v - 1));
        }
        if v < n {
            if !wall_h(x, v + 1) {
                moves[1] = Some((x, v + 1));
            }
            if !wall_v(right, v) {
                moves[2] = Some((right, v));
            }
            if !wall_v(x, v) {
                moves[3] = Some((left, v));
            }
        }
        for (fx, fv) in moves.into_iter().flatten() {
            if !reached[fv * w + fx] {
                reached[fv * w + fx] = true;
                queue.push_back((fx, fv));
            }
        }
    }
    let mut front = vec![false; w * h];
    for v in 0..=n {
        for x in 0..w {
            if !reached[v * w + x] {
                continue;
            }
            for (cx, cy) in [(x, v), ((x + 1) % w, v), (x, v + 1), ((x + 1) % w, v + 1)] {
                if cy <= n && member(cx, cy) {
                    front[cy * w + cx] = true;
                }
            }
        }
    }
    let sites: Vec<Site> = (0..w * h)
        .filter(|&i| front[i])
        .map(|i| Site::new((i % w) as i32, (i / w) as i32))
        .collect();
    let half = n as f64 / 2.0;
    Ok(FrontSample::from_deviations(
        n as f64,
        f64::from(strip.params.length),
        sites,
        |s| f64::from(s.y) - half,
        |s| f64::from(s.y),
    ))
}

/// Half-angle, in degrees, of the sectors around the diagonals left out of
/// radial fronts.
pub const DIAGONAL_EXCLUSION_DEG: f64 = 10.0;

fn near_diagonal(s: Site) -> bool {
    let angle = f64::from(s.y.unsigned_abs()).atan2(f64::from(s.x.unsigned_abs())).to_degrees();
    (angle - 45.0).abs() < DIAGONAL_EXCLUSION_DEG
}

/// Front of 𝒞₀ seen from outside the window, measured from `‖x‖∞ = N` with
/// `N = n(p_c, t)`. Sites within the diagonal sectors are left out.
pub fn radial_front<F: BondField + ?Sized>(field: &F, params: &ModelParams) -> Result<FrontSample> {
    let m = field.window_radius();
    let big_n = characteristic_radius(P_C, params)?.value;
    let mut cluster = SiteBitmap::new(m);
    let mut escaped = false;
    flood(field, [Site::ORIGIN], &mut cluster, |_| true, |s| {
        if s.norm() >= m {
            escaped = true;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    if escaped {
        return Err(Error::WindowTooSmall {
            window: m,
            required: f64::from(m) + 1.0,
        });
    }
    let mi = m as i32;
    let member = |s: Site| s.norm() <= m && cluster.contains(s);
    // Faces are named by their lower-left corner, in [-m-1, m]².
    let wall = |e: EdgeId| member(e.site) && field.is_open(e);
    let mut faces = SiteBitmap::new(m + 1);
    let mut queue = VecDeque::new();
    for k in -mi - 1..=mi {
        for f in [Site::new(k, -mi - 1), Site::new(k, mi), Site::new(-mi - 1, k), Site::new(mi, k)] {
            if faces.insert(f) {
                queue.push_back(f);
            }
        }
    }
    let inner = |f: Site| f.x >= -mi - 1 && f.x <= mi && f.y >= -mi - 1 && f.y <= mi;
    let mut front: BTreeMap<Site, ()> = BTreeMap::new();
    while let Some(f) = queue.pop_front() {
        for c in [f, f.offset(1, 0), f.offset(0, 1), f.offset(1, 1)] {
            if member(c) {
                front.insert(c, ());
            }
        }
        let moves = [
            (f.offset(0, -1), EdgeId::horizontal(f.x, f.y)),
            (f.offset(0, 1), EdgeId::horizontal(f.x, f.y + 1)),
            (f.offset(-1, 0), EdgeId::vertical(f.x, f.y)),
            (f.offset(1, 0), EdgeId::vertical(f.x + 1, f.y)),
        ];
        for (g, e) in moves {
            if inner(g) && !faces.contains(g) && !wall(e) {
                faces.insert(g);
                queue.push_back(g);
            }
        }
    }
    let sites: Vec<Site> = front.into_keys().filter(|&s| !near_diagonal(s)).collect();
    Ok(FrontSample::from_deviations(
        big_n,
        8.0 * big_n,
        sites,
        |s| f64::from(s.norm()) - big_n,
        |s| f64::from(s.norm()),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub n_values: Vec<f64>,
    /// Mean of the measured quantity per N (width, or length / ℓ_N).
    pub means: Vec<f64>,
    pub slope: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub replicates: Vec<usize>,
}

fn power_fit(n_values: Vec<f64>, means: Vec<f64>, replicates: Vec<usize>) -> Result<ExponentFit> {
    if means.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::FitFailure("non-positive mean in a power-law fit".into()));
    }
    let xs: Vec<f64> = n_values.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::FitFailure("degenerate N values".into()))?;
    Ok(ExponentFit {
        n_values,
        means,
        slope: fit.slope,
        slope_se: fit.slope_se,
        r_squared: fit.r_squared,
        replicates,
    })
}

pub const MIN_FIT_GROUPS: usize = 4;
pub const MIN_FIT_REPLICATES: usize = 10;

/// Slopes of `log mean width` and `log (mean length / ℓ_N)` against `log N`.
pub fn fit_exponents(samples: &[FrontSample]) -> Result<(ExponentFit, ExponentFit)> {
    let mut groups: BTreeMap<u64, Vec<&FrontSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.n.to_bits()).or_default().push(s);
    }
    if groups.len() < MIN_FIT_GROUPS {
        return Err(Error::InsufficientData(format!(
            "{} distinct N values, need at least {MIN_FIT_GROUPS}",
            groups.len()
        )));
    }
    let mut keyed: Vec<(f64, Vec<&FrontSample>)> =
        groups.into_iter().map(|(k, v)| (f64::from_bits(k), v)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((n, g)) = keyed.iter().find(|(_, g)| g.len() < MIN_FIT_REPLICATES) {
        return Err(Error::InsufficientData(format!(
            "N = {n} has {} replicates, need at least {MIN_FIT_REPLICATES}",
            g.len()
        )));
    }
    let n_values: Vec<f64> = keyed.iter().map(|(n, _)| *n).collect();
    let replicates: Vec<usize> = keyed.iter().map(|(_, g)| g.len()).collect();
    let widths: Vec<f64> = keyed
        .iter()
        .map(|(_, g)| mean(&g.iter().map(|s| s.width).collect::<Vec<_>>()))
        .collect();
    let lengths: Vec<f64> = keyed
        .iter()
        .map(|(_, g)| mean(&g.iter().map(|s| s.length as f64 / s.length_scale).collect::<Vec<_>>()))
        .collect();
    Ok((
        power_fit(n_values.clone(), widths, replicates.clone())?,
        power_fit(n_values, lengths, replicates)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, len: u32) -> GradientStripParams {
        GradientStripParams::new(n, len, GradientProfile::Linear, 1).unwrap()
    }

    #[test]
    fn linear_profile_values() {
        let p = GradientProfile::Linear;
        assert_eq!(p.probability(0.0, 64.0), 1.0);
        assert_eq!(p.probability(64.0, 64.0), 0.0);
        assert_eq!(p.probability(32.0, 64.0), 0.5);
    }

    #[test]
    fn erf_and_radial_profiles_cross_half_mid_strip() {
        assert!((GradientProfile::Erf.probability(32.0, 64.0) - 0.5).abs() < 1e-12);
        assert!((GradientProfile::Erf.probability(0.0, 64.0) - 1.0).abs() < 1e-15);
        for alpha in [0.5, 1.0, 2.0] {
            assert!((radial_profile(alpha, 1.0) - 0.5).abs() < 1e-15);
            let p = GradientProfile::PoissonRadial { alpha };
            assert!((p.probability(32.0, 64.0) - 0.5).abs() < 1e-15);
            assert_eq!(p.probability(0.0, 64.0), 1.0);
            assert!(p.probability(10.0, 64.0) > p.probability(50.0, 64.0));
        }
    }

    #[test]
    fn rejects_small_strips() {
        assert!(GradientStripParams::new(16, 64, GradientProfile::Linear, 0).is_err());
        assert!(GradientStripParams::new(64, 32, GradientProfile::Linear, 0).is_err());
    }

    #[test]
    fn saturated_front_is_top_row() {
        let strip = StripConfiguration::from_fn(params(32, 64), |_| true);
        let f = extract_front(&strip).unwrap();
        assert_eq!(f.length, 64);
        assert!(f.front_sites.iter().all(|s| s.y == 32));
        assert_eq!(f.width, 16.0);
    }

    #[test]
    fn empty_front_is_bottom_row() {
        let strip = StripConfiguration::from_fn(params(32, 64), |_| false);
        let f = extract_front(&strip).unwrap();
        assert_eq!(f.length, 64);
        assert!(f.front_sites.iter().all(|s| s.y == 0));
        assert_eq!(f.width, 16.0);
    }

    #[test]
    fn translation_invariance() {
        let strip = simulate_strip(params(40, 80));
        let a = extract_front(&strip).unwrap();
        let b = extract_front(&strip.translated(17)).unwrap();
        assert_eq!(a.length, b.length);
        assert!((a.width - b.width).abs() < 1e-9);
    }

    #[test]
    fn synthetic_power_laws() {
        let mut samples = Vec::new();
        for n in [64.0f64, 128.0, 256.0, 512.0] {
            for _ in 0..10 {
                let ell = 4.0 * n;
                samples.push(FrontSample {
                    n,
                    length_scale: ell,
                    front_sites: vec![],
                    width: n.powf(0.571),
                    max_deviation: 0.0,
                    mean_height: 0.0,
                    length: (ell * n.powf(3.0 / 7.0)).round() as u64,
                });
            }
        }
        let (w, l) = fit_exponents(&samples).unwrap();
        assert!((w.slope - 0.571).abs() < 1e-6);
        assert!((l.slope - 3.0 / 7.0).abs() < 1e-3);
        assert!(fit_exponents(&samples[..30]).is_err());
    }
}
