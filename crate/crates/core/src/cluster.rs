//! Connected clusters of open edges and the origin cluster 𝒞₀(t).
//!
//! Two routes compute connectivity. [`build_clusters`] labels every site of a
//! window with a union-find pass; it is exact and the reference for small
//! windows. [`explore_cluster`] runs a breadth-first search over any
//! [`BondField`] and touches only the sites it reaches, which is what makes
//! origin clusters of 10⁸–10⁹ sites tractable on an on-the-fly configuration.

use std::collections::{HashSet, VecDeque};
use std::io::Write;
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{
    characteristic_radius, BondField, EdgeId, HomogeneousField, ModelParams, Site, P_C,
};
use crate::rng::StreamKey;
use crate::stats::linear_fit;
use crate::union_find::DisjointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: i32,
    pub x1: i32,
    pub y0: i32,
    pub y1: i32,
}

impl BoundingBox {
    pub fn point(s: Site) -> Self {
        BoundingBox {
            x0: s.x,
            x1: s.x,
            y0: s.y,
            y1: s.y,
        }
    }

    pub fn include(&mut self, s: Site) {
        self.x0 = self.x0.min(s.x);
        self.x1 = self.x1.max(s.x);
        self.y0 = self.y0.min(s.y);
        self.y1 = self.y1.max(s.y);
    }

    /// Largest L∞ distance from `s` to a point of the box.
    pub fn reach_from(&self, s: Site) -> u32 {
        let dx = (s.x - self.x0).max(self.x1 - s.x);
        let dy = (s.y - self.y0).max(self.y1 - s.y);
        dx.max(dy).max(0) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    /// Number of sites.
    pub size: u64,
    /// Largest L∞ norm of a member site.
    pub radius: u32,
    pub bounding_box: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member_sites: Option<Vec<Site>>,
}

impl ClusterStats {
    fn start(s: Site) -> Self {
        ClusterStats {
            size: 1,
            radius: s.norm(),
            bounding_box: BoundingBox::point(s),
            member_sites: None,
        }
    }

    fn add(&mut self, s: Site) {
        self.size += 1;
        self.radius = self.radius.max(s.norm());
        self.bounding_box.include(s);
    }

    pub fn from_sites(mut sites: impl Iterator<Item = Site>) -> Option<Self> {
        let mut stats = ClusterStats::start(sites.next()?);
        for s in sites {
            stats.add(s);
        }
        Some(stats)
    }
}

/// Visited-site sets for breadth-first exploration.
pub(crate) trait Visited {
    fn contains(&self, s: Site) -> bool;
    /// Mark `s`; false if it was already marked.
    fn insert(&mut self, s: Site) -> bool;
}

/// One bit per window site, stored in 8×8 tiles so that a breadth-first
/// front touches few cache lines. Backed by zeroed memory that the OS only
/// commits when written, so a huge window costs what the search touches.
pub(crate) struct SiteBitmap {
    radius: i32,
    tiles_per_row: usize,
    words: Vec<u64>,
}

impl SiteBitmap {
    pub(crate) fn new(radius: u32) -> Self {
        let side = 2 * radius as usize + 1;
        let tiles_per_row = side.div_ceil(8);
        SiteBitmap {
            radius: radius as i32,
            tiles_per_row,
            words: vec![0; tiles_per_row * tiles_per_row],
        }
    }

    #[inline]
    fn locate(&self, s: Site) -> (usize, u64) {
        let ux = (s.x + self.radius) as usize;
        let uy = (s.y + self.radius) as usize;
        let word = (uy >> 3) * self.tiles_per_row + (ux >> 3);
        (word, 1u64 << (((uy & 7) << 3) | (ux & 7)))
    }
}

impl Visited for SiteBitmap {
    #[inline]
    fn contains(&self, s: Site) -> bool {
        let (w, bit) = self.locate(s);
        self.words[w] & bit != 0
    }

    #[inline]
    fn insert(&mut self, s: Site) -> bool {
        let (w, bit) = self.locate(s);
        let fresh = self.words[w] & bit == 0;
        self.words[w] |= bit;
        fresh
    }
}

impl Visited for HashSet<Site> {
    fn contains(&self, s: Site) -> bool {
        HashSet::contains(self, &s)
    }

    fn insert(&mut self, s: Site) -> bool {
        HashSet::insert(self, s)
    }
}

#[inline]
pub(crate) fn incident(s: Site) -> [(EdgeId, Site); 4] {
    [
        (EdgeId::horizontal(s.x, s.y), s.offset(1, 0)),
        (EdgeId::horizontal(s.x - 1, s.y), s.offset(-1, 0)),
        (EdgeId::vertical(s.x, s.y), s.offset(0, 1)),
        (EdgeId::vertical(s.x, s.y - 1), s.offset(0, -1)),
    ]
}

/// Breadth-first search through open edges from `seeds`, restricted to
/// window sites accepted by `allowed`. Returns true if `visit` broke early.
pub(crate) fn flood<F, V>(
    field: &F,
    seeds: impl IntoIterator<Item = Site>,
    visited: &mut V,
    allowed: impl Fn(Site) -> bool,
    mut visit: impl FnMut(Site) -> ControlFlow<()>,
) -> bool
where
    F: BondField + ?Sized,
    V: Visited,
{
    let radius = field.window_radius();
    let mut queue = VecDeque::new();
    for s in seeds {
        if s.norm() <= radius && allowed(s) && visited.insert(s) {
            if visit(s).is_break() {
                return true;
            }
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        let nbrs = incident(s);
        // Gather the four tests as bits before branching: edge states are
        // coin flips, so per-edge branches mispredict about half the time.
        let mut mask = 0u8;
        for (k, &(edge, next)) in nbrs.iter().enumerate() {
            if next.norm() <= radius {
                let fresh = !visited.contains(next);
                mask |= u8::from(fresh & field.is_open(edge)) << k;
            }
        }
        while mask != 0 {
            let k = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            let next = nbrs[k].1;
            if !allowed(next) || !visited.insert(next) {
                continue;
            }
            if visit(next).is_break() {
                return true;
            }
            queue.push_back(next);
        }
    }
    false
}

/// Result of exploring one cluster by breadth-first search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub stats: ClusterStats,
    /// The cluster reached the window boundary, so it may continue outside.
    pub touches_window_edge: bool,
}

/// Explore the cluster of `start`, calling `on_site` once per member site.
pub fn explore_cluster<F: BondField + ?Sized>(
    field: &F,
    start: Site,
    mut on_site: impl FnMut(Site),
) -> Exploration {
    let radius = field.window_radius();
    let mut visited = SiteBitmap::new(radius);
    let mut stats: Option<ClusterStats> = None;
    flood(field, [start], &mut visited, |_| true, |s| {
        on_site(s);
        match stats.as_mut() {
            Some(st) => st.add(s),
            None => stats = Some(ClusterStats::start(s)),
        }
        ControlFlow::Continue(())
    });
    let stats = stats.expect("start site must lie in the window");
    Exploration {
        touches_window_edge: stats.radius >= radius,
        stats,
    }
}

/// Connected-cluster labels for every site of a window.
///
/// Each cluster is labelled by the smallest row-major site index among its
/// members, so labels are reproducible for a fixed configuration.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    window_radius: u32,
    side: usize,
    labels: Vec<u32>,
    /// Indexed by label; zero at indices that are not labels.
    sizes: Vec<u32>,
}

/// Union-find over every open edge of the field's window.
pub fn build_clusters<F: BondField + ?Sized>(field: &F) -> ClusterLabeling {
    let radius = field.window_radius();
    let r = radius as i32;
    let side = 2 * radius as usize + 1;
    let n = side * side;
    let mut forest = DisjointSet::new(n);
    for y in -r..=r {
        for x in -r..=r {
            let here = ((y + r) as usize * side + (x + r) as usize) as u32;
            if x < r && field.is_open(EdgeId::horizontal(x, y)) {
                forest.union(here, here + 1);
            }
            if y < r && field.is_open(EdgeId::vertical(x, y)) {
                forest.union(here, here + side as u32);
            }
        }
    }
    let mut min_of_root = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut sizes = vec![0u32; n];
    for i in 0..n as u32 {
        let root = forest.find(i) as usize;
        if min_of_root[root] == u32::MAX {
            min_of_root[root] = i;
        }
        let label = min_of_root[root];
        labels[i as usize] = label;
        sizes[label as usize] += 1;
    }
    ClusterLabeling {
        window_radius: radius,
        side,
        labels,
        sizes,
    }
}

impl ClusterLabeling {
    pub fn window_radius(&self) -> u32 {
        self.window_radius
    }

    pub fn site_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn site_index(&self, s: Site) -> usize {
        let r = self.window_radius as i32;
        (s.y + r) as usize * self.side + (s.x + r) as usize
    }

    #[inline]
    pub fn site_at(&self, index: usize) -> Site {
        let r = self.window_radius as i32;
        Site::new((index % self.side) as i32 - r, (index / self.side) as i32 - r)
    }

    #[inline]
    pub fn label(&self, s: Site) -> u32 {
        self.labels[self.site_index(s)]
    }

    pub fn origin_label(&self) -> u32 {
        self.label(Site::ORIGIN)
    }

    pub fn cluster_size(&self, label: u32) -> u32 {
        self.sizes[label as usize]
    }

    pub fn cluster_count(&self) -> usize {
        self.sizes.iter().filter(|&&s| s > 0).count()
    }

    pub fn members(&self, label: u32) -> impl Iterator<Item = Site> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == label)
            .map(|(i, _)| self.site_at(i))
    }

    pub fn stats(&self, label: u32, with_members: bool) -> ClusterStats {
        let mut stats = ClusterStats::from_sites(self.members(label))
            .expect("labels always have at least one member");
        if with_members {
            stats.member_sites = Some(self.members(label).collect());
        }
        stats
    }

    /// Bounding box of every cluster, indexed by label.
    pub fn bounding_boxes(&self) -> Vec<Option<BoundingBox>> {
        let mut boxes: Vec<Option<BoundingBox>> = vec![None; self.labels.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            let s = self.site_at(i);
            match &mut boxes[l as usize] {
                Some(b) => b.include(s),
                slot @ None => *slot = Some(BoundingBox::point(s)),
            }
        }
        boxes
    }

    /// CSV rows `x,y,cluster` for every site (or only the origin cluster).
    pub fn write_csv<W: Write>(&self, mut out: W, origin_only: bool) -> std::io::Result<()> {
        writeln!(out, "x,y,cluster")?;
        let origin = self.origin_label();
        for (i, &l) in self.labels.iter().enumerate() {
            if origin_only && l != origin {
                continue;
            }
            let s = self.site_at(i);
            writeln!(out, "{},{},{}", s.x, s.y, l)?;
        }
        Ok(())
    }
}

/// Statistics of 𝒞₀ from a full labeling.
pub fn origin_cluster(labeling: &ClusterLabeling) -> ClusterStats {
    labeling.stats(labeling.origin_label(), false)
}

/// Whether 𝒞₀ stays inside `R(0, n(p_c - ε, t))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub epsilon: f64,
    /// n(p_c - ε, t)
    pub n_minus: f64,
    pub contained: bool,
    /// Largest site norm in 𝒞₀. When `escape_norm_exact` is false this is
    /// only a bound: `⌊n_minus⌋` from above if contained, `⌊n_minus⌋ + 1`
    /// from below otherwise.
    pub escape_norm: u32,
    pub escape_norm_exact: bool,
}

fn subcritical_radius(epsilon: f64, params: &ModelParams) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < P_C) {
        return Err(invalid("epsilon", format!("must lie in (0, 1/2), got {epsilon}")));
    }
    Ok(characteristic_radius(P_C - epsilon, params)?.value)
}

/// Containment event from the exact statistics of 𝒞₀.
pub fn containment_check(
    stats: &ClusterStats,
    epsilon: f64,
    params: &ModelParams,
) -> Result<ContainmentReport> {
    let n_minus = subcritical_radius(epsilon, params)?;
    if f64::from(params.window_radius()) <= n_minus {
        return Err(Error::WindowTooSmall {
            window: params.window_radius(),
            required: n_minus,
        });
    }
    Ok(ContainmentReport {
        epsilon,
        n_minus,
        contained: f64::from(stats.radius) <= n_minus,
        escape_norm: stats.radius,
        escape_norm_exact: true,
    })
}

/// Containment decided from outside in, without exploring 𝒞₀.
///
/// 𝒞₀ leaves `R(0, ⌊n_minus⌋)` iff the origin is joined to the ring of norm
/// `K = ⌊n_minus⌋ + 1` by a path inside `R(0, K)`. The search therefore starts
/// from that ring, where edges are subcritical, and stops at the origin; it
/// only visits the small clusters hanging off the ring.
pub fn certify_containment<F: BondField + ?Sized>(
    field: &F,
    epsilon: f64,
    params: &ModelParams,
) -> Result<ContainmentReport> {
    let n_minus = subcritical_radius(epsilon, params)?;
    let inner = n_minus.floor() as u32;
    let ring = inner + 1;
    if field.window_radius() < ring {
        return Err(Error::WindowTooSmall {
            window: field.window_radius(),
            required: n_minus,
        });
    }
    let mut visited = HashSet::new();
    let reached_origin = flood(
        field,
        ring_sites(ring),
        &mut visited,
        |s| s.norm() <= ring,
        |s| {
            if s == Site::ORIGIN {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    );
    Ok(ContainmentReport {
        epsilon,
        n_minus,
        contained: !reached_origin,
        escape_norm: if reached_origin { ring } else { inner },
        escape_norm_exact: false,
    })
}

/// All sites of L∞ norm exactly `r`.
pub fn ring_sites(r: u32) -> impl Iterator<Item = Site> {
    let r = r as i32;
    let top = (-r..=r).flat_map(move |x| [Site::new(x, r), Site::new(x, -r)]);
    let sides = (-r + 1..r).flat_map(move |y| [Site::new(r, y), Site::new(-r, y)]);
    let all: Box<dyn Iterator<Item = Site>> = if r == 0 {
        Box::new(std::iter::once(Site::ORIGIN))
    } else {
        Box::new(top.chain(sides))
    };
    all
}

/// Event `B_N`: an open path from `∂R(0, inner)` to `∂R(0, outer)` inside the annulus.
pub fn annulus_crossing<F: BondField + ?Sized>(field: &F, inner: u32, outer: u32) -> Result<bool> {
    if outer < inner {
        return Err(invalid("outer", "must be at least the inner radius"));
    }
    if field.window_radius() < outer {
        return Err(Error::WindowTooSmall {
            window: field.window_radius(),
            required: f64::from(outer),
        });
    }
    let mut visited = HashSet::new();
    Ok(flood(
        field,
        ring_sites(inner),
        &mut visited,
        |s| s.norm() >= inner && s.norm() <= outer,
        |s| {
            if s.norm() == outer {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    ))
}

/// Empirical tail `P̂(rad(𝒞₀) ≥ k)` for homogeneous subcritical percolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusTail {
    pub p: f64,
    pub k_max: u32,
    pub replicates: u64,
    /// `exceed[k]` = number of replicates with radius ≥ k, for `k = 0..=k_max`.
    pub exceed: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFitWindow {
    pub k_min: u32,
    pub k_max: u32,
    /// Points with fewer exceedances are too noisy to fit.
    pub min_hits: u64,
}

impl Default for TailFitWindow {
    fn default() -> Self {
        TailFitWindow {
            k_min: 5,
            k_max: 30,
            min_hits: 25,
        }
    }
}

/// `log P̂(rad ≥ k) ≈ intercept - gamma·k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma: f64,
    pub gamma_se: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub k_min: u32,
    pub k_max: u32,
}

impl RadiusTail {
    pub fn probability(&self, k: u32) -> f64 {
        self.exceed[k as usize] as f64 / self.replicates as f64
    }

    pub fn fit_decay(&self, window: TailFitWindow) -> Result<DecayFit> {
        let hi = window.k_max.min(self.k_max);
        let ks: Vec<u32> = (window.k_min..=hi)
            .filter(|&k| self.exceed[k as usize] >= window.min_hits)
            .collect();
        if ks.len() < 3 {
            return Err(Error::FitFailure(format!(
                "only {} tail points with at least {} hits in [{}, {}]",
                ks.len(),
                window.min_hits,
                window.k_min,
                hi
            )));
        }
        let xs: Vec<f64> = ks.iter().map(|&k| f64::from(k)).collect();
        let ys: Vec<f64> = ks.iter().map(|&k| self.probability(k).ln()).collect();
        let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::FitFailure("degenerate".into()))?;
        if fit.slope >= 0.0 {
            return Err(Error::FitFailure(format!("tail does not decay (slope {})", fit.slope)));
        }
        Ok(DecayFit {
            gamma: -fit.slope,
            gamma_se: fit.slope_se,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            k_min: ks[0],
            k_max: *ks.last().unwrap(),
        })
    }
}

/// Radius of the origin cluster in homogeneous percolation, capped at `k_max`.
pub fn origin_radius(field: &HomogeneousField) -> u32 {
    let cap = field.window_radius();
    let mut visited = SiteBitmap::new(cap);
    let mut radius = 0;
    flood(field, [Site::ORIGIN], &mut visited, |_| true, |s| {
        radius = radius.max(s.norm());
        if radius >= cap {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    radius
}

/// Tail of `rad(𝒞₀)` at homogeneous density `p < p_c`.
pub fn cluster_radius_tail(p: f64, k_max: u32, replicates: u64, seed: u64) -> Result<RadiusTail> {
    if !(0.0..P_C).contains(&p) {
        return Err(invalid("p", format!("must be subcritical, in [0, 1/2), got {p}")));
    }
    if k_max < 1 {
        return Err(invalid("k_max", "must be at least 1"));
    }
    if replicates == 0 {
        return Err(invalid("replicates", "must be at least 1"));
    }
    let key = StreamKey::new(seed).tag("radius-tail").child(p.to_bits());
    let radii: Vec<u32> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let field = HomogeneousField::new(p, key.child(r), k_max).expect("validated p");
            origin_radius(&field)
        })
        .collect();
    let mut exceed = vec![0u64; k_max as usize + 1];
    for rad in radii {
        for slot in &mut exceed[..=rad as usize] {
            *slot += 1;
        }
    }
    Ok(RadiusTail {
        p,
        k_max,
        replicates,
        exceed,
    })
}
