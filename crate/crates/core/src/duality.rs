//! The dual lattice, rectangle crossings and the net of strip crossings.
//!
//! Dual sites sit at `ℤ² + (½, ½)`. In integer labels the dual site `(i, j)`
//! stands for the point `(i + ½, j + ½)`, and each dual edge shares its
//! midpoint with exactly one primal edge. A dual edge is open iff its primal
//! partner is closed.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_radius_tail, DecayFit, TailFitWindow};
use crate::error::{invalid, Error, Result};
use crate::lattice::{characteristic_radius, BondField, Direction, EdgeId, ModelParams, P_C};

/// The primal edge crossed by the dual edge with integer label `d`.
#[inline]
pub fn dual_partner(d: EdgeId) -> EdgeId {
    let (i, j) = (d.site.x, d.site.y);
    match d.direction {
        Direction::Horizontal => EdgeId::vertical(i + 1, j),
        Direction::Vertical => EdgeId::horizontal(i, j + 1),
    }
}

/// The dual edge crossing primal edge `e`; inverse of [`dual_partner`].
#[inline]
pub fn dual_of_edge(e: EdgeId) -> EdgeId {
    let (x, y) = (e.site.x, e.site.y);
    match e.direction {
        Direction::Vertical => EdgeId::horizontal(x - 1, y),
        Direction::Horizontal => EdgeId::vertical(x, y - 1),
    }
}

/// Dual configuration of a bond field, in integer dual labels.
///
/// Its window is one unit smaller than the primal one. Applying the
/// construction twice gives back the primal field shifted by `(1, 1)`.
#[derive(Clone, Copy, Debug)]
pub struct DualConfiguration<'a, F: ?Sized> {
    primal: &'a F,
}

impl<'a, F: BondField + ?Sized> DualConfiguration<'a, F> {
    pub fn new(primal: &'a F) -> Self {
        DualConfiguration { primal }
    }

    pub fn primal(&self) -> &'a F {
        self.primal
    }
}

impl<F: BondField + ?Sized> BondField for DualConfiguration<'_, F> {
    fn window_radius(&self) -> u32 {
        self.primal.window_radius().saturating_sub(1)
    }

    #[inline]
    fn is_open(&self, edge: EdgeId) -> bool {
        !self.primal.is_open(dual_partner(edge))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingDirection {
    TopBottom,
    LeftRight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    PrimalOpen,
    DualOpen,
}

/// Integer rectangle `[x0, x1] × [y0, y1]` of primal sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rectangle {
    pub x0: i32,
    pub x1: i32,
    pub y0: i32,
    pub y1: i32,
}

impl Rectangle {
    pub fn new(x0: i32, x1: i32, y0: i32, y1: i32) -> Result<Self> {
        if x0 > x1 || y0 > y1 {
            return Err(invalid("rect", format!("empty rectangle [{x0},{x1}]×[{y0},{y1}]")));
        }
        Ok(Rectangle { x0, x1, y0, y1 })
    }

    /// `[-r, r]²`
    pub fn centered(r: i32) -> Self {
        Rectangle {
            x0: -r,
            x1: r,
            y0: -r,
            y1: r,
        }
    }

    pub fn width_sites(&self) -> u32 {
        (self.x1 - self.x0) as u32 + 1
    }

    pub fn height_sites(&self) -> u32 {
        (self.y1 - self.y0) as u32 + 1
    }

    pub fn max_norm(&self) -> u32 {
        [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap()
    }

    /// Edges whose state can affect a top-bottom primal crossing: every
    /// vertical edge and the horizontal edges of rows strictly inside.
    pub fn top_bottom_edges(&self) -> Vec<EdgeId> {
        let mut edges = Vec::new();
        for y in self.y0..self.y1 {
            for x in self.x0..=self.x1 {
                edges.push(EdgeId::vertical(x, y));
            }
        }
        for y in self.y0 + 1..self.y1 {
            for x in self.x0..self.x1 {
                edges.push(EdgeId::horizontal(x, y));
            }
        }
        edges
    }

    fn check_window(&self, window: u32) -> Result<()> {
        if self.max_norm() > window {
            return Err(Error::RectOutsideWindow {
                x0: self.x0,
                x1: self.x1,
                y0: self.y0,
                y1: self.y1,
                window,
            });
        }
        Ok(())
    }
}

/// Crossing of a `w × h` node grid. Top-bottom joins row `h-1` to row 0,
/// left-right joins column 0 to column `w-1`. `right(i, j)` is the edge
/// `(i,j)-(i+1,j)`, `up(i, j)` the edge `(i,j)-(i,j+1)`.
fn grid_crossing(
    w: usize,
    h: usize,
    direction: CrossingDirection,
    right: impl Fn(usize, usize) -> bool,
    up: impl Fn(usize, usize) -> bool,
) -> bool {
    if w == 0 || h == 0 {
        return false;
    }
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    type Goal = Box<dyn Fn(usize, usize) -> bool>;
    let (starts, done): (Vec<(usize, usize)>, Goal) = match direction {
        CrossingDirection::TopBottom => ((0..w).map(|i| (i, h - 1)).collect(), Box::new(|_, j| j == 0)),
        CrossingDirection::LeftRight => ((0..h).map(|j| (0, j)).collect(), Box::new(move |i, _| i == w - 1)),
    };
    for (i, j) in starts {
        if done(i, j) {
            return true;
        }
        seen[j * w + i] = true;
        queue.push_back((i, j));
    }
    while let Some((i, j)) = queue.pop_front() {
        let mut step = |ni: usize, nj: usize, open: bool| -> bool {
            if open && !seen[nj * w + ni] {
                seen[nj * w + ni] = true;
                if done(ni, nj) {
                    return true;
                }
                queue.push_back((ni, nj));
            }
            false
        };
        if i + 1 < w && step(i + 1, j, right(i, j)) {
            return true;
        }
        if i > 0 && step(i - 1, j, right(i - 1, j)) {
            return true;
        }
        if j + 1 < h && step(i, j + 1, up(i, j)) {
            return true;
        }
        if j > 0 && step(i, j - 1, up(i, j - 1)) {
            return true;
        }
    }
    false
}

/// Crossing of `rect` in the requested direction by the requested edge kind.
///
/// For [`EdgeKind::PrimalOpen`] the path uses open primal edges with both
/// endpoints in `rect`. For [`EdgeKind::DualOpen`] the rectangle is the dual
/// rectangle paired with `rect` for the opposite primal crossing:
/// left-right uses `[x0-½, x1+½] × [y0+½, y1-½]` and top-bottom uses
/// `[x0+½, x1-½] × [y0-½, y1+½]`. Dual edges that only run along the two
/// sides being joined are omitted; they cannot change the answer. With these
/// rectangles, a primal top-bottom crossing exists iff no dual left-right
/// crossing does, and likewise with the directions swapped.
pub fn has_crossing<F: BondField + ?Sized>(
    field: &F,
    rect: Rectangle,
    direction: CrossingDirection,
    which: EdgeKind,
) -> Result<bool> {
    rect.check_window(field.window_radius())?;
    let Rectangle { x0, x1, y0, y1 } = rect;
    let crossed = match which {
        EdgeKind::PrimalOpen => {
            let w = (x1 - x0 + 1) as usize;
            let h = (y1 - y0 + 1) as usize;
            grid_crossing(
                w,
                h,
                direction,
                |i, j| field.is_open(EdgeId::horizontal(x0 + i as i32, y0 + j as i32)),
                |i, j| field.is_open(EdgeId::vertical(x0 + i as i32, y0 + j as i32)),
            )
        }
        EdgeKind::DualOpen => match direction {
            CrossingDirection::LeftRight => {
                // Node (i, j) is the dual point (x0 - 1 + i + ½, y0 + j + ½).
                let w = (x1 - x0 + 2) as usize;
                let h = (y1 - y0) as usize;
                grid_crossing(
                    w,
                    h,
                    direction,
                    |i, j| !field.is_open(EdgeId::vertical(x0 + i as i32, y0 + j as i32)),
                    |i, j| {
                        i > 0
                            && i + 1 < w
                            && !field.is_open(EdgeId::horizontal(x0 - 1 + i as i32, y0 + j as i32 + 1))
                    },
                )
            }
            CrossingDirection::TopBottom => {
                // Node (i, j) is the dual point (x0 + i + ½, y0 - 1 + j + ½).
                let w = (x1 - x0) as usize;
                let h = (y1 - y0 + 2) as usize;
                grid_crossing(
                    w,
                    h,
                    direction,
                    |i, j| {
                        j > 0
                            && j + 1 < h
                            && !field.is_open(EdgeId::vertical(x0 + i as i32 + 1, y0 - 1 + j as i32))
                    },
                    |i, j| !field.is_open(EdgeId::horizontal(x0 + i as i32, y0 + j as i32)),
                )
            }
        },
    };
    Ok(crossed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripAxis {
    /// `R_j`, crossed top to bottom.
    Vertical,
    /// `R^j`, crossed left to right.
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripCrossing {
    pub j: i32,
    pub axis: StripAxis,
    pub crossed: bool,
}

/// Strip geometry for mesh coefficient `C₁` at scale `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripLayout {
    #[serde(rename = "C1")]
    pub c1: f64,
    pub n: f64,
    /// `C₁·ln n`
    pub width: f64,
    /// Inclusive index range `I_n = [-⌈n/w⌉ - 1, ⌈n/w⌉]`.
    pub j_min: i32,
    pub j_max: i32,
}

impl StripLayout {
    pub fn new(c1: f64, n: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(invalid("C1", format!("must be positive and finite, got {c1}")));
        }
        if !(n > 1.0 && n.is_finite()) {
            return Err(invalid("n", format!("must exceed 1, got {n}")));
        }
        let width = c1 * n.ln();
        if width < 1.0 {
            return Err(invalid("C1", format!("strip width {width} is below one lattice unit")));
        }
        let k = (n / width).ceil() as i32;
        Ok(StripLayout {
            c1,
            n,
            width,
            j_min: -k - 1,
            j_max: k,
        })
    }

    pub fn strip_count(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    /// Long side `[-⌊n⌋, ⌊n⌋]` and short side `[⌊jw⌋, ⌊(j+1)w⌋]`.
    fn spans(&self, j: i32) -> ((i32, i32), (i32, i32)) {
        let m = self.n.floor() as i32;
        let lo = (f64::from(j) * self.width).floor() as i32;
        let hi = (f64::from(j + 1) * self.width).floor() as i32;
        ((lo, hi), (-m, m))
    }

    /// `R_j`
    pub fn vertical_strip(&self, j: i32) -> Rectangle {
        let ((x0, x1), (y0, y1)) = self.spans(j);
        Rectangle { x0, x1, y0, y1 }
    }

    /// `R^j`
    pub fn horizontal_strip(&self, j: i32) -> Rectangle {
        let ((y0, y1), (x0, x1)) = self.spans(j);
        Rectangle { x0, x1, y0, y1 }
    }

    /// Half side of the central box `[-C₁ ln n, C₁ ln n]²`, in whole sites.
    pub fn central_half_side(&self) -> i32 {
        self.width.floor() as i32
    }

    /// Window radius needed to evaluate every strip.
    pub fn required_radius(&self) -> u32 {
        let a = self.vertical_strip(self.j_min).max_norm();
        let b = self.vertical_strip(self.j_max).max_norm();
        a.max(b).max(self.central_half_side() as u32)
    }
}

/// Outcome of the net-of-crossings check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    #[serde(rename = "C1")]
    pub c1: f64,
    pub n: f64,
    pub j_min: i32,
    pub j_max: i32,
    pub strips: Vec<StripCrossing>,
    pub all_hold: bool,
    pub central_box_all_open: bool,
}

/// Evaluate every `A_j` (top-bottom crossing of `R_j`) and `A^j` (left-right
/// crossing of `R^j`) for `j ∈ I_n`, and whether every edge of the central box
/// is open.
///
/// Crossings are decided through the dual: `A_j` holds iff the dual
/// rectangle paired with `R_j` has no left-right dual crossing. Inside
/// `R(0, n)` dual edges are subcritical, so the dual search stays small where
/// a primal search would sweep the whole strip.
pub fn net_verify<F: BondField + ?Sized>(field: &F, c1: f64, n: f64) -> Result<NetReport> {
    let layout = StripLayout::new(c1, n)?;
    let need = layout.required_radius();
    if field.window_radius() < need {
        return Err(Error::WindowTooSmall {
            window: field.window_radius(),
            required: f64::from(need),
        });
    }
    let jobs: Vec<(i32, StripAxis)> = (layout.j_min..=layout.j_max)
        .flat_map(|j| [(j, StripAxis::Vertical), (j, StripAxis::Horizontal)])
        .collect();
    let strips = jobs
        .par_iter()
        .map(|&(j, axis)| {
            let crossed = match axis {
                StripAxis::Vertical => !has_crossing(
                    field,
                    layout.vertical_strip(j),
                    CrossingDirection::LeftRight,
                    EdgeKind::DualOpen,
                )?,
                StripAxis::Horizontal => !has_crossing(
                    field,
                    layout.horizontal_strip(j),
                    CrossingDirection::TopBottom,
                    EdgeKind::DualOpen,
                )?,
            };
            Ok(StripCrossing { j, axis, crossed })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_hold = strips.iter().all(|s| s.crossed);
    let central_box_all_open = box_edges(layout.central_half_side()).all(|e| field.is_open(e));
    Ok(NetReport {
        c1,
        n,
        j_min: layout.j_min,
        j_max: layout.j_max,
        strips,
        all_hold,
        central_box_all_open,
    })
}

/// Every edge with both endpoints in `[-r, r]²`.
pub fn box_edges(r: i32) -> impl Iterator<Item = EdgeId> {
    (-r..=r).flat_map(move |y| {
        (-r..=r).flat_map(move |x| {
            let h = (x < r).then(|| EdgeId::horizontal(x, y));
            let v = (y < r).then(|| EdgeId::vertical(x, y));
            h.into_iter().chain(v)
        })
    })
}

/// Exact probability that every edge of `[-r, r]²` is open.
pub fn central_box_open_probability(params: &ModelParams, r: i32) -> f64 {
    box_edges(r)
        .map(|e| (-params.time() * crate::lattice::edge_midpoint_norm(e).powf(-params.alpha())).exp_m1())
        .map(|q| (-q).ln())
        .sum::<f64>()
        .exp()
}

/// Scale `n(p_c + ε, t)` of the supercritical disc.
pub fn supercritical_radius(epsilon: f64, params: &ModelParams) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < P_C) {
        return Err(invalid("epsilon", format!("must lie in (0, 1/2), got {epsilon}")));
    }
    Ok(characteristic_radius(P_C + epsilon, params)?.value)
}

/// Grid step for `C₁`.
pub const C1_GRID_STEP: f64 = 0.25;

/// Fitted decay rates below this are treated as the critical regime.
pub const MIN_DECAY_RATE: f64 = 0.02;

/// Smallest `C₁` on the grid with `C₁ ≥ target / γ`.
pub fn c1_from_decay(gamma: f64, target_exponent: f64) -> Result<f64> {
    if !(target_exponent > 0.0) {
        return Err(invalid("target_exponent", "must be positive"));
    }
    if !(gamma >= MIN_DECAY_RATE && gamma.is_finite()) {
        return Err(Error::Divergent(format!(
            "decay rate {gamma} is too small for a finite C1; the tail is near critical"
        )));
    }
    let raw = target_exponent / gamma / C1_GRID_STEP;
    // Absorb rounding so that an exact grid value is not pushed up a step.
    let steps = (raw - 1e-9 * raw.max(1.0)).ceil().max(1.0);
    Ok(steps * C1_GRID_STEP)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSampling {
    pub k_max: u32,
    pub replicates: u64,
    pub seed: u64,
    pub window: TailFitWindow,
}

impl Default for TailSampling {
    fn default() -> Self {
        TailSampling {
            k_max: 40,
            replicates: 20_000,
            seed: 0,
            window: TailFitWindow::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Calibration {
    #[serde(rename = "C1")]
    pub c1: f64,
    pub epsilon: f64,
    pub n: f64,
    pub target_exponent: f64,
    pub fit: DecayFit,
    pub strip_count: usize,
}

/// Calibrate `C₁` from the radius tail at the dual density `p_c - ε`.
pub fn calibrate_c1(
    epsilon: f64,
    n: f64,
    target_exponent: f64,
    sampling: TailSampling,
) -> Result<C1Calibration> {
    if !(epsilon > 0.0 && epsilon < P_C) {
        return Err(invalid("epsilon", format!("must lie in (0, 1/2), got {epsilon}")));
    }
    let tail = cluster_radius_tail(P_C - epsilon, sampling.k_max, sampling.replicates, sampling.seed)?;
    let fit = tail.fit_decay(sampling.window)?;
    let c1 = c1_from_decay(fit.gamma, target_exponent)?;
    let layout = StripLayout::new(c1, n)?;
    Ok(C1Calibration {
        c1,
        epsilon,
        n,
        target_exponent,
        fit,
        strip_count: layout.strip_count(),
    })
}
