//! Box densities of the origin cluster and the cluster-volume limit.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterLabeling, ClusterStats};
use crate::error::{invalid, Error, Result};
use crate::lattice::{ModelParams, Site, P_C};
use crate::theta::ThetaTable;

/// Tiling of the plane by half-open boxes `[i·s, (i+1)·s) × [j·s, (j+1)·s)`
/// with `s = ⌊n^a⌋`, and the index set Λ of boxes inside `[-n, n]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub n: f64,
    pub a: f64,
    pub side: u32,
    /// Λ = `[index_min, index_max]²`.
    pub index_min: i32,
    pub index_max: i32,
}

/// Tile with boxes of side `⌊n^a⌋`.
pub fn tile(n: f64, a: f64) -> Result<BoxGrid> {
    if !(a > 0.5 && a < 1.0) {
        return Err(invalid("a", format!("must lie in (1/2, 1), got {a}")));
    }
    if !(n >= 10.0 && n.is_finite()) {
        return Err(invalid("n", format!("must be at least 10, got {n}")));
    }
    let side = n.powf(a).floor() as u32;
    let s = f64::from(side);
    Ok(BoxGrid {
        n,
        a,
        side,
        index_min: (-n / s).ceil() as i32,
        index_max: (n / s - 1.0).floor() as i32,
    })
}

impl BoxGrid {
    /// Box index of a site along one axis.
    #[inline]
    pub fn index_of(&self, coordinate: i32) -> i32 {
        coordinate.div_euclid(self.side as i32)
    }

    pub fn box_of(&self, s: Site) -> (i32, i32) {
        (self.index_of(s.x), self.index_of(s.y))
    }

    pub fn in_lambda(&self, i: i32, j: i32) -> bool {
        (self.index_min..=self.index_max).contains(&i) && (self.index_min..=self.index_max).contains(&j)
    }

    /// Boxes per axis in Λ.
    pub fn span(&self) -> usize {
        (self.index_max - self.index_min + 1).max(0) as usize
    }

    pub fn lambda(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        (self.index_min..=self.index_max)
            .flat_map(move |j| (self.index_min..=self.index_max).map(move |i| (i, j)))
    }

    pub fn center(&self, i: i32, j: i32) -> (f64, f64) {
        let s = f64::from(self.side);
        ((f64::from(i) + 0.5) * s, (f64::from(j) + 0.5) * s)
    }

    pub fn corners(&self, i: i32, j: i32) -> [(f64, f64); 4] {
        let s = f64::from(self.side);
        let (x0, y0) = (f64::from(i) * s, f64::from(j) * s);
        [(x0, y0), (x0 + s, y0), (x0, y0 + s), (x0 + s, y0 + s)]
    }

    /// Sites per box.
    pub fn area(&self) -> u64 {
        u64::from(self.side) * u64::from(self.side)
    }

    /// Largest site norm inside a Λ box.
    pub fn max_norm(&self) -> u32 {
        let s = self.side as i32;
        (self.index_min * s).unsigned_abs().max(((self.index_max + 1) * s - 1).unsigned_abs())
    }

    fn slot(&self, i: i32, j: i32) -> usize {
        let k = self.span();
        (j - self.index_min) as usize * k + (i - self.index_min) as usize
    }
}

/// Per-box site counts of a cluster, filled one site at a time.
#[derive(Clone, Debug)]
pub struct BoxCounts {
    grid: BoxGrid,
    counts: Vec<u64>,
    total: u64,
}

impl BoxCounts {
    pub fn new(grid: BoxGrid) -> Self {
        BoxCounts {
            counts: vec![0; grid.span() * grid.span()],
            grid,
            total: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, s: Site) {
        self.total += 1;
        let (i, j) = self.grid.box_of(s);
        if self.grid.in_lambda(i, j) {
            let k = self.grid.slot(i, j);
            self.counts[k] += 1;
        }
    }

    pub fn count(&self, i: i32, j: i32) -> u64 {
        self.counts[self.grid.slot(i, j)]
    }

    /// All sites added, inside Λ or not.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn covered(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDensity {
    pub i: i32,
    pub j: i32,
    pub center_x: f64,
    pub center_y: f64,
    pub count: u64,
    pub density: f64,
    pub theta_target: f64,
    pub deviation: f64,
}

/// Densities `D_{i,j}` of 𝒞₀ over Λ against `θ(ρ(x_{i,j}, t))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: BoxGrid,
    pub boxes: Vec<BoxDensity>,
    pub sup_deviation: f64,
    pub cluster_size: u64,
    /// Cluster sites inside some Λ box.
    pub covered: u64,
}

impl DensityField {
    pub fn from_counts(counts: &BoxCounts, theta: &ThetaTable, params: &ModelParams) -> Self {
        let grid = counts.grid;
        let area = grid.area() as f64;
        let boxes: Vec<BoxDensity> = grid
            .lambda()
            .map(|(i, j)| {
                let (cx, cy) = grid.center(i, j);
                let count = counts.count(i, j);
                let density = count as f64 / area;
                let theta_target = theta.interpolate(params.rho_at(cx.abs().max(cy.abs())));
                BoxDensity {
                    i,
                    j,
                    center_x: cx,
                    center_y: cy,
                    count,
                    density,
                    theta_target,
                    deviation: (density - theta_target).abs(),
                }
            })
            .collect();
        let sup_deviation = boxes.iter().map(|b| b.deviation).fold(0.0, f64::max);
        DensityField {
            grid,
            boxes,
            sup_deviation,
            cluster_size: counts.total(),
            covered: counts.covered(),
        }
    }

    pub fn get(&self, i: i32, j: i32) -> Option<&BoxDensity> {
        self.grid.in_lambda(i, j).then(|| &self.boxes[self.grid.slot(i, j)])
    }

    /// Rows `i,j,center_x,center_y,count,density,theta_target,deviation`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,center_x,center_y,count,density,theta_target,deviation")?;
        for b in &self.boxes {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                b.i, b.j, b.center_x, b.center_y, b.count, b.density, b.theta_target, b.deviation
            )?;
        }
        Ok(())
    }
}

fn check_grid_in_window(grid: &BoxGrid, params: &ModelParams) -> Result<()> {
    if grid.max_norm() > params.window_radius() {
        return Err(Error::WindowTooSmall {
            window: params.window_radius(),
            required: f64::from(grid.max_norm()),
        });
    }
    Ok(())
}

/// Density field of 𝒞₀ from a full labeling.
pub fn density_field(
    labeling: &ClusterLabeling,
    grid: &BoxGrid,
    theta: &ThetaTable,
    params: &ModelParams,
) -> Result<DensityField> {
    check_grid_in_window(grid, params)?;
    let mut counts = BoxCounts::new(*grid);
    for s in labeling.members(labeling.origin_label()) {
        counts.add(s);
    }
    Ok(DensityField::from_counts(&counts, theta, params))
}

/// Per-box counts of sites whose own cluster has radius at least `threshold`
/// (radius measured from that site), in Λ order.
pub fn large_cluster_counts(labeling: &ClusterLabeling, grid: &BoxGrid, threshold: u32) -> Vec<u64> {
    let boxes = labeling.bounding_boxes();
    let mut counts = BoxCounts::new(*grid);
    for idx in 0..labeling.site_count() {
        let s = labeling.site_at(idx);
        let b = boxes[labeling.label(s) as usize].expect("every label has a box");
        if b.reach_from(s) >= threshold {
            counts.add(s);
        }
    }
    grid.lambda().map(|(i, j)| counts.count(i, j)).collect()
}

/// Largest change of `θ(ρ(·, t))` between a Λ box center and its corners.
pub fn theta_uniformity_gap(params: &ModelParams, grid: &BoxGrid, theta: &ThetaTable) -> f64 {
    let target = |(x, y): (f64, f64)| theta.interpolate(params.rho_at(x.abs().max(y.abs())));
    grid.lambda()
        .map(|(i, j)| {
            let c = target(grid.center(i, j));
            grid.corners(i, j)
                .iter()
                .map(|&p| (target(p) - c).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `‖x‖∞` beyond which `1 - exp(-‖x‖^(-α)) < 1/2` and the integrand vanishes.
pub fn support_radius(alpha: f64) -> f64 {
    (-(-P_C).ln_1p()).powf(-1.0 / alpha)
}

/// Midpoint-rule value of `∬ θ(1 - exp(-‖x‖∞^(-α))) dx` over the plane.
pub fn limit_integral(alpha: f64, theta: &ThetaTable, step: f64) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("quadrature_step", format!("must be positive, got {step}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    let cells = (support_radius(alpha) / step).ceil() as usize + 1;
    let rows: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|row| {
            let y = (row as f64 + 0.5) * step;
            (0..cells)
                .map(|col| {
                    let x = (col as f64 + 0.5) * step;
                    let r = x.max(y);
                    theta.interpolate(-(-r.powf(-alpha)).exp_m1())
                })
                .sum::<f64>()
        })
        .collect();
    // Summed in row order so the result does not depend on the thread count.
    let quadrant: f64 = rows.iter().sum();
    Ok(4.0 * quadrant * step * step)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub alpha: f64,
    pub t: f64,
    pub cluster_size: u64,
    /// `|𝒞₀(t)| / t^(2/α)`
    pub ratio: f64,
    pub integral: f64,
    /// `|ratio - integral| / integral`
    pub gap: f64,
}

pub fn volume_report(
    stats: &ClusterStats,
    params: &ModelParams,
    theta: &ThetaTable,
    quadrature_step: f64,
) -> Result<VolumeReport> {
    let integral = limit_integral(params.alpha(), theta, quadrature_step)?;
    if stats.radius >= params.window_radius() {
        return Err(Error::WindowTooSmall {
            window: params.window_radius(),
            required: f64::from(stats.radius) + 1.0,
        });
    }
    Ok(volume_from_size(stats.size, params, integral))
}

pub fn volume_from_size(cluster_size: u64, params: &ModelParams, integral: f64) -> VolumeReport {
    let ratio = cluster_size as f64 / params.volume_scale();
    VolumeReport {
        alpha: params.alpha(),
        t: params.time(),
        cluster_size,
        ratio,
        integral,
        gap: (ratio - integral).abs() / integral,
    }
}
