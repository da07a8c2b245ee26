//! Monte Carlo estimates of the percolation probability θ(p).
//!
//! θ(p) is approximated by the finite-size proxy `θ_L(p) = P_p(0 ↔ ∂R(0,L))`.
//! The event `{|𝒞₀| = ∞}` is contained in `{0 ↔ ∂R(0,L)}` for every `L`, so
//! the proxy overestimates θ and decreases to it as `L` grows.

use std::ops::ControlFlow;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{flood, SiteBitmap};
use crate::error::{invalid, Error, Result};
use crate::lattice::{BondField, HomogeneousField, Site, P_C};
use crate::rng::StreamKey;
use crate::stats::{isotonic_nondecreasing, wilson_interval, Z95};

pub const TABLE_VERSION: u32 = 1;

/// Probability grid `start, start+step, ..., stop`, optionally with 0 and 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub include_endpoints: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            start: 0.50,
            stop: 0.98,
            step: 0.02,
            include_endpoints: true,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(0.0..=1.0).contains(&self.start) || !(0.0..=1.0).contains(&self.stop) {
            return Err(invalid("grid", "needs 0 ≤ start, stop ≤ 1 and step > 0"));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as i64 + 1;
        let mut pts: Vec<f64> = (0..count.max(0))
            // Round to 12 decimals so grid points print and compare cleanly.
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect();
        if self.include_endpoints {
            pts.push(0.0);
            pts.push(1.0);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Radius of the box whose boundary the origin must reach.
    #[serde(rename = "L")]
    pub l: u32,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
}

impl EstimatorConfig {
    pub fn new(l: u32, replicates: u64, seed: u64) -> Result<Self> {
        let cfg = EstimatorConfig {
            l,
            replicates,
            seed,
            grid: GridSpec::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 16 {
            return Err(invalid("L", format!("must be at least 16, got {}", self.l)));
        }
        if self.replicates < 100 {
            return Err(invalid(
                "replicates",
                format!("must be at least 100, got {}", self.replicates),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub p: f64,
    pub estimate: f64,
    /// 95% Wilson interval.
    pub ci: (f64, f64),
    pub successes: u64,
    pub trials: u64,
}

impl ThetaEstimate {
    pub fn half_width(&self) -> f64 {
        (self.ci.1 - self.ci.0) / 2.0
    }

    /// Binomial standard error of the estimate.
    pub fn std_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// Whether the origin reaches `∂R(0, L)` through open edges.
pub fn reaches_boundary(field: &HomogeneousField) -> bool {
    let l = field.window_radius();
    let mut visited = SiteBitmap::new(l);
    flood(field, [Site::ORIGIN], &mut visited, |_| true, |s| {
        if s.norm() >= l {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
}

fn estimate_key(cfg: &EstimatorConfig, p: f64) -> StreamKey {
    StreamKey::new(cfg.seed)
        .tag("theta")
        .child(u64::from(cfg.l))
        .child(p.to_bits())
}

/// `θ̂_L(p)` from `cfg.replicates` independent homogeneous configurations.
pub fn estimate_theta(p: f64, cfg: &EstimatorConfig) -> Result<ThetaEstimate> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    cfg.validate()?;
    let key = estimate_key(cfg, p);
    let successes = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let field = HomogeneousField::new(p, key.child(r), cfg.l).expect("validated p");
            u64::from(reaches_boundary(&field))
        })
        .sum::<u64>();
    Ok(ThetaEstimate {
        p,
        estimate: successes as f64 / cfg.replicates as f64,
        ci: wilson_interval(successes, cfg.replicates, Z95),
        successes,
        trials: cfg.replicates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub p: f64,
    /// Projected value: zero up to p_c, then isotonic.
    pub theta: f64,
    /// Half-width of the 95% interval of the raw estimate.
    pub ci: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<f64>,
}

/// A persisted θ(p) table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaTable {
    pub version: u32,
    #[serde(rename = "L")]
    pub l: u32,
    pub replicates: u64,
    pub seed: u64,
    pub rows: Vec<ThetaRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaTableRepr {
    version: u32,
    #[serde(rename = "L")]
    l: u32,
    replicates: u64,
    seed: u64,
    rows: Vec<ThetaRow>,
}

impl<'de> Deserialize<'de> for ThetaTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ThetaTableRepr::deserialize(d)?;
        ThetaTable::from_rows(r.version, r.l, r.replicates, r.seed, r.rows)
            .map_err(serde::de::Error::custom)
    }
}

impl ThetaTable {
    /// A table from already-projected rows, checking every invariant.
    pub fn from_rows(version: u32, l: u32, replicates: u64, seed: u64, rows: Vec<ThetaRow>) -> Result<Self> {
        if version != TABLE_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: TABLE_VERSION,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        for w in rows.windows(2) {
            if !(w[0].p < w[1].p) {
                return Err(Error::MalformedTable(format!(
                    "grid is not strictly increasing at p = {}",
                    w[1].p
                )));
            }
            if w[1].theta < w[0].theta {
                return Err(Error::MalformedTable(format!(
                    "theta decreases between p = {} and p = {}",
                    w[0].p, w[1].p
                )));
            }
        }
        for row in &rows {
            if !(0.0..=1.0).contains(&row.p) || !(0.0..=1.0).contains(&row.theta) {
                return Err(Error::MalformedTable(format!("row out of range at p = {}", row.p)));
            }
            if row.p <= P_C && row.theta != 0.0 {
                return Err(Error::MalformedTable(format!(
                    "theta must vanish for p ≤ 1/2, got {} at p = {}",
                    row.theta, row.p
                )));
            }
        }
        Ok(ThetaTable {
            version,
            l,
            replicates,
            seed,
            rows,
        })
    }

    /// Estimate every grid point, then project: θ = 0 for `p ≤ p_c` and an
    /// isotonic fit above it.
    pub fn build(cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid.points()?;
        let estimates = grid
            .iter()
            .map(|&p| estimate_theta(p, cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::from_estimates(cfg, &estimates)
    }

    pub fn from_estimates(cfg: &EstimatorConfig, estimates: &[ThetaEstimate]) -> Result<Self> {
        let split = estimates.partition_point(|e| e.p <= P_C);
        let upper: Vec<f64> = estimates[split..].iter().map(|e| e.estimate).collect();
        let weights: Vec<f64> = estimates[split..].iter().map(|e| e.trials as f64).collect();
        let projected = isotonic_nondecreasing(&upper, &weights);
        let rows = estimates
            .iter()
            .enumerate()
            .map(|(i, e)| ThetaRow {
                p: e.p,
                theta: if i < split { 0.0 } else { projected[i - split].clamp(0.0, 1.0) },
                ci: e.half_width(),
                raw: Some(e.estimate),
            })
            .collect();
        Self::from_rows(TABLE_VERSION, cfg.l, cfg.replicates, cfg.seed, rows)
    }

    pub fn p_grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p).collect()
    }

    /// Piecewise-linear θ(p), anchored at θ(1/2) = 0 and θ(1) = 1.
    pub fn interpolate(&self, p: f64) -> f64 {
        if p <= P_C {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        let i = self.rows.partition_point(|r| r.p <= p);
        let (p0, t0) = if i == 0 {
            (P_C, 0.0)
        } else {
            let r = &self.rows[i - 1];
            if r.p <= P_C {
                (P_C, 0.0)
            } else {
                (r.p, r.theta)
            }
        };
        if p == p0 {
            return t0;
        }
        let (p1, t1) = match self.rows.get(i) {
            Some(r) => (r.p, r.theta),
            None => (1.0, 1.0),
        };
        t0 + (t1 - t0) * (p - p0) / (p1 - p0)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedTable(e.to_string()))?;
        if let Some(v) = value.get("version").and_then(|v| v.as_u64()) {
            if v != u64::from(TABLE_VERSION) {
                return Err(Error::VersionMismatch {
                    found: v as u32,
                    expected: TABLE_VERSION,
                });
            }
        }
        serde_json::from_value(value).map_err(|e| Error::MalformedTable(e.to_string()))
    }
}
