//! Serializable experiment descriptions.
//!
//! A stored [`ExperimentSpec`] plus its seed is enough to replay a run: every
//! replicate seed is derived from `seed` by [`replicate_seed`].

use std::path::PathBuf;

use poisperc_core::front::GradientProfile;
use poisperc_core::rainstick::KSummary;
use poisperc_core::theta::GridSpec;
use poisperc_core::{SamplingMode, StreamKey};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    /// Worker threads for replicate-level parallelism.
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_dir: PathBuf,
    pub experiment: Experiment,
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate(SimulateSpec),
    Containment(ContainmentSpec),
    Density(DensitySpec),
    Net(NetSpec),
    ThetaTable(ThetaSpec),
    Volume(VolumeSpec),
    Front(FrontSpec),
    Rainstick(RainstickSpec),
    Viz(VizSpec),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate(_) => "simulate",
            Experiment::Containment(_) => "containment",
            Experiment::Density(_) => "density",
            Experiment::Net(_) => "net",
            Experiment::ThetaTable(_) => "theta-table",
            Experiment::Volume(_) => "volume",
            Experiment::Front(_) => "front",
            Experiment::Rainstick(_) => "rainstick",
            Experiment::Viz(_) => "viz",
        }
    }
}

/// Seed of replicate `r` in stream `tag`.
pub fn replicate_seed(root: u64, tag: &str, r: u64) -> u64 {
    StreamKey::new(root).tag(tag).child(r).raw()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub alpha: f64,
    pub t: f64,
    /// Explicit window; by default `⌈1.5·n(p_c - ε, t)⌉`.
    #[serde(default)]
    pub window_radius: Option<u32>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Radius of the drawn frame; by default `n(p_c, t)`.
    #[serde(default)]
    pub frame_radius: Option<f64>,
    #[serde(default)]
    pub mode: SamplingMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainmentSpec {
    pub alpha: f64,
    pub t_values: Vec<f64>,
    pub epsilon: f64,
    pub replicates: u64,
    /// Required containment frequency at the largest t.
    #[serde(default = "default_min_frequency")]
    pub min_frequency: f64,
}

/// Where a θ table comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSource {
    File { path: PathBuf },
    Build {
        #[serde(rename = "L")]
        l: u32,
        replicates: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub alpha: f64,
    pub t: f64,
    pub epsilon: f64,
    /// Box side exponent: boxes have side `⌊n^a⌋`.
    pub a: f64,
    pub delta: f64,
    pub replicates: u64,
    pub theta: ThetaSource,
    /// Strip coefficient; calibrated from the radius tail when absent.
    #[serde(default, rename = "C1")]
    pub c1: Option<f64>,
    #[serde(default = "default_tail_replicates")]
    pub tail_replicates: u64,
    /// Fraction of replicates that must hold the net and stay within δ.
    #[serde(default = "default_required_fraction")]
    pub required_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub alpha: f64,
    pub t: f64,
    pub epsilon: f64,
    pub replicates: u64,
    #[serde(default, rename = "C1")]
    pub c1: Option<f64>,
    #[serde(default = "default_target_exponent")]
    pub target_exponent: f64,
    #[serde(default = "default_tail_replicates")]
    pub tail_replicates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    #[serde(rename = "L")]
    pub l: u32,
    pub replicates: u64,
    #[serde(default)]
    pub grid: GridSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSpec {
    pub alpha: f64,
    pub t_values: Vec<f64>,
    /// Sets the default window.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub replicates: u64,
    pub theta: ThetaSource,
    #[serde(default = "default_quadrature_step")]
    pub quadrature_step: f64,
    /// Largest admissible relative gap at the largest t.
    #[serde(default = "default_max_gap")]
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontSpec {
    pub profile: GradientProfile,
    pub n_values: Vec<u32>,
    /// `ℓ_N = length_factor · N`.
    #[serde(default = "default_length_factor")]
    pub length_factor: u32,
    pub replicates: u64,
    /// Half-width of the accepted band around 4/7 and 3/7.
    #[serde(default = "default_exponent_band")]
    pub exponent_band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RainstickSpec {
    pub p_values: Vec<f64>,
    pub replicates: u64,
    pub step_budget: u64,
    #[serde(default)]
    pub summary: KSummary,
    #[serde(default = "default_c_band")]
    pub c_band: (f64, f64),
    #[serde(default)]
    pub stretched: Option<StretchedSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StretchedSpec {
    pub beta_values: Vec<f64>,
    pub runs: u64,
    pub step_budget: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Raster of a cluster CSV (`x,y,cluster_id`).
    Cluster,
    /// Side-by-side heat maps of a density field JSON.
    Density,
    /// Log-log exponent fits of a front fit JSON.
    Fit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VizSpec {
    pub input: PathBuf,
    pub kind: PlotKind,
    #[serde(default)]
    pub frame_radius: Option<f64>,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_min_frequency() -> f64 {
    0.95
}
fn default_tail_replicates() -> u64 {
    20_000
}
fn default_required_fraction() -> f64 {
    0.9
}
fn default_target_exponent() -> f64 {
    3.0
}
fn default_quadrature_step() -> f64 {
    0.005
}
fn default_max_gap() -> f64 {
    0.15
}
fn default_length_factor() -> u32 {
    4
}
fn default_exponent_band() -> f64 {
    0.12
}
fn default_c_band() -> (f64, f64) {
    (1.0, 1.35)
}

fn bad(field: &str, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

fn epsilon_ok(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 0.5 {
        Ok(())
    } else {
        Err(bad(field, format!("must lie in (0, 1/2), got {v}")))
    }
}

fn unit_interval(field: &str, v: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(bad(field, format!("must lie in [0, 1], got {v}")))
    }
}

fn replicates_ok(field: &str, n: u64) -> CliResult<()> {
    if n == 0 {
        Err(bad(field, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn nonempty<T>(field: &str, v: &[T]) -> CliResult<()> {
    if v.is_empty() {
        Err(bad(field, "must not be empty"))
    } else {
        Ok(())
    }
}

fn theta_ok(field: &str, source: &ThetaSource) -> CliResult<()> {
    if let ThetaSource::Build { l, replicates } = source {
        if *l < 16 {
            return Err(bad(&format!("{field}.L"), format!("must be at least 16, got {l}")));
        }
        if *replicates < 100 {
            return Err(bad(
                &format!("{field}.replicates"),
                format!("must be at least 100, got {replicates}"),
            ));
        }
    }
    Ok(())
}

impl ExperimentSpec {
    /// Check every field, naming the first bad one by its path.
    pub fn validate(&self) -> CliResult<()> {
        if self.workers == 0 {
            return Err(bad("workers", "must be at least 1"));
        }
        let e = "experiment";
        match &self.experiment {
            Experiment::Simulate(s) => {
                positive(&format!("{e}.alpha"), s.alpha)?;
                positive(&format!("{e}.t"), s.t)?;
                epsilon_ok(&format!("{e}.epsilon"), s.epsilon)?;
                if let Some(r) = s.frame_radius {
                    positive(&format!("{e}.frame_radius"), r)?;
                }
            }
            Experiment::Containment(s) => {
                positive(&format!("{e}.alpha"), s.alpha)?;
                nonempty(&format!("{e}.t_values"), &s.t_values)?;
                for t in &s.t_values {
                    positive(&format!("{e}.t_values"), *t)?;
                }
                epsilon_ok(&format!("{e}.epsilon"), s.epsilon)?;
                replicates_ok(&format!("{e}.replicates"), s.replicates)?;
                unit_interval(&format!("{e}.min_frequency"), s.min_frequency)?;
            }
            Experiment::Density(s) => {
                positive(&format!("{e}.alpha"), s.alpha)?;
                positive(&format!("{e}.t"), s.t)?;
                epsilon_ok(&format!("{e}.epsilon"), s.epsilon)?;
                if !(s.a > 0.5 && s.a < 1.0) {
                    return Err(bad(&format!("{e}.a"), format!("must lie in (1/2, 1), got {}", s.a)));
                }
                positive(&format!("{e}.delta"), s.delta)?;
                replicates_ok(&format!("{e}.replicates"), s.replicates)?;
                theta_ok(&format!("{e}.theta"), &s.theta)?;
                if let Some(c1) = s.c1 {
                    positive(&format!("{e}.C1"), c1)?;
                }
                replicates_ok(&format!("{e}.tail_replicates"), s.tail_replicates)?;
                unit_interval(&format!("{e}.required_fraction"), s.required_fraction)?;
            }
            Experiment::Net(s) => {
                positive(&format!("{e}.alpha"), s.alpha)?;
                positive(&format!("{e}.t"), s.t)?;
                epsilon_ok(&format!("{e}.epsilon"), s.epsilon)?;
                replicates_ok(&format!("{e}.replicates"), s.replicates)?;
                if let Some(c1) = s.c1 {
                    positive(&format!("{e}.C1"), c1)?;
                }
                positive(&format!("{e}.target_exponent"), s.target_exponent)?;
                replicates_ok(&format!("{e}.tail_replicates"), s.tail_replicates)?;
            }
            Experiment::ThetaTable(s) => {
                theta_ok(
                    e,
                    &ThetaSource::Build {
                        l: s.l,
                        replicates: s.replicates,
                    },
                )?;
                s.grid
                    .points()
                    .map_err(|err| bad(&format!("{e}.grid"), err.to_string()))?;
            }
            Experiment::Volume(s) => {
                positive(&format!("{e}.alpha"), s.alpha)?;
                nonempty(&format!("{e}.t_values"), &s.t_values)?;
                for t in &s.t_values {
                    positive(&format!("{e}.t_values"), *t)?;
                }
                epsilon_ok(&format!("{e}.epsilon"), s.epsilon)?;
                replicates_ok(&format!("{e}.replicates"), s.replicates)?;
                theta_ok(&format!("{e}.theta"), &s.theta)?;
                positive(&format!("{e}.quadrature_step"), s.quadrature_step)?;
                positive(&format!("{e}.max_gap"), s.max_gap)?;
            }
            Experiment::Front(s) => {
                nonempty(&format!("{e}.n_values"), &s.n_values)?;
                if let Some(n) = s.n_values.iter().find(|&&n| n < 32) {
                    return Err(bad(&format!("{e}.n_values"), format!("N must be at least 32, got {n}")));
                }
                if s.length_factor == 0 {
                    return Err(bad(&format!("{e}.length_factor"), "must be at least 1"));
                }
                replicates_ok(&format!("{e}.replicates"), s.replicates)?;
                positive(&format!("{e}.exponent_band"), s.exponent_band)?;
            }
            Experiment::Rainstick(s) => {
                nonempty(&format!("{e}.p_values"), &s.p_values)?;
                if let Some(p) = s.p_values.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
                    return Err(bad(&format!("{e}.p_values"), format!("p must lie in (0, 1), got {p}")));
                }
                replicates_ok(&format!("{e}.replicates"), s.replicates)?;
                replicates_ok(&format!("{e}.step_budget"), s.step_budget)?;
                if !(s.c_band.0 <= s.c_band.1) {
                    return Err(bad(&format!("{e}.c_band"), "lower end exceeds upper end"));
                }
                if let Some(st) = &s.stretched {
                    nonempty(&format!("{e}.stretched.beta_values"), &st.beta_values)?;
                    if let Some(b) = st.beta_values.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
                        return Err(bad(
                            &format!("{e}.stretched.beta_values"),
                            format!("beta must lie in (0, 1), got {b}"),
                        ));
                    }
                    replicates_ok(&format!("{e}.stretched.runs"), st.runs)?;
                    replicates_ok(&format!("{e}.stretched.step_budget"), st.step_budget)?;
                }
            }
            Experiment::Viz(s) => {
                if let Some(r) = s.frame_radius {
                    positive(&format!("{e}.frame_radius"), r)?;
                }
            }
        }
        Ok(())
    }
}

/// Apply `overlay` on top of `base`, recursing into objects.
pub fn merge_json(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
