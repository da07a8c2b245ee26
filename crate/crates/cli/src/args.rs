//! Command-line flags. Each subcommand mirrors one [`Experiment`] variant;
//! `--config FILE` merges a (possibly partial) JSON spec over the flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poisperc_core::front::GradientProfile;
use poisperc_core::rainstick::KSummary;
use poisperc_core::theta::GridSpec;
use poisperc_core::SamplingMode;

use crate::error::{CliError, CliResult};
use crate::spec::*;

#[derive(Debug, Parser)]
#[command(name = "poisperc", version, about = "Monte Carlo experiments for Poisson percolation on Z^2")]
pub struct Cli {
    /// Root seed; every replicate stream is derived from it.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// JSON spec whose fields override the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one configuration and dump the origin cluster.
    Simulate(SimulateArgs),
    /// Containment of the origin cluster in R(0, n(p_c - ε, t)).
    Containment(ContainmentArgs),
    /// Box densities of the origin cluster against θ(ρ).
    Density(DensityArgs),
    /// Net of strip crossings.
    Net(NetArgs),
    /// Estimate a θ(p) table.
    ThetaTable(ThetaArgs),
    /// Volume of the origin cluster against the limit integral.
    Volume(VolumeArgs),
    /// Gradient-percolation front exponents.
    Front(FrontArgs),
    /// Rainstick growth constant.
    Rainstick(RainstickArgs),
    /// Render a figure from a stored report.
    Viz(VizArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 104.0)]
    pub t: f64,
    #[arg(long)]
    pub window_radius: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long)]
    pub frame_radius: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::FixedTime)]
    pub mode: ModeArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    FixedTime,
    CoupledClock,
}

impl From<ModeArg> for SamplingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FixedTime => SamplingMode::FixedTime,
            ModeArg::CoupledClock => SamplingMode::CoupledClock,
        }
    }
}

#[derive(Debug, Args)]
pub struct ContainmentArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1e3, 3e3, 1e4])]
    pub t_values: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 200)]
    pub replicates: u64,
    #[arg(long, default_value_t = 0.95)]
    pub min_frequency: f64,
}

#[derive(Debug, Args)]
pub struct ThetaSourceArgs {
    /// Stored θ table; estimated afresh when absent.
    #[arg(long)]
    pub theta_table: Option<PathBuf>,
    #[arg(long = "theta-L", default_value_t = 256)]
    pub theta_l: u32,
    #[arg(long, default_value_t = 500)]
    pub theta_replicates: u64,
}

impl ThetaSourceArgs {
    fn source(&self) -> ThetaSource {
        match &self.theta_table {
            Some(path) => ThetaSource::File { path: path.clone() },
            None => ThetaSource::Build {
                l: self.theta_l,
                replicates: self.theta_replicates,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e4)]
    pub t: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.75)]
    pub a: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub replicates: u64,
    #[command(flatten)]
    pub theta: ThetaSourceArgs,
    /// Strip coefficient; calibrated when absent.
    #[arg(long = "C1")]
    pub c1: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub tail_replicates: u64,
    #[arg(long, default_value_t = 0.9)]
    pub required_fraction: f64,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e4)]
    pub t: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub replicates: u64,
    #[arg(long = "C1")]
    pub c1: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub target_exponent: f64,
    #[arg(long, default_value_t = 20_000)]
    pub tail_replicates: u64,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long = "L", default_value_t = 256)]
    pub l: u32,
    #[arg(long, default_value_t = 500)]
    pub replicates: u64,
    #[arg(long, default_value_t = 0.5)]
    pub grid_start: f64,
    #[arg(long, default_value_t = 0.98)]
    pub grid_stop: f64,
    #[arg(long, default_value_t = 0.02)]
    pub grid_step: f64,
    /// Leave p = 0 and p = 1 out of the grid.
    #[arg(long)]
    pub no_endpoints: bool,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1e3, 1e4])]
    pub t_values: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50)]
    pub replicates: u64,
    #[command(flatten)]
    pub theta: ThetaSourceArgs,
    #[arg(long, default_value_t = 0.005)]
    pub quadrature_step: f64,
    #[arg(long, default_value_t = 0.15)]
    pub max_gap: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProfileArg {
    Linear,
    Erf,
    PoissonRadial,
}

#[derive(Debug, Args)]
pub struct FrontArgs {
    #[arg(long, value_enum, default_value_t = ProfileArg::Linear)]
    pub profile: ProfileArg,
    /// α of the poisson-radial profile.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "N-values", value_delimiter = ',', default_values_t = [64, 128, 256, 512])]
    pub n_values: Vec<u32>,
    #[arg(long, default_value_t = 4)]
    pub length_factor: u32,
    #[arg(long, default_value_t = 20)]
    pub replicates: u64,
    #[arg(long, default_value_t = 0.12)]
    pub exponent_band: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SummaryArg {
    LogMean,
    MeanLog,
    LogMedian,
}

#[derive(Debug, Args)]
pub struct RainstickArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.35, 0.45, 0.55])]
    pub p_values: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub replicates: u64,
    #[arg(long, default_value_t = 1_000_000_000_000_000_000)]
    pub step_budget: u64,
    #[arg(long, value_enum, default_value_t = SummaryArg::LogMean)]
    pub summary: SummaryArg,
    /// β values of the stretched-tail variant; none runs no variant.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.7, 0.9])]
    pub beta_values: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub stretched_runs: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub stretched_budget: u64,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub frame_radius: Option<f64>,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Simulate(a) => Experiment::Simulate(SimulateSpec {
                alpha: a.alpha,
                t: a.t,
                window_radius: a.window_radius,
                epsilon: a.epsilon,
                frame_radius: a.frame_radius,
                mode: a.mode.into(),
            }),
            Command::Containment(a) => Experiment::Containment(ContainmentSpec {
                alpha: a.alpha,
                t_values: a.t_values,
                epsilon: a.epsilon,
                replicates: a.replicates,
                min_frequency: a.min_frequency,
            }),
            Command::Density(a) => Experiment::Density(DensitySpec {
                alpha: a.alpha,
                t: a.t,
                epsilon: a.epsilon,
                a: a.a,
                delta: a.delta,
                replicates: a.replicates,
                theta: a.theta.source(),
                c1: a.c1,
                tail_replicates: a.tail_replicates,
                required_fraction: a.required_fraction,
            }),
            Command::Net(a) => Experiment::Net(NetSpec {
                alpha: a.alpha,
                t: a.t,
                epsilon: a.epsilon,
                replicates: a.replicates,
                c1: a.c1,
                target_exponent: a.target_exponent,
                tail_replicates: a.tail_replicates,
            }),
            Command::ThetaTable(a) => Experiment::ThetaTable(ThetaSpec {
                l: a.l,
                replicates: a.replicates,
                grid: GridSpec {
                    start: a.grid_start,
                    stop: a.grid_stop,
                    step: a.grid_step,
                    include_endpoints: !a.no_endpoints,
                },
            }),
            Command::Volume(a) => Experiment::Volume(VolumeSpec {
                alpha: a.alpha,
                t_values: a.t_values,
                epsilon: a.epsilon,
                replicates: a.replicates,
                theta: a.theta.source(),
                quadrature_step: a.quadrature_step,
                max_gap: a.max_gap,
            }),
            Command::Front(a) => Experiment::Front(FrontSpec {
                profile: match a.profile {
                    ProfileArg::Linear => GradientProfile::Linear,
                    ProfileArg::Erf => GradientProfile::Erf,
                    ProfileArg::PoissonRadial => GradientProfile::PoissonRadial { alpha: a.alpha },
                },
                n_values: a.n_values,
                length_factor: a.length_factor,
                replicates: a.replicates,
                exponent_band: a.exponent_band,
            }),
            Command::Rainstick(a) => Experiment::Rainstick(RainstickSpec {
                p_values: a.p_values,
                replicates: a.replicates,
                step_budget: a.step_budget,
                summary: match a.summary {
                    SummaryArg::LogMean => KSummary::LogMean,
                    SummaryArg::MeanLog => KSummary::MeanLog,
                    SummaryArg::LogMedian => KSummary::LogMedian,
                },
                c_band: (1.0, 1.35),
                stretched: (!a.beta_values.is_empty()).then_some(StretchedSpec {
                    beta_values: a.beta_values,
                    runs: a.stretched_runs,
                    step_budget: a.stretched_budget,
                }),
            }),
            Command::Viz(a) => Experiment::Viz(VizSpec {
                input: a.input,
                kind: a.kind,
                frame_radius: a.frame_radius,
            }),
        }
    }
}

impl Cli {
    /// The `ExperimentSpec` described by the flags, with `--config` merged on top.
    pub fn into_spec(self) -> CliResult<ExperimentSpec> {
        let config = self.config.clone();
        let spec = ExperimentSpec {
            seed: self.seed,
            workers: self.workers,
            output_dir: self.out,
            experiment: self.command.experiment(),
        };
        let Some(path) = config else {
            return Ok(spec);
        };
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })?;
        let overlay: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(sub) = overlay.pointer("/experiment/subcommand").and_then(|v| v.as_str()) {
            if sub != spec.experiment.name() {
                return Err(CliError::Invalid {
                    field: "experiment.subcommand".into(),
                    message: format!("config is for `{sub}` but `{}` was invoked", spec.experiment.name()),
                });
            }
        }
        let mut base = serde_json::to_value(&spec)?;
        merge_json(&mut base, overlay);
        Ok(serde_json::from_value(base)?)
    }
}
