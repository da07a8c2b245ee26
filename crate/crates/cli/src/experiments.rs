//! One runner per subcommand. Replicates run on the caller's thread pool and
//! are reduced in replicate order, so reports do not depend on worker count.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use poisperc_core::cluster::{certify_containment, explore_cluster, TailFitWindow};
use poisperc_core::density::{limit_integral, theta_uniformity_gap, tile, volume_from_size, BoxCounts};
use poisperc_core::duality::{
    calibrate_c1, central_box_open_probability, net_verify, supercritical_radius, C1Calibration, StripLayout,
    TailSampling,
};
use poisperc_core::front::{bottom_cluster, extract_front, fit_exponents, simulate_strip};
use poisperc_core::lattice::characteristic_radius;
use poisperc_core::rainstick::{self, fit_c, run_batch, DropLaw, RainstickPoint};
use poisperc_core::stats::{mean, variance, wilson_interval, Z95};
use poisperc_core::theta::EstimatorConfig;
use poisperc_core::{
    BoxGrid, DensityField, ExponentFit, GradientStripParams, LazyConfiguration, ModelParams, NetReport,
    SamplingMode, Site, StreamKey, ThetaTable, P_C,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{Check, Outputs};
use crate::spec::*;
use crate::svg::{cluster_svg, density_svg, fit_svg, strip_svg, FitPanel};

/// Width exponent expected for gradient fronts.
pub const WIDTH_EXPONENT: f64 = 4.0 / 7.0;
/// Exponent of front length per unit strip length.
pub const LENGTH_EXPONENT: f64 = 3.0 / 7.0;

fn par_replicates<T: Send>(
    count: u64,
    job: impl Fn(u64) -> CliResult<T> + Sync + Send,
) -> CliResult<Vec<T>> {
    (0..count).into_par_iter().map(job).collect()
}

pub fn run(spec: &ExperimentSpec, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let seed = spec.seed;
    match &spec.experiment {
        Experiment::Simulate(s) => simulate(s, seed, out),
        Experiment::Containment(s) => containment(s, seed, out),
        Experiment::Density(s) => density(s, seed, out),
        Experiment::Net(s) => net(s, seed, out),
        Experiment::ThetaTable(s) => theta_table(s, seed, out),
        Experiment::Volume(s) => volume(s, seed, out),
        Experiment::Front(s) => front(s, seed, out),
        Experiment::Rainstick(s) => rainstick_experiment(s, seed, out),
        Experiment::Viz(s) => viz(s, out),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateSummary {
    alpha: f64,
    t: f64,
    window_radius: u32,
    /// n(p_c, t)
    critical_radius: f64,
    frame_radius: f64,
    cluster_size: u64,
    cluster_radius: u32,
    touches_window_edge: bool,
    cluster_id: u64,
}

/// Row-major index of a site in the window; the smallest one over a cluster is its id.
fn row_major_index(s: Site, radius: u32) -> u64 {
    let r = i64::from(radius);
    let side = 2 * r + 1;
    ((i64::from(s.y) + r) * side + i64::from(s.x) + r) as u64
}

fn simulate(s: &SimulateSpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let params = match s.window_radius {
        Some(r) => ModelParams::new(s.alpha, s.t, r)?,
        None => ModelParams::with_default_window(s.alpha, s.t, s.epsilon)?,
    };
    let config = LazyConfiguration::new(params, replicate_seed(seed, "simulate", 0), s.mode)?;
    let mut sites = Vec::new();
    let exploration = explore_cluster(&config, Site::ORIGIN, |site| sites.push(site));
    sites.sort_by_key(|site| (site.y, site.x));
    let radius = params.window_radius();
    let id = row_major_index(sites[0], radius);
    let critical = characteristic_radius(P_C, &params)?.value;
    let frame = s.frame_radius.unwrap_or(critical);
    out.write_with("cluster.csv", |w| {
        use std::io::Write;
        writeln!(w, "x,y,cluster_id")?;
        for site in &sites {
            writeln!(w, "{},{},{id}", site.x, site.y)?;
        }
        Ok(())
    })?;
    out.write("cluster.svg", cluster_svg(&sites, frame))?;
    out.write_json(
        "summary.json",
        &SimulateSummary {
            alpha: s.alpha,
            t: s.t,
            window_radius: radius,
            critical_radius: critical,
            frame_radius: frame,
            cluster_size: exploration.stats.size,
            cluster_radius: exploration.stats.radius,
            touches_window_edge: exploration.touches_window_edge,
            cluster_id: id,
        },
    )?;
    Ok(vec![Check::new(
        "cluster_inside_window",
        !exploration.touches_window_edge,
        format!("cluster radius {} in window {radius}", exploration.stats.radius),
    )])
}

// ------------------------------------------------------------- containment

#[derive(Serialize)]
struct ContainmentRow {
    t: f64,
    n_minus: f64,
    replicates: u64,
    contained: u64,
    frequency: f64,
    ci: (f64, f64),
}

fn containment(s: &ContainmentSpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let mut csv = String::from("t,replicate,seed,contained,escape_norm\n");
    let mut rows = Vec::new();
    for &t in &s.t_values {
        let params = ModelParams::with_default_window(s.alpha, t, s.epsilon)?;
        let reports = par_replicates(s.replicates, |r| {
            let rs = replicate_seed(seed, "containment", r);
            let config = LazyConfiguration::new(params, rs, SamplingMode::FixedTime)?;
            Ok((rs, certify_containment(&config, s.epsilon, &params)?))
        })?;
        let contained = reports.iter().filter(|(_, c)| c.contained).count() as u64;
        for (r, (rs, c)) in reports.iter().enumerate() {
            let _ = writeln!(csv, "{t},{r},{rs},{},{}", c.contained, c.escape_norm);
        }
        rows.push(ContainmentRow {
            t,
            n_minus: reports[0].1.n_minus,
            replicates: s.replicates,
            contained,
            frequency: contained as f64 / s.replicates as f64,
            ci: wilson_interval(contained, s.replicates, Z95),
        });
        info!("t = {t}: containment frequency {}", contained as f64 / s.replicates as f64);
    }
    out.write("containment.csv", csv)?;
    out.write_json("summary.json", &rows)?;
    let mut order: Vec<&ContainmentRow> = rows.iter().collect();
    order.sort_by(|a, b| a.t.total_cmp(&b.t));
    let nondecreasing = order.windows(2).all(|w| w[1].frequency >= w[0].frequency);
    let last = order.last().expect("validated non-empty");
    Ok(vec![
        Check::new(
            "containment_nondecreasing_in_t",
            nondecreasing,
            order.iter().map(|r| format!("{}:{}", r.t, r.frequency)).collect::<Vec<_>>().join(" "),
        ),
        Check::new(
            "containment_at_largest_t",
            last.frequency >= s.min_frequency,
            format!("{} >= {} at t = {}", last.frequency, s.min_frequency, last.t),
        ),
    ])
}

// ----------------------------------------------------------------- density

/// A θ table from a file or freshly estimated.
pub fn load_theta(source: &ThetaSource, seed: u64) -> CliResult<ThetaTable> {
    match source {
        ThetaSource::File { path } => ThetaTable::load(path).map_err(|e| match e {
            poisperc_core::Error::Io(source) => CliError::File {
                path: path.display().to_string(),
                source,
            },
            other => other.into(),
        }),
        ThetaSource::Build { l, replicates } => {
            let cfg = EstimatorConfig::new(*l, *replicates, seed)?;
            info!("estimating theta at L = {l} with {replicates} replicates per point");
            Ok(ThetaTable::build(&cfg)?)
        }
    }
}

/// `C₁` either given or calibrated from the radius tail at `p_c - ε`.
pub fn resolve_c1(
    given: Option<f64>,
    epsilon: f64,
    n: f64,
    target_exponent: f64,
    tail_replicates: u64,
    seed: u64,
) -> CliResult<(f64, Option<C1Calibration>)> {
    match given {
        Some(c1) => Ok((c1, None)),
        None => {
            let sampling = TailSampling {
                replicates: tail_replicates,
                seed: replicate_seed(seed, "c1-calibration", 0),
                window: TailFitWindow::default(),
                ..TailSampling::default()
            };
            let cal = calibrate_c1(epsilon, n, target_exponent, sampling)?;
            info!("calibrated C1 = {} from decay rate {}", cal.c1, cal.fit.gamma);
            Ok((cal.c1, Some(cal)))
        }
    }
}

/// Everything measured on one configuration for the density check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityReplicate {
    pub replicate: u64,
    pub seed: u64,
    pub net: NetReport,
    pub field: DensityField,
    pub cluster_radius: u32,
    pub touches_window_edge: bool,
}

impl DensityReplicate {
    pub fn within(&self, delta: f64) -> bool {
        self.net.all_hold && self.field.sup_deviation <= delta
    }
}

/// Net check and box densities of 𝒞₀ on the configuration with seed `seed`.
pub fn density_replicate(
    params: ModelParams,
    replicate: u64,
    seed: u64,
    c1: f64,
    grid: BoxGrid,
    theta: &ThetaTable,
) -> CliResult<DensityReplicate> {
    let config = LazyConfiguration::new(params, seed, SamplingMode::FixedTime)?;
    let net = net_verify(&config, c1, grid.n)?;
    let mut counts = BoxCounts::new(grid);
    let exploration = explore_cluster(&config, Site::ORIGIN, |s| counts.add(s));
    Ok(DensityReplicate {
        replicate,
        seed,
        net,
        field: DensityField::from_counts(&counts, theta, &params),
        cluster_radius: exploration.stats.radius,
        touches_window_edge: exploration.touches_window_edge,
    })
}

#[derive(Serialize)]
struct DensitySummary {
    alpha: f64,
    t: f64,
    epsilon: f64,
    a: f64,
    delta: f64,
    #[serde(rename = "C1")]
    c1: f64,
    calibration: Option<C1Calibration>,
    grid: BoxGrid,
    theta_uniformity_gap: f64,
    replicates: u64,
    net_all_hold: u64,
    within_delta: u64,
    fraction: f64,
    mean_sup_deviation: f64,
}

fn density(s: &DensitySpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let params = ModelParams::with_default_window(s.alpha, s.t, s.epsilon)?;
    let n = supercritical_radius(s.epsilon, &params)?;
    let grid = tile(n, s.a)?;
    let theta = load_theta(&s.theta, seed)?;
    let (c1, calibration) = resolve_c1(s.c1, s.epsilon, n, 3.0, s.tail_replicates, seed)?;
    let reps = par_replicates(s.replicates, |r| {
        let rep = density_replicate(params, r, replicate_seed(seed, "density", r), c1, grid, &theta)?;
        info!("density replicate {r}: sup deviation {}", rep.field.sup_deviation);
        Ok(rep)
    })?;
    let mut csv = String::from(
        "replicate,seed,net_all_hold,central_box_all_open,sup_deviation,cluster_size,covered,within_delta\n",
    );
    for rep in &reps {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            rep.replicate,
            rep.seed,
            rep.net.all_hold,
            rep.net.central_box_all_open,
            rep.field.sup_deviation,
            rep.field.cluster_size,
            rep.field.covered,
            rep.within(s.delta)
        );
    }
    out.write("density.csv", csv)?;
    let first = &reps[0].field;
    out.write_with("density_boxes.csv", |w| first.write_csv(w))?;
    out.write_json("density_field.json", first)?;
    out.write("density.svg", density_svg(first))?;
    let within = reps.iter().filter(|r| r.within(s.delta)).count() as u64;
    let fraction = within as f64 / s.replicates as f64;
    out.write_json(
        "summary.json",
        &DensitySummary {
            alpha: s.alpha,
            t: s.t,
            epsilon: s.epsilon,
            a: s.a,
            delta: s.delta,
            c1,
            calibration,
            grid,
            theta_uniformity_gap: theta_uniformity_gap(&params, &grid, &theta),
            replicates: s.replicates,
            net_all_hold: reps.iter().filter(|r| r.net.all_hold).count() as u64,
            within_delta: within,
            fraction,
            mean_sup_deviation: mean(&reps.iter().map(|r| r.field.sup_deviation).collect::<Vec<_>>()),
        },
    )?;
    Ok(vec![Check::new(
        "density_within_delta",
        fraction >= s.required_fraction,
        format!("{within}/{} replicates hold the net with sup deviation <= {}", s.replicates, s.delta),
    )])
}

// --------------------------------------------------------------------- net

#[derive(Serialize)]
struct NetSummary {
    #[serde(rename = "C1")]
    c1: f64,
    n: f64,
    layout: StripLayout,
    replicates: u64,
    all_hold: u64,
    frequency: f64,
    /// `1 - 5/n`
    bound: f64,
    central_box_all_open: u64,
    central_box_probability: f64,
}

/// Lower bound on the all-hold frequency: `1 - 5/n`.
pub fn net_frequency_bound(n: f64) -> f64 {
    1.0 - 5.0 / n
}

fn net(s: &NetSpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let params = ModelParams::with_default_window(s.alpha, s.t, s.epsilon)?;
    let n = supercritical_radius(s.epsilon, &params)?;
    let (c1, calibration) = resolve_c1(s.c1, s.epsilon, n, s.target_exponent, s.tail_replicates, seed)?;
    let layout = StripLayout::new(c1, n)?;
    let reports = par_replicates(s.replicates, |r| {
        let rs = replicate_seed(seed, "net", r);
        let config = LazyConfiguration::new(params, rs, SamplingMode::FixedTime)?;
        Ok((rs, net_verify(&config, c1, n)?))
    })?;
    let mut csv = String::from("replicate,seed,all_hold,central_box_all_open,failed_strips\n");
    for (r, (rs, rep)) in reports.iter().enumerate() {
        let failed: Vec<String> = rep
            .strips
            .iter()
            .filter(|st| !st.crossed)
            .map(|st| format!("{:?}:{}", st.axis, st.j))
            .collect();
        let _ = writeln!(
            csv,
            "{r},{rs},{},{},{}",
            rep.all_hold,
            rep.central_box_all_open,
            failed.join(";")
        );
    }
    out.write("net.csv", csv)?;
    if let Some(cal) = &calibration {
        out.write_json("calibration.json", cal)?;
    }
    let hold = reports.iter().filter(|(_, r)| r.all_hold).count() as u64;
    let frequency = hold as f64 / s.replicates as f64;
    let bound = net_frequency_bound(n);
    out.write_json(
        "summary.json",
        &NetSummary {
            c1,
            n,
            layout,
            replicates: s.replicates,
            all_hold: hold,
            frequency,
            bound,
            central_box_all_open: reports.iter().filter(|(_, r)| r.central_box_all_open).count() as u64,
            central_box_probability: central_box_open_probability(&params, layout.central_half_side()),
        },
    )?;
    Ok(vec![Check::new(
        "net_all_hold_frequency",
        frequency >= bound,
        format!("{frequency} >= 1 - 5/n = {bound}"),
    )])
}

// ------------------------------------------------------------- theta-table

fn theta_table(s: &ThetaSpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let cfg = EstimatorConfig {
        l: s.l,
        replicates: s.replicates,
        seed,
        grid: s.grid,
    };
    cfg.validate()?;
    let table = ThetaTable::build(&cfg)?;
    out.write_json("theta.json", &table)?;
    let mut csv = String::from("p,theta,ci,raw\n");
    for row in &table.rows {
        let raw = row.raw.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{raw}", row.p, row.theta, row.ci);
    }
    out.write("theta.csv", csv)?;
    let at = |p: f64| table.rows.iter().find(|r| r.p == p).map(|r| r.theta);
    let mut checks = vec![Check::new(
        "theta_monotone",
        table.rows.windows(2).all(|w| w[0].theta <= w[1].theta),
        "isotonic projection",
    )];
    if s.grid.include_endpoints {
        checks.push(Check::new(
            "theta_endpoints",
            at(0.0) == Some(0.0) && at(1.0) == Some(1.0),
            format!("theta(0) = {:?}, theta(1) = {:?}", at(0.0), at(1.0)),
        ));
    }
    Ok(checks)
}

// ------------------------------------------------------------------ volume

/// `|𝒞₀|` and its radius on one configuration.
pub fn volume_replicate(params: ModelParams, seed: u64) -> CliResult<(u64, u32, bool)> {
    let config = LazyConfiguration::new(params, seed, SamplingMode::FixedTime)?;
    let e = explore_cluster(&config, Site::ORIGIN, |_| {});
    Ok((e.stats.size, e.stats.radius, e.touches_window_edge))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeRow {
    pub t: f64,
    pub replicates: u64,
    pub mean_ratio: f64,
    pub ratio_se: f64,
    pub integral: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureCheck {
    pub step: f64,
    pub integral: f64,
    pub half_step_integral: f64,
    pub relative_change: f64,
}

/// Integral at `step` and `step/2`.
pub fn quadrature_check(alpha: f64, theta: &ThetaTable, step: f64) -> CliResult<QuadratureCheck> {
    let integral = limit_integral(alpha, theta, step)?;
    let half = limit_integral(alpha, theta, step / 2.0)?;
    Ok(QuadratureCheck {
        step,
        integral,
        half_step_integral: half,
        relative_change: (half - integral).abs() / half,
    })
}

/// Mean of `|𝒞₀|/t^(2/α)` and its gap to the integral.
pub fn volume_row(t: f64, params: &ModelParams, sizes: &[u64], integral: f64) -> VolumeRow {
    let ratios: Vec<f64> = sizes.iter().map(|&n| volume_from_size(n, params, integral).ratio).collect();
    let m = mean(&ratios);
    VolumeRow {
        t,
        replicates: sizes.len() as u64,
        mean_ratio: m,
        ratio_se: (variance(&ratios) / ratios.len() as f64).sqrt(),
        integral,
        gap: (m - integral).abs() / integral,
    }
}

/// Checks shared with the acceptance run: quadrature stability, monotone approach, final gap.
pub fn volume_checks(rows: &[VolumeRow], quadrature: &QuadratureCheck, max_gap: f64) -> Vec<Check> {
    let mut order: Vec<&VolumeRow> = rows.iter().collect();
    order.sort_by(|a, b| a.t.total_cmp(&b.t));
    let monotone = order.windows(2).all(|w| w[1].gap < w[0].gap);
    let last = order.last().expect("at least one t");
    vec![
        Check::new(
            "quadrature_stable",
            quadrature.relative_change < 0.005,
            format!("relative change {} when the step halves", quadrature.relative_change),
        ),
        Check::new(
            "volume_gap_decreasing",
            monotone,
            order.iter().map(|r| format!("t={}:{}", r.t, r.gap)).collect::<Vec<_>>().join(" "),
        ),
        Check::new(
            "volume_gap_at_largest_t",
            last.gap <= max_gap,
            format!("gap {} <= {max_gap} at t = {}", last.gap, last.t),
        ),
    ]
}

#[derive(Serialize)]
struct VolumeSummary {
    quadrature: QuadratureCheck,
    rows: Vec<VolumeRow>,
}

fn volume(s: &VolumeSpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let theta = load_theta(&s.theta, seed)?;
    let quadrature = quadrature_check(s.alpha, &theta, s.quadrature_step)?;
    let mut csv = String::from("t,replicate,seed,cluster_size,ratio,touches_window_edge\n");
    let mut rows = Vec::new();
    for &t in &s.t_values {
        let params = ModelParams::with_default_window(s.alpha, t, s.epsilon)?;
        let reps = par_replicates(s.replicates, |r| {
            let rs = replicate_seed(seed, "volume", r);
            volume_replicate(params, rs).map(|v| (rs, v))
        })?;
        for (r, (rs, (size, _, touches))) in reps.iter().enumerate() {
            if *touches {
                warn!("t = {t}, replicate {r}: origin cluster reaches the window edge");
            }
            let ratio = *size as f64 / params.volume_scale();
            let _ = writeln!(csv, "{t},{r},{rs},{size},{ratio},{touches}");
        }
        let sizes: Vec<u64> = reps.iter().map(|(_, (n, _, _))| *n).collect();
        rows.push(volume_row(t, &params, &sizes, quadrature.integral));
    }
    out.write("volume.csv", csv)?;
    let checks = volume_checks(&rows, &quadrature, s.max_gap);
    out.write_json("summary.json", &VolumeSummary { quadrature, rows })?;
    Ok(checks)
}

// ------------------------------------------------------------------- front

/// Fit report of the exponent experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrontFitReport {
    pub exponent_width: f64,
    pub se_width: f64,
    pub exponent_length: f64,
    pub se_length: f64,
    #[serde(rename = "N_values")]
    pub n_values: Vec<f64>,
    pub replicates: Vec<usize>,
    pub width_fit: ExponentFit,
    pub length_fit: ExponentFit,
}

impl FrontFitReport {
    pub fn new(width_fit: ExponentFit, length_fit: ExponentFit) -> Self {
        FrontFitReport {
            exponent_width: width_fit.slope,
            se_width: width_fit.slope_se,
            exponent_length: length_fit.slope,
            se_length: length_fit.slope_se,
            n_values: width_fit.n_values.clone(),
            replicates: width_fit.replicates.clone(),
            width_fit,
            length_fit,
        }
    }

    pub fn panels(&self) -> Vec<FitPanel> {
        vec![
            FitPanel::log_log("front width", "ln mean width", &self.width_fit),
            FitPanel::log_log("front length per unit length", "ln mean length / l_N", &self.length_fit),
        ]
    }
}

/// Seed of strip replicate `r` at height `n`.
pub fn strip_seed(root: u64, n: u32, r: u64) -> u64 {
    StreamKey::new(root).tag("front").child(u64::from(n)).child(r).raw()
}

fn front(s: &FrontSpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let mut n_values = s.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();
    let jobs: Vec<(u32, u64)> = n_values
        .iter()
        .flat_map(|&n| (0..s.replicates).map(move |r| (n, r)))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(n, r)| {
            let params = GradientStripParams::new(n, s.length_factor * n, s.profile, strip_seed(seed, n, r))?;
            Ok(extract_front(&simulate_strip(params))?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut csv = String::from("N,replicate,seed,width,max_deviation,mean_height,length\n");
    for (&(n, r), f) in jobs.iter().zip(&samples) {
        let _ = writeln!(
            csv,
            "{n},{r},{},{},{},{},{}",
            strip_seed(seed, n, r),
            f.width,
            f.max_deviation,
            f.mean_height,
            f.length
        );
    }
    out.write("fronts.csv", csv)?;
    // Dump and draw replicate 0 of the smallest strip.
    let n0 = n_values[0];
    let params = GradientStripParams::new(n0, s.length_factor * n0, s.profile, strip_seed(seed, n0, 0))?;
    let strip = simulate_strip(params);
    let sample = &samples[0];
    out.write_with("front_dump.csv", |w| sample.write_csv(w))?;
    out.write(
        "strip.svg",
        strip_svg(strip.width(), strip.height(), &bottom_cluster(&strip), &sample.front_sites),
    )?;
    let (w, l) = fit_exponents(&samples)?;
    let report = FrontFitReport::new(w, l);
    out.write_json("fit.json", &report)?;
    out.write("fit.svg", fit_svg(&report.panels()))?;
    Ok(front_checks(&report, s.exponent_band))
}

pub fn front_checks(report: &FrontFitReport, band: f64) -> Vec<Check> {
    vec![
        Check::new(
            "width_exponent",
            (report.exponent_width - WIDTH_EXPONENT).abs() <= band,
            format!("{} ± {} vs 4/7 ± {band}", report.exponent_width, report.se_width),
        ),
        Check::new(
            "length_exponent",
            (report.exponent_length - LENGTH_EXPONENT).abs() <= band,
            format!("{} ± {} vs 3/7 ± {band}", report.exponent_length, report.se_length),
        ),
    ]
}

// --------------------------------------------------------------- rainstick

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StretchedRow {
    pub beta: f64,
    pub runs: u64,
    pub step_budget: u64,
    pub terminated: u64,
    pub non_termination_fraction: f64,
}

#[derive(Serialize)]
struct RainstickSummary {
    fit: rainstick::CEstimate,
    stretched: Vec<StretchedRow>,
    /// Termination fraction does not decrease along the sorted β values.
    stretched_trend_nondecreasing: Option<bool>,
}

fn rainstick_experiment(s: &RainstickSpec, seed: u64, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let mut csv = String::from("law,parameter,replicate,seed,T,K,capped\n");
    let mut points = Vec::new();
    let emit = |csv: &mut String, law: &str, param: f64, results: &[poisperc_core::RainstickResult]| {
        for (r, res) in results.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{law},{param},{r},{},{},{},{}",
                rainstick::replicate_seed(seed, r as u64),
                res.t,
                res.k,
                res.capped
            );
        }
    };
    for &p in &s.p_values {
        let results = run_batch(DropLaw::Geometric { p }, s.replicates, seed, s.step_budget)?;
        emit(&mut csv, "geometric", p, &results);
        let point = RainstickPoint::from_results(p, &results);
        if point.capped > 0 {
            warn!("{} of {} runs at p = {p} hit the step budget", point.capped, s.replicates);
        }
        points.push(point);
    }
    let fit = fit_c(&points, s.summary)?;
    let mut stretched = Vec::new();
    if let Some(st) = &s.stretched {
        let mut betas = st.beta_values.clone();
        betas.sort_by(f64::total_cmp);
        for beta in betas {
            let results = run_batch(DropLaw::StretchedExponential { beta }, st.runs, seed, st.step_budget)?;
            emit(&mut csv, "stretched", beta, &results);
            let terminated = results.iter().filter(|r| !r.capped).count() as u64;
            stretched.push(StretchedRow {
                beta,
                runs: st.runs,
                step_budget: st.step_budget,
                terminated,
                non_termination_fraction: 1.0 - terminated as f64 / st.runs as f64,
            });
        }
    }
    out.write("runs.csv", csv)?;
    let panel = FitPanel {
        title: format!("rainstick block length ({:?})", s.summary),
        x_label: "1/p".into(),
        y_label: "summary of ln K".into(),
        xs: fit.points.iter().filter(|pt| pt.completed > 0).map(|pt| 1.0 / pt.p).collect(),
        ys: fit
            .points
            .iter()
            .filter(|pt| pt.completed > 0)
            .map(|pt| pt.summary(s.summary))
            .collect(),
        slope: fit.c,
        intercept: fit.intercept,
    };
    out.write("fit.svg", fit_svg(&[panel]))?;
    let mut checks = vec![Check::new(
        "c_in_band",
        fit.c >= s.c_band.0 && fit.c <= s.c_band.1,
        format!("c = {} ± {} in [{}, {}]", fit.c, fit.c_se, s.c_band.0, s.c_band.1),
    )];
    if let Some(first) = stretched.first() {
        checks.push(Check::new(
            "stretched_non_termination",
            first.non_termination_fraction > 0.0,
            format!(
                "beta = {}: {} of {} runs unfinished after {} drops",
                first.beta,
                first.runs - first.terminated,
                first.runs,
                first.step_budget
            ),
        ));
    }
    let trend = (!stretched.is_empty()).then(|| stretched.windows(2).all(|w| w[1].terminated >= w[0].terminated));
    out.write_json(
        "summary.json",
        &RainstickSummary {
            fit,
            stretched,
            stretched_trend_nondecreasing: trend,
        },
    )?;
    Ok(checks)
}

// --------------------------------------------------------------------- viz

/// Parse `x,y,...` rows after a header.
pub fn read_cluster_csv(text: &str) -> CliResult<Vec<Site>> {
    let mut sites = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut coord = |name: &str| -> CliResult<i32> {
            parts
                .next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Invalid {
                    field: format!("input line {}", i + 1),
                    message: format!("missing or bad {name}"),
                })
        };
        let x = coord("x")?;
        let y = coord("y")?;
        sites.push(Site::new(x, y));
    }
    Ok(sites)
}

/// Render the figure for a stored report.
pub fn emit_plot(kind: PlotKind, input: &Path, frame_radius: Option<f64>) -> CliResult<String> {
    let text = std::fs::read_to_string(input).map_err(|source| CliError::File {
        path: input.display().to_string(),
        source,
    })?;
    Ok(match kind {
        PlotKind::Cluster => {
            let sites = read_cluster_csv(&text)?;
            let fallback = sites.iter().map(|s| s.norm()).max().unwrap_or(1);
            cluster_svg(&sites, frame_radius.unwrap_or(f64::from(fallback)))
        }
        PlotKind::Density => density_svg(&serde_json::from_str::<DensityField>(&text)?),
        PlotKind::Fit => fit_svg(&serde_json::from_str::<FrontFitReport>(&text)?.panels()),
    })
}

fn viz(s: &VizSpec, out: &mut Outputs) -> CliResult<Vec<Check>> {
    let svg = emit_plot(s.kind, &s.input, s.frame_radius)?;
    let name = match s.kind {
        PlotKind::Cluster => "cluster.svg",
        PlotKind::Density => "density.svg",
        PlotKind::Fit => "fit.svg",
    };
    out.write(name, svg)?;
    Ok(Vec::new())
}
