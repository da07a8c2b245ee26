//! Experiment orchestration for `poisperc`: specs, deterministic replicate
//! execution, report files, manifests and SVG figures.

// Spec checks are written as `!(x <= y)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod error;
pub mod experiments;
pub mod output;
pub mod spec;
pub mod svg;

use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use error::{CliError, CliResult};
pub use output::{Check, Manifest, Outputs, Versions, MANIFEST_NAME};
pub use spec::{Experiment, ExperimentSpec};

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.all_checks_passed
    }
}

/// Validate `spec`, run it on a pool of `spec.workers` threads, and write its
/// reports plus `manifest.json`. On error every file written so far is removed.
pub fn run_experiment(spec: &ExperimentSpec) -> CliResult<RunOutcome> {
    spec.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    let mut out = Outputs::create(&spec.output_dir)?;
    let checks = pool.install(|| experiments::run(spec, &mut out))?;
    let all_checks_passed = checks.iter().all(|c| c.passed);
    let manifest = Manifest {
        spec: spec.clone(),
        versions: Versions::current(),
        started_unix,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: out.names(),
        checks,
        all_checks_passed,
    };
    out.write_json(MANIFEST_NAME, &manifest)?;
    out.keep();
    Ok(RunOutcome { manifest })
}
