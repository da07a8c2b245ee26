//! Fixtures shared by the benchmarks.

use poisperc_core::{LazyConfiguration, ModelParams, SamplingMode};

/// Lazy configuration at `t` with α = 1 and the default window for ε = 0.1.
pub fn lazy_field(t: f64, seed: u64) -> LazyConfiguration {
    let params = ModelParams::with_default_window(1.0, t, 0.1).expect("valid parameters");
    LazyConfiguration::new(params, seed, SamplingMode::FixedTime).expect("window fits")
}
