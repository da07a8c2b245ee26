//! Poisson percolation on the square lattice.
//!
//! An edge of ℤ² with midpoint `x` opens at the first arrival of a Poisson
//! process of rate `‖x‖∞^(-α)`, so at time `t` it is open with probability
//! `ρ(x,t) = 1 - exp(-t‖x‖^(-α))`. This crate samples such configurations
//! reproducibly and measures the geometry of the open cluster of the origin:
//!
//! - [`lattice`]: the edge-probability field, characteristic radii and sampling.
//! - [`cluster`]: union-find labelings, origin-cluster exploration, containment.
//! - [`duality`]: primal/dual crossings and the net of strip crossings.
//! - [`theta`]: Monte Carlo estimates of the percolation probability θ(p).
//! - [`density`]: box densities of the origin cluster and the volume limit.
//! - [`front`]: gradient-percolation fronts and their scaling exponents.
//! - [`rainstick`]: the one-dimensional rainstick process.
//!
//! All randomness is derived from [`rng::StreamKey`], a keyed counter-based
//! generator, so results never depend on thread count or evaluation order.

// Parameter checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod cluster;
pub mod density;
pub mod duality;
pub mod error;
pub mod front;
pub mod lattice;
pub mod rainstick;
pub mod rng;
pub mod stats;
pub mod theta;
mod union_find;

pub use cluster::{ClusterLabeling, ClusterStats, ContainmentReport};
pub use density::{BoxGrid, DensityField, VolumeReport};
pub use duality::{CrossingDirection, EdgeKind, NetReport, Rectangle};
pub use error::{Error, Result};
pub use front::{ExponentFit, FrontSample, GradientProfile, GradientStripParams};
pub use lattice::{
    BondField, CharacteristicRadius, Direction, EdgeId, LazyConfiguration, ModelParams,
    OpenConfiguration, SamplingMode, Site, P_C,
};
pub use rainstick::{RainstickResult, WetSet};
pub use rng::StreamKey;
pub use theta::{EstimatorConfig, ThetaTable};
pub use union_find::DisjointSet;
