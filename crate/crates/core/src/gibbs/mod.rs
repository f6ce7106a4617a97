//! Sampling the finite-volume Gibbs measure on Brownian paths and the
//! diagnostics of its infinite-volume limit.

mod diagnostics;
mod mcmc;
mod potential;
mod target;

pub use diagnostics::*;
pub use mcmc::{mcmc_chains, mcmc_run, mcmc_run_from, pooled_samples, AcceptanceStats, McmcParams, McmcRun, MoveStats};
pub use potential::{potential_integral, BoundaryWeight, PotentialSpec};
pub use target::{GibbsTarget, INIT_CHECK_PATHS};

pub(crate) use potential::trapezoid_weight;
