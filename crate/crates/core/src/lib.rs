//! Gibbs measures relative to Brownian motion whose pair interaction is a
//! double stochastic integral with the transverse (Pauli–Fierz) kernel.
//!
//! The crate realizes the measure in three independent ways and cross-checks
//! them:
//!
//! * [`kernel`]: the pair kernel `W_{μν}(X, t)` by radial reduction, by brute
//!   3D quadrature, and as an interpolated table.
//! * [`gaussfield`]: a finite-mode Ornstein–Uhlenbeck field whose Itô
//!   integral `J` along a path has `E[e^{iJ}] = e^{-S}` with `S` the iterated
//!   double integral computed by [`stochint`].
//! * [`gibbs`]: Metropolis–Hastings sampling of the path measure with weight
//!   `ψ(B₋T)ψ(B_T)·exp(−α²Ŝ − ∫V)`, plus tightness, infinite-volume and
//!   localization diagnostics.
//!
//! [`spinchain`] holds the lattice spin chains whose `ε → 0` limit produces
//! these measures, and [`cli`] drives every study from a TOML config.

pub mod bessel;
pub mod cli;
pub mod error;
pub mod gaussfield;
pub mod gibbs;
pub mod kernel;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod spinchain;
pub mod stats;
pub mod stochint;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
