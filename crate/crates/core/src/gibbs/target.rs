//! The finite-volume target measure and its log-density.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gibbs::potential::{potential_integral, BoundaryWeight, PotentialSpec};
use crate::kernel::KernelTable;
use crate::paths::{sample_brownian, Path};
use crate::rng::SeedTree;
use crate::stochint::{s_hat, DiagonalConvention};

/// Finite-volume Gibbs measure on paths over `[−T, T]` with density
/// `ψ(B₋T) ψ(B_T) exp(−α²Ŝ − ∫V)` relative to Lebesgue(start) ⊗ Wiener.
#[derive(Debug, Clone)]
pub struct GibbsTarget {
    pub alpha: f64,
    pub potential: PotentialSpec,
    pub boundary: BoundaryWeight,
    pub half_width: f64,
    pub steps: usize,
    /// Needed only when `alpha != 0`.
    pub kernel: Option<Arc<KernelTable>>,
    pub convention: DiagonalConvention,
    /// Add `α²·diagonal(convention)` to the energy. It is path-independent
    /// under `PaperThird`; under `StandardQv` it follows the realized
    /// quadratic variation, which is useful only for sensitivity runs.
    pub include_diagonal: bool,
}

/// Number of reference paths evaluated by [`GibbsTarget::new`].
pub const INIT_CHECK_PATHS: usize = 100;

impl GibbsTarget {
    /// Validate the target and check that the log-density is finite (or a
    /// clean `−∞` boundary kill) on reference paths.
    pub fn new(
        alpha: f64,
        potential: PotentialSpec,
        boundary: BoundaryWeight,
        half_width: f64,
        steps: usize,
        kernel: Option<Arc<KernelTable>>,
    ) -> Result<Self> {
        let target = Self {
            alpha,
            potential,
            boundary,
            half_width,
            steps,
            kernel,
            convention: DiagonalConvention::PaperThird,
            include_diagonal: false,
        };
        target.validate()?;
        target.check_reference_paths(&SeedTree::new(0))?;
        Ok(target)
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / self.steps as f64
    }

    pub fn needs_kernel(&self) -> bool {
        self.alpha != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::Domain(format!("coupling must be finite, got {}", self.alpha)));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) || self.steps == 0 {
            return Err(Error::Domain(format!(
                "target needs T > 0 and n >= 1, got T={}, n={}",
                self.half_width, self.steps
            )));
        }
        self.potential.validate()?;
        self.boundary.validate()?;
        if self.needs_kernel() {
            let table = self
                .kernel
                .as_ref()
                .ok_or_else(|| Error::Config("alpha != 0 requires a kernel table".into()))?;
            if table.grid().t_max < 2.0 * self.half_width {
                log::warn!(
                    "kernel table t_max = {} < 2T = {}; long time separations fall back to slow quadrature",
                    table.grid().t_max,
                    2.0 * self.half_width
                );
            }
        }
        Ok(())
    }

    fn check_reference_paths(&self, seeds: &SeedTree) -> Result<()> {
        for i in 0..INIT_CHECK_PATHS {
            let mut rng = seeds.stream("gibbs.init_check", i as u64);
            let path = sample_brownian(self.half_width, self.steps, self.boundary.center(), &mut rng)?;
            let w = match self.log_weight(&path) {
                Ok(w) => w,
                // Brownian reference paths may outgrow the table; samplers reject those
                Err(Error::Range { .. }) => continue,
                Err(e) => return Err(e),
            };
            if w.is_nan() || w == f64::INFINITY {
                return Err(Error::numerical("GibbsTarget", format!("log-weight {w} on reference path {i}")));
            }
        }
        Ok(())
    }

    /// `α²·Ŝ` (zero without coupling).
    pub fn interaction(&self, path: &Path) -> Result<f64> {
        if !self.needs_kernel() {
            return Ok(0.0);
        }
        let table = self.kernel.as_ref().expect("validated");
        Ok(self.alpha * self.alpha * s_hat(path, table)?)
    }

    /// `α²·diagonal` if the target includes it, else zero.
    pub fn diagonal_energy(&self, path: &Path) -> f64 {
        match (&self.kernel, self.include_diagonal && self.needs_kernel()) {
            (Some(t), true) => self.alpha * self.alpha * self.convention.diagonal(path, t.diag_const()),
            _ => 0.0,
        }
    }

    pub fn log_boundary(&self, path: &Path) -> f64 {
        self.boundary.log_psi(&path.start()) + self.boundary.log_psi(&path.end())
    }

    /// `log ψ(B₋T) + log ψ(B_T) − ∫V − α²Ŝ` (minus the diagonal if included).
    /// Boundary-killed paths return `−∞` without evaluating the rest.
    pub fn log_weight(&self, path: &Path) -> Result<f64> {
        self.check_grid(path)?;
        let b = self.log_boundary(path);
        if b == f64::NEG_INFINITY {
            return Ok(b);
        }
        Ok(b - potential_integral(path, &self.potential)? - self.interaction(path)? - self.diagonal_energy(path))
    }

    pub(crate) fn check_grid(&self, path: &Path) -> Result<()> {
        if path.steps() != self.steps || (path.t0() + self.half_width).abs() > 1e-12 * self.half_width.max(1.0) {
            return Err(Error::Usage(format!(
                "path grid (t0={}, n={}) does not match target (T={}, n={})",
                path.t0(),
                path.steps(),
                self.half_width,
                self.steps
            )));
        }
        Ok(())
    }

    /// Slack `Ŝ + (T/3)·∫|φ̂|²/(2ω)` of the bound `e^{−α²Ŝ} ≤ e^{α²(T/3)∫|φ̂|²/(2ω)}`;
    /// negative values are violations.
    pub fn paper_bound_slack(&self, path: &Path) -> Result<f64> {
        let table = self
            .kernel
            .as_ref()
            .ok_or_else(|| Error::Config("bound check requires a kernel table".into()))?;
        Ok(s_hat(path, table)? + self.half_width / 3.0 * table.diag_const())
    }
}
