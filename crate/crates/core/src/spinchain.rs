//! Lattice spin chains on `εℤ ∩ [−T, T]` whose `ε → 0` limits are the path
//! measures sampled by [`crate::gibbs`].
//!
//! A configuration `x_0, …, x_n` (`n = 2T/ε`) has log-weight
//!
//! ```text
//! log ψ(x_0) + log ψ(x_n) − Σ|x_{i+1} − x_i|²/(2ε) − ε Σ_i w_i V(x_i) + interaction
//! ```
//!
//! with trapezoid weights `w_i` and one of
//!
//! * Riemann: `−ε² · 2 Σ_{i<j} 𝕎((j−i)ε, x_j − x_i)` for a bounded scalar `𝕎`;
//! * Matrix: `−α² Σ_{i<j} Δx_j · W(x_j − x_i, (j−i)ε) Δx_i` with the transverse
//!   kernel, which is exactly `−α²·Ŝ` of the path through the same points.
//!
//! Sites are stored as a [`Path`] with `t0 = −T`, `dt = ε`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{trapezoid_weight, BoundaryWeight, Observable, PotentialSpec, DEFAULT_BATCHES};
use crate::kernel::KernelTable;
use crate::paths::Path;
use crate::rng::SeedTree;
use crate::stats::{batch_means, linear_fit, Estimate};
use crate::stochint::PairKernel;
use crate::Vec3;

/// Scalar pair potentials `𝕎(t, X)` for the Riemann chain.
#[derive(Debug, Clone)]
pub enum RiemannKernel {
    /// `amplitude · exp(−|X|²/(2 space_scale²)) · exp(−time_rate·|t|)`
    GaussianExp { amplitude: f64, space_scale: f64, time_rate: f64 },
    /// `tr W(X, t) = 3A + B` of the transverse kernel.
    MatrixTrace { table: Arc<KernelTable> },
}

impl RiemannKernel {
    pub fn value(&self, t: f64, x: &Vec3) -> Result<f64> {
        match self {
            RiemannKernel::GaussianExp { amplitude, space_scale, time_rate } => {
                Ok(amplitude * (-x.norm_squared() / (2.0 * space_scale * space_scale) - time_rate * t.abs()).exp())
            }
            RiemannKernel::MatrixTrace { table } => Ok(table.parts(x.norm(), t)?.trace()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Interaction {
    None,
    Riemann(RiemannKernel),
    Matrix { alpha: f64, table: Arc<KernelTable> },
}

/// A chain on `n + 1` sites with Lebesgue a priori measure.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub epsilon: f64,
    pub half_width: f64,
    pub potential: PotentialSpec,
    /// Optional weight `ψ` on the two end sites.
    pub boundary: Option<BoundaryWeight>,
    pub interaction: Interaction,
}

impl ChainSpec {
    pub fn new(
        epsilon: f64,
        half_width: f64,
        potential: PotentialSpec,
        boundary: Option<BoundaryWeight>,
        interaction: Interaction,
    ) -> Result<Self> {
        let s = Self { epsilon, half_width, potential, boundary, interaction };
        s.sites()?;
        s.potential.validate()?;
        if let Some(b) = &s.boundary {
            b.validate()?;
        }
        Ok(s)
    }

    /// Number of steps `n = 2T/ε`; errors unless it is a positive integer.
    pub fn sites(&self) -> Result<usize> {
        let n = 2.0 * self.half_width / self.epsilon;
        if !(self.epsilon > 0.0 && self.half_width > 0.0) || !n.is_finite() || n < 0.5 || (n - n.round()).abs() > 1e-9 * n {
            return Err(Error::Domain(format!(
                "2T/ε must be a positive integer, got T={}, ε={}",
                self.half_width, self.epsilon
            )));
        }
        Ok(n.round() as usize)
    }

    fn steps(&self) -> usize {
        self.sites().expect("validated")
    }
}

/// Log-weight of a configuration of `n + 1` sites (up to normalization).
pub fn chain_log_weight(config: &[Vec3], spec: &ChainSpec) -> Result<f64> {
    let n = spec.sites()?;
    if config.len() != n + 1 {
        return Err(Error::Usage(format!("configuration has {} sites, spec needs {}", config.len(), n + 1)));
    }
    let eps = spec.epsilon;
    let mut w = -gaussian_steps(config, eps);
    w -= eps * (0..=n).map(|i| trapezoid_weight(i, n) * spec.potential.value(&config[i], eps)).sum::<f64>();
    if let Some(b) = &spec.boundary {
        w += b.log_psi(&config[0]) + b.log_psi(&config[n]);
    }
    w += interaction_energy(config, spec)?;
    Ok(w)
}

/// `Σ |x_{i+1} − x_i|² / (2ε)`.
pub fn gaussian_steps(config: &[Vec3], eps: f64) -> f64 {
    config.windows(2).map(|p| (p[1] - p[0]).norm_squared()).sum::<f64>() / (2.0 * eps)
}

/// The interaction part of [`chain_log_weight`].
pub fn interaction_energy(config: &[Vec3], spec: &ChainSpec) -> Result<f64> {
    let n = config.len() - 1;
    let eps = spec.epsilon;
    match &spec.interaction {
        Interaction::None => Ok(0.0),
        Interaction::Riemann(k) => {
            let mut s = 0.0;
            for j in 1..=n {
                for i in 0..j {
                    s += k.value((j - i) as f64 * eps, &(config[j] - config[i]))?;
                }
            }
            Ok(-2.0 * eps * eps * s)
        }
        Interaction::Matrix { alpha, table } => Ok(-alpha * alpha * matrix_pairs(config, eps, table.as_ref(), 0..n)?),
    }
}

// Σ over increment pairs l < j with l or j in `changed` of Δx_j·W(x_j − x_l, (j−l)ε)Δx_l.
fn matrix_pairs<K: PairKernel + ?Sized>(x: &[Vec3], eps: f64, kernel: &K, changed: std::ops::Range<usize>) -> Result<f64> {
    let n = x.len() - 1;
    let d = |i: usize| x[i + 1] - x[i];
    let term = |l: usize, j: usize| kernel.bilinear(&(x[j] - x[l]), (j - l) as f64 * eps, &d(j), &d(l));
    let mut s = 0.0;
    for j in changed.clone() {
        for l in 0..j {
            s += term(l, j)?;
        }
    }
    for j in changed.end..n {
        for l in changed.clone() {
            s += term(l, j)?;
        }
    }
    Ok(s)
}

/// Sampler settings for [`chain_mcmc`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainParams {
    pub sweeps: usize,
    pub warmup: usize,
    pub thin: usize,
    /// Standard deviation of the global shift move per component.
    pub shift_step: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self { sweeps: 20_000, warmup: 2_000, thin: 10, shift_step: 0.3 }
    }
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub samples: Vec<Path>,
    pub site_acceptance: f64,
    pub shift_acceptance: f64,
    pub warnings: Vec<String>,
}

struct ChainState<'a> {
    spec: &'a ChainSpec,
    x: Vec<Vec3>,
    n: usize,
}

impl ChainState<'_> {
    fn site_energy(&self, i: usize, y: &Vec3) -> f64 {
        let mut e = self.spec.epsilon * trapezoid_weight(i, self.n) * self.spec.potential.value(y, self.spec.epsilon);
        if let Some(b) = &self.spec.boundary {
            if i == 0 || i == self.n {
                e -= b.log_psi(y);
            }
        }
        e
    }

    // interaction log-weight terms that involve site i, with x_i replaced by y
    fn site_interaction(&mut self, i: usize, y: &Vec3) -> Result<f64> {
        let eps = self.spec.epsilon;
        match &self.spec.interaction {
            Interaction::None => Ok(0.0),
            Interaction::Riemann(k) => {
                let mut s = 0.0;
                for (j, xj) in self.x.iter().enumerate() {
                    if j != i {
                        let (dx, dt) = if j > i { (xj - y, (j - i) as f64) } else { (y - xj, (i - j) as f64) };
                        s += k.value(dt * eps, &dx)?;
                    }
                }
                Ok(-2.0 * eps * eps * s)
            }
            Interaction::Matrix { alpha, table } => {
                let old = self.x[i];
                self.x[i] = *y;
                let r = matrix_pairs(&self.x, eps, table.as_ref(), i.saturating_sub(1)..(i + 1).min(self.n));
                self.x[i] = old;
                Ok(-alpha * alpha * r?)
            }
        }
    }

    fn site_move<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) -> Result<bool> {
        let eps = self.spec.epsilon;
        // heat-bath draw from the Gaussian-step conditional
        let (mean, var) = match i {
            0 => (self.x[1], eps),
            _ if i == self.n => (self.x[i - 1], eps),
            _ => ((self.x[i - 1] + self.x[i + 1]) * 0.5, eps / 2.0),
        };
        let sd = var.sqrt();
        let y = mean + Vec3::from_fn(|_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let old = self.x[i];
        let delta = -(self.site_energy(i, &y) - self.site_energy(i, &old)) + self.site_interaction(i, &y)?
            - self.site_interaction(i, &old)?;
        let ok = delta >= 0.0 || rng.random::<f64>().ln() < delta;
        if ok {
            self.x[i] = y;
        }
        Ok(ok)
    }

    fn shift_move<R: Rng + ?Sized>(&mut self, step: f64, rng: &mut R) -> bool {
        let shift = Vec3::from_fn(|_, _| step * rng.sample::<f64, _>(StandardNormal));
        let mut delta = 0.0;
        for (i, x) in self.x.iter().enumerate() {
            delta -= self.site_energy(i, &(x + shift)) - self.site_energy(i, x);
        }
        let ok = delta >= 0.0 || rng.random::<f64>().ln() < delta;
        if ok {
            for x in &mut self.x {
                *x += shift;
            }
        }
        ok
    }
}

/// Single-site heat-bath proposals for the Gaussian steps, accepted by
/// Metropolis on the potential, boundary and interaction, plus global shifts.
pub fn chain_mcmc<R: Rng + ?Sized>(spec: &ChainSpec, params: &ChainParams, rng: &mut R) -> Result<ChainRun> {
    let n = spec.sites()?;
    if params.thin == 0 {
        return Err(Error::Config("thin must be >= 1".into()));
    }
    let start = spec.boundary.map_or(Vec3::zeros(), |b| b.center());
    let mut st = ChainState { spec, x: vec![start; n + 1], n };
    let (mut site_acc, mut site_tot, mut shift_acc, mut shift_tot) = (0u64, 0u64, 0u64, 0u64);
    let mut samples = Vec::with_capacity(params.sweeps / params.thin);
    for sweep in 0..params.warmup + params.sweeps {
        let measuring = sweep >= params.warmup;
        for i in 0..=n {
            let ok = st.site_move(i, rng)?;
            if measuring {
                site_acc += ok as u64;
                site_tot += 1;
            }
        }
        let ok = st.shift_move(params.shift_step, rng);
        if measuring {
            shift_acc += ok as u64;
            shift_tot += 1;
            if (sweep - params.warmup) % params.thin == 0 {
                samples.push(Path::from_points(-spec.half_width, spec.epsilon, st.x.clone())?);
            }
        }
    }
    let rate = |a: u64, t: u64| if t == 0 { f64::NAN } else { a as f64 / t as f64 };
    let (site_acceptance, shift_acceptance) = (rate(site_acc, site_tot), rate(shift_acc, shift_tot));
    let mut warnings = Vec::new();
    if site_acceptance < 0.01 {
        warnings.push(format!("site acceptance {:.2}%; the interaction is too strong for single-site moves", 100.0 * site_acceptance));
    }
    if shift_acceptance < 0.01 {
        warnings.push(format!("shift acceptance {:.2}%; try shift_step = {:.3e}", 100.0 * shift_acceptance, params.shift_step / 4.0));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ChainRun { samples, site_acceptance, shift_acceptance, warnings })
}

/// Mean and per-component covariance of an interaction-free chain with a
/// harmonic (or zero) potential and an optional Gaussian boundary weight,
/// where the chain is exactly Gaussian.
#[derive(Debug, Clone)]
pub struct GaussianChain {
    pub mean: Vec<Vec3>,
    pub covariance: DMatrix<f64>,
}

impl GaussianChain {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        if !matches!(spec.interaction, Interaction::None) {
            return Err(Error::Usage("the exact Gaussian chain needs Interaction::None".into()));
        }
        let n = spec.sites()?;
        let eps = spec.epsilon;
        let omega_sq = match spec.potential {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Harmonic { omega_sq } => omega_sq,
            _ => return Err(Error::Usage("the exact Gaussian chain needs a zero or harmonic potential".into())),
        };
        let mut q = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            q[(i, i)] += 1.0 / eps;
            q[(i + 1, i + 1)] += 1.0 / eps;
            q[(i, i + 1)] -= 1.0 / eps;
            q[(i + 1, i)] -= 1.0 / eps;
        }
        for i in 0..=n {
            q[(i, i)] += eps * trapezoid_weight(i, n) * omega_sq;
        }
        let mut rhs = vec![DVector::<f64>::zeros(n + 1); 3];
        match spec.boundary {
            None => {}
            Some(BoundaryWeight::GaussianDensity { center, width }) => {
                let p = 1.0 / (width * width);
                for i in [0, n] {
                    q[(i, i)] += p;
                    for (c, r) in rhs.iter_mut().enumerate() {
                        r[i] += p * center[c];
                    }
                }
            }
            Some(_) => return Err(Error::Usage("the exact Gaussian chain needs a Gaussian boundary weight".into())),
        }
        let chol = q
            .cholesky()
            .ok_or_else(|| Error::Domain("chain precision is not positive definite (add a potential or boundary weight)".into()))?;
        let covariance = chol.inverse();
        let comps: Vec<DVector<f64>> = rhs.iter().map(|r| &covariance * r).collect();
        let mean = (0..=n).map(|i| Vec3::new(comps[0][i], comps[1][i], comps[2][i])).collect();
        Ok(Self { mean, covariance })
    }

    /// `E[x_i · x_j]`.
    pub fn two_point(&self, i: usize, j: usize) -> f64 {
        3.0 * self.covariance[(i, j)] + self.mean[i].dot(&self.mean[j])
    }

    /// `E|x_j − x_i|²`.
    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.two_point(i, i) + self.two_point(j, j) - 2.0 * self.two_point(i, j)
    }
}

/// Per-component covariance of the continuum measure `e^{−½ω²∫|B|²} dx ⊗ dW`
/// on `[−T, T]` with free ends: the Neumann Green's function of `−d²/ds² + ω²`.
pub fn harmonic_free_end_covariance(omega: f64, half_width: f64, s: f64, t: f64) -> f64 {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    (omega * (lo + half_width)).cosh() * (omega * (half_width - hi)).cosh() / (omega * (2.0 * omega * half_width).sinh())
}

/// One lattice spacing of a continuum comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumRow {
    pub epsilon: f64,
    /// Monte Carlo estimate on the chain, when sampled.
    pub chain: Option<Estimate>,
    /// Exact chain value, when the chain is Gaussian.
    pub exact: Option<f64>,
    /// `|chain value − continuum|`, using the exact value when available.
    pub gap: f64,
    /// Combined standard error of the gap (zero for exact-vs-exact).
    pub gap_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumReport {
    pub observable: Observable,
    pub continuum: Estimate,
    pub rows: Vec<ContinuumRow>,
    /// Log-log slope of gap against ε.
    pub order: f64,
}

impl ContinuumReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "observable,epsilon,chain,chain_stderr,exact,continuum,continuum_stderr,gap,gap_stderr")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                self.observable.name(),
                r.epsilon,
                r.chain.map_or(f64::NAN, |e| e.mean),
                r.chain.map_or(f64::NAN, |e| e.stderr_or_nan()),
                r.exact.unwrap_or(f64::NAN),
                self.continuum.mean,
                self.continuum.stderr.unwrap_or(0.0),
                r.gap,
                r.gap_stderr
            )?;
        }
        Ok(())
    }

    /// Every refinement shrank the gap by at least the factor the spacing shrank
    /// (within `slack` relative).
    pub fn at_least_linear(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let ratio = w[0].epsilon / w[1].epsilon;
            w[1].gap <= w[0].gap / ratio * (1.0 + slack)
        })
    }
}

/// Compare an observable across lattice spacings with a continuum value.
///
/// Chains are sampled when `params` is given (spec `i` uses stream
/// `("spinchain.continuum_compare", i)`); Gaussian chains also get their
/// exact value, which then defines the gap.
pub fn continuum_compare(
    specs: &[ChainSpec],
    continuum: Estimate,
    observable: &Observable,
    params: Option<&ChainParams>,
    seeds: &SeedTree,
) -> Result<ContinuumReport> {
    let rows: Vec<ContinuumRow> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let chain = match params {
                Some(p) => {
                    let run = chain_mcmc(spec, p, &mut seeds.stream("spinchain.continuum_compare", i as u64))?;
                    let values: Vec<f64> = run.samples.iter().map(|s| observable.eval(s)).collect::<Result<_>>()?;
                    Some(batch_means(&values, DEFAULT_BATCHES))
                }
                None => None,
            };
            let exact = match GaussianChain::new(spec) {
                Ok(g) => Some(exact_observable(&g, spec, observable)?),
                Err(_) => None,
            };
            let cont_se = continuum.stderr.unwrap_or(0.0);
            let (gap, gap_stderr) = match (exact, chain) {
                (Some(v), _) => ((v - continuum.mean).abs(), cont_se),
                (None, Some(e)) => ((e.mean - continuum.mean).abs(), e.stderr_or_nan().hypot(cont_se)),
                (None, None) => return Err(Error::Usage("a non-Gaussian chain must be sampled".into())),
            };
            Ok(ContinuumRow { epsilon: spec.epsilon, chain, exact, gap, gap_stderr })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gap.ln()).collect();
    let order = if rows.len() >= 2 { linear_fit(&xs, &ys).0 } else { f64::NAN };
    Ok(ContinuumReport { observable: *observable, continuum, rows, order })
}

fn exact_observable(g: &GaussianChain, spec: &ChainSpec, observable: &Observable) -> Result<f64> {
    let probe = Path::constant(spec.half_width, spec.steps(), Vec3::zeros())?;
    let idx = |t: f64| probe.index_of(t);
    Ok(match *observable {
        Observable::One => 1.0,
        Observable::SquaredNorm { time } => g.two_point(idx(time)?, idx(time)?),
        Observable::Component { time, axis } => g.mean[idx(time)?][axis.min(2)],
        Observable::TwoPoint { s, t } => g.two_point(idx(s)?, idx(t)?),
        Observable::Ball { .. } => return Err(Error::Usage("no closed form for ball probabilities".into())),
    })
}
