//! Metropolis–Hastings on (start point, increments) for a [`GibbsTarget`].
//!
//! Every proposal preserves the reference measure Lebesgue(start) ⊗ Wiener,
//! so acceptance depends only on the change of the log-weight:
//!
//! * global preconditioned Crank–Nicolson: `δB' = √(1−β²) δB + β ξ`;
//! * translation of the whole path by a symmetric Gaussian step (`Ŝ` only
//!   sees differences, so it is unchanged);
//! * block moves: Crank–Nicolson on the Brownian-bridge deviation of a block
//!   of nodes with fixed ends, or on the free-end deviation for the first
//!   and last block. `Ŝ` is updated from the affected pair terms only and
//!   checked against a full recomputation at a fixed cadence.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::potential::trapezoid_weight;
use crate::gibbs::target::GibbsTarget;
use crate::paths::{gaussian_increments, sample_brownian, Path};
use crate::rng::SeedTree;
use crate::stochint::{s_hat_partial, s_hat_with};
use crate::Vec3;

/// Sampler settings. `beta`, `local_beta` and `endpoint_step` are starting
/// values when `adapt` is set; they are frozen before measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcParams {
    /// Measured sweeps.
    pub sweeps: usize,
    pub warmup: usize,
    /// Keep every `thin`-th measured sweep.
    pub thin: usize,
    pub beta: f64,
    pub local_beta: f64,
    /// Nodes per block move (at least 2).
    pub block_len: usize,
    /// Translation step; defaults to half the boundary weight's width.
    pub endpoint_step: Option<f64>,
    pub adapt: bool,
    /// Full `Ŝ` recomputation after this many accepted block moves.
    pub delta_check_every: usize,
}

impl Default for McmcParams {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            warmup: 500,
            thin: 1,
            beta: 0.2,
            local_beta: 0.5,
            block_len: 8,
            endpoint_step: None,
            adapt: true,
            delta_check_every: 50,
        }
    }
}

impl McmcParams {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.block_len < 2 || self.delta_check_every == 0 {
            return Err(Error::Config("mcmc needs thin >= 1, block_len >= 2 and delta_check_every >= 1".into()));
        }
        for (name, b) in [("beta", self.beta), ("local_beta", self.local_beta)] {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {b}")));
            }
        }
        if let Some(s) = self.endpoint_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("endpoint_step must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AcceptanceStats {
    pub global: MoveStats,
    pub translation: MoveStats,
    pub local: MoveStats,
}

/// Output of one chain.
#[derive(Debug, Clone)]
pub struct McmcRun {
    pub samples: Vec<Path>,
    /// Acceptance during measurement only.
    pub acceptance: AcceptanceStats,
    /// Parameters in force during measurement.
    pub tuned: McmcParams,
    pub warnings: Vec<String>,
    /// Number of full `Ŝ` recomputations that confirmed the running value.
    pub delta_checks: usize,
    /// Proposals rejected during measurement because they left the kernel
    /// table's range; nonzero means the samples are conditioned on that range.
    pub out_of_range: u64,
}

const ADAPT_WINDOW: usize = 20;
const TARGET_GLOBAL: f64 = 0.25;
const TARGET_LOCAL: f64 = 0.35;
const DELTA_TOL: f64 = 1e-10;

// A proposal whose displacements leave the kernel table is rejected rather
// than aborting the chain.
fn in_range<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(x) => Ok(Some(x)),
        Err(Error::Range { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `√(1−β²)·old + β·fresh`, componentwise.
pub(crate) fn pcn(old: &[Vec3], fresh: &[Vec3], beta: f64) -> Vec<Vec3> {
    let c = (1.0 - beta * beta).sqrt();
    old.iter().zip(fresh).map(|(d, f)| d * c + f * beta).collect()
}

/// Chain state with cached pieces of the log-weight.
pub(crate) struct Chain<'a> {
    target: &'a GibbsTarget,
    path: Path,
    v: Vec<f64>,
    log_psi: [f64; 2],
    // raw Ŝ, zero without coupling
    s_hat: f64,
    moves_since_check: usize,
    pub(crate) delta_checks: usize,
    pub(crate) out_of_range: u64,
}

/// Which part of the path a block move resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    /// Nodes `a+1..b` with `B_a`, `B_b` fixed.
    Interior(usize, usize),
    /// Nodes `a+1..=n` with `B_a` fixed.
    RightFree(usize),
    /// Nodes `0..b` with `B_b` fixed.
    LeftFree(usize),
}

impl<'a> Chain<'a> {
    pub(crate) fn new(target: &'a GibbsTarget, path: Path) -> Result<Self> {
        target.check_grid(&path)?;
        let mut c = Chain {
            target,
            v: Vec::new(),
            log_psi: [0.0; 2],
            s_hat: 0.0,
            path,
            moves_since_check: 0,
            delta_checks: 0,
            out_of_range: 0,
        };
        c.v = c.potential_values(&c.path)?;
        c.log_psi = [target.boundary.log_psi(&c.path.start()), target.boundary.log_psi(&c.path.end())];
        c.s_hat = c.full_s_hat(&c.path)?;
        Ok(c)
    }

    pub(crate) fn path(&self) -> &Path {
        &self.path
    }

    fn alpha_sq(&self) -> f64 {
        self.target.alpha * self.target.alpha
    }

    fn full_s_hat(&self, path: &Path) -> Result<f64> {
        match (&self.target.kernel, self.target.needs_kernel()) {
            (Some(t), true) => s_hat_with(path, t.as_ref()),
            _ => Ok(0.0),
        }
    }

    fn potential_values(&self, path: &Path) -> Result<Vec<f64>> {
        let dt = path.dt();
        path.points()
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let v = self.target.potential.value(x, dt);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::numerical("mcmc", format!("V = {v} at node {j}")))
                }
            })
            .collect()
    }

    fn potential_sum(&self, v: &[f64], nodes: std::ops::Range<usize>) -> f64 {
        let n = self.path.steps();
        nodes.map(|j| trapezoid_weight(j, n) * v[j]).sum::<f64>() * self.path.dt()
    }

    /// Current log-weight from the cached pieces.
    pub(crate) fn log_weight(&self) -> f64 {
        self.log_psi[0] + self.log_psi[1]
            - self.potential_sum(&self.v, 0..self.v.len())
            - self.alpha_sq() * self.s_hat
            - self.target.diagonal_energy(&self.path)
    }

    fn accept<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> bool {
        if delta.is_nan() {
            return false;
        }
        delta >= 0.0 || rng.random::<f64>().ln() < delta
    }

    pub(crate) fn global_move<R: Rng + ?Sized>(&mut self, beta: f64, rng: &mut R) -> Result<bool> {
        let fresh = gaussian_increments(self.path.steps(), self.path.dt(), rng);
        let inc = pcn(self.path.increments(), &fresh, beta);
        let new = Path::from_increments(self.path.t0(), self.path.dt(), self.path.start(), &inc)?;
        let end_psi = self.target.boundary.log_psi(&new.end());
        if end_psi == f64::NEG_INFINITY {
            return Ok(false);
        }
        let v = self.potential_values(&new)?;
        let Some(s) = in_range(self.full_s_hat(&new))? else {
            self.out_of_range += 1;
            return Ok(false);
        };
        let delta = (end_psi - self.log_psi[1]) - (self.potential_sum(&v, 0..v.len()) - self.potential_sum(&self.v, 0..v.len()))
            - self.alpha_sq() * (s - self.s_hat)
            - (self.target.diagonal_energy(&new) - self.target.diagonal_energy(&self.path));
        let ok = Self::accept(delta, rng);
        if ok {
            self.path = new;
            self.v = v;
            self.log_psi[1] = end_psi;
            self.s_hat = s;
        }
        Ok(ok)
    }

    pub(crate) fn translation_move<R: Rng + ?Sized>(&mut self, step: f64, rng: &mut R) -> Result<bool> {
        let shift = Vec3::from_fn(|_, _| step * rng.sample::<f64, _>(StandardNormal));
        let new = self.path.translated(&shift);
        let psi = [self.target.boundary.log_psi(&new.start()), self.target.boundary.log_psi(&new.end())];
        let v = if self.target.potential.is_zero() { self.v.clone() } else { self.potential_values(&new)? };
        let delta = (psi[0] + psi[1] - self.log_psi[0] - self.log_psi[1])
            - (self.potential_sum(&v, 0..v.len()) - self.potential_sum(&self.v, 0..v.len()));
        let ok = psi[0] > f64::NEG_INFINITY && psi[1] > f64::NEG_INFINITY && Self::accept(delta, rng);
        if ok {
            self.path = new;
            self.v = v;
            self.log_psi = psi;
        }
        Ok(ok)
    }

    pub(crate) fn block_move<R: Rng + ?Sized>(&mut self, block: Block, beta: f64, rng: &mut R) -> Result<bool> {
        let n = self.path.steps();
        let dt = self.path.dt();
        let pts = self.path.points();
        let c = (1.0 - beta * beta).sqrt();
        let normal = |rng: &mut R| Vec3::from_fn(|_, _| dt.sqrt() * rng.sample::<f64, _>(StandardNormal));
        let mut new_pts = pts.to_vec();
        // (changed nodes, changed increments)
        let (nodes, incs) = match block {
            Block::Interior(a, b) => {
                let m = b - a;
                let mut w = vec![Vec3::zeros(); m + 1];
                for i in 1..=m {
                    w[i] = w[i - 1] + normal(rng);
                }
                for i in 1..m {
                    let s = i as f64 / m as f64;
                    let lin = pts[a] + (pts[b] - pts[a]) * s;
                    let fresh = w[i] - w[m] * s;
                    new_pts[a + i] = lin + (pts[a + i] - lin) * c + fresh * beta;
                }
                (a + 1..b, a..b)
            }
            Block::RightFree(a) => {
                let mut w = Vec3::zeros();
                for i in a + 1..=n {
                    w += normal(rng);
                    new_pts[i] = pts[a] + (pts[i] - pts[a]) * c + w * beta;
                }
                (a + 1..n + 1, a..n)
            }
            Block::LeftFree(b) => {
                let mut w = Vec3::zeros();
                for i in (0..b).rev() {
                    w += normal(rng);
                    new_pts[i] = pts[b] + (pts[i] - pts[b]) * c + w * beta;
                }
                (0..b, 0..b)
            }
        };
        let new = Path::from_points(self.path.t0(), dt, new_pts)?;
        let psi = [self.target.boundary.log_psi(&new.start()), self.target.boundary.log_psi(&new.end())];
        if psi[0] == f64::NEG_INFINITY || psi[1] == f64::NEG_INFINITY {
            return Ok(false);
        }
        let mut v = self.v.clone();
        for j in nodes.clone() {
            let x = self.target.potential.value(&new.points()[j], dt);
            if !x.is_finite() {
                return Err(Error::numerical("mcmc", format!("V = {x} at node {j}")));
            }
            v[j] = x;
        }
        let ds = match (&self.target.kernel, self.target.needs_kernel()) {
            (Some(t), true) => match in_range(s_hat_partial(&new, t.as_ref(), incs.clone()))? {
                Some(s) => s - s_hat_partial(&self.path, t.as_ref(), incs)?,
                None => {
                    self.out_of_range += 1;
                    return Ok(false);
                }
            },
            _ => 0.0,
        };
        let delta = (psi[0] + psi[1] - self.log_psi[0] - self.log_psi[1])
            - (self.potential_sum(&v, nodes.clone()) - self.potential_sum(&self.v, nodes))
            - self.alpha_sq() * ds
            - (self.target.diagonal_energy(&new) - self.target.diagonal_energy(&self.path));
        let ok = Self::accept(delta, rng);
        if ok {
            self.path = new;
            self.v = v;
            self.log_psi = psi;
            self.s_hat += ds;
            self.moves_since_check += 1;
        }
        Ok(ok)
    }

    /// Compare the running `Ŝ` with a full recomputation and resynchronize.
    pub(crate) fn check_delta(&mut self) -> Result<()> {
        let full = self.full_s_hat(&self.path)?;
        if (full - self.s_hat).abs() > DELTA_TOL * full.abs().max(1.0) {
            return Err(Error::numerical(
                "mcmc delta update",
                format!("running Ŝ = {} but full recomputation gives {full}", self.s_hat),
            ));
        }
        self.s_hat = full;
        self.moves_since_check = 0;
        self.delta_checks += 1;
        Ok(())
    }

    /// Blocks covering the path with a random offset.
    fn blocks<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<Block> {
        let n = self.path.steps();
        if len >= n {
            return vec![Block::RightFree(0)];
        }
        let offset = rng.random_range(0..len);
        let mut cuts = vec![0];
        let mut c = if offset == 0 { len } else { offset };
        while c < n {
            cuts.push(c);
            c += len;
        }
        cuts.push(n);
        cuts.windows(2)
            .map(|w| match (w[0], w[1]) {
                (0, b) => Block::LeftFree(b),
                (a, b) if b == n => Block::RightFree(a),
                (a, b) => Block::Interior(a, b),
            })
            .filter(|b| !matches!(b, Block::Interior(a, b) if b - a < 2))
            .collect()
    }
}

/// Run one chain started from a Brownian path at the boundary weight's
/// center, or from the constant path there if the Brownian one does not fit
/// the kernel table.
pub fn mcmc_run<R: Rng + ?Sized>(target: &GibbsTarget, params: &McmcParams, rng: &mut R) -> Result<McmcRun> {
    let start = sample_brownian(target.half_width, target.steps, target.boundary.center(), rng)?;
    let start = match in_range(target.interaction(&start))? {
        Some(_) => start,
        None => Path::constant(target.half_width, target.steps, target.boundary.center())?,
    };
    mcmc_run_from(target, params, start, rng)
}

/// Run one chain from a given initial path.
pub fn mcmc_run_from<R: Rng + ?Sized>(target: &GibbsTarget, params: &McmcParams, start: Path, rng: &mut R) -> Result<McmcRun> {
    params.validate()?;
    target.validate()?;
    let mut chain = Chain::new(target, start)?;
    if chain.log_weight() == f64::NEG_INFINITY {
        return Err(Error::Domain("initial path has zero boundary weight".into()));
    }
    let mut beta = params.beta;
    let mut local_beta = params.local_beta;
    let mut step = params.endpoint_step.unwrap_or(0.5 * target.boundary.width());
    let mut window = AcceptanceStats::default();
    let mut stats = AcceptanceStats::default();
    let mut samples = Vec::with_capacity(params.sweeps / params.thin);
    let total = params.warmup + params.sweeps;
    let mut warmup_out_of_range = 0;
    for sweep in 0..total {
        let measuring = sweep >= params.warmup;
        if sweep == params.warmup {
            warmup_out_of_range = chain.out_of_range;
        }
        let s = if measuring { &mut stats } else { &mut window };
        s.global.record(chain.global_move(beta, rng)?);
        s.translation.record(chain.translation_move(step, rng)?);
        for b in chain.blocks(params.block_len, rng) {
            s.local.record(chain.block_move(b, local_beta, rng)?);
            if chain.moves_since_check >= params.delta_check_every {
                chain.check_delta()?;
            }
        }
        if !measuring && params.adapt && (sweep + 1) % ADAPT_WINDOW == 0 {
            beta = (beta * (window.global.rate() - TARGET_GLOBAL).exp()).clamp(1e-4, 1.0);
            local_beta = (local_beta * (window.local.rate() - TARGET_LOCAL).exp()).clamp(1e-4, 1.0);
            step = (step * (window.translation.rate() - TARGET_LOCAL).exp()).clamp(1e-6, 1e6);
            window = AcceptanceStats::default();
        }
        if measuring && (sweep - params.warmup) % params.thin == 0 {
            samples.push(chain.path().clone());
        }
    }
    if chain.moves_since_check > 0 && target.needs_kernel() {
        chain.check_delta()?;
    }
    let mut warnings = Vec::new();
    let out_of_range = chain.out_of_range - warmup_out_of_range;
    if out_of_range > 0 {
        let w = format!("{out_of_range} proposals left the kernel table range during measurement; enlarge r_max");
        log::warn!("{w}");
        warnings.push(w);
    }
    for (name, m, suggestion) in [
        ("global", stats.global, format!("beta = {:.3e}", beta / 4.0)),
        ("translation", stats.translation, format!("endpoint_step = {:.3e}", step / 4.0)),
        ("block", stats.local, format!("local_beta = {:.3e}", local_beta / 4.0)),
    ] {
        if m.proposed > 0 && m.rate() < 0.01 {
            let w = format!("acceptance of {name} moves is {:.2}%; try {suggestion}", 100.0 * m.rate());
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    Ok(McmcRun {
        samples,
        acceptance: stats,
        tuned: McmcParams {
            beta,
            local_beta,
            endpoint_step: Some(step),
            adapt: false,
            ..*params
        },
        warnings,
        delta_checks: chain.delta_checks,
        out_of_range,
    })
}

/// Independent chains in parallel; chain `i` draws from stream `("gibbs.mcmc", i)`.
pub fn mcmc_chains(target: &GibbsTarget, params: &McmcParams, n_chains: usize, seeds: &SeedTree) -> Result<Vec<McmcRun>> {
    (0..n_chains)
        .into_par_iter()
        .map(|i| mcmc_run(target, params, &mut seeds.stream("gibbs.mcmc", i as u64)))
        .collect()
}

/// Concatenate the samples of several chains in chain order.
pub fn pooled_samples(runs: &[McmcRun]) -> Vec<Path> {
    runs.iter().flat_map(|r| r.samples.iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::potential::{BoundaryWeight, PotentialSpec};
    use crate::kernel::{FormFactorSpec, KernelTable, TableGrid};
    use std::sync::Arc;

    fn coupled(steps: usize) -> GibbsTarget {
        let spec = FormFactorSpec::default();
        let table = Arc::new(KernelTable::build(&spec, TableGrid::new(10.0, 2.0, 81, 33).unwrap()).unwrap());
        GibbsTarget::new(1.0, PotentialSpec::Harmonic { omega_sq: 1.0 }, BoundaryWeight::default(), 1.0, steps, Some(table))
            .unwrap()
    }

    #[test]
    fn cached_weight_tracks_the_target() {
        let target = coupled(32);
        let mut rng = SeedTree::new(1).stream("t", 0);
        let start = sample_brownian(1.0, 32, Vec3::zeros(), &mut rng).unwrap();
        let mut chain = Chain::new(&target, start).unwrap();
        for _ in 0..30 {
            chain.global_move(0.3, &mut rng).unwrap();
            chain.translation_move(0.5, &mut rng).unwrap();
            for b in chain.blocks(6, &mut rng) {
                chain.block_move(b, 0.7, &mut rng).unwrap();
            }
        }
        let direct = target.log_weight(chain.path()).unwrap();
        assert!((chain.log_weight() - direct).abs() < 1e-9 * direct.abs().max(1.0));
        chain.check_delta().unwrap();
    }

    #[test]
    fn blocks_cover_the_path() {
        let target = GibbsTarget::new(0.0, PotentialSpec::Zero, BoundaryWeight::default(), 1.0, 20, None).unwrap();
        let chain = Chain::new(&target, Path::constant(1.0, 20, Vec3::zeros()).unwrap()).unwrap();
        let mut rng = SeedTree::new(2).stream("t", 0);
        for _ in 0..20 {
            let blocks = chain.blocks(6, &mut rng);
            assert!(matches!(blocks[0], Block::LeftFree(_)));
            assert!(matches!(blocks.last().unwrap(), Block::RightFree(_)));
        }
    }

    #[test]
    fn beta_one_is_an_independence_sampler() {
        let mut rng = SeedTree::new(4).stream("t", 0);
        let old = gaussian_increments(8, 0.25, &mut rng);
        let fresh = gaussian_increments(8, 0.25, &mut rng);
        assert_eq!(pcn(&old, &fresh, 1.0), fresh);
        let tiny = pcn(&old, &fresh, 1e-9);
        assert!(tiny.iter().zip(&old).all(|(a, b)| (a - b).norm() < 1e-8));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let target = coupled(16);
        let params = McmcParams { sweeps: 40, warmup: 20, ..Default::default() };
        let a = mcmc_run(&target, &params, &mut SeedTree::new(9).stream("gibbs.mcmc", 0)).unwrap();
        let b = mcmc_run(&target, &params, &mut SeedTree::new(9).stream("gibbs.mcmc", 0)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(a.delta_checks > 0);
    }

    // Flows between cells of any partition balance for a reversible kernel:
    // count transitions of a long run and compare N_ij with N_ji.
    fn flow_asymmetry(mut step: impl FnMut(&mut Chain, &mut crate::rng::StreamRng), stat: fn(&Path) -> f64) {
        let target = coupled(4);
        let mut rng = SeedTree::new(31).stream("t", 0);
        let start = sample_brownian(1.0, 4, Vec3::zeros(), &mut rng).unwrap();
        let mut chain = Chain::new(&target, start).unwrap();
        let mut pilot = Vec::new();
        for _ in 0..4000 {
            step(&mut chain, &mut rng);
            pilot.push(stat(chain.path()));
        }
        pilot.sort_by(f64::total_cmp);
        let edges = [pilot[1000], pilot[2000], pilot[3000]];
        let cell = |x: f64| edges.iter().filter(|&&e| x > e).count();
        let mut counts = [[0u32; 4]; 4];
        let mut c = cell(stat(chain.path()));
        for _ in 0..40_000 {
            step(&mut chain, &mut rng);
            let d = cell(stat(chain.path()));
            counts[c][d] += 1;
            c = d;
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let (a, b) = (counts[i][j] as f64, counts[j][i] as f64);
                assert!((a - b).abs() <= 5.0 * (a + b).sqrt() + 2.0, "cells {i},{j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn each_move_is_reversible_on_a_two_step_toy() {
        let sum_x = |p: &Path| p.points().iter().map(|x| x.x).sum::<f64>();
        flow_asymmetry(|c, r| { c.global_move(0.6, r).unwrap(); }, sum_x);
        flow_asymmetry(|c, r| { c.translation_move(0.7, r).unwrap(); }, sum_x);
        flow_asymmetry(|c, r| { c.block_move(Block::Interior(1, 3), 0.8, r).unwrap(); }, |p| p.points()[2].x);
        flow_asymmetry(|c, r| { c.block_move(Block::RightFree(2), 0.8, r).unwrap(); }, |p| p.points()[4].x);
        flow_asymmetry(|c, r| { c.block_move(Block::LeftFree(2), 0.8, r).unwrap(); }, |p| p.points()[0].x);
    }
}
