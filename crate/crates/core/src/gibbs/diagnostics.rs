//! Observables and the infinite-volume diagnostics: tightness moments,
//! volume scans and localization tails.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::mcmc::{mcmc_chains, pooled_samples, McmcParams};
use crate::gibbs::target::GibbsTarget;
use crate::paths::{truncate, Path};
use crate::rng::SeedTree;
use crate::stats::{batch_means, linear_fit, Estimate, MIN_BATCHES};
use crate::Vec3;

/// Default number of batches for batch-means error bars.
pub const DEFAULT_BATCHES: usize = 20;

/// Bounded or moment observables of a path at grid-aligned times in `[−T, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `f ≡ 1`
    One,
    /// `|B_t|²`
    SquaredNorm { time: f64 },
    /// Component `axis` of `B_t`.
    Component { time: f64, axis: usize },
    /// `B_s · B_t`
    TwoPoint { s: f64, t: f64 },
    /// `𝟙{|B_t| ≤ radius}`
    Ball { time: f64, radius: f64 },
}

impl Observable {
    pub fn eval(&self, path: &Path) -> Result<f64> {
        let at = |t: f64| path.index_of(t).map(|j| path.points()[j]);
        Ok(match *self {
            Observable::One => 1.0,
            Observable::SquaredNorm { time } => at(time)?.norm_squared(),
            Observable::Component { time, axis } => {
                if axis > 2 {
                    return Err(Error::Usage(format!("axis must be 0, 1 or 2, got {axis}")));
                }
                at(time)?[axis]
            }
            Observable::TwoPoint { s, t } => at(s)?.dot(&at(t)?),
            Observable::Ball { time, radius } => (at(time)?.norm() <= radius) as u8 as f64,
        })
    }

    pub fn name(&self) -> String {
        match self {
            Observable::One => "one".into(),
            Observable::SquaredNorm { time } => format!("sq_norm@{time}"),
            Observable::Component { time, axis } => format!("x{axis}@{time}"),
            Observable::TwoPoint { s, t } => format!("two_point@{s},{t}"),
            Observable::Ball { time, radius } => format!("ball{radius}@{time}"),
        }
    }
}

/// Batch-means estimate of `E[f(B_{t₁}, …, B_{t_k})]`; the times must be grid nodes.
pub fn estimate_observable<F>(samples: &[Path], times: &[f64], f: F, n_batches: usize) -> Result<Estimate>
where
    F: Fn(&[Vec3]) -> f64,
{
    let first = samples.first().ok_or_else(|| Error::Usage("no samples".into()))?;
    let idx: Vec<usize> = times.iter().map(|&t| first.index_of(t)).collect::<Result<_>>()?;
    let mut buf = vec![Vec3::zeros(); idx.len()];
    let values: Vec<f64> = samples
        .iter()
        .map(|p| {
            for (b, &j) in buf.iter_mut().zip(&idx) {
                *b = p.points()[j];
            }
            f(&buf)
        })
        .collect();
    Ok(batch_means(&values, n_batches))
}

/// [`estimate_observable`] for a catalog observable.
pub fn estimate(samples: &[Path], observable: &Observable, n_batches: usize) -> Result<Estimate> {
    let values: Vec<f64> = samples.iter().map(|p| observable.eval(p)).collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Usage("no samples".into()));
    }
    Ok(batch_means(&values, n_batches))
}

/// Settings of a tightness scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessParams {
    /// Time lags; each must be a multiple of the grid step.
    pub lags: Vec<f64>,
    /// Exponents `n` of `E|B_t − B_s|^{2n}`.
    pub moments: Vec<u32>,
    /// Levels `Λ` of the escape probability `μ(|B₀|² > Λ)`.
    pub levels: Vec<f64>,
    /// Clamp levels `a` for the truncated first moment.
    pub truncations: Vec<f64>,
    pub n_batches: usize,
}

impl Default for TightnessParams {
    fn default() -> Self {
        Self {
            lags: vec![0.0625, 0.125, 0.1875, 0.25],
            moments: vec![1, 2],
            levels: vec![1.0, 4.0, 9.0],
            truncations: vec![0.25, 0.5, 1.0, 2.0, f64::INFINITY],
            n_batches: DEFAULT_BATCHES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFit {
    pub moment: u32,
    /// Estimate of `E|B_{s+h} − B_s|^{2n}` per lag.
    pub per_lag: Vec<Estimate>,
    pub slope: f64,
    /// Spread of per-batch slopes.
    pub slope_stderr: f64,
    /// `D` in `E|B_t − B_s|^{2n} ≈ D |t − s|^n` with the exponent held at `n`
    /// (geometric mean of `E/|t − s|^n` over the lags).
    pub prefactor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    pub half_width: f64,
    pub lags: Vec<f64>,
    pub fits: Vec<MomentFit>,
    /// `(Λ, μ(|B₀|² > Λ))`
    pub escape: Vec<(f64, Estimate)>,
    /// `(a, E|h_a(B_{s+h}) − h_a(B_s)|²)` at the first lag.
    pub truncated: Vec<(f64, Estimate)>,
}

impl TightnessReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "T,moment,lag,estimate,stderr,slope,slope_stderr,prefactor")?;
        for f in &self.fits {
            for (lag, e) in self.lags.iter().zip(&f.per_lag) {
                writeln!(
                    out,
                    "{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                    self.half_width,
                    f.moment,
                    lag,
                    e.mean,
                    e.stderr_or_nan(),
                    f.slope,
                    f.slope_stderr,
                    f.prefactor
                )?;
            }
        }
        Ok(())
    }
}

// Start indices of pairs (i, i+lag) inside the central half of the interval,
// or the whole interval when that window is too short.
fn central_pairs(path: &Path, lag: usize) -> std::ops::Range<usize> {
    let n = path.steps();
    let lo = n / 4;
    let hi = n - n / 4;
    if hi >= lo + lag + 1 {
        lo..hi - lag + 1
    } else {
        0..n - lag + 1
    }
}

/// Tightness moments from existing samples.
pub fn tightness_from_samples(samples: &[Path], params: &TightnessParams) -> Result<TightnessReport> {
    let first = samples.first().ok_or_else(|| Error::Usage("no samples".into()))?;
    let dt = first.dt();
    let half_width = (first.t_end() - first.t0()) / 2.0;
    let steps: Vec<usize> = params
        .lags
        .iter()
        .map(|&h| {
            let k = (h / dt).round();
            if !(h > 0.0 && h <= 2.0 * half_width) || (k * dt - h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::Usage(format!("lag {h} is not a positive multiple of dt = {dt} within (0, 2T]")));
            }
            Ok(k as usize)
        })
        .collect::<Result<_>>()?;
    if steps.len() < 2 {
        return Err(Error::Usage("a slope fit needs at least two lags".into()));
    }

    let log_lags: Vec<f64> = params.lags.iter().map(|h| h.ln()).collect();
    let nb = params.n_batches.min(samples.len());
    let mut fits = Vec::new();
    for &m in &params.moments {
        // per-sample spatial average over the central window, one series per lag
        let series: Vec<Vec<f64>> = steps
            .iter()
            .map(|&k| {
                samples
                    .iter()
                    .map(|p| {
                        let r = central_pairs(p, k);
                        let len = r.len() as f64;
                        r.map(|i| (p.points()[i + k] - p.points()[i]).norm_squared().powi(m as i32)).sum::<f64>() / len
                    })
                    .collect()
            })
            .collect();
        let per_lag: Vec<Estimate> = series.iter().map(|s| batch_means(s, nb)).collect();
        let logs: Vec<f64> = per_lag.iter().map(|e| e.mean.ln()).collect();
        let (slope, _) = linear_fit(&log_lags, &logs);
        let prefactor =
            (logs.iter().zip(&log_lags).map(|(y, x)| y - m as f64 * x).sum::<f64>() / logs.len() as f64).exp();
        let slope_stderr = if nb >= MIN_BATCHES {
            let size = samples.len() / nb;
            let slopes: Vec<f64> = (0..nb)
                .map(|b| {
                    let ys: Vec<f64> = series
                        .iter()
                        .map(|s| (s[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).ln())
                        .collect();
                    linear_fit(&log_lags, &ys).0
                })
                .collect();
            crate::stats::mean_stderr(&slopes).1
        } else {
            f64::NAN
        };
        fits.push(MomentFit { moment: m, per_lag, slope, slope_stderr, prefactor });
    }

    let mid = first.index_of(0.0)?;
    let escape = params
        .levels
        .iter()
        .map(|&l| {
            let v: Vec<f64> = samples.iter().map(|p| (p.points()[mid].norm_squared() > l) as u8 as f64).collect();
            (l, batch_means(&v, nb))
        })
        .collect();
    let k = steps[0];
    let truncated = params
        .truncations
        .iter()
        .map(|&a| {
            let v: Vec<f64> = samples
                .iter()
                .map(|p| {
                    let t = truncate(p, a)?;
                    let r = central_pairs(&t, k);
                    let len = r.len() as f64;
                    Ok(r.map(|i| (t.points()[i + k] - t.points()[i]).norm_squared()).sum::<f64>() / len)
                })
                .collect::<Result<_>>()?;
            Ok((a, batch_means(&v, nb)))
        })
        .collect::<Result<_>>()?;
    Ok(TightnessReport { half_width, lags: params.lags.clone(), fits, escape, truncated })
}

/// Sample the target and fit the moment exponents.
pub fn tightness_scan(
    target: &GibbsTarget,
    params: &TightnessParams,
    mcmc: &McmcParams,
    n_chains: usize,
    seeds: &SeedTree,
) -> Result<TightnessReport> {
    let runs = mcmc_chains(target, mcmc, n_chains, seeds)?;
    tightness_from_samples(&pooled_samples(&runs), params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRow {
    pub half_width: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeScanReport {
    pub observable: Observable,
    pub rows: Vec<VolumeRow>,
    /// For consecutive rows: `(difference, combined stderr)`.
    pub differences: Vec<(f64, f64)>,
    /// Last difference within three combined standard errors.
    pub converged: bool,
}

impl VolumeScanReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "observable,T,estimate,stderr,diff_prev,combined_stderr")?;
        for (i, r) in self.rows.iter().enumerate() {
            let (d, s) = if i == 0 { (f64::NAN, f64::NAN) } else { self.differences[i - 1] };
            writeln!(
                out,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e}",
                self.observable.name(),
                r.half_width,
                r.estimate.mean,
                r.estimate.stderr_or_nan(),
                d,
                s
            )?;
        }
        Ok(())
    }
}

/// Estimate one observable for a sequence of targets that differ only in `T`.
///
/// Target `i` uses the seed subtree `("gibbs.volume_scan", i)`.
pub fn volume_scan(
    targets: &[GibbsTarget],
    observable: &Observable,
    mcmc: &McmcParams,
    n_chains: usize,
    seeds: &SeedTree,
) -> Result<VolumeScanReport> {
    let rows: Vec<VolumeRow> = targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let runs = mcmc_chains(t, mcmc, n_chains, &seeds.child("gibbs.volume_scan", i as u64))?;
            Ok(VolumeRow { half_width: t.half_width, estimate: estimate(&pooled_samples(&runs), observable, DEFAULT_BATCHES)? })
        })
        .collect::<Result<_>>()?;
    Ok(volume_report(*observable, rows))
}

pub fn volume_report(observable: Observable, rows: Vec<VolumeRow>) -> VolumeScanReport {
    let differences: Vec<(f64, f64)> = rows
        .windows(2)
        .map(|w| {
            let d = w[1].estimate.mean - w[0].estimate.mean;
            (d, w[0].estimate.stderr_or_nan().hypot(w[1].estimate.stderr_or_nan()))
        })
        .collect();
    let converged = differences.last().is_some_and(|&(d, s)| d == 0.0 || d.abs() <= 3.0 * s);
    VolumeScanReport { observable, rows, differences, converged }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub c: f64,
    pub gamma: f64,
    /// `(m, E[ρ_m(B₀)])` with `ρ_m = min(e^{c|x|^γ}, m)`.
    pub rows: Vec<(f64, Estimate)>,
    /// Increment between the last two levels.
    pub last_increment: Estimate,
    /// The last increment is zero or within three standard errors of zero.
    pub stable: bool,
}

/// Truncated estimates of `E[e^{c|B₀|^γ}]` at increasing clamp levels `m`.
pub fn localization_tail(samples: &[Path], c: f64, gamma: f64, levels: &[f64], n_batches: usize) -> Result<LocalizationReport> {
    if !(c >= 0.0) || !(gamma > 0.0) {
        return Err(Error::Domain(format!("need c >= 0 and gamma > 0, got c={c}, gamma={gamma}")));
    }
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("need at least two strictly increasing levels".into()));
    }
    let first = samples.first().ok_or_else(|| Error::Usage("no samples".into()))?;
    let mid = first.index_of(0.0)?;
    let raw: Vec<f64> = samples.iter().map(|p| (c * p.points()[mid].norm().powf(gamma)).exp()).collect();
    let clamp = |m: f64| -> Vec<f64> { raw.iter().map(|&r| r.min(m)).collect() };
    let rows: Vec<(f64, Estimate)> = levels.iter().map(|&m| (m, batch_means(&clamp(m), n_batches))).collect();
    let (hi, lo) = (clamp(levels[levels.len() - 1]), clamp(levels[levels.len() - 2]));
    let diff: Vec<f64> = hi.iter().zip(&lo).map(|(a, b)| a - b).collect();
    let last_increment = batch_means(&diff, n_batches);
    let stable = last_increment.mean == 0.0 || last_increment.stderr.is_some_and(|s| last_increment.mean <= 3.0 * s);
    Ok(LocalizationReport { c, gamma, rows, last_increment, stable })
}

/// Pathwise check of `Ŝ ≥ −(T/3)·∫|φ̂|²/(2ω)` over samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub paths: usize,
    pub violations: usize,
    pub min_slack: f64,
}

pub fn bound_check(target: &GibbsTarget, samples: &[Path]) -> Result<BoundCheck> {
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for p in samples {
        let s = target.paper_bound_slack(p)?;
        violations += (s < 0.0) as usize;
        min_slack = min_slack.min(s);
    }
    Ok(BoundCheck { paths: samples.len(), violations, min_slack })
}
