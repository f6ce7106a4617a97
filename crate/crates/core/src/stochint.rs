//! Kernel-side quantities of the pair interaction along a discretized path:
//! the off-diagonal double sum `ŝ`, the exact variance of the coupled single
//! integral `J`, and the diagonal term that links them.
//!
//! Increments are indexed from 0: `δB_i = B_{i+1} − B_i` is evaluated at its
//! left endpoint `B_i`, time `t_i`.

use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussfield::ModeSet;
use crate::kernel::KernelTable;
use crate::paths::{quadratic_variation, sample_brownian, Path};
use crate::rng::SeedTree;
use crate::{Mat3, Vec3};

/// A real symmetric pair kernel `W(X, t)` that can be contracted with two vectors.
pub trait PairKernel: Sync {
    /// `uᵀ W(x, t) v`.
    fn bilinear(&self, x: &Vec3, t: f64, u: &Vec3, v: &Vec3) -> Result<f64>;

    /// `W(0, 0)`.
    fn diagonal(&self) -> Mat3;
}

impl PairKernel for KernelTable {
    fn bilinear(&self, x: &Vec3, t: f64, u: &Vec3, v: &Vec3) -> Result<f64> {
        Ok(self.parts(x.norm(), t)?.bilinear(x, u, v))
    }

    fn diagonal(&self) -> Mat3 {
        Mat3::identity() * (2.0 / 3.0 * self.diag_const())
    }
}

/// `δB_j · W(B_j − B_l, t_j − t_l) δB_l` for `l < j`.
#[inline]
pub(crate) fn pair_term<K: PairKernel + ?Sized>(path: &Path, kernel: &K, l: usize, j: usize) -> Result<f64> {
    let p = path.points();
    let d = path.increments();
    kernel.bilinear(&(p[j] - p[l]), (j - l) as f64 * path.dt(), &d[j], &d[l])
}

/// Strictly lower-triangular double sum with an arbitrary kernel.
///
/// Rows are computed in parallel and summed in index order, so the result
/// does not depend on the thread count.
pub fn s_hat_with<K: PairKernel + ?Sized>(path: &Path, kernel: &K) -> Result<f64> {
    let n = path.steps();
    let rows: Vec<f64> = (1..n)
        .into_par_iter()
        .map(|j| (0..j).map(|l| pair_term(path, kernel, l, j)).sum::<Result<f64>>())
        .collect::<Result<_>>()?;
    Ok(rows.iter().sum())
}

/// Sum of the pair terms that involve at least one increment index in `changed`.
///
/// After a move that only alters increments in `changed` (and the positions
/// strictly inside that block), `ŝ_new − ŝ_old` equals the difference of this
/// quantity between the two paths.
pub(crate) fn s_hat_partial<K: PairKernel + ?Sized>(path: &Path, kernel: &K, changed: Range<usize>) -> Result<f64> {
    let n = path.steps();
    let mut s = 0.0;
    for j in changed.clone() {
        for l in 0..j {
            s += pair_term(path, kernel, l, j)?;
        }
    }
    for j in changed.end..n {
        for l in changed.clone() {
            s += pair_term(path, kernel, l, j)?;
        }
    }
    Ok(s)
}

/// Off-diagonal double sum with kernel values from the table.
///
/// Fails with a range error naming the required `r_max` when the path does
/// not fit the table.
pub fn s_hat(path: &Path, table: &KernelTable) -> Result<f64> {
    check_fits(path, table)?;
    s_hat_with(path, table)
}

pub(crate) fn check_fits(path: &Path, table: &KernelTable) -> Result<()> {
    // the bounding-box diagonal bounds the diameter and costs O(n)
    let (lo, hi) = path.points().iter().fold((path.start(), path.start()), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    if (hi - lo).norm() <= table.grid().r_max {
        return Ok(());
    }
    let diam = path.diameter();
    if diam > table.grid().r_max {
        return Err(Error::Range { radius: diam, r_max: table.grid().r_max });
    }
    Ok(())
}

/// Exact variance of `J` at this path under the mode-set covariance.
///
/// Uses the exponential recursion of each mode's time correlation, so the
/// cost is `O(n · modes)`.
pub fn variance_of_j(path: &Path, modes: &ModeSet) -> f64 {
    let dt = path.dt();
    let pts = path.points();
    let inc = path.increments();
    let per_mode: Vec<f64> = (0..modes.len())
        .into_par_iter()
        .map(|m| {
            let mode = &modes.modes()[m];
            let omega = modes.omega(m);
            let rho = (-omega * dt).exp();
            let a = modes.amplitude(m);
            let mut total = 0.0;
            for e in &mode.polarization {
                // z_i = a (e·δB_i) e^{ik·B_i}; R_i = Σ_{i'<i} ρ^{i−i'} z_{i'}
                let (mut rr, mut ri) = (0.0, 0.0);
                let (mut zr_prev, mut zi_prev) = (0.0, 0.0);
                let (mut diag, mut cross) = (0.0, 0.0);
                for (b, d) in pts.iter().zip(inc) {
                    rr = rho * (rr + zr_prev);
                    ri = rho * (ri + zi_prev);
                    let (s, c) = mode.k.dot(b).sin_cos();
                    let amp = a * e.dot(d);
                    let (zr, zi) = (amp * c, amp * s);
                    diag += zr * zr + zi * zi;
                    cross += zr * rr + zi * ri;
                    zr_prev = zr;
                    zi_prev = zi;
                }
                total += diag + 2.0 * cross;
            }
            total / (2.0 * omega)
        })
        .collect();
    per_mode.iter().sum()
}

/// `Σ_{j,l} δB_j · W(B_j − B_l, t_j − t_l) δB_l` over all pairs with an
/// arbitrary kernel; the `O(n²)` baseline for [`variance_of_j`].
pub fn variance_of_j_direct<K: PairKernel + ?Sized>(path: &Path, kernel: &K) -> Result<f64> {
    Ok(2.0 * s_hat_with(path, kernel)? + diagonal_sum(path, &kernel.diagonal()))
}

/// `Σ_j δB_j · M δB_j`.
pub fn diagonal_sum(path: &Path, m: &Mat3) -> f64 {
    path.increments().iter().map(|d| d.dot(&(m * d))).sum()
}

/// How the coincident-time (diagonal) part of `S` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalConvention {
    /// `(T/3) · ∫|φ̂|²/(2ω)`, independent of the path.
    PaperThird,
    /// `½ · (2/3) · ∫|φ̂|²/(2ω) · Σ_j |δB_j|²`, from the realized quadratic variation.
    StandardQv,
}

impl DiagonalConvention {
    pub const ALL: [DiagonalConvention; 2] = [DiagonalConvention::PaperThird, DiagonalConvention::StandardQv];

    /// Diagonal contribution for a path on `[−T, T]` and diagonal constant `diag_const`.
    pub fn diagonal(self, path: &Path, diag_const: f64) -> f64 {
        match self {
            DiagonalConvention::PaperThird => half_width(path) / 3.0 * diag_const,
            DiagonalConvention::StandardQv => diag_const / 3.0 * quadratic_variation(path).total,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DiagonalConvention::PaperThird => "paper_third",
            DiagonalConvention::StandardQv => "standard_qv",
        }
    }
}

fn half_width(path: &Path) -> f64 {
    (path.t_end() - path.t0()) / 2.0
}

/// `ŝ + diagonal(convention)`.
pub fn s_full(path: &Path, table: &KernelTable, convention: DiagonalConvention) -> Result<f64> {
    Ok(s_hat(path, table)? + convention.diagonal(path, table.diag_const()))
}

/// One path of a diagonal adjudication run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalRow {
    pub path_id: usize,
    pub s_hat: f64,
    pub var_j: f64,
    /// `½ Var(J) − ŝ`
    pub d: f64,
    pub paper_third: f64,
    pub standard_qv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalReport {
    pub half_width: f64,
    pub steps: usize,
    pub rows: Vec<DiagonalRow>,
    pub mean_d: f64,
    pub std_d: f64,
    /// `mean(d) / mean(prediction)` for each convention.
    pub ratio_paper_third: f64,
    pub ratio_standard_qv: f64,
    /// The single convention whose mean prediction lies within three
    /// path-to-path standard deviations of `mean(d)`; `None` if zero or both do.
    pub verdict: Option<DiagonalConvention>,
}

impl DiagonalReport {
    pub fn relative_std(&self) -> f64 {
        self.std_d / self.mean_d.abs()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let verdict = self.verdict.map_or("undecided", |v| v.name());
        writeln!(out, "path_id,s_hat,var_j,d,paper_third,standard_qv,verdict")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{verdict}",
                r.path_id, r.s_hat, r.var_j, r.d, r.paper_third, r.standard_qv
            )?;
        }
        Ok(())
    }
}

/// Sample `n_paths` Brownian paths on `[−T, T]` with `n` steps and compare
/// `½ Var(J) − ŝ` to both diagonal conventions.
///
/// `Var(J)` comes from the mode set and `ŝ` from the table, so the two sides
/// use independent evaluations of the kernel.
pub fn adjudicate_diagonal(
    table: &KernelTable,
    modes: &ModeSet,
    half_width: f64,
    n: usize,
    n_paths: usize,
    seeds: &SeedTree,
) -> Result<DiagonalReport> {
    if n_paths < 2 {
        return Err(Error::Domain("adjudication needs at least 2 paths".into()));
    }
    let d_const = table.diag_const();
    let rows: Vec<DiagonalRow> = (0..n_paths)
        .map(|i| {
            let mut rng = seeds.stream("stochint.adjudicate_diagonal", i as u64);
            let path = sample_brownian(half_width, n, Vec3::zeros(), &mut rng)?;
            let s = s_hat(&path, table)?;
            let v = variance_of_j(&path, modes);
            Ok(DiagonalRow {
                path_id: i,
                s_hat: s,
                var_j: v,
                d: 0.5 * v - s,
                paper_third: DiagonalConvention::PaperThird.diagonal(&path, d_const),
                standard_qv: DiagonalConvention::StandardQv.diagonal(&path, d_const),
            })
        })
        .collect::<Result<_>>()?;
    let ds: Vec<f64> = rows.iter().map(|r| r.d).collect();
    let mean_d = ds.iter().sum::<f64>() / ds.len() as f64;
    let std_d = crate::stats::std_dev(&ds);
    let mean_of = |f: fn(&DiagonalRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let pt = mean_of(|r| r.paper_third);
    let sq = mean_of(|r| r.standard_qv);
    let matches: Vec<DiagonalConvention> = [(DiagonalConvention::PaperThird, pt), (DiagonalConvention::StandardQv, sq)]
        .into_iter()
        .filter(|(_, p)| (mean_d - p).abs() <= 3.0 * std_d)
        .map(|(c, _)| c)
        .collect();
    Ok(DiagonalReport {
        half_width,
        steps: n,
        rows,
        mean_d,
        std_d,
        ratio_paper_third: mean_d / pt,
        ratio_standard_qv: mean_d / sq,
        verdict: (matches.len() == 1).then(|| matches[0]),
    })
}
