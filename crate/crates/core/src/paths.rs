//! Discretized Brownian paths on a uniform grid over `[-T, T]`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::Vec3;

/// Positions `B_{t_j}` at `t_j = t0 + j·dt`, `j = 0..=n`, with cached increments.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    t0: f64,
    dt: f64,
    points: Vec<Vec3>,
    increments: Vec<Vec3>,
}

impl Path {
    pub fn from_points(t0: f64, dt: f64, points: Vec<Vec3>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::Domain(format!("path grid needs finite t0 and dt > 0, got t0={t0}, dt={dt}")));
        }
        if points.len() < 2 {
            return Err(Error::Domain("a path needs at least one increment".into()));
        }
        if let Some(j) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Domain(format!("non-finite position at node {j}")));
        }
        let increments = points.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { t0, dt, points, increments })
    }

    /// Path starting at `start` with the given increments.
    pub fn from_increments(t0: f64, dt: f64, start: Vec3, increments: &[Vec3]) -> Result<Self> {
        let mut points = Vec::with_capacity(increments.len() + 1);
        let mut x = start;
        points.push(x);
        for d in increments {
            x += d;
            points.push(x);
        }
        Self::from_points(t0, dt, points)
    }

    /// Constant path at `x` over `[-T, T]` with `n` steps.
    pub fn constant(half_width: f64, n: usize, x: Vec3) -> Result<Self> {
        check_grid(half_width, n)?;
        Self::from_points(-half_width, 2.0 * half_width / n as f64, vec![x; n + 1])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of increments.
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// `δB_j = B_{t_j} − B_{t_{j−1}}`, stored at index `j − 1`.
    pub fn increments(&self) -> &[Vec3] {
        &self.increments
    }

    pub fn start(&self) -> Vec3 {
        self.points[0]
    }

    pub fn end(&self) -> Vec3 {
        self.points[self.steps()]
    }

    /// Grid index of time `t`; errors if `t` is not a node.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let u = (t - self.t0) / self.dt;
        let j = u.round();
        if (u - j).abs() > 1e-9 || j < 0.0 || j as usize > self.steps() {
            return Err(Error::Usage(format!("time {t} is not a node of the path grid")));
        }
        Ok(j as usize)
    }

    /// Largest pairwise distance between positions.
    pub fn diameter(&self) -> f64 {
        let mut d2: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d2 = d2.max((a - b).norm_squared());
            }
        }
        d2.sqrt()
    }

    /// Same increments, positions shifted by `shift`.
    pub fn translated(&self, shift: &Vec3) -> Path {
        Path {
            t0: self.t0,
            dt: self.dt,
            points: self.points.iter().map(|p| p + shift).collect(),
            increments: self.increments.clone(),
        }
    }

    /// Time reflection `t ↦ −t` about the grid midpoint.
    pub fn reversed(&self) -> Path {
        let points: Vec<Vec3> = self.points.iter().rev().cloned().collect();
        Path::from_points(self.t0, self.dt, points).expect("reversal keeps a valid grid")
    }

    /// Every `factor`-th node.
    pub fn subsample(&self, factor: usize) -> Result<Path> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::Usage(format!("cannot subsample {} steps by {factor}", self.steps())));
        }
        let points = self.points.iter().step_by(factor).cloned().collect();
        Path::from_points(self.t0, self.dt * factor as f64, points)
    }

    /// CSV with columns `t,x,y,z` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,y,z")?;
        for (j, p) in self.points.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", self.time(j), p.x, p.y, p.z)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Path> {
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (no, line) in input.lines().enumerate() {
            let line = line?;
            if no == 0 {
                if line.trim() != "t,x,y,z" {
                    return Err(Error::Parse { line: 1, detail: "expected header 't,x,y,z'".into() });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let v = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: no + 1, detail: e.to_string() })?;
            if v.len() != 4 {
                return Err(Error::Parse { line: no + 1, detail: format!("expected 4 columns, got {}", v.len()) });
            }
            times.push(v[0]);
            points.push(Vec3::new(v[1], v[2], v[3]));
        }
        if times.len() < 2 {
            return Err(Error::Parse { line: 0, detail: "need at least two rows".into() });
        }
        let n = times.len() - 1;
        let dt = (times[n] - times[0]) / n as f64;
        for (j, &t) in times.iter().enumerate() {
            if (t - (times[0] + j as f64 * dt)).abs() > 1e-9 * dt {
                return Err(Error::Parse { line: j + 2, detail: format!("time {t} breaks the uniform grid") });
            }
        }
        Path::from_points(times[0], dt, points)
    }
}

fn check_grid(half_width: f64, n: usize) -> Result<()> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Domain(format!("T must be positive, got {half_width}")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    Ok(())
}

/// Standard 3D Brownian path on `[-T, T]` with `n` steps started at `x0`:
/// increments are i.i.d. centered Gaussians of per-component variance `2T/n`.
pub fn sample_brownian<R: Rng + ?Sized>(half_width: f64, n: usize, x0: Vec3, rng: &mut R) -> Result<Path> {
    check_grid(half_width, n)?;
    let dt = 2.0 * half_width / n as f64;
    let increments = gaussian_increments(n, dt, rng);
    Path::from_increments(-half_width, dt, x0, &increments)
}

pub(crate) fn gaussian_increments<R: Rng + ?Sized>(n: usize, dt: f64, rng: &mut R) -> Vec<Vec3> {
    let s = dt.sqrt();
    (0..n)
        .map(|_| {
            Vec3::new(
                s * rng.sample::<f64, _>(StandardNormal),
                s * rng.sample::<f64, _>(StandardNormal),
                s * rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect()
}

/// Realized quadratic variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticVariation {
    pub per_component: Vec3,
    pub total: f64,
}

/// `Σ_j (δB_j^μ)²` per component and summed.
pub fn quadratic_variation(path: &Path) -> QuadraticVariation {
    let per_component = path
        .increments()
        .iter()
        .fold(Vec3::zeros(), |acc, d| acc + d.component_mul(d));
    QuadraticVariation { total: per_component.sum(), per_component }
}

/// Componentwise clamp `h_a` of positions to `[-a, a]`; `a = ∞` is the identity.
pub fn truncate(path: &Path, a: f64) -> Result<Path> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("truncation level must be >= 0, got {a}")));
    }
    if a.is_infinite() {
        return Ok(path.clone());
    }
    let points = path.points().iter().map(|p| p.map(|c| c.clamp(-a, a))).collect();
    Path::from_points(path.t0(), path.dt(), points)
}
