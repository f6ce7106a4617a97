//! Tabulated `A(r, t)`, `B(r, t)` with bilinear interpolation and a plain
//! text export format.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::formfactor::{FormFactorSpec, Profile};
use super::{diagonal_constant, kernel_exact, TransverseParts};
use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

const FORMAT_TAG: &str = "# dsi-gibbs kernel table v1";

/// Uniform `(r, t)` grid extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableGrid {
    pub r_max: f64,
    pub t_max: f64,
    pub n_r: usize,
    pub n_t: usize,
}

impl TableGrid {
    pub fn new(r_max: f64, t_max: f64, n_r: usize, n_t: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite() && t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Domain(format!("table extents must be positive, got r_max={r_max}, t_max={t_max}")));
        }
        if n_r < 2 || n_t < 2 {
            return Err(Error::Domain(format!("table needs at least 2 nodes per axis, got {n_r}x{n_t}")));
        }
        Ok(Self { r_max, t_max, n_r, n_t })
    }

    pub fn r_node(&self, i: usize) -> f64 {
        if i + 1 == self.n_r {
            self.r_max
        } else {
            self.r_max * i as f64 / (self.n_r - 1) as f64
        }
    }

    pub fn t_node(&self, j: usize) -> f64 {
        if j + 1 == self.n_t {
            self.t_max
        } else {
            self.t_max * j as f64 / (self.n_t - 1) as f64
        }
    }
}

/// Immutable kernel table; safe for concurrent readers.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    spec: FormFactorSpec,
    grid: TableGrid,
    r_grid: Vec<f64>,
    t_grid: Vec<f64>,
    // row-major in r: index i * n_t + j
    a_vals: Vec<f64>,
    b_vals: Vec<f64>,
    diag_const: f64,
    inv_dr: f64,
    inv_dt: f64,
}

impl KernelTable {
    /// Tabulate [`kernel_exact`] on a uniform grid over `[0, r_max] × [0, t_max]`.
    pub fn build(spec: &FormFactorSpec, grid: TableGrid) -> Result<Self> {
        spec.validate()?;
        let diag_const = diagonal_constant(spec)?;
        let rows: Vec<Vec<TransverseParts>> = (0..grid.n_r)
            .into_par_iter()
            .map(|i| {
                let r = grid.r_node(i);
                (0..grid.n_t).map(|j| kernel_exact(spec, r, grid.t_node(j))).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut a_vals = Vec::with_capacity(grid.n_r * grid.n_t);
        let mut b_vals = Vec::with_capacity(grid.n_r * grid.n_t);
        for row in rows {
            for p in row {
                a_vals.push(p.a);
                b_vals.push(p.b);
            }
        }
        Ok(Self::assemble(*spec, grid, a_vals, b_vals, diag_const))
    }

    fn assemble(spec: FormFactorSpec, grid: TableGrid, a_vals: Vec<f64>, b_vals: Vec<f64>, diag_const: f64) -> Self {
        Self {
            spec,
            r_grid: (0..grid.n_r).map(|i| grid.r_node(i)).collect(),
            t_grid: (0..grid.n_t).map(|j| grid.t_node(j)).collect(),
            a_vals,
            b_vals,
            diag_const,
            inv_dr: (grid.n_r - 1) as f64 / grid.r_max,
            inv_dt: (grid.n_t - 1) as f64 / grid.t_max,
            grid,
        }
    }

    pub fn spec(&self) -> &FormFactorSpec {
        &self.spec
    }

    pub fn grid(&self) -> TableGrid {
        self.grid
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    /// `∫ |φ̂|²/(2ω) d³k`.
    pub fn diag_const(&self) -> f64 {
        self.diag_const
    }

    /// Stored node values.
    pub fn node(&self, i: usize, j: usize) -> TransverseParts {
        let idx = i * self.grid.n_t + j;
        TransverseParts { a: self.a_vals[idx], b: self.b_vals[idx] }
    }

    /// Interpolated `(A, B)` at radius `r` and time separation `t`.
    ///
    /// Separations beyond `t_max` fall back to [`kernel_exact`].
    pub fn parts(&self, r: f64, t: f64) -> Result<TransverseParts> {
        let t = t.abs();
        if !(r <= self.grid.r_max) {
            return Err(Error::Range { radius: r, r_max: self.grid.r_max });
        }
        if t > self.grid.t_max {
            return kernel_exact(&self.spec, r, t);
        }
        let n_t = self.grid.n_t;
        let u = r * self.inv_dr;
        let v = t * self.inv_dt;
        let i = (u as usize).min(self.grid.n_r - 2);
        let j = (v as usize).min(n_t - 2);
        let fu = u - i as f64;
        let fv = v - j as f64;
        let i00 = i * n_t + j;
        let i10 = i00 + n_t;
        let w00 = (1.0 - fu) * (1.0 - fv);
        let w01 = (1.0 - fu) * fv;
        let w10 = fu * (1.0 - fv);
        let w11 = fu * fv;
        let a = w00 * self.a_vals[i00] + w01 * self.a_vals[i00 + 1] + w10 * self.a_vals[i10] + w11 * self.a_vals[i10 + 1];
        let b = w00 * self.b_vals[i00] + w01 * self.b_vals[i00 + 1] + w10 * self.b_vals[i10] + w11 * self.b_vals[i10 + 1];
        Ok(TransverseParts { a, b })
    }

    /// Interpolated 3×3 kernel `W(X, t)`.
    pub fn lookup(&self, x: &Vec3, t: f64) -> Result<Mat3> {
        Ok(self.parts(x.norm(), t)?.matrix(x))
    }

    /// Write the table as header lines followed by `r,t,A,B` rows.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut head = String::new();
        writeln!(head, "{FORMAT_TAG}").unwrap();
        let (kind, scale) = match self.spec.profile {
            Profile::GaussianCutoff { scale } => ("gaussian_cutoff", scale),
            Profile::SharpCutoff { radius } => ("sharp_cutoff", radius),
            Profile::LorentzianCutoff { scale } => ("lorentzian_cutoff", scale),
        };
        writeln!(head, "# profile: {kind}").unwrap();
        writeln!(head, "# scale: {}", fmt17(scale)).unwrap();
        writeln!(head, "# mass: {}", fmt17(self.spec.mass)).unwrap();
        writeln!(head, "# amplitude: {}", fmt17(self.spec.amplitude)).unwrap();
        writeln!(head, "# diag_const: {}", fmt17(self.diag_const)).unwrap();
        writeln!(head, "# r_max: {}", fmt17(self.grid.r_max)).unwrap();
        writeln!(head, "# n_r: {}", self.grid.n_r).unwrap();
        writeln!(head, "# t_max: {}", fmt17(self.grid.t_max)).unwrap();
        writeln!(head, "# n_t: {}", self.grid.n_t).unwrap();
        writeln!(head, "r,t,A,B").unwrap();
        out.write_all(head.as_bytes())?;
        let mut line = String::with_capacity(96);
        for i in 0..self.grid.n_r {
            for j in 0..self.grid.n_t {
                let p = self.node(i, j);
                line.clear();
                writeln!(line, "{},{},{},{}", fmt17(self.r_grid[i]), fmt17(self.t_grid[j]), fmt17(p.a), fmt17(p.b)).unwrap();
                out.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    /// Parse the format written by [`KernelTable::write_text`].
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut header = std::collections::BTreeMap::new();
        let mut saw_tag = false;
        for (no, line) in lines.by_ref() {
            let line = line?;
            let line = line.trim_end();
            if no == 0 {
                if line != FORMAT_TAG {
                    return Err(Error::Parse { line: 1, detail: format!("expected '{FORMAT_TAG}'") });
                }
                saw_tag = true;
                continue;
            }
            if line == "r,t,A,B" {
                break;
            }
            let body = line
                .strip_prefix("# ")
                .ok_or_else(|| Error::Parse { line: no + 1, detail: format!("unexpected line '{line}'") })?;
            let (k, v) = body
                .split_once(": ")
                .ok_or_else(|| Error::Parse { line: no + 1, detail: "expected 'key: value'".into() })?;
            header.insert(k.to_string(), (no + 1, v.to_string()));
        }
        if !saw_tag {
            return Err(Error::Parse { line: 1, detail: "empty table file".into() });
        }
        let get = |k: &str| -> Result<(usize, String)> {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Parse { line: 0, detail: format!("missing header field '{k}'") })
        };
        let num = |k: &str| -> Result<f64> {
            let (no, v) = get(k)?;
            v.parse().map_err(|_| Error::Parse { line: no, detail: format!("bad number for {k}: '{v}'") })
        };
        let int = |k: &str| -> Result<usize> {
            let (no, v) = get(k)?;
            v.parse().map_err(|_| Error::Parse { line: no, detail: format!("bad integer for {k}: '{v}'") })
        };
        let scale = num("scale")?;
        let profile = match get("profile")?.1.as_str() {
            "gaussian_cutoff" => Profile::GaussianCutoff { scale },
            "sharp_cutoff" => Profile::SharpCutoff { radius: scale },
            "lorentzian_cutoff" => Profile::LorentzianCutoff { scale },
            other => {
                return Err(Error::Parse { line: get("profile")?.0, detail: format!("unknown profile '{other}'") });
            }
        };
        let spec = FormFactorSpec::new(profile, num("mass")?, num("amplitude")?)?;
        let grid = TableGrid::new(num("r_max")?, num("t_max")?, int("n_r")?, int("n_t")?)?;
        let diag_const = num("diag_const")?;
        let total = grid.n_r * grid.n_t;
        let mut a_vals = Vec::with_capacity(total);
        let mut b_vals = Vec::with_capacity(total);
        for (no, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let idx = a_vals.len();
            if idx >= total {
                return Err(Error::Parse { line: no + 1, detail: "more rows than the grid holds".into() });
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse { line: no + 1, detail: format!("expected 4 columns, got {}", fields.len()) });
            }
            let vals = fields
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse { line: no + 1, detail: e.to_string() })?;
            let (i, j) = (idx / grid.n_t, idx % grid.n_t);
            if vals[0] != grid.r_node(i) || vals[1] != grid.t_node(j) {
                return Err(Error::Parse {
                    line: no + 1,
                    detail: format!("row ({}, {}) is off the grid node ({}, {})", vals[0], vals[1], grid.r_node(i), grid.t_node(j)),
                });
            }
            a_vals.push(vals[2]);
            b_vals.push(vals[3]);
        }
        if a_vals.len() != total {
            return Err(Error::Parse { line: 0, detail: format!("expected {total} rows, found {}", a_vals.len()) });
        }
        Ok(Self::assemble(spec, grid, a_vals, b_vals, diag_const))
    }
}

/// 17 significant digits, which round-trips every f64.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
