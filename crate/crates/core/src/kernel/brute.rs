//! Direct 3D quadrature of the pair kernel on a box `|k_i| ≤ K`.
//!
//! Each axis is covered by G7/K15 panels, geometrically graded toward
//! `k_i = 0` so the direction-dependent projector (bounded but discontinuous
//! at the origin) and the `1/ω` singularity at `m = 0` are resolved. The
//! tensor Kronrod and tensor Gauss sums share nodes; their difference is
//! the error estimate.

use rayon::prelude::*;

use super::formfactor::FormFactorSpec;
use crate::error::{Error, Result};
use crate::quad::{WG, WGK, XGK};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteConfig {
    /// Neglected radial tail of the spectral weight, relative.
    pub rel_tail: f64,
    /// Number of halvings of the innermost panel toward `k_i = 0`.
    pub grading_levels: usize,
    /// Widest panel, also capped by the oscillation scale `1/|X|`.
    pub max_panel: f64,
    /// Fail when the estimated Frobenius-relative error exceeds this.
    pub max_rel_error: f64,
}

impl Default for BruteConfig {
    fn default() -> Self {
        Self {
            rel_tail: 1e-12,
            grading_levels: 7,
            max_panel: 1.0,
            max_rel_error: 1e-6,
        }
    }
}

/// Brute-force kernel values on a product of displacements and times.
#[derive(Debug, Clone)]
pub struct BruteGrid {
    pub xs: Vec<Vec3>,
    pub ts: Vec<f64>,
    /// Real part, indexed `[ix * ts.len() + it]`.
    pub values: Vec<Mat3>,
    /// Frobenius norm of the imaginary part at each point.
    pub imag_residue: Vec<f64>,
    /// `‖K15 − G7‖_F` at each point.
    pub error_estimate: Vec<f64>,
    pub nodes_per_axis: usize,
}

impl BruteGrid {
    pub fn get(&self, ix: usize, it: usize) -> &Mat3 {
        &self.values[ix * self.ts.len() + it]
    }
}

struct AxisNode {
    k: f64,
    wk: f64,
    wg: f64,
}

fn axis_nodes(k_max: f64, width: f64, levels: usize) -> Vec<AxisNode> {
    let width = width.min(k_max);
    let mut edges = vec![0.0];
    for l in (0..=levels).rev() {
        edges.push(width / f64::powi(2.0, l as i32));
    }
    let uniform = ((k_max - width) / width).ceil() as usize;
    for i in 1..=uniform {
        edges.push((width + i as f64 * (k_max - width) / uniform as f64).min(k_max));
    }
    edges.dedup();
    let mut half = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        half.push(AxisNode { k: c, wk: h * WGK[7], wg: h * WG[3] });
        for j in 0..7 {
            let wg = if j % 2 == 1 { h * WG[j / 2] } else { 0.0 };
            for s in [-1.0, 1.0] {
                half.push(AxisNode { k: c + s * h * XGK[j], wk: h * WGK[j], wg });
            }
        }
    }
    let mut out: Vec<AxisNode> = half
        .iter()
        .map(|n| AxisNode { k: -n.k, wk: n.wk, wg: n.wg })
        .collect();
    out.extend(half);
    out.sort_by(|a, b| a.k.total_cmp(&b.k));
    out
}

#[derive(Clone)]
struct Acc {
    // per (x, t): 6 real + 6 imaginary symmetric components, Kronrod and Gauss
    re_k: Vec<[f64; 6]>,
    im_k: Vec<[f64; 6]>,
    re_g: Vec<[f64; 6]>,
}

impl Acc {
    fn new(n: usize) -> Self {
        Self {
            re_k: vec![[0.0; 6]; n],
            im_k: vec![[0.0; 6]; n],
            re_g: vec![[0.0; 6]; n],
        }
    }

    fn add(&mut self, o: &Acc) {
        for (a, b) in [(&mut self.re_k, &o.re_k), (&mut self.im_k, &o.im_k), (&mut self.re_g, &o.re_g)] {
            for (x, y) in a.iter_mut().zip(b) {
                for c in 0..6 {
                    x[c] += y[c];
                }
            }
        }
    }
}

fn sym_to_mat(s: &[f64; 6]) -> Mat3 {
    Mat3::new(s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5])
}

/// Kernel at every `(x, t)` pair of the given lists, by 3D quadrature.
pub fn kernel_brute_grid(spec: &FormFactorSpec, xs: &[Vec3], ts: &[f64], cfg: &BruteConfig) -> Result<BruteGrid> {
    spec.validate()?;
    let n_pts = xs.len() * ts.len();
    if spec.is_zero() || n_pts == 0 {
        return Ok(BruteGrid {
            xs: xs.to_vec(),
            ts: ts.to_vec(),
            values: vec![Mat3::zeros(); n_pts],
            imag_residue: vec![0.0; n_pts],
            error_estimate: vec![0.0; n_pts],
            nodes_per_axis: 0,
        });
    }
    let k_max = spec.cutoff_radius(cfg.rel_tail);
    let x_max = xs.iter().map(|x| x.amax()).fold(0.0, f64::max);
    let width = if x_max > 0.0 { cfg.max_panel.min(3.0 / x_max) } else { cfg.max_panel };
    let width = width.min(spec.scale());
    let nodes = axis_nodes(k_max, width, cfg.grading_levels);
    let ts_abs: Vec<f64> = ts.iter().map(|t| t.abs()).collect();
    let n_t = ts.len();

    let partials: Vec<Acc> = nodes
        .par_iter()
        .map(|nx| {
            let mut acc = Acc::new(n_pts);
            let mut decay = vec![0.0; n_t];
            let mut phase = vec![(0.0, 0.0); xs.len()];
            for ny in &nodes {
                for nz in &nodes {
                    let k = Vec3::new(nx.k, ny.k, nz.k);
                    let k2 = k.norm_squared();
                    if k2 == 0.0 {
                        continue;
                    }
                    let kn = k2.sqrt();
                    if kn > k_max {
                        // outside the ball the neglected tail is already accounted for
                        continue;
                    }
                    let wk = nx.wk * ny.wk * nz.wk;
                    let wg = nx.wg * ny.wg * nz.wg;
                    let f = spec.spectral_weight(kn);
                    if f == 0.0 {
                        continue;
                    }
                    let omega = spec.omega(kn);
                    for (d, t) in decay.iter_mut().zip(&ts_abs) {
                        *d = (-omega * t).exp();
                    }
                    for (p, x) in phase.iter_mut().zip(xs) {
                        *p = k.dot(x).sin_cos();
                    }
                    let inv = 1.0 / k2;
                    let proj = [
                        1.0 - k.x * k.x * inv,
                        -k.x * k.y * inv,
                        -k.x * k.z * inv,
                        1.0 - k.y * k.y * inv,
                        -k.y * k.z * inv,
                        1.0 - k.z * k.z * inv,
                    ];
                    for (ix, &(s, c)) in phase.iter().enumerate() {
                        for (it, &d) in decay.iter().enumerate() {
                            let idx = ix * n_t + it;
                            let g = f * d;
                            let gr = wk * g * c;
                            let gi = wk * g * s;
                            let re = &mut acc.re_k[idx];
                            let im = &mut acc.im_k[idx];
                            for q in 0..6 {
                                re[q] += gr * proj[q];
                                im[q] += gi * proj[q];
                            }
                            if wg != 0.0 {
                                let gg = wg * g * c;
                                let rg = &mut acc.re_g[idx];
                                for q in 0..6 {
                                    rg[q] += gg * proj[q];
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = Acc::new(n_pts);
    for p in &partials {
        total.add(p);
    }
    let values: Vec<Mat3> = total.re_k.iter().map(sym_to_mat).collect();
    let imag_residue: Vec<f64> = total.im_k.iter().map(|s| sym_to_mat(s).norm()).collect();
    let error_estimate: Vec<f64> = total
        .re_k
        .iter()
        .zip(&total.re_g)
        .map(|(k, g)| (sym_to_mat(k) - sym_to_mat(g)).norm())
        .collect();

    for (i, (v, e)) in values.iter().zip(&error_estimate).enumerate() {
        let scale = v.norm();
        if *e > cfg.max_rel_error * scale && *e > f64::MIN_POSITIVE {
            let (ix, it) = (i / n_t, i % n_t);
            return Err(Error::numerical(
                "kernel_brute",
                format!(
                    "estimated error {e:e} exceeds {:e} x |W| = {:e} at X = {:?}, t = {} ({} nodes per axis)",
                    cfg.max_rel_error,
                    cfg.max_rel_error * scale,
                    xs[ix],
                    ts[it],
                    nodes.len()
                ),
            ));
        }
    }

    Ok(BruteGrid {
        xs: xs.to_vec(),
        ts: ts.to_vec(),
        values,
        imag_residue,
        error_estimate,
        nodes_per_axis: nodes.len(),
    })
}

/// Kernel at one point by 3D quadrature.
pub fn kernel_brute(spec: &FormFactorSpec, x: &Vec3, t: f64) -> Result<Mat3> {
    let g = kernel_brute_grid(spec, std::slice::from_ref(x), &[t], &BruteConfig::default())?;
    Ok(g.values[0])
}
