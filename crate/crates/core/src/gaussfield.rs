//! Finite-mode realization of the Gaussian process `X_s(f)` with covariance
//!
//! ```text
//! E[X_s(f) X_t(g)] = ∫ e^{-ω|t-s|}/(2ω) · conj(f̂(k)) · P(k) ĝ(k) d³k
//! ```
//!
//! Each mesh point `k` of a radial × angular quadrature carries two
//! polarizations and a cosine/sine pair of stationary Ornstein–Uhlenbeck
//! coordinates with rate `ω(k)` and variance `1/(2ω(k))`. The coupled field
//! at a particle position `x` is
//!
//! ```text
//! X_t(φ(·−x)) = Σ_k √w_k |φ̂(k)| Σ_j e(k,j) [ξ_kj(t) cos(k·x) + η_kj(t) sin(k·x)]
//! ```
//!
//! whose covariance is the quadrature of the pair kernel.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{diagonal_constant, FormFactorSpec};
use crate::paths::Path;
use crate::quad::gauss_legendre_on;
use crate::rng::SeedTree;
use crate::stochint::PairKernel;
use crate::{Mat3, Vec3};

/// One wave vector of the mesh with its k-space volume element and frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub k: Vec3,
    pub cell_weight: f64,
    pub polarization: [Vec3; 2],
}

/// Parameters of the k-space mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMesh {
    pub k_max: f64,
    pub n_radial: usize,
    /// Gauss–Legendre order in `cos θ`; the azimuth gets twice as many
    /// equispaced points, giving `2·order²` directions.
    pub angular_order: usize,
    /// Largest tolerated fraction of `∫|φ̂|²/(2ω)` beyond `k_max`.
    pub tail_tolerance: f64,
}

impl ModeMesh {
    /// Mesh with `k_max` chosen from the profile so the neglected tail is below `tail_tolerance`.
    pub fn for_spec(spec: &FormFactorSpec, n_radial: usize, angular_order: usize, tail_tolerance: f64) -> Self {
        Self {
            k_max: spec.cutoff_radius(tail_tolerance),
            n_radial,
            angular_order,
            tail_tolerance,
        }
    }
}

/// Polarization frame: `e1 = a × k̂ / |a × k̂|` with reference axis `a = ẑ`,
/// switching to `a = x̂` when `|k̂_z| ≥ 0.9`; `e2 = k̂ × e1`.
pub fn polarization_frame(k: &Vec3) -> [Vec3; 2] {
    let khat = k.normalize();
    let axis = if khat.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let e1 = axis.cross(&khat).normalize();
    let e2 = khat.cross(&e1);
    [e1, e2]
}

/// Immutable mode set.
#[derive(Debug, Clone)]
pub struct ModeSet {
    spec: FormFactorSpec,
    modes: Vec<Mode>,
    omega: Vec<f64>,
    // √w |φ̂(k)|
    amplitude: Vec<f64>,
}

/// Build the quadrature mesh over the k-ball of radius `mesh.k_max`.
pub fn build_modes(spec: &FormFactorSpec, mesh: &ModeMesh) -> Result<ModeSet> {
    spec.validate()?;
    if mesh.n_radial == 0 || mesh.angular_order == 0 {
        return Err(Error::Config("mode mesh needs at least one radial and one angular node".into()));
    }
    if !(mesh.k_max > 0.0 && mesh.k_max.is_finite()) {
        return Err(Error::Config(format!("k_max must be positive, got {}", mesh.k_max)));
    }
    let total = diagonal_constant(spec)?;
    if total > 0.0 {
        let inside = ball_mass(spec, mesh.k_max)?;
        let tail = ((total - inside) / total).max(0.0);
        if tail > mesh.tail_tolerance {
            return Err(Error::Config(format!(
                "k_max = {} leaves {tail:e} of the spectral weight outside the mesh (tolerance {:e}); raise k_max to at least {}",
                mesh.k_max,
                mesh.tail_tolerance,
                spec.cutoff_radius(mesh.tail_tolerance)
            )));
        }
    }

    // radial nodes, split at profile discontinuities
    let mut edges = vec![0.0];
    edges.extend(spec.breakpoints().into_iter().filter(|&b| b < mesh.k_max));
    edges.push(mesh.k_max);
    let span = mesh.k_max;
    let mut radial = Vec::new();
    for w in edges.windows(2) {
        let share = ((w[1] - w[0]) / span * mesh.n_radial as f64).round().max(1.0) as usize;
        let (x, wt) = gauss_legendre_on(share, w[0], w[1]);
        radial.extend(x.into_iter().zip(wt));
    }

    let (mu, mu_w) = gauss_legendre_on(mesh.angular_order, -1.0, 1.0);
    let n_phi = 2 * mesh.angular_order;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;

    let mut modes = Vec::with_capacity(radial.len() * mu.len() * n_phi);
    for &(k, wk) in &radial {
        for (c, wc) in mu.iter().zip(&mu_w) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for p in 0..n_phi {
                // offset azimuths by half a cell so no node sits on a symmetry plane
                let phi = (p as f64 + 0.5) * dphi;
                let dir = Vec3::new(s * phi.cos(), s * phi.sin(), *c);
                let kv = dir * k;
                modes.push(Mode {
                    k: kv,
                    cell_weight: wk * k * k * wc * dphi,
                    polarization: polarization_frame(&kv),
                });
            }
        }
    }
    Ok(ModeSet::from_modes(*spec, modes))
}

fn ball_mass(spec: &FormFactorSpec, k_max: f64) -> Result<f64> {
    let mut edges = spec.radial_panels(k_max, None);
    edges.retain(|&e| e <= k_max);
    let r = crate::quad::integrate_adaptive(
        |k| {
            let p = spec.phi_hat(k);
            [if k == 0.0 { 0.0 } else { 4.0 * std::f64::consts::PI * k * k * p * p / (2.0 * spec.omega(k)) }]
        },
        &edges,
        0.0,
        1e-12,
        50_000,
    )?;
    Ok(r.value[0])
}

impl ModeSet {
    /// Mode set from explicit modes (frames are taken as given).
    pub fn from_modes(spec: FormFactorSpec, modes: Vec<Mode>) -> Self {
        let omega = modes.iter().map(|m| spec.omega(m.k.norm())).collect();
        let amplitude = modes
            .iter()
            .map(|m| m.cell_weight.sqrt() * spec.phi_hat(m.k.norm()).abs())
            .collect();
        Self { spec, modes, omega, amplitude }
    }

    pub fn spec(&self) -> &FormFactorSpec {
        &self.spec
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn omega(&self, m: usize) -> f64 {
        self.omega[m]
    }

    /// `√w |φ̂(k)|` of mode `m`.
    pub fn amplitude(&self, m: usize) -> f64 {
        self.amplitude[m]
    }

    /// `Σ w |φ̂|²/(2ω)`, the mesh approximation of the diagonal constant.
    pub fn diag_sum(&self) -> f64 {
        (0..self.len()).map(|m| self.amplitude[m].powi(2) / (2.0 * self.omega[m])).sum()
    }

    /// Covariance of the coupled field implied by the mesh:
    /// `Σ w |φ̂|²/(2ω) e^{-ω|t|} cos(k·x) P(k)`.
    pub fn kernel(&self, x: &Vec3, t: f64) -> Mat3 {
        let mut w = Mat3::zeros();
        for (m, mode) in self.modes.iter().enumerate() {
            let g = self.amplitude[m].powi(2) / (2.0 * self.omega[m]) * (-self.omega[m] * t.abs()).exp() * mode.k.dot(x).cos();
            let [e1, e2] = &mode.polarization;
            w += (e1 * e1.transpose() + e2 * e2.transpose()) * g;
        }
        w
    }
}

impl PairKernel for ModeSet {
    fn bilinear(&self, x: &Vec3, t: f64, u: &Vec3, v: &Vec3) -> Result<f64> {
        let mut s = 0.0;
        for (m, mode) in self.modes.iter().enumerate() {
            let g = self.amplitude[m].powi(2) / (2.0 * self.omega[m]) * (-self.omega[m] * t.abs()).exp() * mode.k.dot(x).cos();
            let [e1, e2] = &mode.polarization;
            s += g * (e1.dot(u) * e1.dot(v) + e2.dot(u) * e2.dot(v));
        }
        Ok(s)
    }

    fn diagonal(&self) -> Mat3 {
        self.kernel(&Vec3::zeros(), 0.0)
    }
}

/// Time grid of a field sample (matches a path grid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub nodes: usize,
}

impl TimeGrid {
    pub fn of_path(path: &Path) -> Self {
        Self { t0: path.t0(), dt: path.dt(), nodes: path.steps() + 1 }
    }
}

/// One realization of all OU coordinates on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    grid: TimeGrid,
    n_modes: usize,
    // index ((m * 2 + pol) * 2 + quad) * nodes + j; quad 0 = cosine, 1 = sine
    values: Vec<f64>,
}

impl FieldSample {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// OU coordinate of mode `m`, polarization `pol`, quadrature `quad` at node `j`.
    pub fn coordinate(&self, m: usize, pol: usize, quad: usize, j: usize) -> f64 {
        self.values[((m * 2 + pol) * 2 + quad) * self.grid.nodes + j]
    }

    /// Same sample with every coordinate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> FieldSample {
        FieldSample {
            grid: self.grid,
            n_modes: self.n_modes,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Draw independent stationary OU trajectories for every (mode, polarization, quadrature).
pub fn sample_field<R: Rng + ?Sized>(modes: &ModeSet, grid: TimeGrid, rng: &mut R) -> FieldSample {
    let nodes = grid.nodes;
    let mut values = vec![0.0; modes.len() * 4 * nodes];
    for m in 0..modes.len() {
        let w = modes.omega(m);
        let (rho, sd0, sd) = ou_step(w, grid.dt);
        for chan in 0..4 {
            let base = (m * 4 + chan) * nodes;
            let mut x = sd0 * rng.sample::<f64, _>(StandardNormal);
            values[base] = x;
            for j in 1..nodes {
                x = rho * x + sd * rng.sample::<f64, _>(StandardNormal);
                values[base + j] = x;
            }
        }
    }
    FieldSample { grid, n_modes: modes.len(), values }
}

// (decay factor, stationary sd, innovation sd) of the exact OU update
fn ou_step(omega: f64, dt: f64) -> (f64, f64, f64) {
    let rho = (-omega * dt).exp();
    let var = 1.0 / (2.0 * omega);
    (rho, var.sqrt(), (var * (1.0 - rho * rho)).sqrt())
}

/// `X_{t_j}(φ(· − x))` as a 3-vector.
pub fn eval_coupling(modes: &ModeSet, sample: &FieldSample, j: usize, x: &Vec3) -> Vec3 {
    let mut out = Vec3::zeros();
    for (m, mode) in modes.modes().iter().enumerate() {
        let (s, c) = mode.k.dot(x).sin_cos();
        let a = modes.amplitude(m);
        for pol in 0..2 {
            let coef = sample.coordinate(m, pol, 0, j) * c + sample.coordinate(m, pol, 1, j) * s;
            out += mode.polarization[pol] * (a * coef);
        }
    }
    out
}

/// Itô sum `Σ_j X_{t_{j−1}}(φ(· − B_{t_{j−1}})) · δB_j` with left-endpoint evaluation.
pub fn single_integral_j(modes: &ModeSet, sample: &FieldSample, path: &Path) -> Result<f64> {
    let g = TimeGrid::of_path(path);
    if g.nodes != sample.grid.nodes || (g.t0 - sample.grid.t0).abs() > 1e-12 || (g.dt - sample.grid.dt).abs() > 1e-12 * g.dt {
        return Err(Error::Usage(format!("field sample grid {:?} does not match path grid {g:?}", sample.grid)));
    }
    Ok(path
        .increments()
        .iter()
        .enumerate()
        .map(|(j, d)| eval_coupling(modes, sample, j, &path.points()[j]).dot(d))
        .sum())
}

/// Monte Carlo estimate of `E[e^{iJ}]` at a fixed path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicEstimate {
    pub re: f64,
    pub im: f64,
    pub re_stderr: f64,
    pub im_stderr: f64,
    pub n_samples: usize,
}

impl CharacteristicEstimate {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Combined standard error of the modulus (conservative).
    pub fn stderr(&self) -> f64 {
        self.re_stderr.hypot(self.im_stderr)
    }
}

const MC_BATCH: usize = 256;

/// Sample `J` many times at a fixed path and average `cos J`, `sin J`.
///
/// Batch `b` of samples uses stream `("gaussfield.mc_characteristic", b)`;
/// results are reduced in batch order, so the estimate does not depend on
/// the thread count.
pub fn mc_characteristic(path: &Path, modes: &ModeSet, n_samples: usize, seeds: &SeedTree) -> Result<CharacteristicEstimate> {
    if n_samples < 2 {
        return Err(Error::Domain("mc_characteristic needs at least 2 samples".into()));
    }
    let js = sample_j_values(path, modes, n_samples, seeds);
    let cos: Vec<f64> = js.iter().map(|j| j.cos()).collect();
    let sin: Vec<f64> = js.iter().map(|j| j.sin()).collect();
    let (re, re_stderr) = crate::stats::mean_stderr(&cos);
    let (im, im_stderr) = crate::stats::mean_stderr(&sin);
    Ok(CharacteristicEstimate { re, im, re_stderr, im_stderr, n_samples })
}

/// Independent draws of `J` at a fixed path.
pub fn sample_j_values(path: &Path, modes: &ModeSet, n_samples: usize, seeds: &SeedTree) -> Vec<f64> {
    let n = path.steps();
    // coefficient of each OU coordinate at each left endpoint
    let mut coef = vec![0.0; modes.len() * 4 * n];
    for (m, mode) in modes.modes().iter().enumerate() {
        let a = modes.amplitude(m);
        for i in 0..n {
            let (s, c) = mode.k.dot(&path.points()[i]).sin_cos();
            let d = &path.increments()[i];
            for pol in 0..2 {
                let e = mode.polarization[pol].dot(d) * a;
                coef[((m * 2 + pol) * 2) * n + i] = e * c;
                coef[((m * 2 + pol) * 2 + 1) * n + i] = e * s;
            }
        }
    }
    let steps: Vec<(f64, f64, f64)> = (0..modes.len()).map(|m| ou_step(modes.omega(m), path.dt())).collect();
    let n_batches = n_samples.div_ceil(MC_BATCH);
    let batches: Vec<Vec<f64>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeds.stream("gaussfield.mc_characteristic", b as u64);
            let count = MC_BATCH.min(n_samples - b * MC_BATCH);
            (0..count)
                .map(|_| {
                    let mut j = 0.0;
                    for (m, &(rho, sd0, sd)) in steps.iter().enumerate() {
                        for chan in 0..4 {
                            let c = &coef[(m * 4 + chan) * n..(m * 4 + chan + 1) * n];
                            let mut x = sd0 * rng.sample::<f64, _>(StandardNormal);
                            let mut acc = c[0] * x;
                            for ci in &c[1..] {
                                x = rho * x + sd * rng.sample::<f64, _>(StandardNormal);
                                acc += ci * x;
                            }
                            j += acc;
                        }
                    }
                    j
                })
                .collect()
        })
        .collect();
    batches.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::transverse_projector;
    use crate::paths::sample_brownian;

    fn small_modes(amplitude: f64) -> ModeSet {
        let spec = FormFactorSpec::gaussian(1.0, 1.0, amplitude).unwrap();
        build_modes(&spec, &ModeMesh::for_spec(&spec, 8, 3, 1e-8)).unwrap()
    }

    #[test]
    fn frames_are_orthonormal_and_complete() {
        let modes = small_modes(1.0);
        for m in modes.modes() {
            let [e1, e2] = &m.polarization;
            assert!(e1.dot(e2).abs() < 1e-14);
            assert!((e1.norm() - 1.0).abs() < 1e-14 && (e2.norm() - 1.0).abs() < 1e-14);
            assert!(e1.dot(&m.k).abs() < 1e-13 * m.k.norm());
            let sum = e1 * e1.transpose() + e2 * e2.transpose();
            assert!((sum - transverse_projector(&m.k).unwrap()).abs().max() < 1e-12);
        }
        // on the k₃ axis the frame switches reference axis
        let [e1, e2] = polarization_frame(&Vec3::new(0.0, 0.0, 2.0));
        assert!((e1.norm() - 1.0).abs() < 1e-15 && e2.z.abs() < 1e-15);
    }

    #[test]
    fn mesh_sum_approximates_diagonal_constant() {
        let spec = FormFactorSpec::default();
        let modes = build_modes(&spec, &ModeMesh::for_spec(&spec, 128, 4, 1e-8)).unwrap();
        let d = diagonal_constant(&spec).unwrap();
        assert!((modes.diag_sum() - d).abs() < 1e-3 * d);
    }

    #[test]
    fn coarse_cutoff_is_a_configuration_error() {
        let spec = FormFactorSpec::default();
        let mesh = ModeMesh { k_max: 1.0, n_radial: 8, angular_order: 3, tail_tolerance: 1e-6 };
        assert!(matches!(build_modes(&spec, &mesh), Err(Error::Config(_))));
    }

    #[test]
    fn zero_amplitude_field_vanishes() {
        let modes = small_modes(0.0);
        assert_eq!(modes.kernel(&Vec3::new(0.1, 0.2, 0.3), 0.5), Mat3::zeros());
        let mut rng = SeedTree::new(1).stream("t", 0);
        let path = sample_brownian(1.0, 8, Vec3::zeros(), &mut rng).unwrap();
        let s = sample_field(&modes, TimeGrid::of_path(&path), &mut rng);
        assert_eq!(eval_coupling(&modes, &s, 3, &Vec3::new(1.0, 0.0, 0.0)), Vec3::zeros());
        let est = mc_characteristic(&path, &modes, 100, &SeedTree::new(2)).unwrap();
        assert_eq!((est.re, est.im), (1.0, 0.0));
    }

    #[test]
    fn j_is_linear_in_the_field_and_zero_on_constant_paths() {
        let modes = small_modes(1.0);
        let mut rng = SeedTree::new(9).stream("t", 0);
        let path = sample_brownian(1.0, 16, Vec3::zeros(), &mut rng).unwrap();
        let s = sample_field(&modes, TimeGrid::of_path(&path), &mut rng);
        let j = single_integral_j(&modes, &s, &path).unwrap();
        let j3 = single_integral_j(&modes, &s.scaled(3.0), &path).unwrap();
        assert!((j3 - 3.0 * j).abs() < 1e-12 * j.abs().max(1.0));
        let flat = Path::constant(1.0, 16, Vec3::new(0.2, 0.0, 0.0)).unwrap();
        assert_eq!(single_integral_j(&modes, &s, &flat).unwrap(), 0.0);
        let other = Path::constant(1.0, 8, Vec3::zeros()).unwrap();
        assert!(matches!(single_integral_j(&modes, &s, &other), Err(Error::Usage(_))));
    }

    #[test]
    fn streaming_j_matches_sampled_field() {
        // the fast sampler and the explicit field must agree in law; compare variances
        let modes = small_modes(1.0);
        let mut rng = SeedTree::new(11).stream("t", 0);
        let path = sample_brownian(0.5, 8, Vec3::zeros(), &mut rng).unwrap();
        let fast = sample_j_values(&path, &modes, 4000, &SeedTree::new(12));
        let slow: Vec<f64> = (0..4000)
            .map(|_| {
                let s = sample_field(&modes, TimeGrid::of_path(&path), &mut rng);
                single_integral_j(&modes, &s, &path).unwrap()
            })
            .collect();
        let v = crate::stochint::variance_of_j(&path, &modes);
        for xs in [fast, slow] {
            let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
            // sampling error of a Gaussian variance estimate is √(2/N)
            assert!((var - v).abs() < 4.0 * v * (2.0 / xs.len() as f64).sqrt(), "{var} vs {v}");
        }
    }
}
