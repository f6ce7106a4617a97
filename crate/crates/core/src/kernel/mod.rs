//! The transverse pair kernel
//!
//! ```text
//! W_{μν}(X, t) = ∫ |φ̂(k)|²/(2ω(k)) · e^{-ω(k)|t|} · e^{ik·X} · (δ_{μν} − k_μk_ν/|k|²) d³k
//! ```
//!
//! Rotation invariance reduces it to two radial functions,
//! `W(X, t) = A(|X|, t)·I + B(|X|, t)·X̂X̂ᵀ`, computed by [`kernel_exact`] from
//!
//! ```text
//! ∫ dΩ e^{ik·X} (δ − k̂k̂ᵀ) = 4π [ (j₀(kr) − j₁(kr)/(kr)) δ + j₂(kr) X̂X̂ᵀ ].
//! ```
//!
//! [`kernel_brute`] integrates the defining 3D integral directly and is the
//! independent oracle for the reduction. All quantities are for unit coupling.

mod brute;
mod formfactor;
mod table;

pub use brute::{kernel_brute, kernel_brute_grid, BruteConfig, BruteGrid};
pub use formfactor::{Admissibility, FormFactorSpec, Profile};
pub use table::{KernelTable, TableGrid};

use std::f64::consts::PI;

use crate::bessel;
use crate::error::{Error, Result};
use crate::quad::integrate_adaptive;
use crate::{Mat3, Vec3};

const RADIAL_REL_TOL: f64 = 1e-12;
const RADIAL_TAIL: f64 = 1e-15;
const MAX_PANELS: usize = 50_000;

/// `δ_{μν} − k_μ k_ν / |k|²`, the polarization sum of a transverse field.
pub fn transverse_projector(k: &Vec3) -> Result<Mat3> {
    let k2 = k.norm_squared();
    if !(k2 > 0.0 && k2.is_finite()) {
        return Err(Error::Domain(format!("transverse projector needs a finite nonzero wave vector, got {k:?}")));
    }
    Ok(Mat3::identity() - (k * k.transpose()) / k2)
}

/// Scalar coefficients of `W(X, t) = A·I + B·X̂X̂ᵀ` at `|X| = r`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransverseParts {
    pub a: f64,
    pub b: f64,
}

impl TransverseParts {
    /// Rebuild the 3×3 kernel at a displacement with this radius.
    pub fn matrix(&self, x: &Vec3) -> Mat3 {
        let r2 = x.norm_squared();
        let mut m = Mat3::identity() * self.a;
        if r2 > 0.0 {
            m += (x * x.transpose()) * (self.b / r2);
        }
        m
    }

    /// `u · W(X, t) v` without materializing the matrix.
    #[inline]
    pub fn bilinear(&self, x: &Vec3, u: &Vec3, v: &Vec3) -> f64 {
        let r2 = x.norm_squared();
        let mut s = self.a * u.dot(v);
        if r2 > 0.0 {
            s += self.b * x.dot(u) * x.dot(v) / r2;
        }
        s
    }

    /// Trace `3A + B`.
    pub fn trace(&self) -> f64 {
        3.0 * self.a + self.b
    }
}

/// `∫ |φ̂(k)|²/(2ω(k)) d³k`, by radial quadrature.
pub fn diagonal_constant(spec: &FormFactorSpec) -> Result<f64> {
    spec.validate()?;
    if spec.is_zero() {
        return Ok(0.0);
    }
    let k_max = spec.cutoff_radius(RADIAL_TAIL);
    let panels = spec.radial_panels(k_max, None);
    let r = integrate_adaptive(
        |k| [radial_weight(spec, k)],
        &panels,
        0.0,
        RADIAL_REL_TOL,
        MAX_PANELS,
    )?;
    let d = 4.0 * PI * r.value[0];
    if !d.is_finite() {
        return Err(Error::numerical("diagonal_constant", format!("non-finite result {d}")));
    }
    Ok(d)
}

// k² |φ̂|²/(2ω), finite at the origin even for m = 0
#[inline]
fn radial_weight(spec: &FormFactorSpec, k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let p = spec.phi_hat(k);
    k * k * p * p / (2.0 * spec.omega(k))
}

/// `A(r, t)` and `B(r, t)` by adaptive radial quadrature with panels split
/// at the half-period `π/r` of the Bessel factors.
pub fn kernel_exact(spec: &FormFactorSpec, r: f64, t: f64) -> Result<TransverseParts> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius must be finite and >= 0, got {r}")));
    }
    if !t.is_finite() {
        return Err(Error::Domain(format!("time separation must be finite, got {t}")));
    }
    spec.validate()?;
    if spec.is_zero() {
        return Ok(TransverseParts::default());
    }
    let t = t.abs();
    let k_max = spec.cutoff_radius(RADIAL_TAIL);
    let period = (r > 0.0).then(|| PI / r);
    let panels = spec.radial_panels(k_max, period);
    let res = integrate_adaptive(
        |k| {
            let w = radial_weight(spec, k) * (-spec.omega(k) * t).exp();
            let x = k * r;
            [w * (bessel::j0(x) - bessel::j1_over_x(x)), w * bessel::j2(x)]
        },
        &panels,
        0.0,
        RADIAL_REL_TOL,
        MAX_PANELS,
    )
    .map_err(|e| Error::numerical("kernel_exact", format!("r = {r}, t = {t}: {e}")))?;
    Ok(TransverseParts {
        a: 4.0 * PI * res.value[0],
        b: 4.0 * PI * res.value[1],
    })
}

/// Full 3×3 kernel from the radial reduction.
pub fn kernel_exact_matrix(spec: &FormFactorSpec, x: &Vec3, t: f64) -> Result<Mat3> {
    Ok(kernel_exact(spec, x.norm(), t)?.matrix(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn projector_examples() {
        let p = transverse_projector(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(p, Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0)));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = transverse_projector(&Vec3::new(s, s, 0.0)).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[(1, 1)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[(0, 1)], -0.5, epsilon = 1e-15);
        assert_eq!(p[(2, 2)], 1.0);
        assert!(transverse_projector(&Vec3::zeros()).is_err());
    }

    #[test]
    fn projector_on_many_random_vectors() {
        use rand::Rng;
        let mut rng = crate::rng::SeedTree::new(1).stream("test.projector", 0);
        for _ in 0..100_000 {
            let k = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let p = transverse_projector(&k).unwrap();
            assert!((p * p - p).abs().max() < 1e-14);
            assert!((p * k).norm() < 1e-14 * k.norm());
            assert!((p.trace() - 2.0).abs() < 1e-14);
            assert!((p - p.transpose()).abs().max() == 0.0);
        }
    }

    #[test]
    fn sharp_cutoff_diagonal_constant_is_pi_lambda_squared() {
        for lambda in [0.5, 1.0, 3.0] {
            let spec = FormFactorSpec::sharp(lambda, 0.0, 1.0).unwrap();
            let d = diagonal_constant(&spec).unwrap();
            assert!((d - PI * lambda * lambda).abs() < 1e-10 * lambda * lambda, "{d}");
        }
    }

    #[test]
    fn diagonal_constant_scales_with_amplitude_squared() {
        let d1 = diagonal_constant(&FormFactorSpec::gaussian(1.3, 0.4, 1.0).unwrap()).unwrap();
        let d3 = diagonal_constant(&FormFactorSpec::gaussian(1.3, 0.4, 3.0).unwrap()).unwrap();
        assert_relative_eq!(d3, 9.0 * d1, max_relative = 1e-13);
        assert_eq!(diagonal_constant(&FormFactorSpec::gaussian(1.0, 1.0, 0.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn coincident_points_are_isotropic() {
        let spec = FormFactorSpec::default();
        let d = diagonal_constant(&spec).unwrap();
        let w = kernel_exact(&spec, 0.0, 0.0).unwrap();
        assert_eq!(w.b, 0.0);
        assert_relative_eq!(w.a, 2.0 / 3.0 * d, max_relative = 1e-12);
        // and B vanishes continuously
        let near = kernel_exact(&spec, 1e-4, 0.3).unwrap();
        assert!(near.b.abs() < 1e-8);
    }

    #[test]
    fn decays_monotonically_in_time() {
        let spec = FormFactorSpec::default();
        for &r in &[0.0, 0.7, 2.0] {
            let mut prev = kernel_exact(&spec, r, 0.0).unwrap();
            for i in 1..30 {
                let cur = kernel_exact(&spec, r, 0.25 * i as f64).unwrap();
                assert!(cur.a.abs() <= prev.a.abs() + 1e-15, "r={r} i={i}");
                if r > 0.0 {
                    assert!(cur.b.abs() <= prev.b.abs() + 1e-15, "r={r} i={i}");
                }
                prev = cur;
            }
            assert!(prev.a.abs() < 1e-3);
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_kernel() {
        let spec = FormFactorSpec::gaussian(1.0, 1.0, 0.0).unwrap();
        assert_eq!(kernel_exact(&spec, 1.0, 0.5).unwrap(), TransverseParts::default());
    }

    proptest! {
        #[test]
        fn kernel_is_even_and_symmetric(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64, t in -2.0..2.0f64) {
            let spec = FormFactorSpec::default();
            let v = Vec3::new(x, y, z);
            let w = kernel_exact_matrix(&spec, &v, t).unwrap();
            prop_assert_eq!(w, kernel_exact_matrix(&spec, &-v, t).unwrap());
            prop_assert_eq!(w, kernel_exact_matrix(&spec, &v, -t).unwrap());
            prop_assert!((w - w.transpose()).abs().max() < 1e-15);
        }
    }
}
