use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::integrate_adaptive;

/// Radial UV profile of the form factor `φ̂(|k|)`, before the overall amplitude.
///
/// Every variant is real, even and rotation invariant, and satisfies
/// `∫ ω|φ̂|² d³k < ∞` and `∫ |φ̂|²/ω² d³k < ∞` for every `m ≥ 0`:
///
/// * `GaussianCutoff`: `exp(-k²/(2Λ²))`. Finite at `k = 0`, so for `m = 0`
///   the infrared integrand `|φ̂|²/k²` times `k²` stays bounded.
/// * `SharpCutoff`: indicator of `k ≤ Λ`. Both moments are integrals over a
///   ball and finite for every `m ≥ 0`.
/// * `LorentzianCutoff`: `(Λ²/(k²+Λ²))²`. The square is needed: a plain
///   Lorentzian leaves `∫ ω|φ̂|²` logarithmically divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    GaussianCutoff { scale: f64 },
    SharpCutoff { radius: f64 },
    LorentzianCutoff { scale: f64 },
}

/// The pair `(φ̂, m)` defining the dispersion `ω(k) = √(k² + m²)` and the pair kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormFactorSpec {
    pub profile: Profile,
    pub mass: f64,
    pub amplitude: f64,
}

impl Default for FormFactorSpec {
    fn default() -> Self {
        Self {
            profile: Profile::GaussianCutoff { scale: 1.0 },
            mass: 1.0,
            amplitude: 1.0,
        }
    }
}

/// Moments whose finiteness makes a form factor admissible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    /// `∫ ω(k) |φ̂(k)|² d³k`
    pub uv_moment: f64,
    /// `∫ |φ̂(k)|² / ω(k)² d³k`
    pub ir_moment: f64,
}

impl FormFactorSpec {
    pub fn new(profile: Profile, mass: f64, amplitude: f64) -> Result<Self> {
        let spec = Self { profile, mass, amplitude };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(scale: f64, mass: f64, amplitude: f64) -> Result<Self> {
        Self::new(Profile::GaussianCutoff { scale }, mass, amplitude)
    }

    pub fn sharp(radius: f64, mass: f64, amplitude: f64) -> Result<Self> {
        Self::new(Profile::SharpCutoff { radius }, mass, amplitude)
    }

    pub fn lorentzian(scale: f64, mass: f64, amplitude: f64) -> Result<Self> {
        Self::new(Profile::LorentzianCutoff { scale }, mass, amplitude)
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.scale();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!("profile scale must be positive, got {scale}")));
        }
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return Err(Error::Domain(format!("mass must be >= 0, got {}", self.mass)));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::Domain(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        Ok(())
    }

    /// Λ of the profile.
    pub fn scale(&self) -> f64 {
        match self.profile {
            Profile::GaussianCutoff { scale } => scale,
            Profile::SharpCutoff { radius } => radius,
            Profile::LorentzianCutoff { scale } => scale,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    #[inline]
    pub fn omega(&self, k: f64) -> f64 {
        (k * k + self.mass * self.mass).sqrt()
    }

    #[inline]
    pub fn phi_hat(&self, k: f64) -> f64 {
        let shape = match self.profile {
            Profile::GaussianCutoff { scale } => (-0.5 * k * k / (scale * scale)).exp(),
            Profile::SharpCutoff { radius } => {
                if k <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::LorentzianCutoff { scale } => {
                let s2 = scale * scale;
                let q = s2 / (k * k + s2);
                q * q
            }
        };
        self.amplitude * shape
    }

    /// Spectral weight `|φ̂(k)|² / (2ω(k))`. Infinite at `k = 0` when `m = 0`.
    #[inline]
    pub fn spectral_weight(&self, k: f64) -> f64 {
        let p = self.phi_hat(k);
        p * p / (2.0 * self.omega(k))
    }

    /// Radius beyond which the radial integrand `k² |φ̂|²/(2ω)` carries less
    /// than `rel_tail` of its total mass (crude but conservative bounds).
    pub fn cutoff_radius(&self, rel_tail: f64) -> f64 {
        let rel_tail = rel_tail.clamp(1e-300, 0.5);
        // a mass suppresses the bulk more than the tail
        let heavy = 1.0 + self.mass / self.scale();
        match self.profile {
            Profile::GaussianCutoff { scale } => scale * ((heavy / rel_tail).ln() + 2.0).sqrt(),
            Profile::SharpCutoff { radius } => radius,
            Profile::LorentzianCutoff { scale } => scale * (rel_tail / heavy).powf(-1.0 / 6.0),
        }
    }

    /// Radii where the profile is not smooth; quadrature panels break there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.profile {
            Profile::SharpCutoff { radius } => vec![radius],
            _ => Vec::new(),
        }
    }

    /// Sorted radial breakpoints on `[0, k_max]`, including both ends.
    pub(crate) fn radial_panels(&self, k_max: f64, period: Option<f64>) -> Vec<f64> {
        let mut pts = vec![0.0, k_max];
        pts.extend(self.breakpoints().into_iter().filter(|&b| b < k_max));
        // the profile varies on scale Λ; keep panels no wider than that
        let step = period.map_or(self.scale(), |p| p.min(self.scale()));
        let count = (k_max / step).ceil() as usize;
        pts.extend((1..count).map(|i| i as f64 * step));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * k_max.max(1.0));
        pts
    }

    /// Evaluate both admissibility moments by radial quadrature.
    pub fn admissibility(&self) -> Result<Admissibility> {
        self.validate()?;
        if self.is_zero() {
            return Ok(Admissibility { uv_moment: 0.0, ir_moment: 0.0 });
        }
        let k_max = self.cutoff_radius(1e-16) * 2.0;
        let panels = self.radial_panels(k_max, None);
        let r = integrate_adaptive(
            |k| {
                let p = self.phi_hat(k);
                let w = self.omega(k);
                let ir = if w > 0.0 { k * k * p * p / (w * w) } else { p * p };
                [k * k * w * p * p, ir]
            },
            &panels,
            0.0,
            1e-10,
            20_000,
        )?;
        let out = Admissibility {
            uv_moment: 4.0 * PI * r.value[0],
            ir_moment: 4.0 * PI * r.value[1],
        };
        if !(out.uv_moment.is_finite() && out.ir_moment.is_finite()) {
            return Err(Error::numerical("admissibility", format!("{out:?}")));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(FormFactorSpec::gaussian(0.0, 1.0, 1.0).is_err());
        assert!(FormFactorSpec::gaussian(1.0, -1.0, 1.0).is_err());
        assert!(FormFactorSpec::sharp(1.0, 0.0, -2.0).is_err());
        assert!(FormFactorSpec::lorentzian(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn every_profile_is_admissible_at_zero_mass() {
        for spec in [
            FormFactorSpec::gaussian(1.0, 0.0, 1.0).unwrap(),
            FormFactorSpec::sharp(2.0, 0.0, 1.0).unwrap(),
            FormFactorSpec::lorentzian(1.0, 0.0, 1.0).unwrap(),
        ] {
            let a = spec.admissibility().unwrap();
            assert!(a.uv_moment > 0.0 && a.ir_moment > 0.0, "{spec:?}: {a:?}");
        }
        // sharp, m = 0: ∫ k |φ̂|² d³k = 4π Λ⁴/4 and ∫ |φ̂|²/k² d³k = 4π Λ
        let a = FormFactorSpec::sharp(2.0, 0.0, 1.0).unwrap().admissibility().unwrap();
        assert!((a.uv_moment - PI * 16.0).abs() < 1e-9);
        assert!((a.ir_moment - 8.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn cutoff_radius_bounds_the_tail() {
        let spec = FormFactorSpec::lorentzian(1.0, 0.0, 1.0).unwrap();
        let k = spec.cutoff_radius(1e-8);
        let total = crate::kernel::diagonal_constant(&spec).unwrap();
        let tail = integrate_adaptive(
            |q| [4.0 * PI * q * q * spec.spectral_weight(q)],
            &[k, 10.0 * k, 1e4 * k],
            0.0,
            1e-10,
            2000,
        )
        .unwrap()
        .value[0];
        assert!(tail / total < 1e-8, "tail fraction {}", tail / total);
    }
}
