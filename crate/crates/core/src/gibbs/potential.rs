//! External potentials `V` and boundary weights `ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::Path;
use crate::Vec3;

/// Pointwise potential `V: ℝ³ → ℝ`. Every variant is Kato-decomposable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// `½ ω₀² |x|²`
    Harmonic { omega_sq: f64 },
    /// `coefficient · |x|^power` with `power` a positive even integer.
    Confining { power: u32, coefficient: f64 },
    /// `−charge / max(|x|, ε_reg)`; `ε_reg` defaults to `0.1·√dt`.
    Coulomb {
        charge: f64,
        #[serde(default)]
        regularizer: Option<f64>,
    },
    /// Coulomb well plus a confining tail `coefficient · |x|^power`.
    CoulombPlus {
        charge: f64,
        #[serde(default)]
        regularizer: Option<f64>,
        power: u32,
        coefficient: f64,
    },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        let confining = |power: u32, coefficient: f64| {
            if power == 0 || power % 2 != 0 {
                return Err(Error::Domain(format!("confining power must be a positive even integer, got {power}")));
            }
            if !(coefficient >= 0.0 && coefficient.is_finite()) {
                return Err(Error::Domain(format!("confining coefficient must be finite and >= 0, got {coefficient}")));
            }
            Ok(())
        };
        let coulomb = |charge: f64, reg: Option<f64>| {
            if !(charge >= 0.0 && charge.is_finite()) {
                return Err(Error::Domain(format!("Coulomb charge must be finite and >= 0, got {charge}")));
            }
            if let Some(r) = reg {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::Domain(format!("Coulomb regularizer must be finite and >= 0, got {r}")));
                }
            }
            Ok(())
        };
        match *self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::Harmonic { omega_sq } => {
                if omega_sq >= 0.0 && omega_sq.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("harmonic ω₀² must be finite and >= 0, got {omega_sq}")))
                }
            }
            PotentialSpec::Confining { power, coefficient } => confining(power, coefficient),
            PotentialSpec::Coulomb { charge, regularizer } => coulomb(charge, regularizer),
            PotentialSpec::CoulombPlus { charge, regularizer, power, coefficient } => {
                coulomb(charge, regularizer)?;
                confining(power, coefficient)
            }
        }
    }

    /// `V(x)` on a grid with spacing `dt` (only the Coulomb regularizer uses `dt`).
    pub fn value(&self, x: &Vec3, dt: f64) -> f64 {
        let well = |charge: f64, reg: Option<f64>| {
            let eps = reg.unwrap_or(0.1 * dt.sqrt());
            -charge / x.norm().max(eps)
        };
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Harmonic { omega_sq } => 0.5 * omega_sq * x.norm_squared(),
            PotentialSpec::Confining { power, coefficient } => coefficient * x.norm_squared().powi(power as i32 / 2),
            PotentialSpec::Coulomb { charge, regularizer } => well(charge, regularizer),
            PotentialSpec::CoulombPlus { charge, regularizer, power, coefficient } => {
                well(charge, regularizer) + coefficient * x.norm_squared().powi(power as i32 / 2)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PotentialSpec::Zero)
    }
}

/// Trapezoid weight of node `j` out of `0..=n`.
#[inline]
pub(crate) fn trapezoid_weight(j: usize, n: usize) -> f64 {
    if j == 0 || j == n {
        0.5
    } else {
        1.0
    }
}

/// Trapezoid rule for `∫_{−T}^{T} V(B_s) ds`.
pub fn potential_integral(path: &Path, potential: &PotentialSpec) -> Result<f64> {
    if potential.is_zero() {
        return Ok(0.0);
    }
    let n = path.steps();
    let mut s = 0.0;
    for (j, x) in path.points().iter().enumerate() {
        let v = potential.value(x, path.dt());
        if !v.is_finite() {
            return Err(Error::numerical(
                "potential_integral",
                format!("V = {v} at node {j} (t = {}, x = {:?})", path.time(j), x.as_slice()),
            ));
        }
        s += trapezoid_weight(j, n) * v;
    }
    let total = s * path.dt();
    if !total.is_finite() {
        return Err(Error::numerical("potential_integral", format!("sum overflowed to {total}")));
    }
    Ok(total)
}

/// Boundary weight `ψ ≥ 0` applied at both ends of the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryWeight {
    /// `exp(−|x − center|²/(2 width²))`
    GaussianDensity { center: [f64; 3], width: f64 },
    /// `exp(−1/(1 − |x − center|²/radius²))` inside the ball, 0 outside.
    CompactBump { center: [f64; 3], radius: f64 },
}

impl Default for BoundaryWeight {
    fn default() -> Self {
        BoundaryWeight::GaussianDensity { center: [0.0; 3], width: 1.0 }
    }
}

impl BoundaryWeight {
    pub fn validate(&self) -> Result<()> {
        let (c, s) = match *self {
            BoundaryWeight::GaussianDensity { center, width } => (center, width),
            BoundaryWeight::CompactBump { center, radius } => (center, radius),
        };
        if !(s > 0.0 && s.is_finite()) || !c.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("boundary weight needs a finite center and positive size, got {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        match *self {
            BoundaryWeight::GaussianDensity { center, .. } | BoundaryWeight::CompactBump { center, .. } => Vec3::from(center),
        }
    }

    /// Length scale of the weight, used to size endpoint moves.
    pub fn width(&self) -> f64 {
        match *self {
            BoundaryWeight::GaussianDensity { width, .. } => width,
            BoundaryWeight::CompactBump { radius, .. } => 0.5 * radius,
        }
    }

    /// `log ψ(x)`, `−∞` where `ψ = 0`.
    pub fn log_psi(&self, x: &Vec3) -> f64 {
        match *self {
            BoundaryWeight::GaussianDensity { center, width } => {
                -(x - Vec3::from(center)).norm_squared() / (2.0 * width * width)
            }
            BoundaryWeight::CompactBump { center, radius } => {
                let u = (x - Vec3::from(center)).norm_squared() / (radius * radius);
                if u < 1.0 {
                    -1.0 / (1.0 - u)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path_integrals() {
        let x = Vec3::new(0.6, 0.0, 0.8);
        let path = Path::constant(1.5, 30, x).unwrap();
        assert_eq!(potential_integral(&path, &PotentialSpec::Zero).unwrap(), 0.0);
        let h = potential_integral(&path, &PotentialSpec::Harmonic { omega_sq: 2.0 }).unwrap();
        assert!((h - 3.0 * 0.5 * 2.0 * 1.0).abs() < 1e-12);
        let c = potential_integral(&path, &PotentialSpec::Coulomb { charge: 0.7, regularizer: None }).unwrap();
        assert!((c + 3.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn coulomb_is_regularized_at_origin() {
        let v = PotentialSpec::Coulomb { charge: 1.0, regularizer: None };
        assert!((v.value(&Vec3::zeros(), 0.01) + 100.0).abs() < 1e-12);
        let v = PotentialSpec::Coulomb { charge: 1.0, regularizer: Some(0.0) };
        let path = Path::constant(1.0, 4, Vec3::zeros()).unwrap();
        match potential_integral(&path, &v) {
            Err(Error::Numerical { detail, .. }) => assert!(detail.contains("node 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation() {
        assert!(PotentialSpec::Confining { power: 3, coefficient: 1.0 }.validate().is_err());
        assert!(PotentialSpec::Coulomb { charge: -1.0, regularizer: None }.validate().is_err());
        assert!(PotentialSpec::Harmonic { omega_sq: 1.0 }.validate().is_ok());
        assert!(BoundaryWeight::GaussianDensity { center: [0.0; 3], width: 0.0 }.validate().is_err());
    }

    #[test]
    fn bump_vanishes_outside() {
        let b = BoundaryWeight::CompactBump { center: [1.0, 0.0, 0.0], radius: 2.0 };
        assert_eq!(b.log_psi(&Vec3::new(1.0, 0.0, 0.0)), -1.0);
        assert_eq!(b.log_psi(&Vec3::new(3.5, 0.0, 0.0)), f64::NEG_INFINITY);
    }

    #[test]
    fn toml_round_trip() {
        let v: PotentialSpec = toml::from_str("kind = \"harmonic\"\nomega_sq = 1.5").unwrap();
        assert_eq!(v, PotentialSpec::Harmonic { omega_sq: 1.5 });
        assert!(toml::from_str::<PotentialSpec>("kind = \"harmonic\"\nomega = 1.5").is_err());
    }
}
