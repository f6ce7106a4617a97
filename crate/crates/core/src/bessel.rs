//! Spherical Bessel functions of orders 0, 1 and 2.
//!
//! Only the combinations needed by the angular reduction of the transverse
//! kernel are exposed. Below `SERIES_CUTOFF` the closed forms lose digits to
//! cancellation, so a Taylor series is used instead.

const SERIES_CUTOFF: f64 = 0.5;

/// `j0(x) = sin x / x`.
pub fn j0(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0))))
    } else {
        x.sin() / x
    }
}

/// `j1(x) / x`, regular at the origin where it equals 1/3.
pub fn j1_over_x(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0 * (1.0 - x2 / 88.0 * (1.0 - x2 / 130.0))))) / 3.0
    } else {
        let (s, c) = x.sin_cos();
        (s / x - c) / (x * x)
    }
}

/// `j1(x)`.
pub fn j1(x: f64) -> f64 {
    x * j1_over_x(x)
}

/// `j2(x)`.
pub fn j2(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        x2 / 15.0 * (1.0 - x2 / 14.0 * (1.0 - x2 / 36.0 * (1.0 - x2 / 66.0 * (1.0 - x2 / 104.0))))
    } else {
        let (s, c) = x.sin_cos();
        let inv = 1.0 / x;
        (3.0 * inv * inv * inv - inv) * s - 3.0 * c * inv * inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_j0(x: f64) -> f64 {
        x.sin() / x
    }
    fn closed_j1(x: f64) -> f64 {
        x.sin() / (x * x) - x.cos() / x
    }
    fn closed_j2(x: f64) -> f64 {
        (3.0 / x.powi(3) - 1.0 / x) * x.sin() - 3.0 * x.cos() / (x * x)
    }

    #[test]
    fn series_matches_closed_form_at_the_switch() {
        // at x = 0.5 the closed forms still carry ~12 good digits
        for &x in &[0.499_999, 0.5, 0.7, 1.3] {
            assert!((j0(x) - closed_j0(x)).abs() < 1e-13);
            assert!((j1(x) - closed_j1(x)).abs() < 1e-12);
            assert!((j2(x) - closed_j2(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn recurrence_and_origin() {
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j2(0.0), 0.0);
        assert!((j1_over_x(0.0) - 1.0 / 3.0).abs() < 1e-16);
        // j0 + j2 = 3 j1 / x
        for i in 1..200 {
            let x = 0.05 * i as f64;
            assert!((j0(x) + j2(x) - 3.0 * j1_over_x(x)).abs() < 1e-12, "x = {x}");
        }
    }
}
