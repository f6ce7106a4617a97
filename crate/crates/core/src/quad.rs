//! One-dimensional quadrature: Gauss–Legendre rules and adaptive
//! Gauss–Kronrod (G7/K15) for small vector-valued integrands.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| half * v).collect(),
    )
}

// Kronrod abscissae on [0, 1); the odd-indexed ones are the Gauss 7-point nodes.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
pub(crate) const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One G7/K15 panel: returns (Kronrod estimate, |K - G| per component, K-estimate of |f|).
pub fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; N], [f64; N], f64)
where
    F: FnMut(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let mut abs_sum = 0.0;
    for d in 0..N {
        k[d] = WGK[7] * fc[d];
        g[d] = WG[3] * fc[d];
        abs_sum += WGK[7] * fc[d].abs();
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for d in 0..N {
            k[d] += WGK[j] * (f1[d] + f2[d]);
            if j % 2 == 1 {
                g[d] += WG[j / 2] * (f1[d] + f2[d]);
            }
            abs_sum += WGK[j] * (f1[d].abs() + f2[d].abs());
        }
    }
    let mut err = [0.0; N];
    for d in 0..N {
        k[d] *= h;
        err[d] = (k[d] - g[d] * h).abs();
    }
    (k, err, abs_sum * h.abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub panels: usize,
}

/// Adaptive G7/K15 over the given breakpoints.
///
/// Panels are bisected until the summed `|K - G|` (max over components) is
/// below `max(abs_tol, rel_tol * ∫|f|)`.
pub fn integrate_adaptive<const N: usize, F>(
    mut f: F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Integral<N>>
where
    F: FnMut(f64) -> [f64; N],
{
    struct Panel<const N: usize> {
        a: f64,
        b: f64,
        value: [f64; N],
        err: f64,
        abs: f64,
    }
    let mut panels: Vec<Panel<N>> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e, s) = gk15(&mut f, w[0], w[1]);
            Panel {
                a: w[0],
                b: w[1],
                value: v,
                err: e.iter().cloned().fold(0.0, f64::max),
                abs: s,
            }
        })
        .collect();
    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        let total_abs: f64 = panels.iter().map(|p| p.abs).sum();
        let tol = abs_tol.max(rel_tol * total_abs);
        if let Some(p) = panels.iter().find(|p| p.value.iter().any(|v| !v.is_finite())) {
            return Err(Error::numerical(
                "adaptive quadrature",
                format!("non-finite integrand on [{}, {}]", p.a, p.b),
            ));
        }
        if total_err <= tol || panels.is_empty() {
            break;
        }
        if panels.len() >= max_panels {
            return Err(Error::numerical(
                "adaptive quadrature",
                format!("{} panels, estimated error {total_err:e} above tolerance {tol:e}", panels.len()),
            ));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("nonempty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        for (a, b) in [(p.a, mid), (mid, p.b)] {
            let (v, e, s) = gk15(&mut f, a, b);
            panels.push(Panel {
                a,
                b,
                value: v,
                err: e.iter().cloned().fold(0.0, f64::max),
                abs: s,
            });
        }
    }
    // sum in abscissa order so results do not depend on refinement history
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = [0.0; N];
    for p in &panels {
        for d in 0..N {
            value[d] += p.value[d];
        }
    }
    Ok(Integral {
        value,
        error: panels.iter().map(|p| p.err).sum(),
        panels: panels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn kronrod_nodes_reproduce_gauss7() {
        let (x, _) = gauss_legendre(7);
        assert!((x[6] - XGK[1]).abs() < 1e-15);
        assert!((x[4] - XGK[5]).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_oscillation_and_kinks() {
        let r = integrate_adaptive(|x: f64| [(20.0 * x).cos(), x.abs().sqrt()], &[-1.0, 0.0, 1.0], 0.0, 1e-13, 500)
            .unwrap();
        assert!((r.value[0] - 2.0 * (20.0f64).sin() / 20.0).abs() < 1e-12);
        assert!((r.value[1] - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = integrate_adaptive(|x: f64| [1.0 / x.abs().powf(0.99)], &[-1.0, 0.5], 0.0, 1e-14, 20);
        assert!(matches!(r, Err(Error::Numerical { .. })));
    }
}
