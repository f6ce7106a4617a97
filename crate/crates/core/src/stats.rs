//! Small Monte Carlo estimators shared by the samplers.

/// Mean with an optional standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// `None` when there were too few batches to trust an error bar.
    pub stderr: Option<f64>,
    pub n_samples: usize,
    pub n_batches: usize,
}

impl Estimate {
    /// True when `|self − value| ≤ k·stderr` (false without an error bar).
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        self.stderr.is_some_and(|s| (self.mean - value).abs() <= k * s)
    }

    pub fn stderr_or_nan(&self) -> f64 {
        self.stderr.unwrap_or(f64::NAN)
    }
}

pub const MIN_BATCHES: usize = 10;

/// Batch-means estimate for a correlated series using `n_batches` equal batches.
/// Fewer than [`MIN_BATCHES`] batches yields a point estimate only.
pub fn batch_means(values: &[f64], n_batches: usize) -> Estimate {
    let n = values.len();
    let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
    let nb = n_batches.min(n);
    if nb < MIN_BATCHES {
        return Estimate { mean, stderr: None, n_samples: n, n_batches: nb };
    }
    let size = n / nb;
    let means: Vec<f64> = (0..nb)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (nb - 1) as f64;
    Estimate { mean, stderr: Some((var / nb as f64).sqrt()), n_samples: n, n_batches: nb }
}

/// Mean and standard error of independent samples.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let (_, se) = mean_stderr(values);
    se * (values.len() as f64).sqrt()
}

/// Least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
