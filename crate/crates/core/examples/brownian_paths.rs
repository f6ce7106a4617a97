//! Brownian paths on [-T, T]: quadratic variation, fourth moments, CSV round trip.
//!
//!     cargo run --release --example brownian_paths

use dsi_gibbs::paths::{quadratic_variation, sample_brownian, Path};
use dsi_gibbs::rng::SeedTree;
use dsi_gibbs::stats::mean_stderr;
use dsi_gibbs::Vec3;

fn main() -> dsi_gibbs::Result<()> {
    let seeds = SeedTree::new(7);
    let (t, n) = (1.0, 4096);
    let path = sample_brownian(t, n, Vec3::zeros(), &mut seeds.stream("example.qv", 0))?;
    let qv = quadratic_variation(&path);
    println!("per-component quadratic variation {:.4?} (expected 2T = {})", qv.per_component.as_slice(), 2.0 * t);

    // E|B_t - B_s|^4 = 15 |t - s|^2 in three dimensions
    let lag = 0.25;
    let fourth: Vec<f64> = (0..20_000)
        .map(|i| {
            let p = sample_brownian(t, 8, Vec3::zeros(), &mut seeds.stream("example.moments", i)).unwrap();
            (p.points()[1] - p.points()[0]).norm_squared().powi(2) / (lag * lag)
        })
        .collect();
    let (m, se) = mean_stderr(&fourth);
    println!("E|ΔB|⁴/|Δt|² = {m:.3} ± {se:.3} (expected 15)");

    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    let back = Path::read_csv(buf.as_slice())?;
    println!("CSV round trip exact: {}", back == path);
    Ok(())
}
