//! Infinite-volume limit of a one-point function for a harmonic potential.
//!
//!     cargo run --release --example volume_scan

use dsi_gibbs::gibbs::{volume_scan, BoundaryWeight, GibbsTarget, McmcParams, Observable, PotentialSpec};
use dsi_gibbs::rng::SeedTree;

fn main() -> dsi_gibbs::Result<()> {
    let omega_sq = 1.0;
    let targets = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&t| {
            GibbsTarget::new(0.0, PotentialSpec::Harmonic { omega_sq }, BoundaryWeight::default(), t, (16.0 * t) as usize, None)
        })
        .collect::<dsi_gibbs::Result<Vec<_>>>()?;
    let obs = Observable::SquaredNorm { time: 0.0 };
    let mcmc = McmcParams { sweeps: 4000, ..McmcParams::default() };
    let report = volume_scan(&targets, &obs, &mcmc, 2, &SeedTree::new(4))?;
    report.write_csv(std::io::stdout().lock())?;
    println!("stationary oscillator value 3/(2ω₀) = {}", 1.5 / omega_sq.sqrt());
    println!("converged: {}", report.converged);
    Ok(())
}
