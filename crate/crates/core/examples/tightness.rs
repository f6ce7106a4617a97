//! Moment exponents of path increments under the Gibbs measure, across volumes.
//!
//!     cargo run --release --example tightness

use dsi_gibbs::gibbs::{tightness_scan, BoundaryWeight, GibbsTarget, McmcParams, PotentialSpec, TightnessParams};
use dsi_gibbs::rng::SeedTree;

fn main() -> dsi_gibbs::Result<()> {
    let params = TightnessParams::default();
    let mcmc = McmcParams { sweeps: 3000, ..McmcParams::default() };
    let seeds = SeedTree::new(2);
    println!("  T   n   slope          D");
    for (i, t) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let steps = (32.0 * t) as usize;
        let target = GibbsTarget::new(0.0, PotentialSpec::Harmonic { omega_sq: 1.0 }, BoundaryWeight::default(), t, steps, None)?;
        let report = tightness_scan(&target, &params, &mcmc, 2, &seeds.child("example.tightness", i as u64))?;
        for f in &report.fits {
            println!("{t:3} {:3}   {:.3} ± {:.3}   {:.3}", f.moment, f.slope, f.slope_stderr, f.prefactor);
        }
    }
    Ok(())
}
