//! Exponential localization of B₀ under a confining potential: clamped
//! estimates of E[e^{c|B₀|^γ}] must settle as the clamp level grows.
//!
//!     cargo run --release --example localization

use dsi_gibbs::gibbs::{localization_tail, mcmc_chains, pooled_samples, BoundaryWeight, GibbsTarget, McmcParams, PotentialSpec};
use dsi_gibbs::rng::SeedTree;

fn main() -> dsi_gibbs::Result<()> {
    let potential = PotentialSpec::Confining { power: 4, coefficient: 1.0 };
    let target = GibbsTarget::new(0.0, potential, BoundaryWeight::default(), 2.0, 64, None)?;
    let runs = mcmc_chains(&target, &McmcParams { sweeps: 4000, ..McmcParams::default() }, 2, &SeedTree::new(6))?;
    let samples = pooled_samples(&runs);
    for gamma in [1.0, 2.0] {
        let r = localization_tail(&samples, 1.0, gamma, &[2.0, 5.0, 10.0, 50.0, 500.0], 20)?;
        println!("γ = {gamma}");
        for (m, e) in &r.rows {
            println!("   m = {m:6}: {:.4} ± {:.4}", e.mean, e.stderr_or_nan());
        }
        println!("   stable: {}", r.stable);
    }
    Ok(())
}
