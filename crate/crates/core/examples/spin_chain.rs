//! Spin chains at decreasing spacing against their continuum limit, and the
//! lattice form of the pair interaction.
//!
//!     cargo run --release --example spin_chain

use std::sync::Arc;

use dsi_gibbs::gibbs::{Observable, PotentialSpec};
use dsi_gibbs::kernel::{FormFactorSpec, KernelTable, TableGrid};
use dsi_gibbs::paths::{sample_brownian, Path};
use dsi_gibbs::rng::SeedTree;
use dsi_gibbs::spinchain::{
    continuum_compare, harmonic_free_end_covariance, interaction_energy, ChainParams, ChainSpec, Interaction,
};
use dsi_gibbs::stats::Estimate;
use dsi_gibbs::stochint::s_hat;
use dsi_gibbs::Vec3;

fn main() -> dsi_gibbs::Result<()> {
    let (t, omega) = (1.0, 1.0);
    let potential = PotentialSpec::Harmonic { omega_sq: omega * omega };
    let specs = [64, 128, 256]
        .iter()
        .map(|&n| ChainSpec::new(2.0 * t / n as f64, t, potential, None, Interaction::None))
        .collect::<dsi_gibbs::Result<Vec<_>>>()?;
    let obs = Observable::TwoPoint { s: -t, t };
    let exact = 3.0 * harmonic_free_end_covariance(omega, t, -t, t);
    let continuum = Estimate { mean: exact, stderr: Some(0.0), n_samples: 0, n_batches: 0 };
    let params = ChainParams { sweeps: 4000, ..ChainParams::default() };
    let report = continuum_compare(&specs, continuum, &obs, Some(&params), &SeedTree::new(9))?;
    report.write_csv(std::io::stdout().lock())?;
    println!("gap order in ε: {:.2}", report.order);

    // the lattice Matrix interaction is exactly -α² s_hat on the same grid
    let spec = FormFactorSpec::gaussian(1.0, 1.0, 1.0)?;
    let table = Arc::new(KernelTable::build(&spec, TableGrid::new(8.0, 2.0, 201, 65)?)?);
    let path: Path = sample_brownian(t, 32, Vec3::zeros(), &mut SeedTree::new(9).stream("example.matrix", 0))?;
    let chain = ChainSpec::new(path.dt(), t, PotentialSpec::Zero, None, Interaction::Matrix { alpha: 0.7, table: table.clone() })?;
    let lattice = interaction_energy(path.points(), &chain)?;
    println!("\nlattice interaction {lattice:.15}\n-α² s_hat           {:.15}", -0.49 * s_hat(&path, &table)?);
    Ok(())
}
