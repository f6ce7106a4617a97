//! Integrating out the field: E[e^{iJ}] = exp(-½ Var J) for fixed paths.
//!
//!     cargo run --release --example gaussian_identity

use dsi_gibbs::gaussfield::{build_modes, mc_characteristic, ModeMesh};
use dsi_gibbs::kernel::{FormFactorSpec, KernelTable, TableGrid};
use dsi_gibbs::paths::sample_brownian;
use dsi_gibbs::rng::SeedTree;
use dsi_gibbs::stochint::{s_hat, variance_of_j};
use dsi_gibbs::Vec3;

fn main() -> dsi_gibbs::Result<()> {
    let spec = FormFactorSpec::gaussian(1.0, 1.0, 0.5)?;
    let modes = build_modes(&spec, &ModeMesh::for_spec(&spec, 8, 3, 1e-6))?;
    let table = KernelTable::build(&spec, TableGrid::new(8.0, 2.0, 201, 65)?)?;
    let seeds = SeedTree::new(11);
    println!("path      Re E[e^iJ]          Im            exp(-Var/2)     s_hat");
    for i in 0..5 {
        let path = sample_brownian(1.0, 64, Vec3::zeros(), &mut seeds.stream("example.path", i))?;
        let est = mc_characteristic(&path, &modes, 20_000, &seeds.child("example.field", i))?;
        let var = variance_of_j(&path, &modes);
        println!(
            "{i:4}  {:.4} ± {:.4}  {:+.4} ± {:.4}  {:.4}  {:+.4}",
            est.re,
            est.re_stderr,
            est.im,
            est.im_stderr,
            (-0.5 * var).exp(),
            s_hat(&path, &table)?
        );
    }
    Ok(())
}
