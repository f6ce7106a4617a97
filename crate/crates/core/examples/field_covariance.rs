//! The Ornstein–Uhlenbeck field: lag covariance of one mode and the spatial
//! covariance of the smeared field against the pair kernel.
//!
//!     cargo run --release --example field_covariance

use dsi_gibbs::gaussfield::{build_modes, eval_coupling, sample_field, ModeMesh, TimeGrid};
use dsi_gibbs::kernel::{kernel_exact_matrix, FormFactorSpec};
use dsi_gibbs::rng::SeedTree;
use dsi_gibbs::Vec3;

fn main() -> dsi_gibbs::Result<()> {
    let spec = FormFactorSpec::gaussian(1.0, 1.0, 1.0)?;
    let modes = build_modes(&spec, &ModeMesh::for_spec(&spec, 12, 8, 1e-6))?;
    println!("{} modes, Σ w|φ̂|²/(2ω) = {:.6}", modes.len(), modes.diag_sum());

    let grid = TimeGrid { t0: 0.0, dt: 0.1, nodes: 6 };
    let seeds = SeedTree::new(3);
    let n = 4000;
    let (x, y) = (Vec3::zeros(), Vec3::new(0.4, 0.0, 0.3));
    let lag = 3;
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    let mut ou = 0.0;
    let w0 = modes.omega(0);
    for i in 0..n {
        let s = sample_field(&modes, grid, &mut seeds.stream("example.field", i));
        cov += eval_coupling(&modes, &s, lag, &x) * eval_coupling(&modes, &s, 0, &y).transpose();
        ou += s.coordinate(0, 0, 0, lag) * s.coordinate(0, 0, 0, 0);
    }
    cov /= n as f64;
    ou /= n as f64;
    let l = lag as f64 * grid.dt;
    println!("mode 0 lag covariance {ou:.4} vs e^(-ωℓdt)/(2ω) = {:.4}", (-w0 * l).exp() / (2.0 * w0));
    println!("empirical Cov(X(x), X(y)) at lag {l}:\n{cov:.4}");
    println!("mode-sum kernel:\n{:.4}", modes.kernel(&(x - y), l));
    println!("exact kernel:\n{:.4}", kernel_exact_matrix(&spec, &(x - y), l)?);
    Ok(())
}
