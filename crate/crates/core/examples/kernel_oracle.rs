//! Pair kernel three ways: radial reduction, brute 3D quadrature, and the
//! interpolated table.
//!
//!     cargo run --release --example kernel_oracle

use dsi_gibbs::kernel::{
    diagonal_constant, kernel_brute, kernel_exact, kernel_exact_matrix, FormFactorSpec, KernelTable, TableGrid,
};
use dsi_gibbs::Vec3;

fn main() -> dsi_gibbs::Result<()> {
    let spec = FormFactorSpec::gaussian(1.0, 1.0, 1.0)?;
    println!("diagonal constant ∫|φ̂|²/(2ω) d³k = {:.12}", diagonal_constant(&spec)?);

    let sharp = FormFactorSpec::sharp(2.0, 0.0, 1.0)?;
    println!(
        "sharp cutoff Λ=2, m=0: {:.12} (πΛ² = {:.12})",
        diagonal_constant(&sharp)?,
        std::f64::consts::PI * 4.0
    );

    println!("\n   r     t        A(r,t)          B(r,t)     |exact - brute|/|brute|");
    let dir = Vec3::new(2.0, -1.0, 2.0) / 3.0;
    for &(r, t) in &[(0.0, 0.0), (0.5, 0.0), (1.0, 0.5), (2.0, 1.0)] {
        let parts = kernel_exact(&spec, r, t)?;
        let x = dir * r;
        let brute = kernel_brute(&spec, &x, t)?;
        let exact = kernel_exact_matrix(&spec, &x, t)?;
        println!(
            "{r:5.2} {t:5.2} {:15.10} {:15.10} {:12.3e}",
            parts.a,
            parts.b,
            (exact - brute).norm() / brute.norm()
        );
    }

    let table = KernelTable::build(&spec, TableGrid::new(4.0, 4.0, 201, 201)?)?;
    let (x, t) = (Vec3::new(0.31, -0.42, 0.17), 0.37);
    let err = (table.lookup(&x, t)? - kernel_exact_matrix(&spec, &x, t)?).norm();
    println!("\ntable lookup off the grid: |table - exact| = {err:.3e}");
    Ok(())
}
