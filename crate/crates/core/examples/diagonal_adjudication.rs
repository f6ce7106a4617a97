//! Which diagonal term completes the iterated integral: (T/3)·D or (D/3)·QV?
//!
//! Both agree on the off-diagonal part; they differ by a fixed factor on the
//! diagonal. Comparing against ½ Var J on fine paths decides.
//!
//!     cargo run --release --example diagonal_adjudication

use dsi_gibbs::gaussfield::{build_modes, ModeMesh};
use dsi_gibbs::kernel::{FormFactorSpec, KernelTable, TableGrid};
use dsi_gibbs::rng::SeedTree;
use dsi_gibbs::stochint::adjudicate_diagonal;

fn main() -> dsi_gibbs::Result<()> {
    let spec = FormFactorSpec::gaussian(1.0, 1.0, 1.0)?;
    let modes = build_modes(&spec, &ModeMesh::for_spec(&spec, 8, 3, 1e-6))?;
    let table = KernelTable::build(&spec, TableGrid::new(8.0, 2.0, 201, 65)?)?;
    let report = adjudicate_diagonal(&table, &modes, 1.0, 2048, 6, &SeedTree::new(5))?;
    report.write_csv(std::io::stdout().lock())?;
    println!(
        "\nmean ½Var J - s_hat = {:.5} (relative std {:.2}%)",
        report.mean_d,
        100.0 * report.relative_std()
    );
    println!("ratio to (T/3)D: {:.3}, to (D/3)QV: {:.3}", report.ratio_paper_third, report.ratio_standard_qv);
    println!("verdict: {}", report.verdict.map_or("undecided", |v| v.name()));
    Ok(())
}
