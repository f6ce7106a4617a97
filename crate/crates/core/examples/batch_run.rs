//! Drive the batch runner from code: write a config, run a subcommand, read
//! the manifest. Same as `dsi --out-dir <dir> volume-scan <config>`.
//!
//!     cargo run --release --example batch_run

use clap::Parser;
use dsi_gibbs::cli::{run, write_config, Cli, Config};
use dsi_gibbs::gibbs::PotentialSpec;

fn main() -> dsi_gibbs::Result<()> {
    let dir = std::env::temp_dir().join("dsi_batch_run");
    std::fs::create_dir_all(&dir)?;
    let mut config = Config::default();
    config.target.potential = PotentialSpec::Harmonic { omega_sq: 1.0 };
    config.mcmc.sweeps = 2000;
    let path = dir.join("volume.toml");
    write_config(&config, &path)?;

    let out = dir.join("out");
    let cli = Cli::parse_from(["dsi", "--seed", "42", "--out-dir", out.to_str().unwrap(), "volume-scan", path.to_str().unwrap()]);
    let manifest = run(&cli)?;
    println!("config hash {}", manifest.config_hash);
    for (name, v) in &manifest.verdicts {
        println!("{name}: {} ({})", if v.pass { "pass" } else { "fail" }, v.detail);
    }
    println!("outputs in {}: {:?}", out.display(), manifest.outputs);
    Ok(())
}
