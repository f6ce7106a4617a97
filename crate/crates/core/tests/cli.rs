use std::path::Path;
use std::process::{Command, Output};

fn dsi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsi"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const SMALL_TABLE: &str = "[kernel]\nr_max = 4.0\nt_max = 2.0\nn_r = 81\nn_t = 33\ninterp_tol = 1e-2\n";

#[test]
fn zero_amplitude_table_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{SMALL_TABLE}amplitude = 0.0\n"));
    let out = dsi(dir.path(), &["--out-dir", "o", "kernel-table", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(dir.path(), "o/kernel_table.txt");
    let rows: Vec<&str> = table.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).collect();
    assert!(rows.len() >= 81 * 33);
    for row in rows.iter().rev().take(81 * 33) {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!((f[2], f[3]), (0.0, 0.0), "{row}");
    }
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "seed = 1\n\n[kernel]\nmass = \"heavy\"\n");
    let out = dsi(dir.path(), &["kernel-table", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");

    let cfg = write(dir.path(), "unknown.toml", "[mcmc]\nsweep = 10\n");
    let out = dsi(dir.path(), &["sample-gibbs", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn missing_table_is_actionable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[kernel]\ntable = \"nowhere.txt\"\n[target]\nalpha = 1.0\n");
    let out = dsi(dir.path(), &["sample-gibbs", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere.txt") && err.contains("dsi kernel-table"), "{err}");
}

#[test]
fn zero_amplitude_identity_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{}amplitude = 0.0\n[scan]\nidentity_paths = 3\nidentity_steps = 16\nfield_samples = 200\nadjudicate_paths = 3\nadjudicate_steps = 64\n", SMALL_TABLE.replace("r_max = 4.0", "r_max = 12.0")),
    );
    let out = dsi(dir.path(), &["--out-dir", "o", "verify-identity", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "o/identity.csv");
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), 1.0);
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(f[6].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn gibbs_constant_observable_and_gaussian_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[mcmc]\nsweeps = 3000\n");
    let out = dsi(dir.path(), &["--out-dir", "o", "sample-gibbs", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "o/gibbs_observables.csv");
    let one = csv.lines().find(|l| l.starts_with("one,")).unwrap();
    assert!(one.starts_with("one,1.0000000000e0,0.000000e0"), "{one}");
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "o/manifest.json")).unwrap();
    assert_eq!(manifest["verdicts"]["gibbs_gaussian_oracle"]["pass"], true);
    assert_eq!(manifest["command"], "sample-gibbs");
    assert_eq!(manifest["schema_version"], 1);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[target]\npotential = { kind = \"harmonic\", omega_sq = 1.0 }\n[mcmc]\nsweeps = 600\nwarmup = 100\n[scan]\nchain_steps = [16, 32]\nchain_sample = true\nchain_sweeps = 500\nchain_warmup = 50\n",
    );
    for cmd in ["sample-gibbs", "chain-convergence", "tightness"] {
        let run = |out: &str, seed: &str, threads: &str| {
            let o = dsi(dir.path(), &["--seed", seed, "--threads", threads, "--out-dir", out, cmd, &cfg]);
            assert!(matches!(o.status.code(), Some(0) | Some(3)), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
            let m: serde_json::Value = serde_json::from_str(&read(dir.path(), &format!("{out}/manifest.json"))).unwrap();
            let names: Vec<String> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
            (m, names)
        };
        let (ma, files) = run(&format!("{cmd}_a"), "5", "1");
        let (mb, _) = run(&format!("{cmd}_b"), "5", "2");
        let (_, _) = run(&format!("{cmd}_c"), "6", "1");
        assert_eq!(ma["config_hash"], mb["config_hash"]);
        let mut any_differs = false;
        for f in &files {
            assert_eq!(read(dir.path(), &format!("{cmd}_a/{f}")), read(dir.path(), &format!("{cmd}_b/{f}")), "{cmd}/{f}");
            any_differs |= read(dir.path(), &format!("{cmd}_a/{f}")) != read(dir.path(), &format!("{cmd}_c/{f}"));
        }
        assert!(any_differs, "{cmd}: a different seed changed nothing");
    }
}
