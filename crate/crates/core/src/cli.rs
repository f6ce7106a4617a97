//! Batch runner: every study as a subcommand driven by a TOML config.
//!
//! Each run writes CSV files and a `manifest.json` into `--out-dir`. All
//! randomness derives from one master seed through named streams, so a run
//! with the same config and seed reproduces its CSV files byte for byte.
//!
//! Exit codes: 0 pass, 2 configuration error, 3 numerical or acceptance
//! failure, 4 I/O error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaussfield::{build_modes, mc_characteristic, ModeMesh};
use crate::gibbs::{
    bound_check, estimate, localization_tail, mcmc_chains, pooled_samples, tightness_scan, volume_report, BoundaryWeight, GibbsTarget, McmcParams,
    Observable, PotentialSpec, TightnessParams, VolumeRow, DEFAULT_BATCHES,
};
use crate::kernel::{kernel_brute_grid, kernel_exact_matrix, BruteConfig, FormFactorSpec, KernelTable, Profile, TableGrid};
use crate::paths::sample_brownian;
use crate::rng::SeedTree;
use crate::spinchain::{
    continuum_compare, harmonic_free_end_covariance, ChainParams, ChainSpec, GaussianChain, Interaction, RiemannKernel,
};
use crate::stats::Estimate;
use crate::stochint::{adjudicate_diagonal, s_hat, variance_of_j, DiagonalConvention};
use crate::Vec3;

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "dsi", version, about = "Path-space Gibbs measures with a transverse pair kernel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "DSI_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the pair kernel and check it against the brute-force oracle.
    KernelTable { config: Option<PathBuf> },
    /// Compare E[e^{iJ}] with exp(−½Var J) on sampled paths and adjudicate the diagonal term.
    VerifyIdentity { config: Option<PathBuf> },
    /// Sample the Gibbs measure and estimate observables.
    SampleGibbs { config: Option<PathBuf> },
    /// Moment exponents of path increments across volumes.
    Tightness { config: Option<PathBuf> },
    /// One observable across increasing volumes.
    VolumeScan { config: Option<PathBuf> },
    /// Spin chains at decreasing lattice spacing against the continuum.
    ChainConvergence { config: Option<PathBuf> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::KernelTable { .. } => "kernel-table",
            Command::VerifyIdentity { .. } => "verify-identity",
            Command::SampleGibbs { .. } => "sample-gibbs",
            Command::Tightness { .. } => "tightness",
            Command::VolumeScan { .. } => "volume-scan",
            Command::ChainConvergence { .. } => "chain-convergence",
        }
    }

    fn config(&self) -> Option<&PathBuf> {
        match self {
            Command::KernelTable { config }
            | Command::VerifyIdentity { config }
            | Command::SampleGibbs { config }
            | Command::Tightness { config }
            | Command::VolumeScan { config }
            | Command::ChainConvergence { config } => config.as_ref(),
        }
    }
}

/// Full run configuration; every field has a default and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub kernel: KernelSection,
    pub target: TargetSection,
    pub mcmc: McmcSection,
    pub scan: ScanSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub profile: Profile,
    pub mass: f64,
    pub amplitude: f64,
    pub r_max: f64,
    pub t_max: f64,
    pub n_r: usize,
    pub n_t: usize,
    /// Load this table instead of building one (relative to the working directory).
    pub table: Option<PathBuf>,
    /// Oracle grid: this many radii and times.
    pub check_points: usize,
    /// Largest radius and time separation on the oracle grid.
    pub check_r_max: f64,
    pub check_t_max: f64,
    /// Tolerated `‖exact − brute‖_F / ‖brute‖_F`.
    pub oracle_tol: f64,
    /// Tolerated mid-cell interpolation error relative to `‖W(0, 0)‖_F`.
    pub interp_tol: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        let s = FormFactorSpec::default();
        Self {
            profile: s.profile,
            mass: s.mass,
            amplitude: s.amplitude,
            r_max: 10.0,
            t_max: 8.0,
            n_r: 401,
            n_t: 257,
            table: None,
            check_points: 5,
            check_r_max: 2.0,
            check_t_max: 1.0,
            oracle_tol: 1e-6,
            interp_tol: 1e-3,
        }
    }
}

impl KernelSection {
    pub fn spec(&self) -> Result<FormFactorSpec> {
        FormFactorSpec::new(self.profile, self.mass, self.amplitude)
    }

    pub fn grid(&self) -> Result<TableGrid> {
        TableGrid::new(self.r_max, self.t_max, self.n_r, self.n_t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub alpha: f64,
    pub half_width: f64,
    pub steps: usize,
    pub potential: PotentialSpec,
    pub boundary: BoundaryWeight,
    pub convention: DiagonalConvention,
    pub include_diagonal: bool,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            half_width: 1.0,
            steps: 32,
            potential: PotentialSpec::Zero,
            boundary: BoundaryWeight::default(),
            convention: DiagonalConvention::PaperThird,
            include_diagonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub chains: usize,
    pub sweeps: usize,
    pub warmup: usize,
    pub thin: usize,
    pub beta: f64,
    pub local_beta: f64,
    pub block_len: usize,
    pub endpoint_step: Option<f64>,
    pub adapt: bool,
    pub delta_check_every: usize,
}

impl Default for McmcSection {
    fn default() -> Self {
        let p = McmcParams::default();
        Self {
            chains: 2,
            sweeps: p.sweeps,
            warmup: p.warmup,
            thin: p.thin,
            beta: p.beta,
            local_beta: p.local_beta,
            block_len: p.block_len,
            endpoint_step: p.endpoint_step,
            adapt: p.adapt,
            delta_check_every: p.delta_check_every,
        }
    }
}

impl McmcSection {
    pub fn params(&self) -> McmcParams {
        McmcParams {
            sweeps: self.sweeps,
            warmup: self.warmup,
            thin: self.thin,
            beta: self.beta,
            local_beta: self.local_beta,
            block_len: self.block_len,
            endpoint_step: self.endpoint_step,
            adapt: self.adapt,
            delta_check_every: self.delta_check_every,
        }
    }
}

/// Lattice interaction used by `chain-convergence`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainInteraction {
    None,
    Matrix,
    RiemannGaussian,
    RiemannTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub observable: Observable,
    /// Volumes `T` for `tightness` and `volume-scan`; the grid step of `[target]` is kept.
    pub half_widths: Vec<f64>,
    pub lags: Vec<f64>,
    pub moments: Vec<u32>,
    pub escape_levels: Vec<f64>,
    pub truncations: Vec<f64>,
    /// Tolerated `|slope − n|` and relative spread of the prefactor across volumes.
    pub slope_tol: f64,
    pub prefactor_spread: f64,

    pub identity_paths: usize,
    pub identity_steps: usize,
    pub identity_half_width: f64,
    pub field_samples: usize,
    pub mesh_radial: usize,
    pub mesh_angular: usize,
    pub mesh_tail: f64,
    pub adjudicate_paths: usize,
    pub adjudicate_steps: usize,

    pub chain_steps: Vec<usize>,
    pub chain_interaction: ChainInteraction,
    /// Sample the chains (otherwise only exact Gaussian chains are evaluated).
    pub chain_sample: bool,
    pub chain_sweeps: usize,
    pub chain_warmup: usize,
    pub chain_thin: usize,
    pub chain_shift_step: f64,

    /// Clamped `E[e^{c|B₀|^γ}]` reported by `sample-gibbs`.
    pub localization_c: f64,
    pub localization_gamma: f64,
    pub localization_levels: Vec<f64>,
}

impl Default for ScanSection {
    fn default() -> Self {
        let t = TightnessParams::default();
        Self {
            observable: Observable::SquaredNorm { time: 0.0 },
            half_widths: vec![1.0, 2.0, 4.0],
            lags: t.lags,
            moments: t.moments,
            escape_levels: t.levels,
            truncations: t.truncations,
            slope_tol: 0.1,
            prefactor_spread: 0.15,
            identity_paths: 5,
            identity_steps: 64,
            identity_half_width: 1.0,
            field_samples: 10_000,
            mesh_radial: 8,
            mesh_angular: 3,
            mesh_tail: 1e-6,
            adjudicate_paths: 8,
            adjudicate_steps: 1024,
            chain_steps: vec![64, 128, 256],
            chain_interaction: ChainInteraction::None,
            chain_sample: false,
            chain_sweeps: 20_000,
            chain_warmup: 2_000,
            chain_thin: 10,
            chain_shift_step: 0.3,
            localization_c: 0.5,
            localization_gamma: 1.0,
            localization_levels: vec![10.0, 100.0, 1000.0],
        }
    }
}

/// Parse a config, reporting the line of the first error.
pub fn parse_config(text: &str) -> Result<Config> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse { line, detail: e.message().to_string() }
    })
}

pub fn load_config(path: Option<&PathBuf>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config: Config,
    /// SHA-256 of the canonical TOML serialization of `config`.
    pub config_hash: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
    pub verdicts: BTreeMap<String, Verdict>,
}

pub fn config_hash(config: &Config) -> Result<String> {
    let canonical = toml::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects outputs and verdicts of one run.
struct Run {
    out_dir: PathBuf,
    seeds: SeedTree,
    outputs: Vec<String>,
    verdicts: BTreeMap<String, Verdict>,
}

impl Run {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    fn verdict(&mut self, name: &str, pass: bool, detail: String) {
        log::info!("{name}: {} ({detail})", if pass { "pass" } else { "FAIL" });
        self.verdicts.insert(name.to_string(), Verdict { pass, detail });
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(m) => {
            if m.verdicts.values().all(|v| v.pass) {
                0
            } else {
                for (k, v) in m.verdicts.iter().filter(|(_, v)| !v.pass) {
                    eprintln!("acceptance failure: {k}: {}", v.detail);
                }
                3
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 4,
        Error::Numerical { .. } => 3,
        _ => 2,
    }
}

/// Execute one subcommand and write its manifest.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    if let Some(n) = cli.threads {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let started = now();
    let mut config = load_config(cli.command.config())?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut run = Run {
        out_dir: cli.out_dir.clone(),
        seeds: SeedTree::new(config.seed),
        outputs: Vec::new(),
        verdicts: BTreeMap::new(),
    };
    match cli.command {
        Command::KernelTable { .. } => kernel_table(&config, &mut run)?,
        Command::VerifyIdentity { .. } => verify_identity(&config, &mut run)?,
        Command::SampleGibbs { .. } => sample_gibbs(&config, &mut run)?,
        Command::Tightness { .. } => tightness(&config, &mut run)?,
        Command::VolumeScan { .. } => volume_scan(&config, &mut run)?,
        Command::ChainConvergence { .. } => chain_convergence(&config, &mut run)?,
    }
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA,
        tool: "dsi".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        config_hash: config_hash(&config)?,
        seed: config.seed,
        config,
        threads: cli.threads,
        started_unix: started,
        finished_unix: now(),
        outputs: run.outputs,
        verdicts: run.verdicts,
    };
    let f = File::create(cli.out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest).map_err(std::io::Error::from)?;
    Ok(manifest)
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn load_or_build_table(config: &Config) -> Result<Arc<KernelTable>> {
    let spec = config.kernel.spec()?;
    match &config.kernel.table {
        Some(p) => {
            let f = File::open(p).map_err(|e| {
                Error::Config(format!("cannot open kernel table {}: {e}; run `dsi kernel-table` first", p.display()))
            })?;
            let t = KernelTable::read_text(BufReader::new(f))?;
            if *t.spec() != spec {
                return Err(Error::Config(format!(
                    "kernel table {} was built for {:?}, config asks for {spec:?}",
                    p.display(),
                    t.spec()
                )));
            }
            Ok(Arc::new(t))
        }
        None => Ok(Arc::new(KernelTable::build(&spec, config.kernel.grid()?)?)),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn kernel_table(config: &Config, run: &mut Run) -> Result<()> {
    let k = &config.kernel;
    let spec = k.spec()?;
    let table = load_or_build_table(config)?;
    table.write_text(run.create("kernel_table.txt")?)?;

    // oracle: radial reduction against brute 3D quadrature along an off-axis direction
    let dir = Vec3::new(1.0, 2.0, 2.0) / 3.0;
    let radii = linspace(0.0, k.check_r_max, k.check_points);
    let times = linspace(0.0, k.check_t_max, k.check_points);
    let xs: Vec<Vec3> = radii.iter().map(|r| dir * *r).collect();
    let brute = kernel_brute_grid(&spec, &xs, &times, &BruteConfig::default())?;
    let scale = table.lookup(&Vec3::zeros(), 0.0)?.norm();
    let mut out = run.create("kernel_oracle.csv")?;
    writeln!(out, "r,t,exact_vs_brute_rel,table_vs_exact_rel,imag_residue_rel")?;
    let (mut worst_oracle, mut worst_interp, mut worst_imag) = (0.0f64, 0.0f64, 0.0f64);
    for (ix, x) in xs.iter().enumerate() {
        for (it, &t) in times.iter().enumerate() {
            let b = brute.get(ix, it);
            let e = kernel_exact_matrix(&spec, x, t)?;
            let norm = b.norm();
            let rel = if norm == 0.0 { (e - b).norm() } else { (e - b).norm() / norm };
            let imag = if norm == 0.0 { 0.0 } else { brute.imag_residue[ix * times.len() + it] / norm };
            // interpolation error half a cell away from the oracle point
            let (dr, dt) = (k.r_max / (k.n_r - 1) as f64, k.t_max / (k.n_t - 1) as f64);
            let xm = dir * (x.norm() + 0.5 * dr).min(k.r_max);
            let tm = (t + 0.5 * dt).min(k.t_max);
            let interp = if scale == 0.0 {
                0.0
            } else {
                (table.lookup(&xm, tm)? - kernel_exact_matrix(&spec, &xm, tm)?).norm() / scale
            };
            worst_oracle = worst_oracle.max(rel);
            worst_interp = worst_interp.max(interp);
            worst_imag = worst_imag.max(imag);
            writeln!(out, "{},{},{:.6e},{:.6e},{:.6e}", x.norm(), t, rel, interp, imag)?;
        }
    }
    out.flush()?;
    run.verdict(
        "kernel_oracle",
        worst_oracle <= k.oracle_tol,
        format!("max relative error {worst_oracle:.3e} (tolerance {:.1e})", k.oracle_tol),
    );
    run.verdict(
        "kernel_interpolation",
        worst_interp <= k.interp_tol,
        format!("max mid-cell error {worst_interp:.3e} of |W(0,0)| (tolerance {:.1e})", k.interp_tol),
    );
    run.verdict("kernel_imaginary_residue", worst_imag < 1e-10, format!("max {worst_imag:.3e}"));
    Ok(())
}

fn verify_identity(config: &Config, run: &mut Run) -> Result<()> {
    let s = &config.scan;
    let spec = config.kernel.spec()?;
    let table = load_or_build_table(config)?;
    let modes = build_modes(&spec, &ModeMesh::for_spec(&spec, s.mesh_radial, s.mesh_angular, s.mesh_tail))?;
    let d_const = table.diag_const();
    let mut out = run.create("identity.csv")?;
    writeln!(
        out,
        "path_id,re,im,re_stderr,im_stderr,var_j,exp_minus_half_var,s_hat,s_full_paper_third,s_full_standard_qv,z_re,z_im"
    )?;
    let (mut worst_z, mut unit_ok) = (0.0f64, true);
    for i in 0..s.identity_paths {
        let mut rng = run.seeds.stream("cli.verify_identity.path", i as u64);
        let path = sample_brownian(s.identity_half_width, s.identity_steps, Vec3::zeros(), &mut rng)?;
        let est = mc_characteristic(&path, &modes, s.field_samples, &run.seeds.child("cli.verify_identity.field", i as u64))?;
        let v = variance_of_j(&path, &modes);
        let pred = (-0.5 * v).exp();
        let sh = s_hat(&path, &table)?;
        let z_re = (est.re - pred) / est.re_stderr;
        let z_im = est.im / est.im_stderr;
        let z_re = if z_re.is_nan() { 0.0 } else { z_re };
        let z_im = if z_im.is_nan() { 0.0 } else { z_im };
        worst_z = worst_z.max(z_re.abs()).max(z_im.abs());
        unit_ok &= est.modulus() <= 1.0 + 3.0 * est.stderr();
        writeln!(
            out,
            "{i},{:.10e},{:.10e},{:.6e},{:.6e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.4},{:.4}",
            est.re,
            est.im,
            est.re_stderr,
            est.im_stderr,
            v,
            pred,
            sh,
            sh + DiagonalConvention::PaperThird.diagonal(&path, d_const),
            sh + DiagonalConvention::StandardQv.diagonal(&path, d_const),
            z_re,
            z_im
        )?;
    }
    out.flush()?;
    run.verdict("identity_3_sigma", worst_z <= 3.0, format!("largest |z| = {worst_z:.3} over {} paths", s.identity_paths));
    run.verdict("identity_unit_bound", unit_ok, "|MC mean| <= 1 + 3 stderr".into());

    let report = adjudicate_diagonal(
        &table,
        &modes,
        s.identity_half_width,
        s.adjudicate_steps,
        s.adjudicate_paths,
        &run.seeds.child("cli.adjudicate", 0),
    )?;
    report.write_csv(run.create("diagonal.csv")?)?;
    run.verdict(
        "diagonal_adjudication",
        report.verdict.is_some() || spec.is_zero(),
        format!(
            "verdict {}; mean d = {:.6e}, relative std {:.3e}, ratio to paper_third {:.4}, to standard_qv {:.4}",
            report.verdict.map_or("undecided", |v| v.name()),
            report.mean_d,
            report.relative_std(),
            report.ratio_paper_third,
            report.ratio_standard_qv
        ),
    );
    Ok(())
}

fn target_at(config: &Config, table: Option<Arc<KernelTable>>, half_width: f64, steps: usize) -> Result<GibbsTarget> {
    let t = &config.target;
    let mut target = GibbsTarget::new(t.alpha, t.potential, t.boundary, half_width, steps, table)?;
    target.convention = t.convention;
    target.include_diagonal = t.include_diagonal;
    Ok(target)
}

fn table_if_needed(config: &Config) -> Result<Option<Arc<KernelTable>>> {
    if config.target.alpha != 0.0 {
        Ok(Some(load_or_build_table(config)?))
    } else {
        Ok(None)
    }
}

// Exact discrete law when the target is Gaussian: zero coupling, zero or
// harmonic potential, Gaussian boundary weight.
fn gaussian_oracle(target: &GibbsTarget) -> Option<GaussianChain> {
    if target.alpha != 0.0 {
        return None;
    }
    let spec = ChainSpec::new(
        target.dt(),
        target.half_width,
        target.potential,
        Some(target.boundary),
        Interaction::None,
    )
    .ok()?;
    GaussianChain::new(&spec).ok()
}

fn oracle_value(g: &GaussianChain, target: &GibbsTarget, obs: &Observable) -> Option<f64> {
    let probe = crate::paths::Path::constant(target.half_width, target.steps, Vec3::zeros()).ok()?;
    let idx = |t: f64| probe.index_of(t).ok();
    Some(match *obs {
        Observable::One => 1.0,
        Observable::SquaredNorm { time } => g.two_point(idx(time)?, idx(time)?),
        Observable::Component { time, axis } => g.mean[idx(time)?][axis.min(2)],
        Observable::TwoPoint { s, t } => g.two_point(idx(s)?, idx(t)?),
        Observable::Ball { .. } => return None,
    })
}

fn sample_gibbs(config: &Config, run: &mut Run) -> Result<()> {
    let t = &config.target;
    let target = target_at(config, table_if_needed(config)?, t.half_width, t.steps)?;
    let runs = mcmc_chains(&target, &config.mcmc.params(), config.mcmc.chains, &run.seeds.child("cli.sample_gibbs", 0))?;
    let samples = pooled_samples(&runs);
    let observables = [
        Observable::One,
        config.scan.observable,
        Observable::SquaredNorm { time: -t.half_width },
        Observable::TwoPoint { s: -t.half_width, t: t.half_width },
    ];
    let oracle = gaussian_oracle(&target);
    let mut out = run.create("gibbs_observables.csv")?;
    writeln!(out, "observable,estimate,stderr,n_samples,oracle,z")?;
    let mut worst_z = 0.0f64;
    for obs in &observables {
        let e = estimate(&samples, obs, DEFAULT_BATCHES)?;
        let exact = oracle.as_ref().and_then(|g| oracle_value(g, &target, obs));
        let z = exact.map_or(f64::NAN, |x| if e.mean == x { 0.0 } else { (e.mean - x) / e.stderr_or_nan() });
        if z.is_finite() {
            worst_z = worst_z.max(z.abs());
        }
        writeln!(
            out,
            "{},{:.10e},{:.6e},{},{:.10e},{:.4}",
            obs.name(),
            e.mean,
            e.stderr_or_nan(),
            e.n_samples,
            exact.unwrap_or(f64::NAN),
            z
        )?;
    }
    out.flush()?;
    let mut acc = run.create("gibbs_acceptance.csv")?;
    writeln!(acc, "chain,global,translation,block,beta,local_beta,endpoint_step,delta_checks,out_of_range")?;
    for (i, r) in runs.iter().enumerate() {
        writeln!(
            acc,
            "{i},{:.4},{:.4},{:.4},{:.6e},{:.6e},{:.6e},{},{}",
            r.acceptance.global.rate(),
            r.acceptance.translation.rate(),
            r.acceptance.local.rate(),
            r.tuned.beta,
            r.tuned.local_beta,
            r.tuned.endpoint_step.unwrap_or(f64::NAN),
            r.delta_checks,
            r.out_of_range
        )?;
    }
    acc.flush()?;
    let loc = localization_tail(
        &samples,
        config.scan.localization_c,
        config.scan.localization_gamma,
        &config.scan.localization_levels,
        DEFAULT_BATCHES,
    )?;
    let mut lo = run.create("gibbs_localization.csv")?;
    writeln!(lo, "c,gamma,level,estimate,stderr")?;
    for (m, e) in &loc.rows {
        writeln!(lo, "{},{},{m},{:.10e},{:.6e}", loc.c, loc.gamma, e.mean, e.stderr_or_nan())?;
    }
    lo.flush()?;
    if target.needs_kernel() {
        let b = bound_check(&target, &samples)?;
        let mut bo = run.create("gibbs_bound.csv")?;
        writeln!(bo, "paths,violations,min_slack")?;
        writeln!(bo, "{},{},{:.10e}", b.paths, b.violations, b.min_slack)?;
        bo.flush()?;
    }
    if let Some(last) = samples.last() {
        last.write_csv(run.create("gibbs_last_path.csv")?)?;
    }
    if oracle.is_some() {
        run.verdict("gibbs_gaussian_oracle", worst_z <= 3.0, format!("largest |z| = {worst_z:.3}"));
    }
    let warnings: Vec<&String> = runs.iter().flat_map(|r| &r.warnings).collect();
    run.verdict(
        "gibbs_localization",
        loc.stable,
        format!("last clamp increment {:.3e} ± {:.3e}", loc.last_increment.mean, loc.last_increment.stderr_or_nan()),
    );
    run.verdict("gibbs_acceptance", warnings.is_empty(), format!("{} warnings", warnings.len()));
    Ok(())
}

fn scaled_steps(config: &Config, half_width: f64) -> Result<usize> {
    let dt = 2.0 * config.target.half_width / config.target.steps as f64;
    let n = 2.0 * half_width / dt;
    if (n - n.round()).abs() > 1e-9 * n {
        return Err(Error::Config(format!("volume T = {half_width} is not a multiple of the grid step {dt}")));
    }
    Ok(n.round() as usize)
}

fn tightness(config: &Config, run: &mut Run) -> Result<()> {
    let s = &config.scan;
    let table = table_if_needed(config)?;
    let params = TightnessParams {
        lags: s.lags.clone(),
        moments: s.moments.clone(),
        levels: s.escape_levels.clone(),
        truncations: s.truncations.clone(),
        n_batches: DEFAULT_BATCHES,
    };
    let mut out = run.create("tightness.csv")?;
    let mut esc = run.create("tightness_escape.csv")?;
    writeln!(esc, "T,level,probability,stderr")?;
    let mut first = true;
    let mut prefactors: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut worst_slope = 0.0f64;
    for (i, &hw) in s.half_widths.iter().enumerate() {
        let target = target_at(config, table.clone(), hw, scaled_steps(config, hw)?)?;
        let report = tightness_scan(&target, &params, &config.mcmc.params(), config.mcmc.chains, &run.seeds.child("cli.tightness", i as u64))?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        let text = String::from_utf8(buf).expect("ascii");
        let body = if first { text.as_str() } else { text.split_once('\n').map_or("", |x| x.1) };
        out.write_all(body.as_bytes())?;
        first = false;
        for f in &report.fits {
            worst_slope = worst_slope.max((f.slope - f.moment as f64).abs());
            prefactors.entry(f.moment).or_default().push(f.prefactor);
        }
        for (l, e) in &report.escape {
            writeln!(esc, "{hw},{l},{:.6e},{:.6e}", e.mean, e.stderr_or_nan())?;
        }
    }
    out.flush()?;
    esc.flush()?;
    run.verdict(
        "tightness_slope",
        worst_slope <= s.slope_tol,
        format!("max |slope − n| = {worst_slope:.4} (tolerance {})", s.slope_tol),
    );
    let spread = prefactors
        .values()
        .map(|d| {
            let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            (hi - lo) / lo
        })
        .fold(0.0f64, f64::max);
    run.verdict(
        "tightness_prefactor",
        spread <= s.prefactor_spread,
        format!("max relative spread of D across T = {spread:.4} (tolerance {})", s.prefactor_spread),
    );
    Ok(())
}

fn volume_scan(config: &Config, run: &mut Run) -> Result<()> {
    let s = &config.scan;
    let table = table_if_needed(config)?;
    let rows: Vec<VolumeRow> = s
        .half_widths
        .iter()
        .enumerate()
        .map(|(i, &hw)| {
            let target = target_at(config, table.clone(), hw, scaled_steps(config, hw)?)?;
            let runs = mcmc_chains(&target, &config.mcmc.params(), config.mcmc.chains, &run.seeds.child("cli.volume_scan", i as u64))?;
            Ok(VolumeRow { half_width: hw, estimate: estimate(&pooled_samples(&runs), &s.observable, DEFAULT_BATCHES)? })
        })
        .collect::<Result<_>>()?;
    let report = volume_report(s.observable, rows);
    report.write_csv(run.create("volume.csv")?)?;
    let (d, e) = report.differences.last().copied().unwrap_or((0.0, 0.0));
    run.verdict("volume_converged", report.converged, format!("last difference {d:.4e} vs combined stderr {e:.4e}"));
    if let (0.0, PotentialSpec::Harmonic { omega_sq }, Observable::SquaredNorm { time: 0.0 }) =
        (config.target.alpha, config.target.potential, s.observable)
    {
        let limit = 1.5 / omega_sq.sqrt();
        let last = report.rows.last().map(|r| r.estimate).expect("nonempty scan");
        run.verdict(
            "volume_ou_limit",
            last.agrees_with(limit, 3.0),
            format!("E|B0|^2 = {:.5} ± {:.5} vs stationary {limit:.5}", last.mean, last.stderr_or_nan()),
        );
    }
    Ok(())
}

fn chain_convergence(config: &Config, run: &mut Run) -> Result<()> {
    let s = &config.scan;
    let t = &config.target;
    let hw = t.half_width;
    let table = match s.chain_interaction {
        ChainInteraction::Matrix | ChainInteraction::RiemannTrace => Some(load_or_build_table(config)?),
        _ => None,
    };
    let interaction = || match s.chain_interaction {
        ChainInteraction::None => Interaction::None,
        ChainInteraction::Matrix => Interaction::Matrix { alpha: t.alpha, table: table.clone().expect("built") },
        ChainInteraction::RiemannGaussian => {
            Interaction::Riemann(RiemannKernel::GaussianExp { amplitude: t.alpha, space_scale: 1.0, time_rate: 1.0 })
        }
        ChainInteraction::RiemannTrace => Interaction::Riemann(RiemannKernel::MatrixTrace { table: table.clone().expect("built") }),
    };
    // the free harmonic chain without boundary weight has a closed-form continuum limit
    let free_harmonic = matches!((s.chain_interaction, t.potential), (ChainInteraction::None, PotentialSpec::Harmonic { .. }));
    let boundary = if free_harmonic { None } else { Some(t.boundary) };
    let specs: Vec<ChainSpec> = s
        .chain_steps
        .iter()
        .map(|&n| ChainSpec::new(2.0 * hw / n as f64, hw, t.potential, boundary, interaction()))
        .collect::<Result<_>>()?;
    let continuum = if let (true, PotentialSpec::Harmonic { omega_sq }) = (free_harmonic, t.potential) {
        let w = omega_sq.sqrt();
        let g = |a: f64, b: f64| 3.0 * harmonic_free_end_covariance(w, hw, a, b);
        let value = match s.observable {
            Observable::One => 1.0,
            Observable::SquaredNorm { time } => g(time, time),
            Observable::TwoPoint { s, t } => g(s, t),
            Observable::Component { .. } => 0.0,
            Observable::Ball { .. } => return Err(Error::Config("no closed form for ball observables".into())),
        };
        Estimate { mean: value, stderr: Some(0.0), n_samples: 0, n_batches: 0 }
    } else {
        // continuum reference from the path sampler on the finest grid
        let n = *s.chain_steps.iter().max().ok_or_else(|| Error::Config("chain_steps is empty".into()))?;
        let alpha = if s.chain_interaction == ChainInteraction::Matrix { t.alpha } else { 0.0 };
        let mut target = GibbsTarget::new(alpha, t.potential, t.boundary, hw, n, table.clone())?;
        target.convention = t.convention;
        let runs = mcmc_chains(&target, &config.mcmc.params(), config.mcmc.chains, &run.seeds.child("cli.chain_convergence.continuum", 0))?;
        estimate(&pooled_samples(&runs), &s.observable, DEFAULT_BATCHES)?
    };
    let params = ChainParams { sweeps: s.chain_sweeps, warmup: s.chain_warmup, thin: s.chain_thin, shift_step: s.chain_shift_step };
    let report = continuum_compare(
        &specs,
        continuum,
        &s.observable,
        s.chain_sample.then_some(&params),
        &run.seeds.child("cli.chain_convergence", 0),
    )?;
    report.write_csv(run.create("chain_convergence.csv")?)?;
    if free_harmonic {
        run.verdict(
            "chain_gap_linear",
            report.at_least_linear(0.05),
            format!("gaps {:?}, fitted order {:.3}", report.rows.iter().map(|r| r.gap).collect::<Vec<_>>(), report.order),
        );
        if s.chain_sample {
            let ok = report.rows.iter().all(|r| match (r.chain, r.exact) {
                (Some(e), Some(x)) => e.agrees_with(x, 3.0),
                _ => true,
            });
            run.verdict("chain_sampler_exact", ok, "chain estimates within 3 sigma of the exact Gaussian chain".into());
        }
    } else {
        let shrinking = report.rows.windows(2).all(|w| w[1].gap <= w[0].gap + 3.0 * w[0].gap_stderr.hypot(w[1].gap_stderr));
        run.verdict("chain_gap_shrinks", shrinking, format!("fitted order {:.3}", report.order));
    }
    Ok(())
}

/// Write a config to a file (used by examples and tests to set up runs).
pub fn write_config(config: &Config, path: &FsPath) -> Result<()> {
    let text = toml::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}
