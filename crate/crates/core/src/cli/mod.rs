//! Batch command-line front end.
//!
//! Settings are layered: built-in defaults, then `--config file.json`,
//! then any explicit flag. Every run writes `manifest.json` into the
//! output directory. Exit codes: 0 when every check passed, 2 for
//! validation errors, 3 for solver failures, 4 for failed verification.

pub mod commands;
pub mod config;
mod svg;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, ErrorClass, Result};
pub use commands::{Outcome, SolutionFile};
pub use config::{KindConfig, LambdaSelection, LimitReference, RunConfig, SchemeConfig};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "HWARP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "hwarp", version, about = "Warped products with harmonic curvature over surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Eigenvalues of the Laplacian with admissibility flags.
    Spectrum,
    /// Constant solutions over a θ range.
    TrivialBranch,
    /// Bifurcation points along the constant-solution curve.
    Bifurcate,
    /// Trace λ-branches and verify every point.
    Trace,
    /// Yamabe-type bifurcation from f ≡ 1 and the search below it.
    Yamabe,
    /// Re-verify a stored solution.
    Verify,
    /// Asymptotic constants and integer identities of the uniqueness argument.
    Identities,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Sphere,
    ProjectivePlane,
    Mesh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Fd,
    Legendre,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    Claimed,
    Derived,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    pub kind: Option<KindArg>,
    #[arg(long, value_enum, global = true)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub khat: Option<f64>,
    /// Grid nodes (fd) or modes (legendre).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub mesh: Option<PathBuf>,
    #[arg(long, global = true)]
    pub p: Option<u32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, global = true, conflicts_with_all = ["lambda_index", "all_lambdas"])]
    pub lambda: Option<f64>,
    #[arg(long, global = true, conflicts_with = "all_lambdas")]
    pub lambda_index: Option<usize>,
    #[arg(long, global = true)]
    pub all_lambdas: bool,
    #[arg(long, global = true)]
    pub eigen_count: Option<usize>,
    #[arg(long, global = true)]
    pub max_points: Option<usize>,
    #[arg(long, global = true)]
    pub ds: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub theta_min: Option<f64>,
    #[arg(long, global = true)]
    pub theta_max: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long, global = true)]
    pub a_min: Option<f64>,
    #[arg(long, global = true)]
    pub a_max: Option<f64>,
    #[arg(long, global = true)]
    pub a_below: Option<f64>,
    #[arg(long, global = true)]
    pub starts: Option<usize>,
    /// Solution directory for `verify`.
    #[arg(long, global = true)]
    pub solution: Option<PathBuf>,
    #[arg(long, global = true)]
    pub full4d: bool,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub reference: Option<ReferenceArg>,
}

impl Overrides {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v.into();
                }
            };
        }
        set!(self.output => c.output);
        set!(self.seed => c.seed);
        if let Some(k) = self.kind {
            c.surface.kind = match k {
                KindArg::Sphere => KindConfig::Sphere,
                KindArg::ProjectivePlane => KindConfig::ProjectivePlane,
                KindArg::Mesh => KindConfig::Mesh,
            };
        }
        if let Some(s) = self.scheme {
            c.surface.scheme = match s {
                SchemeArg::Fd => SchemeConfig::Fd,
                SchemeArg::Legendre => SchemeConfig::Legendre,
            };
        }
        set!(self.khat => c.surface.khat);
        set!(self.n => c.surface.n);
        if self.mesh.is_some() {
            c.surface.mesh = self.mesh.clone();
        }
        set!(self.p => c.problem.p);
        set!(self.r => c.problem.r);
        if let Some(v) = self.lambda {
            c.problem.lambda = LambdaSelection::Value(v);
        }
        if let Some(i) = self.lambda_index {
            c.problem.lambda = LambdaSelection::Index(i);
        }
        if self.all_lambdas {
            c.problem.lambda = LambdaSelection::All;
        }
        set!(self.eigen_count => c.problem.eigen_count);
        set!(self.max_points => c.solver.max_points);
        if let Some(ds) = self.ds {
            c.solver.ds = ds;
            c.solver.ds_max = c.solver.ds_max.max(ds);
        }
        set!(self.tol => c.solver.tol);
        set!(self.theta_min => c.scan.theta_min);
        set!(self.theta_max => c.scan.theta_max);
        set!(self.samples => c.scan.samples);
        set!(self.q => c.yamabe.q);
        set!(self.a_min => c.yamabe.a_min);
        set!(self.a_max => c.yamabe.a_max);
        set!(self.a_below => c.yamabe.a_below);
        set!(self.starts => c.yamabe.starts);
        if self.solution.is_some() {
            c.verify.solution = self.solution.clone();
        }
        if self.full4d {
            c.verify.full4d = true;
        }
        set!(self.points => c.verify.points);
        if let Some(r) = self.reference {
            c.identities.reference = match r {
                ReferenceArg::Claimed => LimitReference::Claimed,
                ReferenceArg::Derived => LimitReference::Derived,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: Command,
    version: &'static str,
    seed: u64,
    workers: usize,
    config: &'a RunConfig,
    wall_time_seconds: f64,
    artifacts: Vec<PathBuf>,
    passed: bool,
}

/// Runs one subcommand with a resolved configuration and writes the
/// manifest; `passed` on the outcome reports the subcommand's checks.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.output)?;
    let outcome = match command {
        Command::Spectrum => commands::spectrum(cfg),
        Command::TrivialBranch => commands::trivial_branch(cfg),
        Command::Bifurcate => commands::bifurcate(cfg),
        Command::Trace => commands::trace(cfg),
        Command::Yamabe => commands::yamabe(cfg),
        Command::Verify => commands::verify(cfg),
        Command::Identities => commands::identities(cfg),
    }?;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        workers: rayon::current_num_threads(),
        config: cfg,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        artifacts: outcome.artifacts.clone(),
        passed: outcome.passed,
    };
    std::fs::write(cfg.output.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(outcome)
}

pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Solver => 3,
        ErrorClass::Verification => 4,
    }
}

/// Reads the worker count from the environment and sizes the global
/// thread pool. Invalid values are a validation error.
pub fn configure_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{WORKERS_ENV}: expected a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments, runs, and maps the result to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = configure_workers().and_then(|_| cli.overrides.resolve()).and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => {
            eprintln!("hwarp: checks failed; see the manifest in the output directory");
            4
        }
        Err(e) => {
            eprintln!("hwarp: {e}");
            exit_code(&e)
        }
    }
}
