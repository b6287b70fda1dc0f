//! `riesz-tf`: batch front end for the fractional Thomas–Fermi solver.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{RawConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] riesz_tf::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use riesz_tf::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(E::Parameter(_) | E::Admissibility { .. } | E::Input(_) | E::Io(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "riesz-tf", version, about = "Fractional Thomas-Fermi minimizers and their tails")]
struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and verify its tail, mass and ordering.
    Solve(Flags),
    /// Solve over lists of q and alpha.
    Sweep(Flags),
    /// Check sign and decay of barrier fractional Laplacians.
    VerifyBarriers(Flags),
    /// Kernel and fractional Laplacian oracles.
    Selftest(Flags),
    /// Threshold and exponent table for (d, alpha).
    Regimes(Flags),
}

#[derive(Debug, Args, Default)]
struct Flags {
    #[arg(long)]
    d: Option<String>,
    /// Value or comma list (sweep).
    #[arg(long)]
    alpha: Option<String>,
    /// Value or comma list (sweep); fractions like 5/3 are accepted.
    #[arg(long)]
    q: Option<String>,
    /// vz:Z | bump:HEIGHT,R0 | source:FILE | file:FILE
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    inner: Option<String>,
    #[arg(long)]
    per_decade: Option<String>,
    /// Number or `auto` (tail depth chosen from the regime).
    #[arg(long)]
    r_max: Option<String>,
    #[arg(long)]
    damping: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    node_tol: Option<String>,
    /// free | nonneg
    #[arg(long)]
    mode: Option<String>,
    /// zero | tf
    #[arg(long)]
    init: Option<String>,
    /// newton | picard
    #[arg(long)]
    method: Option<String>,
    /// Comma list of regime, mass, sharp-limit, ordering; or all / none.
    #[arg(long)]
    verify: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// gbeta:B, log:B, loglift, power:G; repeatable or comma separated.
    #[arg(long = "barrier")]
    barriers: Vec<String>,
    /// LO,HI
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    radii: Option<String>,
}

impl Flags {
    fn raw(&self) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        let pairs = [
            ("d", &self.d),
            ("alpha", &self.alpha),
            ("q", &self.q),
            ("potential", &self.potential),
            ("inner", &self.inner),
            ("per_decade", &self.per_decade),
            ("r_max", &self.r_max),
            ("damping", &self.damping),
            ("max_iter", &self.max_iter),
            ("tol", &self.tol),
            ("node_tol", &self.node_tol),
            ("mode", &self.mode),
            ("init", &self.init),
            ("method", &self.method),
            ("verify", &self.verify),
            ("window", &self.window),
            ("radii", &self.radii),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                raw.set(k, v)?;
            }
        }
        if let Some(out) = &self.out {
            raw.set("out", &out.to_string_lossy())?;
        }
        if !self.barriers.is_empty() {
            raw.set("barriers", &self.barriers.join(","))?;
        }
        Ok(raw)
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(s) = std::env::var("RIESZ_TF_THREADS") else { return Ok(()) };
    let n: usize = s
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("RIESZ_TF_THREADS = `{s}` must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<commands::Status, CliError> {
    init_threads()?;
    let flags = match &cli.command {
        Command::Solve(f) | Command::Sweep(f) | Command::VerifyBarriers(f) | Command::Selftest(f) | Command::Regimes(f) => f,
    };
    let mut raw = match &cli.config {
        Some(path) => RawConfig::parse_file(path)?,
        None => RawConfig::default(),
    };
    raw.overlay(&flags.raw()?);
    let cfg = RunConfig::from_raw(&raw)?;
    match cli.command {
        Command::Solve(_) => commands::cmd_solve(&cfg),
        Command::Sweep(_) => commands::cmd_sweep(&cfg),
        Command::VerifyBarriers(_) => commands::cmd_verify_barriers(&cfg),
        Command::Selftest(_) => commands::cmd_selftest(&cfg),
        Command::Regimes(_) => commands::cmd_regimes(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
