//! `fracspec {build|solve|eig|pseudospectra}`.

mod commands;
mod job;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// A rejected input; exits with status 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser, Debug)]
#[command(name = "fracspec", version, about = "Fractional integral operators in transplanted Chebyshev bases")]
struct Cli {
    /// Worker threads for the parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build one operator matrix and write it with JSON metadata.
    Build(BuildArgs),
    /// Solve an integral equation or the fractional Airy problem.
    Solve(Common),
    /// Smallest-modulus eigenvalues of the fractional operator.
    Eig(Common),
    /// Inverse resolvent norms of the Caputo derivative over a grid.
    Pseudospectra(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// One of abel, riesz, mixed, airy, eig, pseudospectra.
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON or TOML job file.
    #[arg(long)]
    pub job: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct BuildArgs {
    /// `de` or `algebraic`.
    #[arg(long, default_value = "de")]
    pub transform: String,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: f64,
    /// left, right or riesz.
    #[arg(long, default_value = "left")]
    pub side: String,
    #[arg(long)]
    pub n: usize,
    /// Double-exponential scaling; chosen from `mu` when absent.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Kernel grid degree `K = L`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Fixed kernel rank. With `--k` alone the tabulated rank for `mu` is
    /// used; with `--aca-tol` alone the rank is adaptive.
    #[arg(long, requires = "k")]
    pub rank: Option<usize>,
    #[arg(long, requires = "k")]
    pub aca_tol: Option<f64>,
    /// Binary operator file; metadata goes next to it with a `.json` extension.
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Invalid("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.command {
        Command::Build(a) => commands::build(a),
        Command::Solve(c) => commands::solve(c),
        Command::Eig(c) => commands::eig(c),
        Command::Pseudospectra(c) => commands::pseudo(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
