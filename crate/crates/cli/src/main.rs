//! `infogeo` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 geodesic escape (partial output is still written).

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::{Flags, Resolved};
use std::path::PathBuf;
use std::process::ExitCode;

pub const THREADS_ENV: &str = "INFOGEO_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Escape(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Escape(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Escape(m) => write!(f, "geodesic escaped: {m}"),
        }
    }
}

impl From<infogeo::Error> for CliError {
    fn from(e: infogeo::Error) -> Self {
        match e {
            infogeo::Error::Numerical(m) => CliError::Numerical(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "infogeo",
    version,
    about = "Warped Fisher metrics of location-scale models",
    after_help = "Floats are printed with 12 significant digits. Settings are taken from flags, then \
                  from --config, then defaults. INFOGEO_THREADS caps the worker threads used for \
                  Monte Carlo tabulation.\n\nExit codes: 0 ok, 2 configuration error, 3 numerical \
                  failure, 4 geodesic escape."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Large-η plateau of the vMF curvatures for n = --n (2) ..= --n-max (8).
    ///
    /// Columns: n, Ks_inf, Kr_inf, plateau_spread. The plateau is the mean over
    /// η ∈ [100, 200]; the spread is the larger max−min range of the two
    /// curvatures there. Exits 3 if any spread exceeds 0.01.
    Table1,
    /// Sectional curvatures over a grid.
    ///
    /// vmf columns: eta, Ks, Kr (default grid η ∈ [0.05, 200], 100 points,
    /// geometric). isonormal columns: sigma, Ks, Kr (default σ ∈ [0.1, 10]).
    Curvature,
    /// Monte Carlo table of the Riemannian Gaussian log-normalizer on P_n.
    ///
    /// The grid is in σ (default [0.05, 5], 40 points, geometric). Columns:
    /// eta, sigma, psi, psi_p, psi_pp, stderr_psi_p, stderr_psi_pp, samples, seed.
    PsiTable,
    /// Distances between two points read from files.
    ///
    /// rgauss: each file holds an n×n SPD matrix as whitespace-separated
    /// floats; columns affine, mahalanobis at --sigma. isonormal: each file
    /// holds a vector; columns euclidean, mahalanobis.
    Distance {
        a: PathBuf,
        b: PathBuf,
    },
    /// Geodesic from --x0 with velocity (--u-sigma, --u) up to --t-end.
    ///
    /// Columns: t, sigma, r, then the base point (x0.. for vectors, xij for
    /// the upper triangle of SPD matrices). vmf takes --x0 as the natural
    /// parameter z and --u as its velocity. On escape the samples reached are
    /// written and the exit code is 4.
    Geodesic,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = Resolved::new(cli.flags)?;
    match cli.command {
        Command::Table1 => commands::table1(&cfg),
        Command::Curvature => commands::curvature(&cfg),
        Command::PsiTable => commands::psi_table(&cfg),
        Command::Distance { a, b } => commands::distance(&cfg, &a, &b),
        Command::Geodesic => commands::geodesic(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("infogeo: {e}");
            ExitCode::from(e.code())
        }
    }
}
