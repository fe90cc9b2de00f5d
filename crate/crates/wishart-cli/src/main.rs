//! `wishart` — analytic spectral statistics of correlated Wishart ensembles
//! and their Monte Carlo validation, as reproducible command-line runs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit statuses.
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "wishart", version, about = "Spectral statistics of correlated real Wishart ensembles")]
pub struct Cli {
    /// Flat key=value file supplying defaults for any flag; flags on the
    /// command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Macroscopic level density R₁(x) on a grid.
    Density(DensityArgs),
    /// Support intervals and edge data of the level density.
    Support(SpectrumArgs),
    /// Outlier positions, widths and validity flags.
    Outliers(OutlierArgs),
    /// Sample an eigenvalue ensemble to disk.
    Simulate(SimulateArgs),
    /// Bulk eigenvalue histogram of a stored ensemble.
    Hist(HistArgs),
    /// Extreme-eigenvalue samples of a stored ensemble vs Tracy–Widom.
    Extremes(ExtremesArgs),
    /// Largest-eigenvalue CDF of the doubly degenerate ensemble.
    GapCdf(GapCdfArgs),
    /// Unfolded bulk spacing distribution vs the GOE.
    LocalStats(LocalStatsArgs),
    /// Compare the ensembles of C and C⊗1_l.
    CompareDegeneracy(CompareArgs),
    /// Time series → correlation matrix → spectrum.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "wishart-out")]
    pub out: PathBuf,
    /// Also write plot data and a gnuplot script.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct AspectArgs {
    /// γ² = p/n.
    #[arg(long)]
    pub gamma_sq: Option<f64>,
    /// Number of observations n (γ² = p/n with p from the spectrum).
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Spectrum file: one eigenvalue per line, optional multiplicity column.
    #[arg(long, value_name = "FILE")]
    pub spectrum: PathBuf,
    #[command(flatten)]
    pub aspect: AspectArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub base: SpectrumArgs,
    /// Grid as lo:hi:points (default: the support padded by 10%, 400 points).
    #[arg(long, value_name = "LO:HI:N")]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct OutlierArgs {
    #[command(flatten)]
    pub base: SpectrumArgs,
    /// Required gap between an outlier and the bulk, in units of Δx₀.
    #[arg(long, default_value_t = wishart::outliers::DEFAULT_MARGIN)]
    pub margin: f64,
}

/// Where the population correlation matrix comes from.
#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct SourceArgs {
    /// Diagonal C with this spectrum.
    #[arg(long, value_name = "FILE")]
    pub spectrum: Option<PathBuf>,
    /// C as a CSV matrix (as written by `ingest`).
    #[arg(long, value_name = "FILE")]
    pub correlation: Option<PathBuf>,
    /// C estimated from time series (CSV, one series per row).
    #[arg(long, value_name = "FILE")]
    pub series: Option<PathBuf>,
    /// C estimated from a generated one-factor model with these block sizes.
    #[arg(long, value_name = "B1,B2,...", requires = "factor_seed")]
    pub one_factor: Option<String>,
}

#[derive(Debug, Args)]
pub struct FactorArgs {
    /// Series length of the one-factor model.
    #[arg(long, default_value_t = 100)]
    pub length: usize,
    /// Noise strength of the one-factor model.
    #[arg(long, default_value_t = 4.0)]
    pub s_noise: f64,
    /// Seed of the one-factor model.
    #[arg(long)]
    pub factor_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub factor: FactorArgs,
    /// Number of observations n per copy.
    #[arg(long)]
    pub n: usize,
    /// Sample C⊗1_l with l·n observations.
    #[arg(long, default_value_t = 1)]
    pub degeneracy: usize,
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads (0: all cores, 1: sequential).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Also export every eigenvalue as CSV.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ExcludeArgs {
    /// Largest eigenvalues removed from each sample.
    #[arg(long, default_value_t = 0)]
    pub exclude_top: usize,
    /// Smallest eigenvalues removed from each sample.
    #[arg(long, default_value_t = 0)]
    pub exclude_bottom: usize,
    /// Remove the predicted outliers (times the degeneracy) instead.
    #[arg(long)]
    pub exclude_outliers: bool,
    /// Separation margin used with --exclude-outliers.
    #[arg(long, default_value_t = wishart::outliers::DEFAULT_MARGIN)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    /// Ensemble directory written by `simulate`.
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// Histogram range lo:hi (default: data range).
    #[arg(long, value_name = "LO:HI")]
    pub range: Option<String>,
    #[command(flatten)]
    pub exclude: ExcludeArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Largest,
    Smallest,
}

#[derive(Debug, Args)]
pub struct ExtremesArgs {
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    #[arg(long, value_enum, default_value_t = Which::Largest)]
    pub which: Which,
    #[arg(long, default_value_t = 60)]
    pub bins: usize,
    #[command(flatten)]
    pub exclude: ExcludeArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GapCdfArgs {
    /// Distinct eigenvalues Λ (p even, at most 2n of them).
    #[arg(long, value_name = "FILE")]
    pub spectrum: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Smallest t (default: t-max/points).
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Largest t (default: a bound where the CDF is close to one).
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct LocalStatsArgs {
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    /// Bulk point to unfold around (default: the density maximum).
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Matrix size of the GOE reference.
    #[arg(long, default_value_t = 200)]
    pub goe_dim: usize,
    /// Number of GOE reference matrices.
    #[arg(long, default_value_t = 2000)]
    pub goe_draws: usize,
    /// Seed of the GOE reference.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub factor: FactorArgs,
    /// Number of observations n of the l = 1 ensemble.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub degeneracy: usize,
    #[arg(long)]
    pub samples: usize,
    /// Seed of the l = 1 ensemble; the degenerate one uses seed + 1.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    #[arg(long, default_value_t = wishart::outliers::DEFAULT_MARGIN)]
    pub margin: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub factor: FactorArgs,
    #[arg(long, default_value_t = wishart::outliers::DEFAULT_MARGIN)]
    pub margin: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

/// A failed run, classified for the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Numeric(_) => EXIT_NUMERIC,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) | Failure::Io(m) => m,
        }
    }
}

impl From<wishart::Error> for Failure {
    fn from(e: wishart::Error) -> Self {
        use wishart::Error as E;
        let msg = e.to_string();
        match e {
            E::Invalid(_) => Failure::Usage(msg),
            E::Numeric(_) => Failure::Numeric(msg),
            E::Io { .. } | E::Parse { .. } => Failure::Io(msg),
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let result = config::parse(argv).and_then(|(cli, manifest)| commands::run(cli, manifest));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            // Single-line diagnostic.
            eprintln!("wishart: error: {}", f.message().replace('\n', " "));
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        let cases = [
            (wishart::Error::Invalid("x".into()), EXIT_USAGE),
            (wishart::Error::Numeric("x".into()), EXIT_NUMERIC),
            (wishart::Error::Io { context: "x".into(), source: io }, EXIT_IO),
            (wishart::Error::Parse { path: "f".into(), line: 3, msg: "bad".into() }, EXIT_IO),
        ];
        for (e, want) in cases {
            assert_eq!(Failure::from(e).code(), want);
        }
    }
}
