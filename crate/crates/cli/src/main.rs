use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trajspec::EigenMethod;
use trajspec_cli::config::Overrides;
use trajspec_cli::{run, Command};

#[derive(Parser)]
#[command(name = "trajspec", version, about = "Return statistics and trajectory-matrix spectra")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lag-1 autocorrelation of returns and absolute returns.
    Table1(Common),
    /// Histograms, KDEs and moments of log returns.
    Dist(Common),
    /// Q-Q curves against the Gaussian and between instruments.
    Qq(Common),
    /// Trajectory-matrix spectra, spacings and comparisons with the ensemble.
    Spectrum(Common),
    /// The random Hankel ensemble on its own.
    Ensemble(Common),
    /// Every stage plus report.md.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Central share of eigenvalues used for spacings.
    #[arg(long)]
    bulk_fraction: Option<f64>,
    /// Standardize returns before building trajectory matrices.
    #[arg(long)]
    standardize: bool,
    /// Eigensolver; chosen by matrix size when omitted.
    #[arg(long, value_parser = clap::value_parser!(EigenMethod))]
    method: Option<EigenMethod>,
    #[arg(long)]
    date_col: Option<String>,
    #[arg(long)]
    close_col: Option<String>,
    /// Price CSV as `id=path`; repeatable.
    #[arg(long = "instrument", value_name = "ID=PATH")]
    instruments: Vec<String>,
    /// Synthetic series as `id=kind:length[:seed]` with kind gaussian_walk, student_t_walk or constant; repeatable.
    #[arg(long = "fixture", value_name = "ID=KIND:LEN[:SEED]")]
    fixtures: Vec<String>,
    /// Add four bundled synthetic instruments.
    #[arg(long)]
    demo: bool,
    /// Side of the ensemble matrices.
    #[arg(long)]
    ensemble_m: Option<usize>,
    /// Number of ensemble draws.
    #[arg(long)]
    draws: Option<usize>,
    /// Skip the content cache under <out>/.cache.
    #[arg(long)]
    no_cache: bool,
}

impl From<Common> for Overrides {
    fn from(c: Common) -> Self {
        Overrides {
            config: c.config,
            seed: c.seed,
            out: c.out,
            jobs: c.jobs,
            bulk_fraction: c.bulk_fraction,
            standardize: c.standardize,
            method: c.method,
            date_col: c.date_col,
            close_col: c.close_col,
            instruments: c.instruments,
            fixtures: c.fixtures,
            demo: c.demo,
            ensemble_m: c.ensemble_m,
            ensemble_draws: c.draws,
            no_cache: c.no_cache,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // clap's own exit code for usage errors is 2, which matches ours
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    let (command, common) = match cli.command {
        Cmd::Table1(c) => (Command::Table1, c),
        Cmd::Dist(c) => (Command::Dist, c),
        Cmd::Qq(c) => (Command::Qq, c),
        Cmd::Spectrum(c) => (Command::Spectrum, c),
        Cmd::Ensemble(c) => (Command::Ensemble, c),
        Cmd::Report(c) => (Command::Report, c),
    };
    let outcome = run(command, &common.into());
    ExitCode::from(outcome.code() as u8)
}
