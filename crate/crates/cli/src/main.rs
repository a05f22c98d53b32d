mod commands;
mod grid;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use grid::Grid;
use shemoments::simulate::Engine;
use shemoments::verify::Suite;

/// Second moments of the stochastic heat equation, Brownian local-time
/// laws, and Monte Carlo cross-checks.
#[derive(Debug, Parser)]
#[command(name = "shemoments", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate K, K-dagger, K*, H or H~ over a grid (CSV).
    Kernel(KernelArgs),
    /// E[u(t,x1) u(t,x2)] for an initial measure read from JSON.
    TwoPoint(TwoPointArgs),
    /// E[u(t,x)^2]; the diagonal of two-point.
    SecondMoment(SecondMomentArgs),
    /// Run a deterministic verification suite (JSON report, exit 1 on failure).
    Verify(VerifyArgs),
    /// Monte Carlo estimate of a two-point moment.
    Simulate(SimulateArgs),
    /// Joint law of Brownian motion and its local time.
    #[command(subcommand)]
    LocalTime(LocalTimeCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "K")]
    K,
    #[value(name = "Kdagger")]
    Kdagger,
    #[value(name = "Kstar")]
    Kstar,
    #[value(name = "H")]
    H,
    #[value(name = "Htilde")]
    Htilde,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    /// Grid for K and H~.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    x: Grid,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    z1: Grid,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    z2: Grid,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    y: Grid,
    /// Write CSV here (with a `.manifest.json` sidecar) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    Quadrature,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    Split,
    Convolution,
}

#[derive(Debug, Args)]
pub struct MomentArgs {
    /// Initial measure JSON file.
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "quadrature")]
    method: Method,
    /// Double-integral form used by the quadrature method.
    #[arg(long, value_enum, default_value = "split")]
    formula: FormulaArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TwoPointArgs {
    #[arg(long, allow_hyphen_values = true)]
    x1: f64,
    #[arg(long, allow_hyphen_values = true)]
    x2: f64,
    #[command(flatten)]
    common: MomentArgs,
}

#[derive(Debug, Args)]
pub struct SecondMomentArgs {
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[command(flatten)]
    common: MomentArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// laplace, identities, local-time or all.
    #[arg(long)]
    suite: Suite,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// spde, fk or fk-occupation.
    #[arg(long, required_unless_present = "manifest")]
    engine: Option<Engine>,
    /// Engine config JSON.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Rerun exactly the configuration recorded in a previous output.
    #[arg(long, conflicts_with = "engine")]
    manifest: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "SHEMOMENTS_WORKERS")]
    workers: Option<usize>,
    /// Append the closed-form value and the z-score.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LocalTimeCommand {
    /// Continuous joint density f(y, v) of (B_t, L_t^a) on a grid (CSV).
    Density {
        #[arg(long)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: Grid,
        #[arg(long)]
        v: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact draws of (B_t, L_t^a) (CSV).
    Sample {
        #[arg(long)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// E[exp(lambda^2 L_t^a)].
    Mgf {
        #[arg(long)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Kernel(a) => commands::kernel(a),
        Command::TwoPoint(a) => commands::two_point(a),
        Command::SecondMoment(a) => commands::second_moment(a),
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::LocalTime(c) => commands::local_time(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
