//! `flexmap` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible scenario or
//! solver failure, 3 verification failure.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::scenario::Settings;

#[derive(Parser)]
#[command(name = "flexmap", version, about = "Multi-period PQ flexibility maps of radial distribution networks")]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a flexibility map and write CSV, JSON and SVG artifacts.
    Solve(SolveArgs),
    /// Solve several scenario variants and tabulate their areas.
    Compare(CompareArgs),
    /// Audit a map from `solve` (JSON or CSV) against its network.
    Verify(VerifyArgs),
    /// Monte Carlo sampling of DER setpoints for one period.
    Sample(SampleArgs),
    /// Write a deterministic synthetic radial feeder as network JSON.
    Synth(SynthArgs),
}

/// Scenario settings shared by every command; each overrides `--config`.
#[derive(Args, Debug, Default)]
pub struct ScenarioArgs {
    /// `key=value` file with any of the settings below.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Network JSON file, or builtin:<name>.
    #[arg(long, value_name = "PATH")]
    net: Option<String>,
    /// Number of boundary directions (at least 3).
    #[arg(long = "H", value_name = "N")]
    h: Option<usize>,
    /// Number of periods taken from the network's profile.
    #[arg(long = "T", value_name = "N")]
    t: Option<usize>,
    /// linear or surveyor.
    #[arg(long)]
    objective: Option<String>,
    /// all-pairs or same-index.
    #[arg(long)]
    coupling: Option<String>,
    /// Ramp limit as a percentage of each generator's capacity, or `none`.
    #[arg(long, value_name = "PCT")]
    ramp: Option<String>,
    /// on or off.
    #[arg(long)]
    batteries: Option<String>,
    /// Study case I, II, III or IV.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Angle of the first direction, degrees.
    #[arg(long, value_name = "DEG", allow_hyphen_values = true)]
    offset: Option<String>,
    /// Loss-credit rounds after the priced solve; 0 keeps priced vertices.
    #[arg(long, value_name = "N")]
    credit: Option<usize>,
}

impl ScenarioArgs {
    /// Defaults, then the config file, then flags.
    fn settings(&self) -> anyhow::Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::read_file(path)?,
            None => Settings::default(),
        };
        let flags = [
            ("net", self.net.clone()),
            ("h", self.h.map(|v| v.to_string())),
            ("t", self.t.map(|v| v.to_string())),
            ("objective", self.objective.clone()),
            ("coupling", self.coupling.clone()),
            ("ramp", self.ramp.clone()),
            ("batteries", self.batteries.clone()),
            ("case", self.case.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.clone()),
            ("offset", self.offset.clone()),
            ("credit", self.credit.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        Ok(s)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also draw every period in one overlay.svg.
    #[arg(long)]
    overlay: bool,
    /// Write the assembled optimization model to model.txt.
    #[arg(long)]
    dump_model: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Whitespace-separated key=value overrides; give at least two.
    #[arg(long = "variant", value_name = "SETTINGS")]
    variants: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// map.json or map.csv written by `solve`.
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    /// Random interior paths; 0 checks residuals only.
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Period to sample, 1-based.
    #[arg(long, default_value_t = 1)]
    period: usize,
    /// Number of draws.
    #[arg(long, short = 'n', default_value_t = 1000)]
    samples: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 141)]
    buses: usize,
    #[arg(long, default_value_t = 10)]
    ders: usize,
    #[arg(long, default_value_t = 24)]
    periods: usize,
    #[arg(long, default_value_t = 141)]
    seed: u64,
    /// Destination file.
    #[arg(long, short, default_value = "feeder.json")]
    output: PathBuf,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = commands::configure_threads()?;
    match cli.command {
        Command::Solve(a) => commands::solve(&a.scenario.settings()?, a.overlay, a.dump_model),
        Command::Compare(a) => commands::compare(&a.scenario.settings()?, &a.variants),
        Command::Verify(a) => commands::verify(&a.scenario.settings()?, &a.map, a.trials, threads),
        Command::Sample(a) => commands::sample(&a.scenario.settings()?, a.period, a.samples, threads),
        Command::Synth(a) => commands::synth(a.buses, a.ders, a.periods, a.seed, &a.output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
