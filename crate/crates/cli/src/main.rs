//! `skyplan`: minimum-power trajectory planning under an intermittent SINR
//! constraint.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: u8 = 0;
pub const EXIT_SELFTEST: u8 = 1;
pub const EXIT_CONNECTIVITY: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "skyplan", version, about = "Minimum-power UAV trajectories with intermittent connectivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a trajectory and write trace, slot and convergence files
    Plan {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Output directory
        #[arg(long, default_value = "skyplan-out")]
        out: PathBuf,
    },
    /// Decide feasibility and print the certificate as JSON
    Check {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also run the grid oracle and report agreement
        #[arg(long)]
        oracle: bool,
        /// Grid oracle cell size in meters
        #[arg(long, default_value_t = 2.0)]
        grid_step: f64,
    },
    /// Solve for several thresholds and write a sweep CSV
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Comma-separated SINR thresholds (linear)
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        gammas: Vec<f64>,
        #[arg(long, default_value = "skyplan-out")]
        out: PathBuf,
    },
    /// Run the numerical self-checks
    Selftest {
        /// Comma-separated families: derivatives, concavity, surrogate
        #[arg(long, value_delimiter = ',')]
        probes: Vec<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Add a callback with a wrong gradient (harness check)
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
}

#[derive(Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file
    scenario: Option<PathBuf>,
    /// Use a bundled layout instead of a file: map1 or map2
    #[arg(long, conflicts_with = "scenario")]
    seed_layout: Option<String>,
    /// Override the SINR threshold (linear)
    #[arg(long)]
    gamma_min: Option<f64>,
    /// Override the binary penalty weight
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Relative objective change that stops the iteration
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Trust-region radius on positions, meters
    #[arg(long)]
    trust_region: Option<f64>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("SKYPLAN_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .try_init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Plan { scenario, solve, out } => commands::plan(&scenario, &solve, &out),
        Command::Check {
            scenario,
            oracle,
            grid_step,
        } => commands::check(&scenario, oracle, grid_step),
        Command::Sweep {
            scenario,
            solve,
            gammas,
            out,
        } => commands::sweep(&scenario, &solve, &gammas, &out),
        Command::Selftest {
            probes,
            seed,
            inject_sign_error,
        } => commands::selftest(&probes, seed, inject_sign_error),
    };
    ExitCode::from(code)
}
