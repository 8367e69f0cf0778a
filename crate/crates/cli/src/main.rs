//! `spinradar` command-line experiments.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 estimation failure.

mod cmd;
mod common;
mod error;

use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use cmd::{eval, localize, odometry, simulate, undistort};

#[derive(Debug, Parser)]
#[command(name = "spinradar", version, about = "Spinning radar odometry experiments")]
struct Cli {
    /// More log output; repeat for debug messages.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Simulate(simulate::SimulateArgs),
    Odometry(odometry::OdometryArgs),
    Localize(localize::LocalizeArgs),
    Undistort(undistort::UndistortArgs),
    Eval(eval::EvalArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Odometry(a) => odometry::run(a),
        Command::Localize(a) => localize::run(a),
        Command::Undistort(a) => undistort::run(a),
        Command::Eval(a) => eval::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinradar: {e}");
            e.exit_code()
        }
    }
}
