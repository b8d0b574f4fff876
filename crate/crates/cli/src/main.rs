//! `hemicontrol <command> --config <path> [--out <dir>]`
//!
//! Exit codes: 0 success, 2 solver or run failure, 3 configuration or
//! usage error, 4 certification or hypothesis failure. Diagnostics go to
//! standard error; one result line goes to standard out.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use hemicontrol_cli::run::{execute, Command};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hemicontrol", version, about = "Nonsmooth boundary heat transfer: solvers, control, sweeps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a flat `section.key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Dirichlet limit state problem.
    SolveState(RunArgs),
    /// Solve the nonsmooth boundary problem at one alpha and certify it.
    SolveHvi(RunArgs),
    /// Minimize the tracking cost subject to the limit state problem.
    OptimizeLimit(RunArgs),
    /// Minimize the tracking cost subject to the nonsmooth state problem.
    OptimizeAlpha(RunArgs),
    /// Solve the state problem across an alpha grid and fit the error decay.
    SweepState(RunArgs),
    /// Optimize across an alpha grid and track convergence to the limit pair.
    SweepControl(RunArgs),
    /// Sample the structural hypotheses of the configured superpotential.
    VerifyJ(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // usage mistakes share the config-error exit code so that 2
            // always means a run that started and failed
            eprint!("{e}");
            return ExitCode::from(3);
        }
    };
    let (cmd, args) = match &cli.cmd {
        Cmd::SolveState(a) => (Command::SolveState, a),
        Cmd::SolveHvi(a) => (Command::SolveHvi, a),
        Cmd::OptimizeLimit(a) => (Command::OptimizeLimit, a),
        Cmd::OptimizeAlpha(a) => (Command::OptimizeAlpha, a),
        Cmd::SweepState(a) => (Command::SweepState, a),
        Cmd::SweepControl(a) => (Command::SweepControl, a),
        Cmd::VerifyJ(a) => (Command::VerifyJ, a),
    };
    match execute(cmd, &args.config, args.out.as_deref()) {
        Ok(outcome) => {
            println!(
                "{} (wrote {} to {})",
                outcome.headline,
                outcome.files.join(", "),
                outcome.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
