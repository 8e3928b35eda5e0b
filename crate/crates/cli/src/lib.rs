//! Command-line front end for the logic-locking toolkit.

mod attack;
mod common;
mod encrypt;
mod eval;
mod oracle;
mod sweep;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::Ctx;

#[derive(Parser)]
#[command(
    name = "lockeval",
    version,
    about = "Lock combinational circuits and measure how well the lock holds"
)]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Cap on table bits (n + l) for exhaustive passes.
    #[arg(long, global = true, default_value_t = lockeval::sim::DEFAULT_BUDGET_BITS)]
    budget_bits: u32,

    /// Machine-readable JSON on stdout instead of prose.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lock a circuit and write the netlist plus its key sidecar.
    Encrypt(encrypt::EncryptArgs),
    /// Compute security metrics for a locked circuit.
    Eval(eval::EvalArgs),
    /// Run an attack against a locked circuit.
    #[command(subcommand)]
    Attack(attack::AttackCmd),
    /// Run a parameter grid and collect one record per point.
    Sweep(sweep::SweepArgs),
    /// Inspect oracle-level structures behind a lock.
    #[command(subcommand)]
    Oracle(oracle::OracleCmd),
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { seed: cli.seed, budget_bits: cli.budget_bits, json: cli.json };
    let result = match cli.command {
        Command::Encrypt(args) => encrypt::run(&ctx, args),
        Command::Eval(args) => eval::run(&ctx, args),
        Command::Attack(cmd) => attack::run(&ctx, cmd),
        Command::Sweep(args) => sweep::run(&ctx, args),
        Command::Oracle(cmd) => oracle::run(&ctx, cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
