//! `lockeval oracle`: materialize and export the error table behind a lock.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use lockeval::sim::build_error_table;
use lockeval::KeyAssignment;

use crate::common::{self, CliError, Ctx};

#[derive(Subcommand)]
pub enum OracleCmd {
    /// The (input × key) disagreement table between locked and original.
    ErrorTable(ErrorTableArgs),
}

#[derive(Args)]
pub struct ErrorTableArgs {
    /// Locked .bench circuit.
    #[arg(long)]
    locked: PathBuf,

    /// Key sidecar written by `encrypt`.
    #[arg(long)]
    key: PathBuf,

    /// Original circuit.
    #[arg(long)]
    oracle: PathBuf,

    /// summary | csv | raw.
    #[arg(long, default_value = "summary")]
    format: String,

    /// Destination; csv defaults to stdout, raw writes <out>.json + <out>.bits.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, cmd: OracleCmd) -> Result<(), CliError> {
    match cmd {
        OracleCmd::ErrorTable(args) => run_error_table(ctx, args),
    }
}

fn run_error_table(ctx: &Ctx, args: ErrorTableArgs) -> Result<(), CliError> {
    let enc = common::load_locked(&args.locked, &args.key)?;
    let oracle_nl = common::read_netlist(&args.oracle)?;
    let table = build_error_table(&oracle_nl, &enc, ctx.budget_bits)?;

    match args.format.as_str() {
        "summary" => {
            let cells = 1u128 << (table.n() + table.l());
            let eapp = table.eapp().ok();
            if ctx.json {
                let doc = serde_json::json!({
                    "n": table.n(),
                    "l": table.l(),
                    "correct_key": table.k_star(),
                    "errors": table.error_count(),
                    "cells": cells as u64,
                    "e_fc": table.efc().to_f64(),
                    "e_app": eapp.as_ref().map(|r| r.to_f64()),
                });
                println!("{}", serde_json::to_string_pretty(&doc)?);
            } else {
                println!("inputs (n): {}", table.n());
                println!("key bits (l): {}", table.l());
                println!(
                    "correct key: {} ({})",
                    KeyAssignment::from_u64(table.k_star(), table.l()).to_bit_string(),
                    table.k_star()
                );
                println!("errors: {} / {cells}", table.error_count());
                println!("e_fc: {}", common::fmt_rational(&table.efc()));
                match eapp {
                    Some(r) => println!("e_app: {}", common::fmt_rational(&r)),
                    None => println!("e_app: undefined (no incorrect keys)"),
                }
            }
        }
        "csv" => {
            let mut csv = String::from("input,key\n");
            for input in 0..1u64 << table.n() {
                table.for_each_error_in_row(input, |key| {
                    csv.push_str(&format!("{input},{key}\n"));
                });
            }
            match &args.out {
                Some(path) => {
                    common::write_file(path, csv.as_bytes())?;
                    if !ctx.json {
                        println!("wrote {}", path.display());
                    }
                }
                None => print!("{csv}"),
            }
        }
        "raw" => {
            let base = args.out.as_ref().ok_or_else(|| {
                CliError::config("--format raw needs --out as the file base path")
            })?;
            let (header, bits) = table.export();
            let header_path = base.with_extension("json");
            let bits_path = base.with_extension("bits");
            common::write_file(&header_path, header.as_bytes())?;
            common::write_file(&bits_path, &bits)?;
            if !ctx.json {
                println!("wrote {} and {}", header_path.display(), bits_path.display());
            }
        }
        other => {
            return Err(CliError::config(format!(
                "unknown format {other:?}: expected summary, csv, or raw"
            )))
        }
    }
    Ok(())
}
