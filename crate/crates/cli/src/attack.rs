//! `lockeval attack`: run key-recovery and removal attacks from the shell.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Subcommand};
use lockeval::attacks::{
    appsat_attack, build_cover_instance, circuit_oracle, exact_min_dips, greedy_min_dips,
    measure_erem, removal_attack, sat_attack, AttackCaps, DipStrategy, EremMode, Termination,
};
use lockeval::netlist::write_bench;
use lockeval::sim::{build_error_table, keys_functionally_equivalent, sfll_hd_projected_table};

use crate::common::{self, CliError, Ctx};

#[derive(Subcommand)]
pub enum AttackCmd {
    /// Oracle-guided exact attack; recovers a functionally correct key.
    Sat(SatArgs),
    /// Early-terminating variant that settles for a low-error key.
    Appsat(AppsatArgs),
    /// Strip the lock logic and measure the residual error.
    Removal(RemovalArgs),
    /// Estimate how many distinguishing inputs prune every wrong key.
    Greedy(GreedyArgs),
}

pub fn run(ctx: &Ctx, cmd: AttackCmd) -> Result<(), CliError> {
    match cmd {
        AttackCmd::Sat(args) => run_sat(ctx, args),
        AttackCmd::Appsat(args) => run_appsat(ctx, args),
        AttackCmd::Removal(args) => run_removal(ctx, args),
        AttackCmd::Greedy(args) => run_greedy(ctx, args),
    }
}

#[derive(Args)]
struct CommonAttackArgs {
    /// Locked .bench circuit.
    #[arg(long)]
    locked: PathBuf,

    /// Key sidecar written by `encrypt`.
    #[arg(long)]
    key: PathBuf,

    /// Original circuit queried as the black-box oracle.
    #[arg(long)]
    oracle: PathBuf,
}

#[derive(Args)]
pub struct SatArgs {
    #[command(flatten)]
    io: CommonAttackArgs,

    /// Write the per-iteration JSONL trace here.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Stop after this many distinguishing-input rounds.
    #[arg(long)]
    max_iterations: Option<u64>,

    /// Wall-clock limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,

    /// Pattern-search engine: auto | greedy | solver.
    #[arg(long, default_value = "auto")]
    strategy: String,
}

fn parse_strategy(s: &str) -> Result<DipStrategy, CliError> {
    match s {
        "auto" => Ok(DipStrategy::Auto),
        "greedy" => Ok(DipStrategy::Greedy),
        "solver" => Ok(DipStrategy::Solver),
        other => Err(CliError::config(format!(
            "unknown strategy {other:?}: expected auto, greedy, or solver"
        ))),
    }
}

fn attack_caps(
    ctx: &Ctx,
    max_iterations: Option<u64>,
    timeout: Option<f64>,
    strategy: &str,
) -> Result<AttackCaps, CliError> {
    Ok(AttackCaps {
        max_iterations,
        timeout: timeout.map(Duration::from_secs_f64),
        budget_bits: ctx.budget_bits,
        seed: ctx.seed,
        strategy: parse_strategy(strategy)?,
    })
}

fn termination_str(t: Termination) -> &'static str {
    match t {
        Termination::KeyFound => "key_found",
        Termination::Timeout => "timeout",
        Termination::IterationCap => "iteration_cap",
    }
}

fn run_sat(ctx: &Ctx, args: SatArgs) -> Result<(), CliError> {
    let enc = common::load_locked(&args.io.locked, &args.io.key)?;
    let oracle_nl = common::read_netlist(&args.io.oracle)?;
    let caps = attack_caps(ctx, args.max_iterations, args.timeout, &args.strategy)?;
    let trace = sat_attack(&enc, circuit_oracle(&oracle_nl), &caps)?;

    if let Some(path) = &args.trace {
        common::write_file(path, trace.to_jsonl().as_bytes())?;
    }

    let (key_str, verdict) = match &trace.recovered_key {
        Some(key) => {
            let verdict = match keys_functionally_equivalent(
                &oracle_nl,
                &enc.netlist,
                key,
                ctx.budget_bits,
            ) {
                Ok(true) => "VERIFIED",
                Ok(false) => "WRONG",
                Err(_) => "UNVERIFIED",
            };
            (Some(key.to_bit_string()), verdict)
        }
        None => (None, "NONE"),
    };

    if ctx.json {
        let doc = serde_json::json!({
            "iterations": trace.iterations,
            "queries": trace.queries,
            "terminated": termination_str(trace.terminated),
            "key": key_str,
            "verdict": verdict,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("iterations: {}", trace.iterations);
        println!("queries: {}", trace.queries);
        println!("terminated: {}", termination_str(trace.terminated));
        if let Some(k) = &key_str {
            println!("recovered key: {k}");
        }
        println!("key: {verdict}");
    }

    if trace.terminated != Termination::KeyFound {
        return Err(CliError::Timeout(format!(
            "attack stopped ({}) after {} iterations; partial trace flushed",
            termination_str(trace.terminated),
            trace.iterations
        )));
    }
    Ok(())
}

#[derive(Args)]
pub struct AppsatArgs {
    #[command(flatten)]
    io: CommonAttackArgs,

    /// Stop once the candidate's probed error rate is at or below this.
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,

    /// Oracle queries per settlement probe.
    #[arg(long, default_value_t = 500)]
    probe_samples: u64,

    #[arg(long)]
    max_iterations: Option<u64>,

    #[arg(long)]
    timeout: Option<f64>,

    #[arg(long, default_value = "auto")]
    strategy: String,
}

fn run_appsat(ctx: &Ctx, args: AppsatArgs) -> Result<(), CliError> {
    let enc = common::load_locked(&args.io.locked, &args.io.key)?;
    let oracle_nl = common::read_netlist(&args.io.oracle)?;
    let caps = attack_caps(ctx, args.max_iterations, args.timeout, &args.strategy)?;
    let outcome = appsat_attack(
        &enc,
        circuit_oracle(&oracle_nl),
        args.threshold,
        args.probe_samples,
        &caps,
    )?;

    let basis = match outcome.residual_samples {
        None => "exhaustive".to_string(),
        Some(s) => format!("sampled ({s} samples)"),
    };
    if ctx.json {
        let doc = serde_json::json!({
            "iterations": outcome.iterations,
            "key": outcome.key.to_bit_string(),
            "residual_error": outcome.residual_error.to_f64(),
            "residual_basis": basis,
            "exact": outcome.exact,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("iterations: {}", outcome.iterations);
        println!("key: {}", outcome.key.to_bit_string());
        println!("residual error: {}", common::fmt_rational(&outcome.residual_error));
        println!("residual basis: {basis}");
        println!("exact: {}", outcome.exact);
    }
    Ok(())
}

#[derive(Args)]
pub struct RemovalArgs {
    #[command(flatten)]
    io: CommonAttackArgs,

    /// Write the peeled .bench here.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Measure with this many random inputs instead of exhausting.
    #[arg(long)]
    samples: Option<u64>,
}

fn run_removal(ctx: &Ctx, args: RemovalArgs) -> Result<(), CliError> {
    let enc = common::load_locked(&args.io.locked, &args.io.key)?;
    let oracle_nl = common::read_netlist(&args.io.oracle)?;
    let rebuilt = removal_attack(&enc)?;
    if let Some(path) = &args.out {
        common::write_file(path, write_bench(&rebuilt).as_bytes())?;
    }

    let n = oracle_nl.inputs().len() as u32;
    let mode = match args.samples {
        Some(samples) => EremMode::Sampled { samples, seed: ctx.seed },
        None if n <= ctx.budget_bits => EremMode::Exhaustive { budget_bits: ctx.budget_bits },
        None => EremMode::Sampled { samples: 4096, seed: ctx.seed },
    };
    let sampled = matches!(mode, EremMode::Sampled { .. });
    let erem = measure_erem(&oracle_nl, &rebuilt, mode)?;

    if ctx.json {
        let doc = serde_json::json!({
            "e_rem": erem.to_f64(),
            "e_rem_exact": erem.to_string(),
            "basis": if sampled { "sampled" } else { "exhaustive" },
            "gates_before": enc.netlist.gates().len(),
            "gates_after": rebuilt.gates().len(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("E_REM: {}", erem.to_f64());
        println!("basis: {}", if sampled { "sampled" } else { "exhaustive" });
        println!("gates: {} -> {}", enc.netlist.gates().len(), rebuilt.gates().len());
    }
    Ok(())
}

#[derive(Args)]
pub struct GreedyArgs {
    /// Locked .bench circuit (instance mode).
    #[arg(long)]
    locked: Option<PathBuf>,

    /// Key sidecar (instance mode).
    #[arg(long)]
    key: Option<PathBuf>,

    /// Original circuit (instance mode).
    #[arg(long)]
    oracle: Option<PathBuf>,

    /// Also run the exact branch-and-bound cover (small universes only).
    #[arg(long)]
    exact: bool,

    /// Write the plain-text set-cover instance here.
    #[arg(long)]
    cover_out: Option<PathBuf>,

    /// Grid mode: sweep cone-projected SFLL-HD tables for l in 1..=MAX,
    /// h in 0..=l, and emit a CSV of (l, h, dips).
    #[arg(long, value_name = "MAX")]
    sfll_grid: Option<u32>,

    /// Grid mode: write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_greedy(ctx: &Ctx, args: GreedyArgs) -> Result<(), CliError> {
    if let Some(max_l) = args.sfll_grid {
        return run_greedy_grid(ctx, args, max_l);
    }
    let (locked, key, oracle) = match (&args.locked, &args.key, &args.oracle) {
        (Some(l), Some(k), Some(o)) => (l, k, o),
        _ => {
            return Err(CliError::config(
                "instance mode needs --locked, --key, and --oracle (or use --sfll-grid)",
            ))
        }
    };
    let enc = common::load_locked(locked, key)?;
    let oracle_nl = common::read_netlist(oracle)?;
    let table = build_error_table(&oracle_nl, &enc, ctx.budget_bits)?;
    let instance = build_cover_instance(&table);
    if let Some(path) = &args.cover_out {
        common::write_file(path, instance.to_text().as_bytes())?;
    }
    let (dips, inputs) = greedy_min_dips(&instance)?;
    let exact = if args.exact { Some(exact_min_dips(&instance)?) } else { None };

    if ctx.json {
        let doc = serde_json::json!({
            "dips": dips,
            "inputs": inputs,
            "exact_dips": exact,
            "wrong_keys": instance.universe().len(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("dips: {dips}");
        if let Some(e) = exact {
            println!("exact dips: {e}");
        }
        println!("wrong keys to prune: {}", instance.universe().len());
    }
    Ok(())
}

fn run_greedy_grid(ctx: &Ctx, args: GreedyArgs, max_l: u32) -> Result<(), CliError> {
    if max_l == 0 || 2 * max_l > ctx.budget_bits {
        return Err(CliError::config(format!(
            "--sfll-grid {max_l} needs 1 <= MAX and 2*MAX <= budget bits ({})",
            ctx.budget_bits
        )));
    }
    let mut csv = String::from("schema_version,l,h,dips\n");
    for l in 1..=max_l {
        for h in 0..=l {
            let k_star = common::splitmix64(ctx.seed ^ ((u64::from(l) << 32) | u64::from(h)))
                & ((1u64 << l) - 1);
            let table = sfll_hd_projected_table(l, h, k_star, ctx.budget_bits)?;
            let instance = build_cover_instance(&table);
            let (dips, _) = greedy_min_dips(&instance)?;
            csv.push_str(&format!("1,{l},{h},{dips}\n"));
        }
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
    Ok(())
}
