//! `lockeval eval`: security-metric report for a locked circuit.

use std::path::PathBuf;

use clap::Args;
use lockeval::attacks::{measure_erem, removal_attack, EremMode};
use lockeval::metrics::{AppBound, MetricsReport, Provenance, RateValue};
use lockeval::sim::{build_error_table, estimate_eapp, estimate_efc, EmpiricalEstimate, SimError};
use lockeval::{EncryptedNetlist, Netlist};

use crate::common::{self, CliError, Ctx};

#[derive(Args)]
pub struct EvalArgs {
    /// Locked .bench circuit.
    #[arg(long)]
    locked: PathBuf,

    /// Key sidecar written by `encrypt`.
    #[arg(long)]
    key: PathBuf,

    /// Original circuit; required for exhaustive and sampled modes.
    #[arg(long)]
    original: Option<PathBuf>,

    /// analytic | exhaustive | sampled.
    #[arg(long, default_value = "analytic")]
    mode: String,

    /// Simulations per key (sampled mode).
    #[arg(long, default_value_t = 500)]
    samples: u64,

    /// Incorrect keys to draw (sampled mode).
    #[arg(long, default_value_t = 100)]
    key_samples: u64,

    /// Append an analytic-vs-measured comparison block.
    #[arg(long)]
    delta: bool,
}

/// Point estimates kept alongside the report for the `--delta` block.
#[derive(Default)]
struct Measured {
    e_fc: Option<f64>,
    e_fc_stderr: Option<f64>,
    e_app: Option<f64>,
    e_rem: Option<f64>,
}

pub fn run(ctx: &Ctx, args: EvalArgs) -> Result<(), CliError> {
    let enc = common::load_locked(&args.locked, &args.key)?;
    let n = enc.netlist.inputs().len() as u32;
    let analytic = common::base_report(n, &enc.config)?;
    let mut report = analytic.clone();
    let mut measured = Measured::default();

    match args.mode.as_str() {
        "analytic" => {}
        "exhaustive" => {
            let original = require_original(&args)?;
            run_exhaustive(ctx, &enc, &original, &mut report, &mut measured)?;
        }
        "sampled" => {
            let original = require_original(&args)?;
            run_sampled(ctx, &args, &enc, &original, &mut report, &mut measured)?;
        }
        other => {
            return Err(CliError::config(format!(
                "unknown mode {other:?}: expected analytic, exhaustive, or sampled"
            )))
        }
    }

    emit(ctx, &args, &enc, &analytic, &report, &measured)
}

fn require_original(args: &EvalArgs) -> Result<Netlist, CliError> {
    let path = args.original.as_ref().ok_or_else(|| {
        CliError::config(format!("--mode {} needs --original", args.mode))
    })?;
    common::read_netlist(path)
}

fn run_exhaustive(
    ctx: &Ctx,
    enc: &EncryptedNetlist,
    original: &Netlist,
    report: &mut MetricsReport,
    measured: &mut Measured,
) -> Result<(), CliError> {
    let table = build_error_table(original, &enc, ctx.budget_bits)?;
    let efc = table.efc();
    measured.e_fc = Some(efc.to_f64());
    report.observe_e_fc(RateValue::Exact(efc), Provenance::Exhaustive);
    match table.eapp() {
        Ok(eapp) => {
            measured.e_app = Some(eapp.to_f64());
            report.observe_e_app(AppBound::Exact(eapp), Provenance::Exhaustive);
        }
        Err(SimError::NoIncorrectKeys) => {}
        Err(e) => return Err(e.into()),
    }
    let rebuilt = removal_attack(&enc)?;
    let erem =
        measure_erem(original, &rebuilt, EremMode::Exhaustive { budget_bits: ctx.budget_bits })?;
    measured.e_rem = Some(erem.to_f64());
    report.observe_e_rem(erem, Provenance::Exhaustive);
    Ok(())
}

fn run_sampled(
    ctx: &Ctx,
    args: &EvalArgs,
    enc: &EncryptedNetlist,
    original: &Netlist,
    report: &mut MetricsReport,
    measured: &mut Measured,
) -> Result<(), CliError> {
    let pairs = args.samples.saturating_mul(args.key_samples).max(1);
    let fc = estimate_efc(original, &enc.netlist, pairs, ctx.seed)?;
    measured.e_fc = Some(fc.value.to_f64());
    measured.e_fc_stderr = Some(fc.stderr);
    report.observe_e_fc(interval(&fc), Provenance::Sampled);

    if !enc.correct_key.is_empty() {
        let ap = estimate_eapp(
            original,
            &enc.netlist,
            &enc.correct_key,
            args.samples,
            args.key_samples,
            ctx.seed,
        )?;
        measured.e_app = Some(ap.value.to_f64());
        report.observe_e_app(AppBound::Exact(ap.value), Provenance::Sampled);
    }

    let rebuilt = removal_attack(&enc)?;
    let erem = measure_erem(
        original,
        &rebuilt,
        EremMode::Sampled { samples: pairs, seed: ctx.seed },
    )?;
    measured.e_rem = Some(erem.to_f64());
    report.observe_e_rem(erem, Provenance::Sampled);
    Ok(())
}

/// ±2σ band around a sampled proportion, clamped to [0, 1].
fn interval(est: &EmpiricalEstimate) -> RateValue {
    let p = est.value.to_f64();
    RateValue::Interval {
        lo: (p - 2.0 * est.stderr).max(0.0),
        hi: (p + 2.0 * est.stderr).min(1.0),
    }
}

fn emit(
    ctx: &Ctx,
    args: &EvalArgs,
    enc: &EncryptedNetlist,
    analytic: &MetricsReport,
    report: &MetricsReport,
    measured: &Measured,
) -> Result<(), CliError> {
    let delta = args.delta.then(|| delta_block(analytic, measured));
    if ctx.json {
        let doc = match &delta {
            Some(d) => serde_json::json!({ "report": report, "delta": d }),
            None => serde_json::json!({ "report": report }),
        };
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }

    println!(
        "scheme: {}  n={}  l={}",
        report.scheme,
        enc.netlist.inputs().len(),
        enc.correct_key.len()
    );
    println!("e_fc:  {}   [{}]", common::fmt_rate(&report.e_fc), common::prov_str(report.provenance.e_fc));
    println!("t_sat: {}   [{}]", common::fmt_tsat(&report.t_sat), common::prov_str(report.provenance.t_sat));
    println!("e_app: {}   [{}]", common::fmt_app(&report.e_app), common::prov_str(report.provenance.e_app));
    println!("e_rem: {}   [{}]", common::fmt_rational(&report.e_rem), common::prov_str(report.provenance.e_rem));
    for note in &report.notes {
        println!("note: {note}");
    }
    if let Some(d) = delta {
        println!("delta:");
        for (name, row) in [("e_fc", &d.e_fc), ("e_app", &d.e_app), ("e_rem", &d.e_rem)] {
            println!(
                "  {name}: analytic {}  measured {}  delta {}",
                row.analytic.map_or("-".into(), |v| v.to_string()),
                row.measured.map_or("-".into(), |v| v.to_string()),
                row.delta.map_or("-".into(), |v| v.to_string()),
            );
        }
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct DeltaBlock {
    e_fc: DeltaRow,
    e_app: DeltaRow,
    e_rem: DeltaRow,
}

#[derive(serde::Serialize)]
struct DeltaRow {
    analytic: Option<f64>,
    measured: Option<f64>,
    /// Absolute gap; for interval-valued analytic forms, distance outside the band.
    delta: Option<f64>,
}

fn delta_block(analytic: &MetricsReport, measured: &Measured) -> DeltaBlock {
    let fc_row = match &analytic.e_fc {
        RateValue::Exact(r) => point_row(Some(r.to_f64()), measured.e_fc),
        RateValue::Interval { lo, hi } => DeltaRow {
            analytic: Some((lo + hi) / 2.0),
            measured: measured.e_fc,
            delta: measured.e_fc.map(|m| (lo - m).max(m - hi).max(0.0)),
        },
    };
    DeltaBlock {
        e_fc: fc_row,
        e_app: point_row(analytic.e_app.as_exact().map(|r| r.to_f64()), measured.e_app),
        e_rem: point_row(Some(analytic.e_rem.to_f64()), measured.e_rem),
    }
}

fn point_row(analytic: Option<f64>, measured: Option<f64>) -> DeltaRow {
    let delta = match (analytic, measured) {
        (Some(a), Some(m)) => Some((a - m).abs()),
        _ => None,
    };
    DeltaRow { analytic, measured, delta }
}
