//! `lockeval sweep`: run a parameter grid, one record per point, resumable.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lockeval::attacks::{
    appsat_attack, build_cover_instance, circuit_oracle, greedy_min_dips, measure_erem,
    removal_attack, sat_attack, AttackCaps, DipStrategy, EremMode, Termination,
};
use lockeval::metrics::{AppBound, MetricsReport, Provenance, RateValue, TSatBound};
use lockeval::schemes::{self, EncryptOptions, TreeType};
use lockeval::sim::{build_error_table, estimate_eapp, estimate_efc, SimError};
use lockeval::{Netlist, Rational, SchemeConfig};

use crate::common::{self, CliError, Ctx};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Args)]
pub struct SweepArgs {
    /// TOML sweep description.
    #[arg(long)]
    spec: PathBuf,

    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,

    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    #[serde(default = "default_schema_version")]
    schema_version: u32,
    /// Family expanded against `ranges`; omit when `points` lists configs.
    scheme: Option<String>,
    mode: String,
    #[serde(default)]
    circuits: Vec<PathBuf>,
    #[serde(default = "default_metrics")]
    metrics: Vec<String>,
    /// Falls back to the global --seed.
    seed: Option<u64>,
    /// Falls back to the global --budget-bits.
    budget_bits: Option<u32>,
    #[serde(default)]
    ranges: Ranges,
    /// Explicit configurations, bypassing grid expansion.
    #[serde(default)]
    points: Vec<SchemeConfig>,
    #[serde(default)]
    sampled: SampledParams,
    #[serde(default)]
    caps: CapParams,
}

fn default_schema_version() -> u32 {
    SWEEP_SCHEMA_VERSION
}

fn default_metrics() -> Vec<String> {
    ["e_fc", "t_sat", "e_app", "e_rem"].map(String::from).to_vec()
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Ranges {
    #[serde(default)]
    l: Vec<u32>,
    /// Hamming distances (sfll-hd); empty means 0..=l per l.
    #[serde(default)]
    h: Vec<u32>,
    /// Replacement gates (dtl); empty means ["xor"].
    #[serde(default)]
    x: Vec<String>,
    #[serde(default)]
    layer: Vec<u32>,
    #[serde(default)]
    count: Vec<u32>,
    /// Input widths for analytic sweeps that have no circuit files.
    #[serde(default)]
    n: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SampledParams {
    samples: u64,
    key_samples: u64,
}

impl Default for SampledParams {
    fn default() -> Self {
        SampledParams { samples: 500, key_samples: 100 }
    }
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CapParams {
    max_iterations: Option<u64>,
    timeout_secs: Option<f64>,
    /// Early-stop error rate for the approximate attack.
    threshold: Option<f64>,
    probe_samples: Option<u64>,
}

struct GridPoint {
    index: u64,
    config: SchemeConfig,
    circuit: Option<PathBuf>,
    n: Option<u32>,
    seed: u64,
}

#[derive(Serialize, Deserialize, Clone, Default)]
struct Timestamps {
    started_unix_ms: u64,
    finished_unix_ms: u64,
}

#[derive(Serialize, Deserialize, Clone)]
struct AttackSummary {
    iterations: u64,
    queries: u64,
    terminated: String,
    key_verified: Option<bool>,
}

#[derive(Serialize, Deserialize, Clone)]
struct AppsatSummary {
    iterations: u64,
    residual_error: f64,
    /// True when the residual was exhausted rather than sampled.
    residual_exhaustive: bool,
    exact: bool,
}

#[derive(Serialize, Deserialize, Clone)]
struct EstimateSummary {
    value: f64,
    stderr: f64,
    samples: u64,
}

/// One finished grid point; everything but `timestamps` is seed-determined.
#[derive(Serialize, Deserialize, Clone)]
struct RunRecord {
    schema_version: u32,
    tool_version: String,
    grid_index: u64,
    mode: String,
    scheme: String,
    circuit: Option<String>,
    n: Option<u32>,
    seed: u64,
    config: SchemeConfig,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    report: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attack: Option<AttackSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    appsat: Option<AppsatSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    greedy_dips: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sampled_e_fc: Option<EstimateSummary>,
    timestamps: Timestamps,
}

pub fn run(ctx: &Ctx, args: SweepArgs) -> Result<(), CliError> {
    let spec_text = common::read_to_string(&args.spec)?;
    let spec: SweepSpec = toml::from_str(&spec_text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", args.spec.display())))?;
    validate_spec(&spec)?;

    let budget_bits = spec.budget_bits.unwrap_or(ctx.budget_bits);
    let points = expand(&spec, ctx)?;
    if points.is_empty() {
        return Err(CliError::config("sweep grid is empty"));
    }

    let points_dir = args.out.join("points");
    fs::create_dir_all(&points_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", points_dir.display())))?;

    let env = PointEnv {
        mode: spec.mode.clone(),
        metrics: spec.metrics.clone(),
        budget_bits,
        sampled: &spec.sampled,
        caps: &spec.caps,
    };

    let work = |point: &GridPoint| -> Result<(RunRecord, bool), CliError> {
        let hash = point_hash(&env, point);
        let path = points_dir.join(format!("{hash}.json"));
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(mut record) = serde_json::from_str::<RunRecord>(&text) {
                record.grid_index = point.index;
                return Ok((record, false));
            }
        }
        let record = run_point(&env, point);
        let tmp = points_dir.join(format!(".tmp-{hash}"));
        fs::write(&tmp, serde_json::to_string_pretty(&record)?)
            .map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok((record, true))
    };

    let results: Vec<Result<(RunRecord, bool), CliError>> = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| points.par_iter().map(work).collect()),
        None => points.par_iter().map(work).collect(),
    };

    let mut records = Vec::with_capacity(results.len());
    let mut fresh = 0u64;
    for result in results {
        let (record, was_fresh) = result?;
        fresh += u64::from(was_fresh);
        records.push(record);
    }
    records.sort_by_key(|r| r.grid_index);
    let failed = records.iter().filter(|r| r.status == "error").count();

    let jsonl_path = args.out.join("results.jsonl");
    let mut jsonl = String::new();
    for record in &records {
        jsonl.push_str(&serde_json::to_string(record)?);
        jsonl.push('\n');
    }
    common::write_file(&jsonl_path, jsonl.as_bytes())?;

    let csv_path = args.out.join("results.csv");
    common::write_file(&csv_path, &render_csv(&records)?)?;

    if ctx.json {
        let doc = serde_json::json!({
            "points": records.len(),
            "fresh": fresh,
            "reused": records.len() as u64 - fresh,
            "failed": failed,
            "csv": csv_path,
            "jsonl": jsonl_path,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!(
            "points: {} total, {} fresh, {} reused, {} failed",
            records.len(),
            fresh,
            records.len() as u64 - fresh,
            failed
        );
        println!("wrote {} and {}", csv_path.display(), jsonl_path.display());
    }
    Ok(())
}

fn validate_spec(spec: &SweepSpec) -> Result<(), CliError> {
    if spec.schema_version != SWEEP_SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "sweep spec schema_version {} unsupported (this build writes {SWEEP_SCHEMA_VERSION})",
            spec.schema_version
        )));
    }
    match spec.mode.as_str() {
        "analytic" | "exhaustive" | "sampled" | "attack" => {}
        other => {
            return Err(CliError::config(format!(
                "unknown sweep mode {other:?}: expected analytic, exhaustive, sampled, or attack"
            )))
        }
    }
    for metric in &spec.metrics {
        match metric.as_str() {
            "e_fc" | "t_sat" | "e_app" | "e_rem" => {}
            "dips" if spec.mode == "exhaustive" => {}
            "dips" => return Err(CliError::config("metric \"dips\" needs mode = \"exhaustive\"")),
            other => {
                return Err(CliError::config(format!(
                    "unknown metric {other:?}: expected e_fc, t_sat, e_app, e_rem, or dips"
                )))
            }
        }
    }
    if spec.mode != "analytic" && spec.circuits.is_empty() {
        return Err(CliError::config(format!("mode \"{}\" needs `circuits`", spec.mode)));
    }
    Ok(())
}

fn expand(spec: &SweepSpec, ctx: &Ctx) -> Result<Vec<GridPoint>, CliError> {
    let configs: Vec<SchemeConfig> = if !spec.points.is_empty() {
        spec.points.clone()
    } else {
        expand_family(spec)?
    };

    let seed_base = spec.seed.unwrap_or(ctx.seed);
    let mut points = Vec::new();
    let mut index = 0u64;
    let mut push = |config: &SchemeConfig, circuit: Option<&PathBuf>, n: Option<u32>| {
        let seed = common::splitmix64(seed_base ^ common::splitmix64(index));
        let mut config = config.clone();
        if let SchemeConfig::Fll { seed: s, .. } = &mut config {
            *s = seed;
        }
        points.push(GridPoint { index, config, circuit: cloned(circuit), n, seed });
        index += 1;
    };

    if !spec.circuits.is_empty() {
        for config in &configs {
            for circuit in &spec.circuits {
                push(config, Some(circuit), None);
            }
        }
    } else if spec.mode == "analytic" && !spec.ranges.n.is_empty() {
        for config in &configs {
            for &n in &spec.ranges.n {
                push(config, None, Some(n));
            }
        }
    } else {
        return Err(CliError::config(
            "analytic sweeps need `circuits` or `ranges.n` to fix the input width",
        ));
    }
    Ok(points)
}

fn cloned(p: Option<&PathBuf>) -> Option<PathBuf> {
    p.cloned()
}

fn expand_family(spec: &SweepSpec) -> Result<Vec<SchemeConfig>, CliError> {
    let family = spec.scheme.as_deref().ok_or_else(|| {
        CliError::config("sweep spec needs `scheme` + `ranges`, or an explicit `points` list")
    })?;
    let r = &spec.ranges;
    if r.l.is_empty() {
        return Err(CliError::config("ranges.l must not be empty"));
    }
    let mut configs = Vec::new();
    match family {
        "sarlock" => {
            for &l in &r.l {
                configs.push(SchemeConfig::Sarlock { l });
            }
        }
        "dtl" => {
            let xs = if r.x.is_empty() { vec!["xor".to_string()] } else { r.x.clone() };
            let layers = if r.layer.is_empty() { vec![0] } else { r.layer.clone() };
            let counts = if r.count.is_empty() { vec![1] } else { r.count.clone() };
            for &l in &r.l {
                for x in &xs {
                    for &layer in &layers {
                        for &count in &counts {
                            configs.push(SchemeConfig::Dtl {
                                l,
                                tree: TreeType::default(),
                                x: common::parse_tree_gate(x)?,
                                layer,
                                count,
                            });
                        }
                    }
                }
            }
        }
        "sfll-hd" | "sfll_hd" => {
            for &l in &r.l {
                let hs: Vec<u32> = if r.h.is_empty() {
                    (0..=l).collect()
                } else {
                    r.h.iter().copied().filter(|&h| h <= l).collect()
                };
                for h in hs {
                    configs.push(SchemeConfig::SfllHd { l, h });
                }
            }
        }
        "fll" => {
            for &l in &r.l {
                configs.push(SchemeConfig::Fll { l, seed: 0, strategy: Default::default() });
            }
        }
        other => {
            return Err(CliError::config(format!(
                "unknown sweep scheme {other:?}: expected sarlock, dtl, sfll-hd, or fll"
            )))
        }
    }
    Ok(configs)
}

struct PointEnv<'a> {
    mode: String,
    metrics: Vec<String>,
    budget_bits: u32,
    sampled: &'a SampledParams,
    caps: &'a CapParams,
}

impl PointEnv<'_> {
    fn want(&self, metric: &str) -> bool {
        self.metrics.iter().any(|m| m == metric)
    }
}

#[derive(Serialize)]
struct Fingerprint<'a> {
    schema_version: u32,
    tool_version: &'a str,
    mode: &'a str,
    metrics: &'a [String],
    config: &'a SchemeConfig,
    circuit: Option<String>,
    n: Option<u32>,
    seed: u64,
    budget_bits: u32,
    samples: u64,
    key_samples: u64,
    max_iterations: Option<u64>,
    timeout_secs: Option<f64>,
    threshold: Option<f64>,
    probe_samples: Option<u64>,
}

fn point_hash(env: &PointEnv, point: &GridPoint) -> String {
    let fp = Fingerprint {
        schema_version: SWEEP_SCHEMA_VERSION,
        tool_version: TOOL_VERSION,
        mode: &env.mode,
        metrics: &env.metrics,
        config: &point.config,
        circuit: point.circuit.as_ref().map(|p| p.display().to_string()),
        n: point.n,
        seed: point.seed,
        budget_bits: env.budget_bits,
        samples: env.sampled.samples,
        key_samples: env.sampled.key_samples,
        max_iterations: env.caps.max_iterations,
        timeout_secs: env.caps.timeout_secs,
        threshold: env.caps.threshold,
        probe_samples: env.caps.probe_samples,
    };
    let bytes = serde_json::to_vec(&fp).expect("fingerprint serializes");
    let mut hex = String::with_capacity(64);
    for byte in Sha256::digest(&bytes) {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// What a successful point run produces besides its report.
#[derive(Default)]
struct PointOutput {
    report: Option<MetricsReport>,
    attack: Option<AttackSummary>,
    appsat: Option<AppsatSummary>,
    greedy_dips: Option<u64>,
    sampled_e_fc: Option<EstimateSummary>,
    n: Option<u32>,
}

fn run_point(env: &PointEnv, point: &GridPoint) -> RunRecord {
    let started = now_ms();
    let outcome = execute_point(env, point);
    let finished = now_ms();
    let mut record = RunRecord {
        schema_version: SWEEP_SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        grid_index: point.index,
        mode: env.mode.clone(),
        scheme: common::scheme_name(&point.config).to_string(),
        circuit: point.circuit.as_ref().map(|p| p.display().to_string()),
        n: point.n,
        seed: point.seed,
        config: point.config.clone(),
        status: "ok".to_string(),
        error: None,
        report: None,
        attack: None,
        appsat: None,
        greedy_dips: None,
        sampled_e_fc: None,
        timestamps: Timestamps { started_unix_ms: started, finished_unix_ms: finished },
    };
    match outcome {
        Ok(out) => {
            record.n = out.n.or(record.n);
            record.report = out.report;
            record.attack = out.attack;
            record.appsat = out.appsat;
            record.greedy_dips = out.greedy_dips;
            record.sampled_e_fc = out.sampled_e_fc;
        }
        Err(e) => {
            record.status = "error".to_string();
            record.error = Some(e.to_string());
        }
    }
    record
}

fn execute_point(env: &PointEnv, point: &GridPoint) -> Result<PointOutput, CliError> {
    let mut out = PointOutput::default();

    let circuit: Option<Netlist> = match &point.circuit {
        Some(path) => Some(common::read_netlist(path)?),
        None => None,
    };
    let n = match (&circuit, point.n) {
        (Some(c), _) => c.inputs().len() as u32,
        (None, Some(n)) => n,
        (None, None) => return Err(CliError::config("grid point has neither circuit nor n")),
    };
    out.n = Some(n);

    let mut report = common::base_report(n, &point.config)?;
    if env.mode == "analytic" {
        out.report = Some(report);
        return Ok(out);
    }

    let circuit = circuit.expect("non-analytic modes always carry a circuit");
    let opts = EncryptOptions { seed: point.seed, ..EncryptOptions::default() };
    let enc = schemes::encrypt(&circuit, &point.config, &opts)?;

    match env.mode.as_str() {
        "exhaustive" => {
            if env.want("e_fc") || env.want("e_app") || env.want("dips") {
                let table = build_error_table(&circuit, &enc, env.budget_bits)?;
                if env.want("e_fc") {
                    report.observe_e_fc(RateValue::Exact(table.efc()), Provenance::Exhaustive);
                }
                if env.want("e_app") {
                    match table.eapp() {
                        Ok(eapp) => {
                            report.observe_e_app(AppBound::Exact(eapp), Provenance::Exhaustive)
                        }
                        Err(SimError::NoIncorrectKeys) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
                if env.want("dips") {
                    let (dips, _) = greedy_min_dips(&build_cover_instance(&table))?;
                    out.greedy_dips = Some(dips);
                }
            }
            if env.want("e_rem") {
                let rebuilt = removal_attack(&enc)?;
                let erem = measure_erem(
                    &circuit,
                    &rebuilt,
                    EremMode::Exhaustive { budget_bits: env.budget_bits },
                )?;
                report.observe_e_rem(erem, Provenance::Exhaustive);
            }
        }
        "sampled" => {
            let pairs = env.sampled.samples.saturating_mul(env.sampled.key_samples).max(1);
            if env.want("e_fc") {
                let est = estimate_efc(&circuit, &enc.netlist, pairs, point.seed)?;
                let p = est.value.to_f64();
                report.observe_e_fc(
                    RateValue::Interval {
                        lo: (p - 2.0 * est.stderr).max(0.0),
                        hi: (p + 2.0 * est.stderr).min(1.0),
                    },
                    Provenance::Sampled,
                );
                out.sampled_e_fc =
                    Some(EstimateSummary { value: p, stderr: est.stderr, samples: est.samples });
            }
            if env.want("e_app") && !enc.correct_key.is_empty() {
                let est = estimate_eapp(
                    &circuit,
                    &enc.netlist,
                    &enc.correct_key,
                    env.sampled.samples,
                    env.sampled.key_samples,
                    point.seed,
                )?;
                report.observe_e_app(AppBound::Exact(est.value), Provenance::Sampled);
            }
            if env.want("e_rem") {
                let rebuilt = removal_attack(&enc)?;
                let erem = measure_erem(
                    &circuit,
                    &rebuilt,
                    EremMode::Sampled { samples: pairs, seed: point.seed },
                )?;
                report.observe_e_rem(erem, Provenance::Sampled);
            }
        }
        "attack" => {
            let caps = AttackCaps {
                max_iterations: env.caps.max_iterations,
                timeout: env.caps.timeout_secs.map(Duration::from_secs_f64),
                budget_bits: env.budget_bits,
                seed: point.seed,
                strategy: DipStrategy::Auto,
            };
            if env.want("t_sat") {
                let trace = sat_attack(&enc, circuit_oracle(&circuit), &caps)?;
                let key_verified = match &trace.recovered_key {
                    Some(key) => lockeval::sim::keys_functionally_equivalent(
                        &circuit,
                        &enc.netlist,
                        key,
                        env.budget_bits,
                    )
                    .ok(),
                    None => None,
                };
                if trace.terminated == Termination::KeyFound {
                    report.observe_t_sat(
                        TSatBound::Value(Rational::new(trace.queries, 1)),
                        Provenance::AttackMeasured,
                    );
                }
                out.attack = Some(AttackSummary {
                    iterations: trace.iterations,
                    queries: trace.queries,
                    terminated: match trace.terminated {
                        Termination::KeyFound => "key_found",
                        Termination::Timeout => "timeout",
                        Termination::IterationCap => "iteration_cap",
                    }
                    .to_string(),
                    key_verified,
                });
            }
            if env.want("e_app") {
                let outcome = appsat_attack(
                    &enc,
                    circuit_oracle(&circuit),
                    env.caps.threshold.unwrap_or(0.05),
                    env.caps.probe_samples.unwrap_or(500),
                    &caps,
                )?;
                if outcome.residual_samples.is_none() && !outcome.residual_error.is_zero() {
                    report.observe_e_app(
                        AppBound::Exact(outcome.residual_error.clone()),
                        Provenance::AttackMeasured,
                    );
                }
                out.appsat = Some(AppsatSummary {
                    iterations: outcome.iterations,
                    residual_error: outcome.residual_error.to_f64(),
                    residual_exhaustive: outcome.residual_samples.is_none(),
                    exact: outcome.exact,
                });
            }
            if env.want("e_rem") {
                let rebuilt = removal_attack(&enc)?;
                let mode = if n <= env.budget_bits {
                    EremMode::Exhaustive { budget_bits: env.budget_bits }
                } else {
                    EremMode::Sampled { samples: 4096, seed: point.seed }
                };
                let erem = measure_erem(&circuit, &rebuilt, mode)?;
                report.observe_e_rem(erem, Provenance::AttackMeasured);
            }
            if env.want("e_fc") {
                let pairs = env.sampled.samples.saturating_mul(env.sampled.key_samples).max(1);
                let est = estimate_efc(&circuit, &enc.netlist, pairs, point.seed)?;
                let p = est.value.to_f64();
                report.observe_e_fc(
                    RateValue::Interval {
                        lo: (p - 2.0 * est.stderr).max(0.0),
                        hi: (p + 2.0 * est.stderr).min(1.0),
                    },
                    Provenance::Sampled,
                );
                out.sampled_e_fc =
                    Some(EstimateSummary { value: p, stderr: est.stderr, samples: est.samples });
            }
        }
        other => return Err(CliError::config(format!("unknown mode {other:?}"))),
    }
    out.report = Some(report);
    Ok(out)
}

const CSV_HEADERS: [&str; 30] = [
    "schema_version",
    "grid_index",
    "scheme",
    "circuit",
    "n",
    "l",
    "h",
    "x",
    "layer",
    "count",
    "mode",
    "status",
    "seed",
    "e_fc",
    "e_fc_lo",
    "e_fc_hi",
    "e_fc_stderr",
    "e_fc_prov",
    "t_sat",
    "t_sat_prov",
    "e_app",
    "e_app_prov",
    "e_rem",
    "e_rem_prov",
    "iterations",
    "queries",
    "terminated",
    "dips",
    "appsat_residual",
    "error",
];

#[derive(Default)]
struct Axes {
    l: Option<u32>,
    h: Option<u32>,
    x: Option<&'static str>,
    layer: Option<u32>,
    count: Option<u32>,
}

fn axes(config: &SchemeConfig) -> Axes {
    use lockeval::schemes::TreeGate;
    match config {
        SchemeConfig::Sarlock { l } => Axes { l: Some(*l), ..Axes::default() },
        SchemeConfig::Dtl { l, x, layer, count, .. } => Axes {
            l: Some(*l),
            h: None,
            x: Some(match x {
                TreeGate::Xor => "xor",
                TreeGate::Or => "or",
                TreeGate::Nand => "nand",
            }),
            layer: Some(*layer),
            count: Some(*count),
        },
        SchemeConfig::SfllHd { l, h } => Axes { l: Some(*l), h: Some(*h), ..Axes::default() },
        SchemeConfig::Fll { l, .. } => Axes { l: Some(*l), ..Axes::default() },
        SchemeConfig::Compound { .. } => {
            Axes { l: Some(common::key_width(config)), ..Axes::default() }
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_row(record: &RunRecord) -> Vec<String> {
    let ax = axes(&record.config);
    let mut e_fc = String::new();
    let mut e_fc_lo = String::new();
    let mut e_fc_hi = String::new();
    let mut e_fc_prov = String::new();
    let mut t_sat = String::new();
    let mut t_sat_prov = String::new();
    let mut e_app = String::new();
    let mut e_app_prov = String::new();
    let mut e_rem = String::new();
    let mut e_rem_prov = String::new();
    if let Some(report) = &record.report {
        match &report.e_fc {
            RateValue::Exact(r) => e_fc = r.to_f64().to_string(),
            RateValue::Interval { lo, hi } => {
                e_fc_lo = lo.to_string();
                e_fc_hi = hi.to_string();
                e_fc = match &record.sampled_e_fc {
                    Some(est) => est.value.to_string(),
                    None => ((lo + hi) / 2.0).to_string(),
                };
            }
        }
        e_fc_prov = common::prov_str(report.provenance.e_fc).to_string();
        if let Some(v) = report.t_sat.value() {
            t_sat = v.to_f64().to_string();
        }
        t_sat_prov = common::prov_str(report.provenance.t_sat).to_string();
        if let Some(v) = report.e_app.as_exact() {
            e_app = v.to_f64().to_string();
        }
        e_app_prov = common::prov_str(report.provenance.e_app).to_string();
        e_rem = report.e_rem.to_f64().to_string();
        e_rem_prov = common::prov_str(report.provenance.e_rem).to_string();
    }
    vec![
        record.schema_version.to_string(),
        record.grid_index.to_string(),
        record.scheme.clone(),
        record.circuit.clone().unwrap_or_default(),
        opt(record.n),
        opt(ax.l),
        opt(ax.h),
        ax.x.unwrap_or_default().to_string(),
        opt(ax.layer),
        opt(ax.count),
        record.mode.clone(),
        record.status.clone(),
        record.seed.to_string(),
        e_fc,
        e_fc_lo,
        e_fc_hi,
        opt(record.sampled_e_fc.as_ref().map(|e| e.stderr)),
        e_fc_prov,
        t_sat,
        t_sat_prov,
        e_app,
        e_app_prov,
        e_rem,
        e_rem_prov,
        opt(record.attack.as_ref().map(|a| a.iterations)),
        opt(record.attack.as_ref().map(|a| a.queries)),
        record.attack.as_ref().map(|a| a.terminated.clone()).unwrap_or_default(),
        opt(record.greedy_dips),
        opt(record.appsat.as_ref().map(|a| a.residual_error)),
        record.error.clone().unwrap_or_default(),
    ]
}

fn render_csv(records: &[RunRecord]) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADERS).map_err(|e| CliError::Io(e.to_string()))?;
    for record in records {
        writer.write_record(csv_row(record)).map_err(|e| CliError::Io(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| CliError::Io(e.to_string()))
}
