//! Shared plumbing: exit-code mapping, file helpers, spec parsing, printing.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use lockeval::attacks::AttackError;
use lockeval::metrics::{
    AppBound, MetricsError, MetricsReport, Provenance, ProvenanceMap, RateValue, TSatBound,
};
use lockeval::netlist::{parse_bench_with, BenchOptions, NetlistError};
use lockeval::schemes::{KeySidecar, SchemeError, TreeGate, TreeType};
use lockeval::sim::SimError;
use lockeval::{EncryptedNetlist, Netlist, Rational, SchemeConfig};

/// Global flags shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub budget_bits: u32,
    pub json: bool,
}

/// Failure with a stable process exit code: 1 I/O, 2 bad configuration,
/// 3 unparsable input, 4 resource cap hit before completion.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Config(String),
    Parse(String),
    Timeout(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Timeout(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Config(m) | CliError::Parse(m) | CliError::Timeout(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<NetlistError> for CliError {
    fn from(e: NetlistError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::CapExceeded => CliError::Timeout(e.to_string()),
            AttackError::Sim(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_netlist(path: &Path) -> Result<Netlist, CliError> {
    read_netlist_with_prefix(path, "keyinput")
}

pub fn read_netlist_with_prefix(path: &Path, key_prefix: &str) -> Result<Netlist, CliError> {
    let text = read_to_string(path)?;
    parse_bench_with(&text, &BenchOptions { key_prefix: key_prefix.to_string() })
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Reunite a locked `.bench` with its sidecar: tags restored, key known.
pub fn load_locked(locked: &Path, key: &Path) -> Result<EncryptedNetlist, CliError> {
    let sidecar_text = read_to_string(key)?;
    let sidecar = KeySidecar::from_json(&sidecar_text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", key.display())))?;
    let netlist = read_netlist_with_prefix(locked, &sidecar.key_prefix)?;
    Ok(sidecar.apply_to(netlist)?)
}

/// `family:params` child scheme shorthand: `sarlock:13`, `dtl:4,xor,0,1`,
/// `sfll-hd:4,2`, `fll:8` or `fll:8,55`.
pub fn parse_child_spec(spec: &str) -> Result<SchemeConfig, CliError> {
    let (family, rest) = spec
        .split_once(':')
        .ok_or_else(|| CliError::config(format!("child spec {spec:?}: expected family:params")))?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    let want = |count: usize| -> Result<(), CliError> {
        if parts.len() == count {
            Ok(())
        } else {
            Err(CliError::config(format!(
                "child spec {spec:?}: {family} takes {count} parameter(s), got {}",
                parts.len()
            )))
        }
    };
    match family {
        "sarlock" => {
            want(1)?;
            Ok(SchemeConfig::Sarlock { l: parse_num(spec, parts[0])? })
        }
        "dtl" => {
            want(4)?;
            Ok(SchemeConfig::Dtl {
                l: parse_num(spec, parts[0])?,
                tree: TreeType::default(),
                x: parse_tree_gate(parts[1])?,
                layer: parse_num(spec, parts[2])?,
                count: parse_num(spec, parts[3])?,
            })
        }
        "sfll-hd" | "sfll_hd" => {
            want(2)?;
            Ok(SchemeConfig::SfllHd {
                l: parse_num(spec, parts[0])?,
                h: parse_num(spec, parts[1])?,
            })
        }
        "fll" => {
            if parts.len() != 1 && parts.len() != 2 {
                return Err(CliError::config(format!(
                    "child spec {spec:?}: fll takes l or l,seed"
                )));
            }
            let seed = if parts.len() == 2 { parse_num::<u64>(spec, parts[1])? } else { 0 };
            Ok(SchemeConfig::Fll {
                l: parse_num(spec, parts[0])?,
                seed,
                strategy: Default::default(),
            })
        }
        other => Err(CliError::config(format!("child spec {spec:?}: unknown family {other:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(spec: &str, field: &str) -> Result<T, CliError> {
    field
        .parse()
        .map_err(|_| CliError::config(format!("child spec {spec:?}: {field:?} is not a number")))
}

pub fn parse_tree_gate(s: &str) -> Result<TreeGate, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "xor" => Ok(TreeGate::Xor),
        "or" => Ok(TreeGate::Or),
        "nand" => Ok(TreeGate::Nand),
        other => Err(CliError::config(format!(
            "replacement gate {other:?}: expected xor, or, or nand"
        ))),
    }
}

pub fn scheme_name(config: &SchemeConfig) -> &'static str {
    match config {
        SchemeConfig::Sarlock { .. } => "sarlock",
        SchemeConfig::Dtl { .. } => "dtl",
        SchemeConfig::SfllHd { .. } => "sfll_hd",
        SchemeConfig::Fll { .. } => "fll",
        SchemeConfig::Compound { .. } => "compound",
    }
}

/// Total key width the configuration will add to a circuit.
pub fn key_width(config: &SchemeConfig) -> u32 {
    match config {
        SchemeConfig::Sarlock { l }
        | SchemeConfig::Dtl { l, .. }
        | SchemeConfig::SfllHd { l, .. }
        | SchemeConfig::Fll { l, .. } => *l,
        SchemeConfig::Compound { children, .. } => children.iter().map(key_width).sum(),
    }
}

/// Closed-form report when one exists, otherwise a placeholder carrying the
/// reason so empirical passes still have provenance to rank against.
pub fn base_report(n: u32, config: &SchemeConfig) -> Result<MetricsReport, CliError> {
    match lockeval::metrics::analytic(n, config) {
        Ok(report) => Ok(report),
        Err(MetricsError::Unsupported(why)) => Ok(MetricsReport {
            scheme: scheme_name(config).to_string(),
            params: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            n: Some(n),
            e_fc: RateValue::Interval { lo: 0.0, hi: 1.0 },
            e_fc_approx: None,
            t_sat: TSatBound::NoGuarantee,
            e_app: AppBound::NoClosedForm,
            e_app_approx: None,
            e_rem: Rational::zero(),
            provenance: ProvenanceMap {
                e_fc: Provenance::Analytic,
                t_sat: Provenance::Analytic,
                e_app: Provenance::Analytic,
                e_rem: Provenance::Analytic,
            },
            notes: vec![format!("no closed-form model ({why}); run an empirical mode")],
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn prov_str(p: Provenance) -> &'static str {
    match p {
        Provenance::Analytic => "analytic",
        Provenance::Sampled => "sampled",
        Provenance::AttackMeasured => "attack-measured",
        Provenance::Exhaustive => "exhaustive",
    }
}

pub fn fmt_rational(r: &Rational) -> String {
    let s = r.to_string();
    if s.contains('/') {
        format!("{s} ({})", r.to_f64())
    } else {
        s
    }
}

pub fn fmt_rate(v: &RateValue) -> String {
    match v {
        RateValue::Exact(r) => fmt_rational(r),
        RateValue::Interval { lo, hi } => format!("[{lo}, {hi}]"),
    }
}

pub fn fmt_tsat(b: &TSatBound) -> String {
    match b {
        TSatBound::Min { args, value } => {
            let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            format!("min{{{}}} = {}", parts.join(", "), value)
        }
        TSatBound::Value(v) => fmt_rational(v),
        TSatBound::NoGuarantee => "no guarantee".to_string(),
    }
}

pub fn fmt_app(b: &AppBound) -> String {
    match b {
        AppBound::Exact(r) => fmt_rational(r),
        AppBound::NoClosedForm => "no closed form".to_string(),
    }
}

pub fn default_sidecar_path(bench_out: &Path) -> PathBuf {
    bench_out.with_extension("key.json")
}

/// Cheap stateless mixer for deriving independent per-point seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
