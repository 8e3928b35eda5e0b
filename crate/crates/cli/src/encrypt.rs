//! `lockeval encrypt`: lock a circuit and write the netlist plus key sidecar.

use std::path::PathBuf;

use clap::Args;
use lockeval::netlist::write_bench;
use lockeval::schemes::{self, CombinerKind, EncryptOptions, FllStrategy, TreeType};
use lockeval::SchemeConfig;

use crate::common::{self, CliError, Ctx};

#[derive(Args)]
pub struct EncryptArgs {
    /// Scheme family: sarlock | dtl | sfll-hd | fll | compound.
    #[arg(long)]
    scheme: String,

    /// Key width l (per-scheme flag; compound derives it from its children).
    #[arg(long)]
    key_size: Option<u32>,

    /// Hamming distance h (sfll-hd).
    #[arg(long)]
    hd: Option<u32>,

    /// Replacement gate for diversified tree nodes (dtl): xor | or | nand.
    #[arg(long)]
    x: Option<String>,

    /// Tree layer holding the replaced nodes, 0 = root (dtl).
    #[arg(long)]
    layer: Option<u32>,

    /// Number of replaced nodes in that layer (dtl).
    #[arg(long)]
    count: Option<u32>,

    /// Child scheme for compound locks, repeatable.
    /// Forms: sarlock:L | dtl:L,X,LAYER,COUNT | sfll-hd:L,H | fll:L[,SEED].
    #[arg(long = "child")]
    children: Vec<String>,

    /// Source .bench circuit.
    #[arg(long = "in")]
    input: PathBuf,

    /// Destination for the locked .bench.
    #[arg(long = "out")]
    output: PathBuf,

    /// Key sidecar destination (default: <out base>.key.json).
    #[arg(long)]
    key_out: Option<PathBuf>,

    /// Output port to protect (default: widest fan-in cone).
    #[arg(long)]
    target: Option<String>,
}

pub fn run(ctx: &Ctx, args: EncryptArgs) -> Result<(), CliError> {
    let netlist = common::read_netlist(&args.input)?;
    let config = build_config(ctx, &args)?;
    let opts = EncryptOptions {
        seed: ctx.seed,
        target_po: args.target.clone(),
        ..EncryptOptions::default()
    };
    let enc = schemes::encrypt(&netlist, &config, &opts)?;

    common::write_file(&args.output, write_bench(&enc.netlist).as_bytes())?;
    let key_path =
        args.key_out.clone().unwrap_or_else(|| common::default_sidecar_path(&args.output));
    common::write_file(&key_path, enc.sidecar().to_json().as_bytes())?;

    if ctx.json {
        let summary = serde_json::json!({
            "scheme": common::scheme_name(&config),
            "config": config,
            "key": enc.correct_key.to_bit_string(),
            "key_bits": enc.correct_key.len(),
            "protected_output": enc.protected_output,
            "seed": enc.seed,
            "bench": args.output,
            "sidecar": key_path,
        });
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!("scheme: {}", common::scheme_name(&config));
        println!("protected output: {}", enc.protected_output);
        println!("key: {}", enc.correct_key.to_bit_string());
        println!("wrote {} and {}", args.output.display(), key_path.display());
    }
    Ok(())
}

fn build_config(ctx: &Ctx, args: &EncryptArgs) -> Result<SchemeConfig, CliError> {
    if args.scheme != "compound" && !args.children.is_empty() {
        return Err(CliError::config("--child only applies to --scheme compound"));
    }
    let need_l = || {
        args.key_size
            .ok_or_else(|| CliError::config(format!("--key-size is required for {}", args.scheme)))
    };
    match args.scheme.as_str() {
        "sarlock" => Ok(SchemeConfig::Sarlock { l: need_l()? }),
        "dtl" => Ok(SchemeConfig::Dtl {
            l: need_l()?,
            tree: TreeType::default(),
            x: common::parse_tree_gate(args.x.as_deref().unwrap_or("xor"))?,
            layer: args.layer.unwrap_or(0),
            count: args.count.unwrap_or(1),
        }),
        "sfll-hd" | "sfll_hd" => Ok(SchemeConfig::SfllHd {
            l: need_l()?,
            h: args.hd.ok_or_else(|| CliError::config("--hd is required for sfll-hd"))?,
        }),
        "fll" => Ok(SchemeConfig::Fll {
            l: need_l()?,
            seed: ctx.seed,
            strategy: FllStrategy::default(),
        }),
        "compound" => {
            if args.children.is_empty() {
                return Err(CliError::config("compound locks need at least one --child"));
            }
            Ok(SchemeConfig::Compound {
                children: args
                    .children
                    .iter()
                    .map(|s| common::parse_child_spec(s))
                    .collect::<Result<Vec<_>, _>>()?,
                combiner: CombinerKind::default(),
            })
        }
        other => Err(CliError::config(format!(
            "unknown scheme {other:?}: expected sarlock, dtl, sfll-hd, fll, or compound"
        ))),
    }
}
