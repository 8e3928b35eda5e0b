//! Logic-locking schemes.
//!
//! Every scheme here fits one functional model: a flip signal g(i, k) is
//! XORed into a single protected primary output, and a correct key k* makes
//! the flip vanish on every input. SARLock and DTL build g from a comparator
//! tree, SFLL-HD first strips protected input patterns out of the circuit and
//! restores them with a key-driven unit, FLL scatters key-controlled
//! XOR/XNOR gates through the interior, and locks can be OR-combined into a
//! compound defense. Each inserted gate is tagged with its role so attacks
//! can reason about (and remove) lock structure.

mod compound;
mod fll;
mod sarlock;
mod sfll;
pub mod tree;

pub use compound::compose_or;
pub use fll::encrypt_fll;
pub use sarlock::{encrypt_dtl, encrypt_sarlock};
pub use sfll::encrypt_sfll_hd;
pub use tree::{build_and_tree, replaced_onset_formula, AndTree, TreeGate};

use crate::netlist::{GateKind, GateTag, NetId, Netlist, NetlistBuilder, NetlistError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no output named {0}")]
    UnknownOutput(String),
    #[error("output {0} is fed directly by an input; nothing to lock")]
    TargetDrivenByInput(String),
    #[error("key has {got} bits, scheme needs {expected}")]
    KeyWidth { expected: usize, got: usize },
    #[error("children cannot be composed: {0}")]
    IncompatibleChildren(String),
    #[error("key sidecar does not match the netlist: {0}")]
    SidecarMismatch(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// A concrete key value, bit j belonging to key port j.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeyAssignment {
    bits: Vec<bool>,
}

impl KeyAssignment {
    pub fn new(bits: Vec<bool>) -> Self {
        KeyAssignment { bits }
    }

    pub fn from_u64(value: u64, len: u32) -> Self {
        assert!(len <= 64);
        KeyAssignment { bits: (0..len).map(|b| value >> b & 1 == 1).collect() }
    }

    pub fn random(rng: &mut impl Rng, len: usize) -> Self {
        KeyAssignment { bits: (0..len).map(|_| rng.gen()).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, j: usize) -> bool {
        self.bits[j]
    }

    /// Key value with port 0 as the least-significant bit. Keys wider than
    /// 64 bits have no dense-table representation; this panics on them.
    pub fn as_u64(&self) -> u64 {
        assert!(self.bits.len() <= 64, "key too wide for a u64 value");
        self.bits.iter().enumerate().fold(0, |acc, (j, &b)| acc | (u64::from(b) << j))
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a KeyAssignment>) -> Self {
        KeyAssignment {
            bits: parts.into_iter().flat_map(|p| p.bits.iter().copied()).collect(),
        }
    }

    /// '0'/'1' string, key port 0 first.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self, SchemeError> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(SchemeError::InvalidConfig(format!(
                    "key bit string contains {other:?}"
                ))),
            })
            .collect::<Result<_, _>>()?;
        Ok(KeyAssignment { bits })
    }
}

impl Serialize for KeyAssignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for KeyAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        KeyAssignment::from_bit_string(&s).map_err(serde::de::Error::custom)
    }
}

/// Comparator-tree family used by DTL. Only one exists today; the field keeps
/// configurations explicit about it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeType {
    #[default]
    Sarlock,
}

/// Net-selection heuristic for FLL insertions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FllStrategy {
    /// Toggle sensitivity of the outputs × log2(1 + fanout), highest first.
    #[default]
    FaultImpact,
}

/// How compound children are merged into one flip signal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerKind {
    #[default]
    Or,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "params", rename_all = "snake_case")]
pub enum SchemeConfig {
    Sarlock {
        l: u32,
    },
    Dtl {
        l: u32,
        #[serde(default)]
        tree: TreeType,
        x: TreeGate,
        layer: u32,
        count: u32,
    },
    SfllHd {
        l: u32,
        h: u32,
    },
    Fll {
        l: u32,
        seed: u64,
        #[serde(default)]
        strategy: FllStrategy,
    },
    Compound {
        children: Vec<SchemeConfig>,
        #[serde(default)]
        combiner: CombinerKind,
    },
}

impl SchemeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeConfig::Sarlock { .. } => "sarlock",
            SchemeConfig::Dtl { .. } => "dtl",
            SchemeConfig::SfllHd { .. } => "sfll_hd",
            SchemeConfig::Fll { .. } => "fll",
            SchemeConfig::Compound { .. } => "compound",
        }
    }

    /// Total key width the scheme will add.
    pub fn key_size(&self) -> u32 {
        match self {
            SchemeConfig::Sarlock { l }
            | SchemeConfig::Dtl { l, .. }
            | SchemeConfig::SfllHd { l, .. }
            | SchemeConfig::Fll { l, .. } => *l,
            SchemeConfig::Compound { children, .. } => {
                children.iter().map(SchemeConfig::key_size).sum()
            }
        }
    }

    /// Structural invariants that need no circuit: parameter ranges and
    /// layer/count bounds. Circuit-dependent limits (key size vs inputs,
    /// cone width) are enforced by the encrypt operations.
    pub fn validate(&self) -> Result<(), SchemeError> {
        match self {
            SchemeConfig::Sarlock { l } => {
                if *l < 1 {
                    return Err(SchemeError::InvalidConfig("sarlock needs l >= 1".into()));
                }
            }
            SchemeConfig::Dtl { l, x: _, tree: _, layer, count } => {
                if *l < 2 {
                    return Err(SchemeError::InvalidConfig("dtl needs l >= 2".into()));
                }
                let depth = 32 - (l - 1).leading_zeros();
                if *layer >= depth {
                    return Err(SchemeError::InvalidConfig(format!(
                        "layer {layer} out of range for l={l} (tree depth {depth})"
                    )));
                }
                let max_count = 1u32 << (depth - layer - 1);
                if *count > max_count {
                    return Err(SchemeError::InvalidConfig(format!(
                        "count {count} exceeds the {max_count} gates of layer {layer} for l={l}"
                    )));
                }
            }
            SchemeConfig::SfllHd { l, h } => {
                if *l < 1 {
                    return Err(SchemeError::InvalidConfig("sfll-hd needs l >= 1".into()));
                }
                if h > l {
                    return Err(SchemeError::InvalidConfig(format!(
                        "hamming distance {h} exceeds key width {l}"
                    )));
                }
            }
            SchemeConfig::Fll { l, .. } => {
                if *l < 1 {
                    return Err(SchemeError::InvalidConfig("fll needs l >= 1".into()));
                }
            }
            SchemeConfig::Compound { children, combiner: CombinerKind::Or } => {
                if children.is_empty() {
                    return Err(SchemeError::InvalidConfig("compound needs children".into()));
                }
                for child in children {
                    match child {
                        SchemeConfig::Compound { .. } => {
                            return Err(SchemeError::InvalidConfig(
                                "compound children cannot nest".into(),
                            ))
                        }
                        SchemeConfig::Fll { .. } => {
                            return Err(SchemeError::InvalidConfig(
                                "fll has no single flip signal to OR-combine".into(),
                            ))
                        }
                        _ => child.validate()?,
                    }
                }
            }
        }
        Ok(())
    }
}

/// Knobs shared by every encrypt operation.
#[derive(Clone, Debug)]
pub struct EncryptOptions {
    /// Seeds key generation (and any in-scheme randomness not covered by a
    /// scheme-level seed).
    pub seed: u64,
    /// Key ports are named `{key_prefix}{index}`.
    pub key_prefix: String,
    /// First key index to use; lets composed locks keep port names disjoint.
    pub key_offset: u32,
    /// Output to protect; defaults to the one with the widest fan-in cone.
    pub target_po: Option<String>,
    /// Explicit cone-bit selection (input port names, comparator order).
    pub cone_override: Option<Vec<String>>,
}

impl Default for EncryptOptions {
    fn default() -> Self {
        EncryptOptions {
            seed: 0,
            key_prefix: "keyinput".into(),
            key_offset: 0,
            target_po: None,
            cone_override: None,
        }
    }
}

/// A locked netlist bundled with everything needed to use or audit it.
#[derive(Clone, Debug)]
pub struct EncryptedNetlist {
    pub netlist: Netlist,
    pub correct_key: KeyAssignment,
    pub config: SchemeConfig,
    pub protected_output: String,
    pub seed: u64,
    pub key_prefix: String,
}

impl EncryptedNetlist {
    /// Role of every inserted gate, keyed by its output net name.
    pub fn tags(&self) -> BTreeMap<String, GateTag> {
        self.netlist
            .gates()
            .iter()
            .filter(|g| g.tag != GateTag::Original)
            .map(|g| (self.netlist.net_name(g.output).to_string(), g.tag))
            .collect()
    }

    pub fn sidecar(&self) -> KeySidecar {
        KeySidecar {
            schema_version: SIDECAR_SCHEMA_VERSION,
            config: self.config.clone(),
            key_bits: self.correct_key.clone(),
            key_prefix: self.key_prefix.clone(),
            protected_output: self.protected_output.clone(),
            seed: self.seed,
            tags: self.tags(),
        }
    }
}

pub const SIDECAR_SCHEMA_VERSION: u32 = 1;

/// JSON sidecar stored next to a locked `.bench` file: the correct key, the
/// configuration that produced the lock, and the gate-role tags that a plain
/// netlist file cannot carry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeySidecar {
    pub schema_version: u32,
    #[serde(flatten)]
    pub config: SchemeConfig,
    pub key_bits: KeyAssignment,
    pub key_prefix: String,
    pub protected_output: String,
    pub seed: u64,
    #[serde(default)]
    pub tags: BTreeMap<String, GateTag>,
}

impl KeySidecar {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Rebuild an [`EncryptedNetlist`] from a freshly parsed netlist by
    /// re-applying the gate tags recorded in the sidecar.
    pub fn apply_to(&self, netlist: Netlist) -> Result<EncryptedNetlist, SchemeError> {
        if netlist.key_inputs().len() != self.key_bits.len() {
            return Err(SchemeError::SidecarMismatch(format!(
                "netlist has {} key inputs, sidecar key has {} bits",
                netlist.key_inputs().len(),
                self.key_bits.len()
            )));
        }
        if netlist.find_net(&self.protected_output).is_none() {
            return Err(SchemeError::SidecarMismatch(format!(
                "protected output {} not in netlist",
                self.protected_output
            )));
        }
        let mut builder = netlist.to_builder();
        let mut pending = self.tags.clone();
        for gate in builder.gates_mut() {
            let name = gate.output;
            // Gate outputs are unique, so each tag applies at most once.
            if let Some(tag) = pending.remove(netlist.net_name(name)) {
                gate.tag = tag;
            }
        }
        if let Some(name) = pending.keys().next() {
            return Err(SchemeError::SidecarMismatch(format!(
                "tagged net {name} has no gate in the netlist"
            )));
        }
        Ok(EncryptedNetlist {
            netlist: builder.finish()?,
            correct_key: self.key_bits.clone(),
            config: self.config.clone(),
            protected_output: self.protected_output.clone(),
            seed: self.seed,
            key_prefix: self.key_prefix.clone(),
        })
    }
}

/// Encrypt `original` under any scheme configuration, drawing the key (and
/// compound child seeds) from `opts.seed`.
pub fn encrypt(
    original: &Netlist,
    config: &SchemeConfig,
    opts: &EncryptOptions,
) -> Result<EncryptedNetlist, SchemeError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    match config {
        SchemeConfig::Sarlock { l } => {
            let key = KeyAssignment::random(&mut rng, *l as usize);
            sarlock::encrypt_sarlock_with(original, *l, &key, opts)
        }
        SchemeConfig::Dtl { .. } => {
            let key = KeyAssignment::random(&mut rng, config.key_size() as usize);
            sarlock::encrypt_dtl_with(original, config, &key, opts)
        }
        SchemeConfig::SfllHd { l, h } => {
            let key = KeyAssignment::random(&mut rng, *l as usize);
            sfll::encrypt_sfll_hd_with(original, *l, *h, &key, opts)
        }
        SchemeConfig::Fll { l, seed, strategy: FllStrategy::FaultImpact } => {
            fll::encrypt_fll_with(original, *l, *seed, opts)
        }
        SchemeConfig::Compound { children, combiner: CombinerKind::Or } => {
            let mut offset = opts.key_offset;
            let mut encrypted = Vec::with_capacity(children.len());
            for child in children {
                let child_opts = EncryptOptions {
                    seed: rng.gen(),
                    key_offset: offset,
                    ..opts.clone()
                };
                encrypted.push(encrypt(original, child, &child_opts)?);
                offset += child.key_size();
            }
            compound::compose_or_with(original, &encrypted, opts)
        }
    }
}

/// Resolve the output to protect: an explicit request (validated) or the
/// widest-cone default.
pub(crate) fn resolve_target(
    original: &Netlist,
    requested: Option<&str>,
) -> Result<String, SchemeError> {
    match requested {
        Some(name) => {
            let net = original
                .find_net(name)
                .ok_or_else(|| SchemeError::UnknownOutput(name.to_string()))?;
            if !original.outputs().contains(&net) {
                return Err(SchemeError::UnknownOutput(name.to_string()));
            }
            Ok(name.to_string())
        }
        None => Ok(original.widest_output().to_string()),
    }
}

/// The `l` data inputs the comparators observe, in comparator order: cone
/// members first (port order), then — only if `pad` — remaining inputs in
/// port order.
pub(crate) fn cone_bits(
    original: &Netlist,
    target: &str,
    l: u32,
    opts: &EncryptOptions,
    pad: bool,
) -> Result<Vec<String>, SchemeError> {
    if let Some(names) = &opts.cone_override {
        if names.len() != l as usize {
            return Err(SchemeError::InvalidConfig(format!(
                "cone override has {} names, scheme needs {l}",
                names.len()
            )));
        }
        for name in names {
            let net = original
                .find_net(name)
                .ok_or_else(|| SchemeError::InvalidConfig(format!("no input named {name}")))?;
            if !original.inputs().contains(&net) {
                return Err(SchemeError::InvalidConfig(format!("{name} is not a data input")));
            }
        }
        return Ok(names.clone());
    }
    let cone = original.fanin_cone(target)?;
    let mut picked: Vec<String> = original
        .input_names()
        .filter(|n| cone.contains(*n))
        .take(l as usize)
        .map(str::to_string)
        .collect();
    if picked.len() < l as usize {
        if !pad {
            return Err(SchemeError::InvalidConfig(format!(
                "key width {l} exceeds the {} inputs in the cone of {target}",
                cone.len()
            )));
        }
        for name in original.input_names() {
            if picked.len() == l as usize {
                break;
            }
            if !cone.contains(name) {
                picked.push(name.to_string());
            }
        }
    }
    if picked.len() < l as usize {
        return Err(SchemeError::InvalidConfig(format!(
            "key width {l} exceeds the circuit's {} inputs",
            original.inputs().len()
        )));
    }
    Ok(picked)
}

/// Fresh key ports `{prefix}{offset}..{prefix}{offset+l-1}`.
pub(crate) fn add_key_ports(
    builder: &mut NetlistBuilder,
    opts: &EncryptOptions,
    l: u32,
) -> Result<Vec<NetId>, SchemeError> {
    let mut ports = Vec::with_capacity(l as usize);
    for j in 0..l {
        let name = format!("{}{}", opts.key_prefix, opts.key_offset + j);
        if builder.find_net(&name).is_some() {
            return Err(SchemeError::InvalidConfig(format!(
                "key port name {name} already in use"
            )));
        }
        ports.push(builder.add_key_input(&name));
    }
    Ok(ports)
}

/// Detach the protected output's port name from its driver so a lock can
/// interpose. Returns the old driven net (now renamed) and the new net that
/// carries the port name and awaits a driver.
pub(crate) fn splice_output(
    builder: &mut NetlistBuilder,
    po_name: &str,
) -> Result<(NetId, NetId), SchemeError> {
    let old = builder
        .find_net(po_name)
        .ok_or_else(|| SchemeError::UnknownOutput(po_name.to_string()))?;
    if builder.inputs().contains(&old) || builder.key_inputs().contains(&old) {
        return Err(SchemeError::TargetDrivenByInput(po_name.to_string()));
    }
    let mut raw_name = format!("{po_name}_raw");
    let mut i = 0;
    while builder.find_net(&raw_name).is_some() {
        raw_name = format!("{po_name}_raw{i}");
        i += 1;
    }
    builder.rename_net(old, &raw_name);
    let port = builder.net(po_name);
    let slot = builder
        .outputs()
        .iter()
        .position(|&o| o == old)
        .ok_or_else(|| SchemeError::UnknownOutput(po_name.to_string()))?;
    builder.outputs_mut()[slot] = port;
    Ok((old, port))
}

/// Key-side correct-key detector: 1 iff the key ports carry exactly `k_star`.
/// Hardwired against the key constant, so the lock can force its flip to zero
/// on the correct key without touching any data path.
pub(crate) fn key_equals_const(
    builder: &mut NetlistBuilder,
    keys: &[NetId],
    k_star: &KeyAssignment,
    tag: GateTag,
) -> NetId {
    assert_eq!(keys.len(), k_star.len());
    let literals: Vec<NetId> = keys
        .iter()
        .zip(k_star.bits())
        .map(|(&k, &bit)| if bit { k } else { builder.gate(GateKind::Not, vec![k], "keylit", tag) })
        .collect();
    if literals.len() == 1 {
        literals[0]
    } else {
        builder.gate(GateKind::And, literals, "keyeq", tag)
    }
}
