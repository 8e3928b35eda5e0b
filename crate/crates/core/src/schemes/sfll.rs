//! Stripped-functionality locking keyed on Hamming distance.
//!
//! The strip unit corrupts the protected output on every input whose cone
//! bits sit at Hamming distance h from the hardwired key; the restore unit
//! re-flips those inputs when the supplied key matches. Both are built from
//! the same popcount-and-compare structure; only what they compare against
//! differs.

use super::{
    add_key_ports, cone_bits, resolve_target, splice_output, EncryptOptions, EncryptedNetlist,
    KeyAssignment, SchemeConfig, SchemeError,
};
use crate::netlist::{GateKind, GateTag, NetId, Netlist, NetlistBuilder};

/// 1 iff exactly `h` of `diffs` are set. Ripple-increments a binary counter
/// and compares it against the constant h.
fn hd_equals(
    builder: &mut NetlistBuilder,
    diffs: &[NetId],
    h: u32,
    tag: GateTag,
    prefix: &str,
) -> NetId {
    assert!(!diffs.is_empty());
    let mut sum: Vec<NetId> = Vec::new();
    for &d in diffs {
        let mut carry = d;
        for bit in sum.iter_mut() {
            let s = builder.gate(GateKind::Xor, vec![*bit, carry], prefix, tag);
            carry = builder.gate(GateKind::And, vec![*bit, carry], prefix, tag);
            *bit = s;
        }
        sum.push(carry);
    }
    let literals: Vec<NetId> = sum
        .iter()
        .enumerate()
        .map(|(j, &bit)| {
            if h >> j & 1 == 1 {
                bit
            } else {
                builder.gate(GateKind::Not, vec![bit], prefix, tag)
            }
        })
        .collect();
    if literals.len() == 1 {
        literals[0]
    } else {
        builder.gate(GateKind::And, literals, prefix, tag)
    }
}

/// Strip detector: HD(cone, k*) == h with k* hardwired as gate polarity.
pub(crate) fn strip_signal(
    builder: &mut NetlistBuilder,
    cone: &[NetId],
    k_star: &KeyAssignment,
    h: u32,
) -> NetId {
    let diffs: Vec<NetId> = cone
        .iter()
        .zip(k_star.bits())
        .map(|(&c, &bit)| {
            if bit {
                builder.gate(GateKind::Not, vec![c], "strip", GateTag::StripLogic)
            } else {
                c
            }
        })
        .collect();
    hd_equals(builder, &diffs, h, GateTag::StripLogic, "strip")
}

/// Restore detector: HD(cone, key ports) == h.
pub(crate) fn restore_signal(
    builder: &mut NetlistBuilder,
    cone: &[NetId],
    keys: &[NetId],
    h: u32,
) -> NetId {
    let diffs: Vec<NetId> = cone
        .iter()
        .zip(keys)
        .map(|(&c, &k)| builder.gate(GateKind::Xor, vec![c, k], "restore", GateTag::RestoreLogic))
        .collect();
    hd_equals(builder, &diffs, h, GateTag::RestoreLogic, "restore")
}

/// Combined flip g = strip ⊕ restore, used when this lock is one branch of a
/// compound defense.
pub(crate) fn sfll_flip_signal(
    builder: &mut NetlistBuilder,
    cone: &[NetId],
    keys: &[NetId],
    k_star: &KeyAssignment,
    h: u32,
) -> NetId {
    let strip = strip_signal(builder, cone, k_star, h);
    let restore = restore_signal(builder, cone, keys, h);
    builder.gate(GateKind::Xor, vec![strip, restore], "sfllflip", GateTag::RestoreLogic)
}

/// Lock one output by stripping the inputs at Hamming distance h from k* and
/// restoring them under the correct key. The strip stage (including its XOR
/// into the output) survives removal attacks by design; everything keyed is
/// removable.
pub fn encrypt_sfll_hd(
    original: &Netlist,
    l: u32,
    h: u32,
    key: &KeyAssignment,
    target_po: Option<&str>,
) -> Result<EncryptedNetlist, SchemeError> {
    let opts =
        EncryptOptions { target_po: target_po.map(str::to_string), ..EncryptOptions::default() };
    encrypt_sfll_hd_with(original, l, h, key, &opts)
}

pub(crate) fn encrypt_sfll_hd_with(
    original: &Netlist,
    l: u32,
    h: u32,
    key: &KeyAssignment,
    opts: &EncryptOptions,
) -> Result<EncryptedNetlist, SchemeError> {
    let config = SchemeConfig::SfllHd { l, h };
    config.validate()?;
    if key.len() != l as usize {
        return Err(SchemeError::KeyWidth { expected: l as usize, got: key.len() });
    }
    let target = resolve_target(original, opts.target_po.as_deref())?;
    let cone_names = cone_bits(original, &target, l, opts, false)?;
    let mut builder = original.to_builder();
    let cone: Vec<NetId> =
        cone_names.iter().map(|n| builder.find_net(n).expect("validated input")).collect();
    let keys = add_key_ports(&mut builder, opts, l)?;
    let (raw, port) = splice_output(&mut builder, &target)?;
    let strip = strip_signal(&mut builder, &cone, key, h);
    let stripped =
        builder.gate(GateKind::Xor, vec![raw, strip], "stripped", GateTag::StripLogic);
    let restore = restore_signal(&mut builder, &cone, &keys, h);
    builder.add_gate(GateKind::Xor, vec![stripped, restore], port, GateTag::Combiner);
    Ok(EncryptedNetlist {
        netlist: builder.finish()?,
        correct_key: key.clone(),
        config,
        protected_output: target,
        seed: opts.seed,
        key_prefix: opts.key_prefix.clone(),
    })
}
