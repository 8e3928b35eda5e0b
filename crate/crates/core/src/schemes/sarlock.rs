//! Point-function locks built on the comparator tree: SARLock and its
//! diversified-tree variant.

use super::tree::{build_and_tree, AndTree, TreeGate};
use super::{
    add_key_ports, cone_bits, key_equals_const, resolve_target, splice_output, EncryptOptions,
    EncryptedNetlist, KeyAssignment, SchemeConfig, SchemeError, TreeType,
};
use crate::netlist::{GateKind, GateTag, NetId, Netlist, NetlistBuilder};

/// Flip signal of a tree lock: comparator leaves XNOR(cone bit, key bit), the
/// (possibly diversified) tree above them, ANDed with "key is not k*" so the
/// correct key silences the flip on every input.
pub(crate) fn tree_flip_signal(
    builder: &mut NetlistBuilder,
    cone: &[NetId],
    keys: &[NetId],
    k_star: &KeyAssignment,
    tree: Option<&AndTree>,
) -> NetId {
    let leaves: Vec<NetId> = cone
        .iter()
        .zip(keys)
        .map(|(&c, &k)| builder.gate(GateKind::Xnor, vec![c, k], "cmp", GateTag::FlipLogic))
        .collect();
    let root = match tree {
        Some(tree) => tree.instantiate(builder, &leaves, GateTag::FlipLogic),
        None => leaves[0],
    };
    let eq = key_equals_const(builder, keys, k_star, GateTag::FlipLogic);
    let neq = builder.gate(GateKind::Not, vec![eq], "keyne", GateTag::FlipLogic);
    builder.gate(GateKind::And, vec![root, neq], "flip", GateTag::FlipLogic)
}

fn encrypt_tree_lock(
    original: &Netlist,
    config: SchemeConfig,
    tree: Option<&AndTree>,
    key: &KeyAssignment,
    opts: &EncryptOptions,
) -> Result<EncryptedNetlist, SchemeError> {
    let l = config.key_size();
    if key.len() != l as usize {
        return Err(SchemeError::KeyWidth { expected: l as usize, got: key.len() });
    }
    let target = resolve_target(original, opts.target_po.as_deref())?;
    let cone_names = cone_bits(original, &target, l, opts, true)?;
    let mut builder = original.to_builder();
    let cone: Vec<NetId> =
        cone_names.iter().map(|n| builder.find_net(n).expect("validated input")).collect();
    let keys = add_key_ports(&mut builder, opts, l)?;
    let (raw, port) = splice_output(&mut builder, &target)?;
    let flip = tree_flip_signal(&mut builder, &cone, &keys, key, tree);
    builder.add_gate(GateKind::Xor, vec![raw, flip], port, GateTag::Combiner);
    Ok(EncryptedNetlist {
        netlist: builder.finish()?,
        correct_key: key.clone(),
        config,
        protected_output: target,
        seed: opts.seed,
        key_prefix: opts.key_prefix.clone(),
    })
}

/// Lock one output behind an l-bit point function: the output flips exactly
/// when the observed cone bits equal the key and the key is not k*.
pub fn encrypt_sarlock(
    original: &Netlist,
    l: u32,
    key: &KeyAssignment,
    target_po: Option<&str>,
) -> Result<EncryptedNetlist, SchemeError> {
    let opts =
        EncryptOptions { target_po: target_po.map(str::to_string), ..EncryptOptions::default() };
    encrypt_sarlock_with(original, l, key, &opts)
}

pub(crate) fn encrypt_sarlock_with(
    original: &Netlist,
    l: u32,
    key: &KeyAssignment,
    opts: &EncryptOptions,
) -> Result<EncryptedNetlist, SchemeError> {
    let config = SchemeConfig::Sarlock { l };
    config.validate()?;
    let tree = if l >= 2 { Some(build_and_tree(l)?) } else { None };
    encrypt_tree_lock(original, config, tree.as_ref(), key, opts)
}

/// Diversified tree lock: SARLock structure with `count` gates of `layer`
/// replaced by gate kind `x`, widening the flip from one input per key to a
/// multi-point set.
pub fn encrypt_dtl(
    original: &Netlist,
    config: &SchemeConfig,
    key: &KeyAssignment,
    target_po: Option<&str>,
) -> Result<EncryptedNetlist, SchemeError> {
    let opts =
        EncryptOptions { target_po: target_po.map(str::to_string), ..EncryptOptions::default() };
    encrypt_dtl_with(original, config, key, &opts)
}

pub(crate) fn encrypt_dtl_with(
    original: &Netlist,
    config: &SchemeConfig,
    key: &KeyAssignment,
    opts: &EncryptOptions,
) -> Result<EncryptedNetlist, SchemeError> {
    let &SchemeConfig::Dtl { l, tree: TreeType::Sarlock, x, layer, count } = config else {
        return Err(SchemeError::InvalidConfig(format!(
            "encrypt_dtl called with a {} configuration",
            config.name()
        )));
    };
    config.validate()?;
    let tree = replaced_tree(l, x, layer, count)?;
    encrypt_tree_lock(original, config.clone(), Some(&tree), key, opts)
}

pub(crate) fn replaced_tree(
    l: u32,
    x: TreeGate,
    layer: u32,
    count: u32,
) -> Result<AndTree, SchemeError> {
    let mut tree = build_and_tree(l)?;
    tree.replace(layer, count, x)?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::sim::{build_error_table, keys_functionally_equivalent};

    const C17: &str = include_str!("../../../../fixtures/c17.bench");
    /// 3-input, 1-output circuit whose output cone covers all inputs.
    const TRIPLE: &str = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nt = OR(b, c)\ny = AND(a, t)\n";

    #[test]
    fn correct_key_restores_the_function() {
        let nl = parse_bench(C17).unwrap();
        for l in 1..=5u32 {
            for k in [0u64, 1, (1 << l) - 1] {
                let key = KeyAssignment::from_u64(k, l);
                let enc = encrypt_sarlock(&nl, l, &key, None).unwrap();
                assert!(
                    keys_functionally_equivalent(&nl, &enc.netlist, &enc.correct_key, 26).unwrap(),
                    "l={l} k={k}"
                );
            }
        }
    }

    #[test]
    fn error_table_is_a_masked_diagonal() {
        let nl = parse_bench(TRIPLE).unwrap();
        let key = KeyAssignment::from_bit_string("110").unwrap();
        let enc = encrypt_sarlock(&nl, 3, &key, None).unwrap();
        let table = build_error_table(&nl, &enc, 26).unwrap();
        let k_star = key.as_u64();
        assert_eq!(table.error_count(), 7);
        for k in 0..8u64 {
            for i in 0..8u64 {
                let expected = i == k && k != k_star;
                assert_eq!(table.bit(i, k), expected, "i={i} k={k}");
            }
        }
        // Each incorrect column has exactly one error; k*'s row and column
        // are clean.
        let counts = table.column_counts();
        for k in 0..8u64 {
            assert_eq!(counts[k as usize], u64::from(k != k_star));
        }
    }

    #[test]
    fn incorrect_columns_carry_2_pow_n_minus_l_errors() {
        let nl = parse_bench(C17).unwrap();
        let key = KeyAssignment::from_u64(5, 3);
        let enc = encrypt_sarlock(&nl, 3, &key, None).unwrap();
        let table = build_error_table(&nl, &enc, 26).unwrap();
        let counts = table.column_counts();
        for (k, &c) in counts.iter().enumerate() {
            let expected = if k as u64 == key.as_u64() { 0 } else { 1 << (5 - 3) };
            assert_eq!(c, expected, "column {k}");
        }
    }

    #[test]
    fn dtl_column_counts_match_the_tree_onset() {
        let nl = parse_bench(C17).unwrap();
        let config = SchemeConfig::Dtl {
            l: 4,
            tree: TreeType::Sarlock,
            x: TreeGate::Xor,
            layer: 0,
            count: 1,
        };
        let key = KeyAssignment::from_u64(9, 4);
        let enc = encrypt_dtl(&nl, &config, &key, None).unwrap();
        assert!(keys_functionally_equivalent(&nl, &enc.netlist, &key, 26).unwrap());
        let table = build_error_table(&nl, &enc, 26).unwrap();
        let onset = replaced_tree(4, TreeGate::Xor, 0, 1).unwrap().onset_count();
        let expected = onset * (1u32 << (5 - 4)); // onset × 2^(n−l)
        for (k, &c) in table.column_counts().iter().enumerate() {
            if k as u64 == key.as_u64() {
                assert_eq!(c, 0, "correct column");
            } else {
                assert_eq!(num::BigUint::from(c), expected, "column {k}");
            }
        }
    }

    #[test]
    fn dtl_with_zero_replacements_is_plain_sarlock() {
        let nl = parse_bench(C17).unwrap();
        let key = KeyAssignment::from_u64(3, 4);
        let config = SchemeConfig::Dtl {
            l: 4,
            tree: TreeType::Sarlock,
            x: TreeGate::Xor,
            layer: 1,
            count: 0,
        };
        let dtl = encrypt_dtl(&nl, &config, &key, None).unwrap();
        let sar = encrypt_sarlock(&nl, 4, &key, None).unwrap();
        assert!(dtl.netlist.same_structure(&sar.netlist));
    }

    #[test]
    fn single_bit_lock_flips_half_the_column() {
        let nl = parse_bench(TRIPLE).unwrap();
        let key = KeyAssignment::from_u64(1, 1);
        let enc = encrypt_sarlock(&nl, 1, &key, None).unwrap();
        let table = build_error_table(&nl, &enc, 26).unwrap();
        // Wrong key 0: flips whenever cone bit a == 0, i.e. 2^(n−1) inputs.
        assert_eq!(table.column_counts(), vec![4, 0]);
    }

    #[test]
    fn key_width_checked() {
        let nl = parse_bench(C17).unwrap();
        let key = KeyAssignment::from_u64(0, 2);
        assert!(matches!(
            encrypt_sarlock(&nl, 3, &key, None),
            Err(SchemeError::KeyWidth { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn key_wider_than_inputs_rejected() {
        let nl = parse_bench(TRIPLE).unwrap();
        let key = KeyAssignment::from_u64(0, 4);
        assert!(encrypt_sarlock(&nl, 4, &key, None).is_err());
    }

    #[test]
    fn zero_width_key_rejected() {
        let nl = parse_bench(TRIPLE).unwrap();
        let key = KeyAssignment::new(vec![]);
        assert!(encrypt_sarlock(&nl, 0, &key, None).is_err());
    }

    #[test]
    fn every_inserted_gate_is_tagged() {
        let nl = parse_bench(C17).unwrap();
        let key = KeyAssignment::from_u64(2, 3);
        let enc = encrypt_sarlock(&nl, 3, &key, None).unwrap();
        let original_nets: std::collections::HashSet<&str> =
            nl.gates().iter().map(|g| nl.net_name(g.output)).collect();
        for gate in enc.netlist.gates() {
            let name = enc.netlist.net_name(gate.output);
            if original_nets.contains(name.trim_end_matches("_raw")) && gate.tag == GateTag::Original
            {
                continue;
            }
            assert_ne!(gate.tag, GateTag::Original, "untagged inserted gate {name}");
        }
        // The combiner drives the protected port.
        let port = enc.netlist.find_net("22").unwrap();
        let driver = &enc.netlist.gates()[enc.netlist.driver_of(port).unwrap()];
        assert_eq!(driver.tag, GateTag::Combiner);
        assert_eq!(driver.kind, GateKind::Xor);
    }
}
