//! OR-composition of locks: child flip signals are merged through one OR
//! gate and XORed once into the shared protected output, so an input escapes
//! corruption only if every child's flip is silent.

use super::sarlock::{replaced_tree, tree_flip_signal};
use super::sfll::sfll_flip_signal;
use super::tree::build_and_tree;
use super::{
    cone_bits, splice_output, CombinerKind, EncryptOptions, EncryptedNetlist, KeyAssignment,
    SchemeConfig, SchemeError, TreeType,
};
use crate::netlist::{GateKind, GateTag, NetId, Netlist};
use std::collections::HashSet;

/// Combine locks built against the same original and target output into one
/// compound lock. The children's flip logic is rebuilt from their recorded
/// configurations and keys (with their original key port names), so children
/// must carry the default cone mapping; the compound's correct key is the
/// concatenation of the children's keys in order.
pub fn compose_or(
    original: &Netlist,
    children: &[EncryptedNetlist],
) -> Result<EncryptedNetlist, SchemeError> {
    let opts = children
        .first()
        .map(|c| EncryptOptions {
            seed: c.seed,
            key_prefix: c.key_prefix.clone(),
            ..EncryptOptions::default()
        })
        .unwrap_or_default();
    compose_or_with(original, children, &opts)
}

pub(crate) fn compose_or_with(
    original: &Netlist,
    children: &[EncryptedNetlist],
    opts: &EncryptOptions,
) -> Result<EncryptedNetlist, SchemeError> {
    if children.is_empty() {
        return Err(SchemeError::IncompatibleChildren("no children to compose".into()));
    }
    let target = &children[0].protected_output;
    let original_inputs: Vec<&str> = original.input_names().collect();
    let original_outputs: Vec<&str> = original.output_names().collect();
    let mut seen_ports: HashSet<String> = HashSet::new();
    for child in children {
        if child.protected_output != *target {
            return Err(SchemeError::IncompatibleChildren(format!(
                "children protect different outputs ({} vs {})",
                target, child.protected_output
            )));
        }
        let child_inputs: Vec<&str> = child.netlist.input_names().collect();
        let child_outputs: Vec<&str> = child.netlist.output_names().collect();
        if child_inputs != original_inputs || child_outputs != original_outputs {
            return Err(SchemeError::IncompatibleChildren(
                "child was not built against this original".into(),
            ));
        }
        for name in child.netlist.key_input_names() {
            if !seen_ports.insert(name.to_string()) {
                return Err(SchemeError::IncompatibleChildren(format!(
                    "key port {name} appears in more than one child"
                )));
            }
        }
        match child.config {
            SchemeConfig::Sarlock { .. } | SchemeConfig::Dtl { .. } | SchemeConfig::SfllHd { .. } => {}
            _ => {
                return Err(SchemeError::IncompatibleChildren(format!(
                    "{} has no single flip signal to OR-combine",
                    child.config.name()
                )))
            }
        }
    }

    let mut builder = original.to_builder();
    let (raw, port) = splice_output(&mut builder, target)?;
    let mut flips: Vec<NetId> = Vec::with_capacity(children.len());
    for child in children {
        let l = child.config.key_size();
        let cone_names = cone_bits(original, target, l, opts, !matches!(child.config, SchemeConfig::SfllHd { .. }))?;
        let cone: Vec<NetId> =
            cone_names.iter().map(|n| builder.find_net(n).expect("validated input")).collect();
        let mut keys = Vec::with_capacity(l as usize);
        for name in child.netlist.key_input_names() {
            if builder.find_net(name).is_some() {
                return Err(SchemeError::IncompatibleChildren(format!(
                    "key port {name} collides with an existing net"
                )));
            }
            keys.push(builder.add_key_input(name));
        }
        let flip = match &child.config {
            SchemeConfig::Sarlock { l } => {
                let tree = if *l >= 2 { Some(build_and_tree(*l)?) } else { None };
                tree_flip_signal(&mut builder, &cone, &keys, &child.correct_key, tree.as_ref())
            }
            SchemeConfig::Dtl { l, tree: TreeType::Sarlock, x, layer, count } => {
                let tree = replaced_tree(*l, *x, *layer, *count)?;
                tree_flip_signal(&mut builder, &cone, &keys, &child.correct_key, Some(&tree))
            }
            SchemeConfig::SfllHd { l: _, h } => {
                sfll_flip_signal(&mut builder, &cone, &keys, &child.correct_key, *h)
            }
            other => unreachable!("validated child {}", other.name()),
        };
        flips.push(flip);
    }
    let combined = if flips.len() == 1 {
        flips[0]
    } else {
        builder.gate(GateKind::Or, flips, "flipor", GateTag::Combiner)
    };
    builder.add_gate(GateKind::Xor, vec![raw, combined], port, GateTag::Combiner);

    Ok(EncryptedNetlist {
        netlist: builder.finish()?,
        correct_key: KeyAssignment::concat(children.iter().map(|c| &c.correct_key)),
        config: SchemeConfig::Compound {
            children: children.iter().map(|c| c.config.clone()).collect(),
            combiner: CombinerKind::Or,
        },
        protected_output: target.clone(),
        seed: opts.seed,
        key_prefix: opts.key_prefix.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{encrypt, encrypt_sfll_hd};
    use super::*;
    use crate::netlist::parse_bench;
    use crate::sim::{build_error_table, keys_functionally_equivalent};

    const C17: &str = include_str!("../../../../fixtures/c17.bench");

    fn sar_child(nl: &Netlist, l: u32, key: u64, offset: u32) -> EncryptedNetlist {
        let opts = EncryptOptions { key_offset: offset, ..EncryptOptions::default() };
        super::super::sarlock::encrypt_sarlock_with(
            nl,
            l,
            &KeyAssignment::from_u64(key, l),
            &opts,
        )
        .unwrap()
    }

    #[test]
    fn single_sarlock_child_composes_to_the_same_structure() {
        let nl = parse_bench(C17).unwrap();
        let child = sar_child(&nl, 3, 5, 0);
        let compound = compose_or(&nl, std::slice::from_ref(&child)).unwrap();
        assert!(compound.netlist.same_structure(&child.netlist));
        assert_eq!(compound.correct_key, child.correct_key);
    }

    #[test]
    fn single_sfll_child_composes_to_the_same_function() {
        let nl = parse_bench(C17).unwrap();
        let key = KeyAssignment::from_u64(2, 3);
        let child = encrypt_sfll_hd(&nl, 3, 1, &key, None).unwrap();
        let compound = compose_or(&nl, std::slice::from_ref(&child)).unwrap();
        let ta = build_error_table(&nl, &child, 26).unwrap();
        let tb = build_error_table(&nl, &compound, 26).unwrap();
        for i in 0..1u64 << 5 {
            for k in 0..1u64 << 3 {
                assert_eq!(ta.bit(i, k), tb.bit(i, k), "i={i} k={k}");
            }
        }
    }

    #[test]
    fn compound_errors_are_the_union_of_child_errors() {
        let nl = parse_bench(C17).unwrap();
        let a = sar_child(&nl, 3, 6, 0);
        let b = sar_child(&nl, 3, 1, 3);
        let compound = compose_or(&nl, &[a.clone(), b.clone()]).unwrap();
        assert!(
            keys_functionally_equivalent(&nl, &compound.netlist, &compound.correct_key, 26)
                .unwrap()
        );
        let ta = build_error_table(&nl, &a, 26).unwrap();
        let tb = build_error_table(&nl, &b, 26).unwrap();
        let tc = build_error_table(&nl, &compound, 26).unwrap();
        for i in 0..1u64 << 5 {
            for ka in 0..8u64 {
                for kb in 0..8u64 {
                    let k = ka | kb << 3;
                    assert_eq!(
                        tc.bit(i, k),
                        ta.bit(i, ka) || tb.bit(i, kb),
                        "i={i} ka={ka} kb={kb}"
                    );
                }
            }
        }
        // E_FC of the union dominates each child's.
        assert!(tc.efc() >= ta.efc());
        assert!(tc.efc() >= tb.efc());
    }

    #[test]
    fn dispatcher_builds_compounds_with_disjoint_ports() {
        let nl = parse_bench(C17).unwrap();
        let config = SchemeConfig::Compound {
            children: vec![SchemeConfig::Sarlock { l: 2 }, SchemeConfig::SfllHd { l: 2, h: 1 }],
            combiner: CombinerKind::Or,
        };
        let enc = encrypt(&nl, &config, &EncryptOptions::default()).unwrap();
        assert_eq!(enc.correct_key.len(), 4);
        let names: Vec<&str> = enc.netlist.key_input_names().collect();
        assert_eq!(names, ["keyinput0", "keyinput1", "keyinput2", "keyinput3"]);
        assert!(keys_functionally_equivalent(&nl, &enc.netlist, &enc.correct_key, 26).unwrap());
    }

    #[test]
    fn overlapping_key_ports_rejected() {
        let nl = parse_bench(C17).unwrap();
        let a = sar_child(&nl, 3, 6, 0);
        let b = sar_child(&nl, 3, 1, 0);
        assert!(matches!(
            compose_or(&nl, &[a, b]),
            Err(SchemeError::IncompatibleChildren(_))
        ));
    }

    #[test]
    fn mismatched_targets_rejected() {
        let nl = parse_bench(C17).unwrap();
        let a = sar_child(&nl, 3, 6, 0);
        let mut opts = EncryptOptions { key_offset: 3, ..EncryptOptions::default() };
        opts.target_po = Some("23".into());
        let b = super::super::sarlock::encrypt_sarlock_with(
            &nl,
            3,
            &KeyAssignment::from_u64(1, 3),
            &opts,
        )
        .unwrap();
        assert!(matches!(
            compose_or(&nl, &[a, b]),
            Err(SchemeError::IncompatibleChildren(_))
        ));
    }

    #[test]
    fn fll_child_rejected() {
        let nl = parse_bench(C17).unwrap();
        let fll = encrypt(
            &nl,
            &SchemeConfig::Fll { l: 2, seed: 0, strategy: Default::default() },
            &EncryptOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            compose_or(&nl, &[fll]),
            Err(SchemeError::IncompatibleChildren(_))
        ));
    }
}
