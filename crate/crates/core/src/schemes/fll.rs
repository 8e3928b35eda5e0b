//! Fault-impact key-gate insertion.
//!
//! Locks the circuit interior instead of one output: key-controlled XOR/XNOR
//! gates are spliced in series at the net whose corruption propagates most
//! visibly, scored by toggle fault simulation weighted by fanout. Re-scoring
//! after an insertion elects the same point again — a key gate is transparent
//! under its correct bit and inherits the net's consumers and impact — so the
//! gates serialize there, and wrong keys corrupt through the chain's parity.

use super::{
    add_key_ports, resolve_target, EncryptOptions, EncryptedNetlist, FllStrategy, KeyAssignment,
    SchemeConfig, SchemeError,
};
use crate::netlist::{GateKind, GateTag, NetId, Netlist};
use crate::sim::eval_words_toggled;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const SENSITIVITY_BLOCKS: usize = 4; // 4 × 64 = 256 random patterns

/// Rank gate-driven internal nets by how strongly a stuck toggle on them
/// disturbs the outputs, weighted by fanout. Returns net ids, best first,
/// ties broken by net index.
fn rank_internal_nets(original: &Netlist, rng: &mut ChaCha12Rng) -> Vec<NetId> {
    let output_set: Vec<bool> = {
        let mut v = vec![false; original.net_count()];
        for &o in original.outputs() {
            v[o.index()] = true;
        }
        v
    };
    let candidates: Vec<NetId> = original
        .gates()
        .iter()
        .map(|g| g.output)
        .filter(|n| !output_set[n.index()])
        .collect();

    let mut fanout = vec![0u32; original.net_count()];
    for gate in original.gates() {
        for input in &gate.inputs {
            fanout[input.index()] += 1;
        }
    }

    let blocks: Vec<Vec<u64>> = (0..SENSITIVITY_BLOCKS)
        .map(|_| (0..original.inputs().len()).map(|_| rng.gen()).collect())
        .collect();
    let baselines: Vec<Vec<u64>> =
        blocks.iter().map(|b| eval_words_toggled(original, b, None)).collect();

    let mut scored: Vec<(f64, NetId)> = candidates
        .into_iter()
        .map(|net| {
            let mut sensitivity = 0u32;
            for (block, baseline) in blocks.iter().zip(&baselines) {
                let toggled = eval_words_toggled(original, block, Some(net));
                let mut diff = 0u64;
                for (t, b) in toggled.iter().zip(baseline) {
                    diff |= t ^ b;
                }
                sensitivity += diff.count_ones();
            }
            let score = f64::from(sensitivity) * f64::from(1 + fanout[net.index()]).log2();
            (score, net)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.index().cmp(&b.1.index())));
    scored.into_iter().map(|(_, net)| net).collect()
}

/// Insert `l` key gates at the highest-impact internal nets. XOR gates pair
/// with a 0 key bit, XNOR with a 1, so the correct key is the polarity vector
/// rather than a fixed constant.
pub fn encrypt_fll(
    original: &Netlist,
    config: &SchemeConfig,
) -> Result<EncryptedNetlist, SchemeError> {
    let &SchemeConfig::Fll { l, seed, strategy: FllStrategy::FaultImpact } = config else {
        return Err(SchemeError::InvalidConfig(format!(
            "encrypt_fll called with a {} configuration",
            config.name()
        )));
    };
    encrypt_fll_with(original, l, seed, &EncryptOptions::default())
}

pub(crate) fn encrypt_fll_with(
    original: &Netlist,
    l: u32,
    seed: u64,
    opts: &EncryptOptions,
) -> Result<EncryptedNetlist, SchemeError> {
    let config = SchemeConfig::Fll { l, seed, strategy: FllStrategy::FaultImpact };
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ranked = rank_internal_nets(original, &mut rng);
    if ranked.len() < l as usize {
        return Err(SchemeError::InvalidConfig(format!(
            "circuit has {} lockable internal nets, key width {l} requested",
            ranked.len()
        )));
    }
    let polarities: Vec<bool> = (0..l).map(|_| rng.gen()).collect();

    let target = resolve_target(original, opts.target_po.as_deref())?;
    let mut builder = original.to_builder();
    let keys = add_key_ports(&mut builder, opts, l)?;
    let base = builder.net_name(ranked[0]).to_string();
    let mut point = ranked[0];
    for (j, &key) in keys.iter().enumerate() {
        let consumers: Vec<usize> = builder
            .gates()
            .iter()
            .enumerate()
            .filter(|(_, g)| g.tag != GateTag::KeyGate && g.inputs.contains(&point))
            .map(|(gi, _)| gi)
            .collect();
        let locked = builder.fresh_net(&format!("{base}_k{j}"));
        let kind = if polarities[j as usize] { GateKind::Xnor } else { GateKind::Xor };
        builder.add_gate(kind, vec![point, key], locked, GateTag::KeyGate);
        for gi in consumers {
            for input in &mut builder.gates_mut()[gi].inputs {
                if *input == point {
                    *input = locked;
                }
            }
        }
        point = locked;
    }
    Ok(EncryptedNetlist {
        netlist: builder.finish()?,
        correct_key: KeyAssignment::new(polarities),
        config,
        protected_output: target,
        seed,
        key_prefix: opts.key_prefix.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::sim::{build_error_table, keys_functionally_equivalent};

    const C17: &str = include_str!("../../../../fixtures/c17.bench");

    fn fll_config(l: u32, seed: u64) -> SchemeConfig {
        SchemeConfig::Fll { l, seed, strategy: FllStrategy::FaultImpact }
    }

    #[test]
    fn correct_key_restores_the_function() {
        let nl = parse_bench(C17).unwrap();
        for seed in 0..4u64 {
            let enc = encrypt_fll(&nl, &fll_config(3, seed)).unwrap();
            assert!(
                keys_functionally_equivalent(&nl, &enc.netlist, &enc.correct_key, 26).unwrap(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn single_key_gate_corrupts_some_input() {
        let nl = parse_bench(C17).unwrap();
        let enc = encrypt_fll(&nl, &fll_config(1, 0)).unwrap();
        let table = build_error_table(&nl, &enc, 26).unwrap();
        assert!(table.error_count() > 0);
        assert_eq!(table.column_counts()[enc.correct_key.as_u64() as usize], 0);
    }

    #[test]
    fn same_seed_reproduces_the_lock() {
        let nl = parse_bench(C17).unwrap();
        let a = encrypt_fll(&nl, &fll_config(3, 42)).unwrap();
        let b = encrypt_fll(&nl, &fll_config(3, 42)).unwrap();
        assert!(a.netlist.same_structure(&b.netlist));
        assert_eq!(a.correct_key, b.correct_key);
    }

    #[test]
    fn polarity_matches_key_bit() {
        let nl = parse_bench(C17).unwrap();
        let enc = encrypt_fll(&nl, &fll_config(4, 9)).unwrap();
        let key_gates: Vec<_> =
            enc.netlist.gates().iter().filter(|g| g.tag == GateTag::KeyGate).collect();
        assert_eq!(key_gates.len(), 4);
        for gate in key_gates {
            let key_port = gate
                .inputs
                .iter()
                .find_map(|i| {
                    enc.netlist.key_inputs().iter().position(|k| k == i)
                })
                .expect("key gate reads a key port");
            let expected = if enc.correct_key.bit(key_port) {
                GateKind::Xnor
            } else {
                GateKind::Xor
            };
            assert_eq!(gate.kind, expected);
        }
    }

    #[test]
    fn too_many_key_gates_rejected() {
        // c17 has 4 internal gate-driven nets (two drive outputs).
        let nl = parse_bench(C17).unwrap();
        assert!(encrypt_fll(&nl, &fll_config(5, 0)).is_err());
    }
}
