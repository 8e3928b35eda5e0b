//! Structural lock excision: delete every gate whose role tag marks it as
//! lock machinery, bypass each deleted gate with its first still-meaningful
//! operand, and rebuild a key-free circuit. Stripped functionality stays
//! stripped — the strip logic is honest circuit rework, not removable
//! protection — which is exactly what makes the residual error rate of the
//! rebuilt circuit a meaningful security measure.

use crate::attacks::AttackError;
use crate::netlist::{GateTag, NetId, Netlist, NetlistBuilder};
use crate::rational::Rational;
use crate::schemes::EncryptedNetlist;
use crate::sim::{comparable, counting_word, evaluate, evaluate_batch, SimError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn kept(tag: GateTag) -> bool {
    matches!(tag, GateTag::Original | GateTag::StripLogic)
}

/// Delete flip, restore, key-gate, and combiner logic from a locked circuit
/// and rewire around it. Key ports disappear; every output port keeps its
/// name. The rebuilt circuit is what an attacker armed only with the gate
/// tags can salvage, so its disagreement with the original is the removal
/// resilience of the scheme.
pub fn removal_attack(encrypted: &EncryptedNetlist) -> Result<Netlist, AttackError> {
    let src = &encrypted.netlist;
    let mut driver: Vec<Option<usize>> = vec![None; src.net_count()];
    for (gi, gate) in src.gates().iter().enumerate() {
        driver[gate.output.index()] = Some(gi);
    }
    let mut is_input = vec![false; src.net_count()];
    for &net in src.inputs() {
        is_input[net.index()] = true;
    }
    let mut is_key = vec![false; src.net_count()];
    for &net in src.key_inputs() {
        is_key[net.index()] = true;
    }

    // For each net: the net that carries its salvaged value, if any. A net is
    // its own representative when a data input or a kept gate drives it;
    // deleted gates defer to their first salvageable operand (the data
    // operand leads in every lock construction).
    let mut memo: Vec<Option<Option<NetId>>> = vec![None; src.net_count()];
    fn resolve(
        net: NetId,
        src: &Netlist,
        driver: &[Option<usize>],
        is_input: &[bool],
        is_key: &[bool],
        memo: &mut Vec<Option<Option<NetId>>>,
    ) -> Option<NetId> {
        if let Some(cached) = memo[net.index()] {
            return cached;
        }
        let resolved = if is_key[net.index()] {
            None
        } else if is_input[net.index()] {
            Some(net)
        } else {
            match driver[net.index()] {
                None => None,
                Some(gi) if kept(src.gates()[gi].tag) => Some(net),
                Some(gi) => src.gates()[gi]
                    .inputs
                    .iter()
                    .find_map(|&operand| resolve(operand, src, driver, is_input, is_key, memo)),
            }
        };
        memo[net.index()] = Some(resolved);
        resolved
    }

    let mut builder = NetlistBuilder::new(src.name());
    let mut mapped: Vec<Option<NetId>> = vec![None; src.net_count()];
    for &net in src.inputs() {
        mapped[net.index()] = Some(builder.add_input(src.net_name(net)));
    }
    for &gi in src.topo_order() {
        let gate = &src.gates()[gi];
        if !kept(gate.tag) {
            continue;
        }
        let mut inputs = Vec::with_capacity(gate.inputs.len());
        for &operand in &gate.inputs {
            let salvaged = resolve(operand, src, &driver, &is_input, &is_key, &mut memo)
                .ok_or_else(|| {
                    AttackError::TagInconsistency(format!(
                        "kept gate {} needs {}, which only lock logic can produce",
                        src.net_name(gate.output),
                        src.net_name(operand),
                    ))
                })?;
            inputs.push(
                mapped[salvaged.index()].expect("salvaged nets precede their consumers"),
            );
        }
        let output = builder.net(src.net_name(gate.output));
        mapped[gate.output.index()] = Some(output);
        builder.add_gate(gate.kind, inputs, output, GateTag::Original);
    }
    for &port in src.outputs() {
        let salvaged = resolve(port, src, &driver, &is_input, &is_key, &mut memo)
            .ok_or_else(|| {
                AttackError::TagInconsistency(format!(
                    "output {} resolves to nothing but lock logic",
                    src.net_name(port),
                ))
            })?;
        let target = mapped[salvaged.index()].expect("salvaged nets are built");
        if salvaged != port {
            builder.rename_net(target, src.net_name(port));
        }
        builder.add_output(target);
    }
    builder
        .finish()
        .map_err(|e| AttackError::TagInconsistency(format!("rebuild failed: {e}")))
}

/// How to measure the disagreement rate between original and rebuilt circuit.
#[derive(Clone, Copy, Debug)]
pub enum EremMode {
    Exhaustive { budget_bits: u32 },
    Sampled { samples: u64, seed: u64 },
}

/// Fraction of inputs on which the rebuilt circuit disagrees with the
/// original on any output.
pub fn measure_erem(
    original: &Netlist,
    rebuilt: &Netlist,
    mode: EremMode,
) -> Result<Rational, AttackError> {
    comparable(original, rebuilt).map_err(AttackError::Sim)?;
    if !rebuilt.key_inputs().is_empty() {
        return Err(AttackError::TagInconsistency(
            "rebuilt circuit still has key inputs".into(),
        ));
    }
    let n = original.inputs().len() as u32;
    match mode {
        EremMode::Exhaustive { budget_bits } => {
            if n > budget_bits {
                return Err(SimError::BudgetExceeded { needed: n, budget: budget_bits }.into());
            }
            if n >= 64 {
                return Err(SimError::PatternTooWide(n as usize).into());
            }
            let blocks = (1u64 << n).div_ceil(64);
            let lane_mask = if n >= 6 { !0u64 } else { (1u64 << (1u64 << n)) - 1 };
            let mut input_words = vec![0u64; n as usize];
            let mut errors = 0u64;
            for block in 0..blocks {
                for (w, word) in input_words.iter_mut().enumerate() {
                    *word = counting_word(w as u32, block);
                }
                let a = evaluate_batch(original, &input_words, &[]).map_err(AttackError::Sim)?;
                let b = evaluate_batch(rebuilt, &input_words, &[]).map_err(AttackError::Sim)?;
                let mut mismatch = 0u64;
                for (&wa, &wb) in a.iter().zip(&b) {
                    mismatch |= wa ^ wb;
                }
                errors += (mismatch & lane_mask).count_ones() as u64;
            }
            Ok(Rational::from_biguint(errors.into(), (1u64 << n).into()))
        }
        EremMode::Sampled { samples, seed } => {
            let samples = samples.max(1);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut errors = 0u64;
            for _ in 0..samples {
                let input: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
                let a = evaluate(original, &input, &[]).map_err(AttackError::Sim)?;
                let b = evaluate(rebuilt, &input, &[]).map_err(AttackError::Sim)?;
                if a != b {
                    errors += 1;
                }
            }
            Ok(Rational::new(errors, samples))
        }
    }
}
