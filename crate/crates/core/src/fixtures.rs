//! Built-in circuits: the c17 benchmark and a seeded synthetic generator for
//! the sizes the checked-in corpus does not cover.

use crate::netlist::{parse_bench, GateKind, GateTag, NetId, Netlist, NetlistBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const C17_BENCH: &str = include_str!("../../../fixtures/c17.bench");

/// The ISCAS-85 c17 benchmark: 5 inputs, 2 outputs, six NAND2 gates.
pub fn c17() -> Netlist {
    parse_bench(C17_BENCH).expect("bundled netlist parses")
}

/// Deterministic synthetic circuit with `num_inputs` PIs and at least
/// `num_gates` gates. Every gate and every input lies in the fanin cone of
/// the first output `po0`, so the whole circuit is observable there; `po1`
/// taps an interior net. Same seed, same netlist.
pub fn layered(num_inputs: u32, num_gates: u32, seed: u64) -> Netlist {
    assert!(num_inputs >= 1, "need at least one input");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut b = NetlistBuilder::new(&format!("synth{num_inputs}x{num_gates}s{seed}"));
    let mut pool: Vec<NetId> = (0..num_inputs).map(|i| b.add_input(&format!("i{i}"))).collect();
    let mut consumed = vec![false; pool.len()];
    let kinds = [
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
    ];
    for _ in 0..num_gates {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let a = rng.gen_range(0..pool.len());
        let mut second = rng.gen_range(0..pool.len());
        if second == a && pool.len() > 1 {
            second = (second + 1) % pool.len();
        }
        let out = b.gate(kind, vec![pool[a], pool[second]], "g", GateTag::Original);
        consumed[a] = true;
        consumed[second] = true;
        pool.push(out);
        consumed.push(false);
    }
    // Fold every unconsumed net into the primary output so nothing dangles.
    let loose: Vec<NetId> =
        pool.iter().zip(&consumed).filter(|&(_, &c)| !c).map(|(&n, _)| n).collect();
    let mut root = loose[0];
    for &x in &loose[1..] {
        root = b.gate(GateKind::Xor, vec![root, x], "fold", GateTag::Original);
    }
    let po0 = b.net("po0");
    b.add_gate(GateKind::Buf, vec![root], po0, GateTag::Original);
    b.add_output(po0);
    let po1 = b.net("po1");
    b.add_gate(GateKind::Buf, vec![pool[pool.len() / 2]], po1, GateTag::Original);
    b.add_output(po1);
    b.finish().expect("generated netlist is valid")
}
