//! Circuit-to-CNF translation: gate clause templates with constant folding,
//! and the two-key-copy difference formula the key-recovery loop solves.

use crate::netlist::{GateKind, NetId, Netlist};
use crate::sat::{Lit, SatBackend, SatResult, Solver, Var};
use crate::schemes::EncryptedNetlist;
use std::collections::BTreeMap;

/// A net's value inside a CNF encoding: folded to a constant, or a signed
/// 1-based literal (negative means inverted).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Wire {
    Const(bool),
    L(i32),
}

impl Wire {
    pub fn invert(self) -> Wire {
        match self {
            Wire::Const(b) => Wire::Const(!b),
            Wire::L(x) => Wire::L(-x),
        }
    }

    pub fn as_lit(self) -> Option<i32> {
        match self {
            Wire::Const(_) => None,
            Wire::L(x) => Some(x),
        }
    }
}

pub(crate) trait ClauseSink {
    /// Allocate a fresh variable; returns its 0-based index.
    fn fresh_var(&mut self) -> u32;
    fn emit(&mut self, clause: &[i32]);
    fn var_count(&self) -> u32;
}

fn lit_of(var: u32) -> i32 {
    var as i32 + 1
}

/// y = AND over already-simplified literal operands (len >= 2).
fn emit_and<S: ClauseSink>(sink: &mut S, lits: &[i32]) -> i32 {
    let y = lit_of(sink.fresh_var());
    let mut long = Vec::with_capacity(lits.len() + 1);
    long.push(y);
    for &x in lits {
        sink.emit(&[-y, x]);
        long.push(-x);
    }
    sink.emit(&long);
    y
}

/// t = a xor b over literal operands.
fn emit_xor2<S: ClauseSink>(sink: &mut S, a: i32, b: i32) -> i32 {
    let t = lit_of(sink.fresh_var());
    sink.emit(&[-t, a, b]);
    sink.emit(&[-t, -a, -b]);
    sink.emit(&[t, -a, b]);
    sink.emit(&[t, a, -b]);
    t
}

/// Difference literal for two wires, folding constants.
pub(crate) fn wire_neq<S: ClauseSink>(sink: &mut S, a: Wire, b: Wire) -> Wire {
    match (a, b) {
        (Wire::Const(x), Wire::Const(y)) => Wire::Const(x != y),
        (Wire::Const(true), w) | (w, Wire::Const(true)) => w.invert(),
        (Wire::Const(false), w) | (w, Wire::Const(false)) => w,
        (Wire::L(x), Wire::L(y)) => {
            if x == y {
                Wire::Const(false)
            } else if x == -y {
                Wire::Const(true)
            } else {
                Wire::L(emit_xor2(sink, x, y))
            }
        }
    }
}

/// AND-family encoding: y = neg_out ^ AND(neg_in ^ x for x in ins).
/// OR/NOR/NAND all reduce to this through De Morgan.
fn and_like<S: ClauseSink>(sink: &mut S, ins: &[Wire], neg_in: bool, neg_out: bool) -> Wire {
    let mut lits = Vec::with_capacity(ins.len());
    for &w in ins {
        let w = if neg_in { w.invert() } else { w };
        match w {
            Wire::Const(false) => return Wire::Const(neg_out),
            Wire::Const(true) => {}
            Wire::L(x) => lits.push(x),
        }
    }
    lits.sort_unstable();
    lits.dedup();
    if lits.windows(2).any(|p| p[0] == -p[1]) {
        return Wire::Const(neg_out);
    }
    let wire = match lits.len() {
        0 => Wire::Const(true),
        1 => Wire::L(lits[0]),
        _ => Wire::L(emit_and(sink, &lits)),
    };
    if neg_out {
        wire.invert()
    } else {
        wire
    }
}

fn xor_like<S: ClauseSink>(sink: &mut S, ins: &[Wire], invert: bool) -> Wire {
    let mut parity = invert;
    let mut acc: Option<i32> = None;
    for &w in ins {
        match w {
            Wire::Const(b) => parity ^= b,
            Wire::L(x) => {
                acc = match acc {
                    None => Some(x),
                    Some(a) if a == x => None,
                    Some(a) if a == -x => {
                        parity = !parity;
                        None
                    }
                    Some(a) => Some(emit_xor2(sink, a, x)),
                };
            }
        }
    }
    let wire = match acc {
        None => return Wire::Const(parity),
        Some(x) => Wire::L(x),
    };
    if parity {
        wire.invert()
    } else {
        wire
    }
}

fn encode_gate<S: ClauseSink>(sink: &mut S, kind: GateKind, ins: &[Wire]) -> Wire {
    match kind {
        GateKind::Const0 => Wire::Const(false),
        GateKind::Const1 => Wire::Const(true),
        GateKind::Buf => ins[0],
        GateKind::Not => ins[0].invert(),
        GateKind::And => and_like(sink, ins, false, false),
        GateKind::Nand => and_like(sink, ins, false, true),
        GateKind::Or => and_like(sink, ins, true, true),
        GateKind::Nor => and_like(sink, ins, true, false),
        GateKind::Xor => xor_like(sink, ins, false),
        GateKind::Xnor => xor_like(sink, ins, true),
    }
}

/// Encode one copy of `netlist` with the given wires on its input and key
/// ports; returns the output wires in port order. `record` is called for the
/// output net of every gate that allocated a fresh variable.
pub(crate) fn encode_copy<S: ClauseSink>(
    netlist: &Netlist,
    sink: &mut S,
    inputs: &[Wire],
    keys: &[Wire],
    mut record: impl FnMut(NetId, u32),
) -> Vec<Wire> {
    assert_eq!(inputs.len(), netlist.inputs().len(), "input wire count");
    assert_eq!(keys.len(), netlist.key_inputs().len(), "key wire count");
    let mut repr: Vec<Option<Wire>> = vec![None; netlist.net_count()];
    for (w, &net) in inputs.iter().zip(netlist.inputs()) {
        repr[net.index()] = Some(*w);
    }
    for (w, &net) in keys.iter().zip(netlist.key_inputs()) {
        repr[net.index()] = Some(*w);
    }
    for &gi in netlist.topo_order() {
        let gate = &netlist.gates()[gi];
        let ins: Vec<Wire> =
            gate.inputs.iter().map(|&n| repr[n.index()].expect("inputs precede gate")).collect();
        let before = sink.var_count();
        let out = encode_gate(sink, gate.kind, &ins);
        if let Wire::L(x) = out {
            let var = x.unsigned_abs() - 1;
            if x > 0 && var >= before {
                record(gate.output, var);
            }
        }
        repr[gate.output.index()] = Some(out);
    }
    netlist.outputs().iter().map(|&n| repr[n.index()].expect("outputs driven")).collect()
}

/// Signed-literal CNF with a record of which variable encodes which net.
/// Copies are numbered: 0 and 1 are the two key copies of the difference
/// formula (inputs shared, recorded under copy 0); constraint copies follow
/// pairwise.
#[derive(Clone, Debug)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    var_map: BTreeMap<(NetId, usize), u32>,
}

#[derive(Default)]
struct FormulaSink {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
}

impl ClauseSink for FormulaSink {
    fn fresh_var(&mut self) -> u32 {
        let v = self.num_vars;
        self.num_vars += 1;
        v as u32
    }

    fn emit(&mut self, clause: &[i32]) {
        debug_assert!(!clause.is_empty() && clause.iter().all(|&l| l != 0));
        self.clauses.push(clause.to_vec());
    }

    fn var_count(&self) -> u32 {
        self.num_vars as u32
    }
}

/// Sink that feeds clauses straight into an incremental solver.
pub(crate) struct SolverSink {
    pub solver: Solver,
    pub vars: Vec<Var>,
}

impl SolverSink {
    pub fn new() -> Self {
        SolverSink { solver: Solver::new(), vars: Vec::new() }
    }

    pub fn lit(&self, signed: i32) -> Lit {
        let var = self.vars[(signed.unsigned_abs() - 1) as usize];
        if signed < 0 {
            Lit::negative(var)
        } else {
            Lit::positive(var)
        }
    }

    pub fn model(&self, signed: i32) -> bool {
        let var = self.vars[(signed.unsigned_abs() - 1) as usize];
        self.solver.model_value(var) != (signed < 0)
    }
}

impl ClauseSink for SolverSink {
    fn fresh_var(&mut self) -> u32 {
        let v = self.solver.new_var();
        self.vars.push(v);
        (self.vars.len() - 1) as u32
    }

    fn emit(&mut self, clause: &[i32]) {
        let lits: Vec<Lit> = clause.iter().map(|&l| self.lit(l)).collect();
        self.solver.add_clause(&lits);
    }

    fn var_count(&self) -> u32 {
        self.vars.len() as u32
    }
}

impl CnfFormula {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// CNF variable (0-based) for a net in a given copy, if one was allocated.
    pub fn var_for(&self, net: NetId, copy: usize) -> Option<u32> {
        self.var_map.get(&(net, copy)).copied()
    }

    /// Solve with a fresh solver; `Some(model)` indexed by CNF variable.
    pub fn solve(&self) -> Option<Vec<bool>> {
        let mut solver = Solver::new();
        let vars: Vec<Var> = (0..self.num_vars).map(|_| solver.new_var()).collect();
        for clause in &self.clauses {
            let lits: Vec<Lit> = clause
                .iter()
                .map(|&l| {
                    let v = vars[(l.unsigned_abs() - 1) as usize];
                    if l < 0 {
                        Lit::negative(v)
                    } else {
                        Lit::positive(v)
                    }
                })
                .collect();
            solver.add_clause(&lits);
        }
        match solver.solve() {
            SatResult::Sat => Some(vars.iter().map(|&v| solver.model_value(v)).collect()),
            SatResult::Unsat => None,
        }
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                out.push_str(&lit.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

/// Encode a single copy of a circuit with free inputs and keys (copy 0).
/// Returns the formula and the output wires in port order.
pub fn encode_circuit(netlist: &Netlist) -> (CnfFormula, Vec<Wire>) {
    let mut sink = FormulaSink::default();
    let mut var_map = BTreeMap::new();
    let inputs: Vec<Wire> = netlist
        .inputs()
        .iter()
        .map(|&net| {
            let v = sink.fresh_var();
            var_map.insert((net, 0), v);
            Wire::L(lit_of(v))
        })
        .collect();
    let keys: Vec<Wire> = netlist
        .key_inputs()
        .iter()
        .map(|&net| {
            let v = sink.fresh_var();
            var_map.insert((net, 0), v);
            Wire::L(lit_of(v))
        })
        .collect();
    let outputs = encode_copy(netlist, &mut sink, &inputs, &keys, |net, var| {
        var_map.insert((net, 0), var);
    });
    (CnfFormula { num_vars: sink.num_vars, clauses: sink.clauses, var_map }, outputs)
}

/// Difference formula over the locked netlist: two key copies k1/k2 share the
/// input ports, and the formula is satisfiable exactly when some input makes
/// their outputs differ while both copies reproduce every accumulated
/// (input, output) observation.
pub fn encode_miter(
    encrypted: &EncryptedNetlist,
    constraints: &[(Vec<bool>, Vec<bool>)],
) -> CnfFormula {
    encode_miter_netlist(&encrypted.netlist, constraints)
}

/// [`encode_miter`] for a bare locked netlist.
pub fn encode_miter_netlist(
    netlist: &Netlist,
    constraints: &[(Vec<bool>, Vec<bool>)],
) -> CnfFormula {
    let mut sink = FormulaSink::default();
    let mut var_map = BTreeMap::new();

    let inputs: Vec<Wire> = netlist
        .inputs()
        .iter()
        .map(|&net| {
            let v = sink.fresh_var();
            var_map.insert((net, 0), v);
            Wire::L(lit_of(v))
        })
        .collect();
    let key_copy = |sink: &mut FormulaSink,
                        var_map: &mut BTreeMap<(NetId, usize), u32>,
                        copy: usize| {
        netlist
            .key_inputs()
            .iter()
            .map(|&net| {
                let v = sink.fresh_var();
                var_map.insert((net, copy), v);
                Wire::L(lit_of(v))
            })
            .collect::<Vec<Wire>>()
    };
    let key_a = key_copy(&mut sink, &mut var_map, 0);
    let key_b = key_copy(&mut sink, &mut var_map, 1);

    let out_a = encode_copy(netlist, &mut sink, &inputs, &key_a, |net, var| {
        var_map.insert((net, 0), var);
    });
    let out_b = encode_copy(netlist, &mut sink, &inputs, &key_b, |net, var| {
        var_map.insert((net, 1), var);
    });

    let mut diff_lits = Vec::new();
    let mut always_differs = false;
    for (&a, &b) in out_a.iter().zip(&out_b) {
        match wire_neq(&mut sink, a, b) {
            Wire::Const(true) => always_differs = true,
            Wire::Const(false) => {}
            Wire::L(x) => diff_lits.push(x),
        }
    }
    if !always_differs {
        if diff_lits.is_empty() {
            // The copies are identical on every output: no distinguishing
            // input exists, so the formula must be unsatisfiable.
            let z = lit_of(sink.fresh_var());
            sink.emit(&[z]);
            sink.emit(&[-z]);
        } else {
            sink.emit(&diff_lits);
        }
    }

    for (ci, (input, output)) in constraints.iter().enumerate() {
        let fixed: Vec<Wire> = input.iter().map(|&b| Wire::Const(b)).collect();
        for (keys, copy) in [(&key_a, 2 + 2 * ci), (&key_b, 3 + 2 * ci)] {
            let outs = encode_copy(netlist, &mut sink, &fixed, keys, |net, var| {
                var_map.insert((net, copy), var);
            });
            for (&wire, &want) in outs.iter().zip(output) {
                match wire {
                    Wire::Const(b) if b == want => {}
                    Wire::Const(_) => {
                        // The observation contradicts key-independent logic.
                        let z = lit_of(sink.fresh_var());
                        sink.emit(&[z]);
                        sink.emit(&[-z]);
                    }
                    Wire::L(x) => sink.emit(&[if want { x } else { -x }]),
                }
            }
        }
    }

    CnfFormula { num_vars: sink.num_vars, clauses: sink.clauses, var_map }
}
