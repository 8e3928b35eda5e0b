//! Oracle-guided key recovery. The core loop finds a distinguishing input
//! pattern, asks the oracle for the right answer, and constrains the key
//! space with the observation until no distinguishing input is left. Two
//! engines implement the loop: a table engine that enumerates the whole
//! input/key grid and always picks the most eliminating pattern, and an
//! incremental CNF engine for circuits too large to tabulate. An approximate
//! variant stops early once a candidate key's sampled error rate drops under
//! a threshold.

use crate::attacks::encode::{encode_copy, wire_neq, ClauseSink, SolverSink, Wire};
use crate::attacks::AttackError;
use crate::bits::Bits;
use crate::netlist::Netlist;
use crate::rational::Rational;
use crate::sat::{Lit, SatBackend, SatResult};
use crate::schemes::{EncryptedNetlist, KeyAssignment};
use crate::sim::{counting_word, evaluate, evaluate_batch, SimError, DEFAULT_BUDGET_BITS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// How the next distinguishing input is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipStrategy {
    /// Table engine when the input/key grid fits the bit budget, CNF engine
    /// otherwise.
    #[default]
    Auto,
    /// Always tabulate; errors out when the grid exceeds the budget.
    Greedy,
    /// Always use the incremental CNF engine.
    Solver,
}

/// Resource limits and reproducibility knobs for an attack run.
#[derive(Clone, Debug)]
pub struct AttackCaps {
    pub max_iterations: Option<u64>,
    pub timeout: Option<Duration>,
    /// Grid limit for the table engine: it needs 2^(n+l) bits.
    pub budget_bits: u32,
    pub seed: u64,
    pub strategy: DipStrategy,
}

impl Default for AttackCaps {
    fn default() -> Self {
        AttackCaps {
            max_iterations: None,
            timeout: None,
            budget_bits: DEFAULT_BUDGET_BITS,
            seed: 0,
            strategy: DipStrategy::default(),
        }
    }
}

/// One resolved distinguishing input and the oracle's verdict on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DipRecord {
    pub iter: u64,
    pub dip_bits: Vec<bool>,
    pub oracle_out: Vec<bool>,
    /// Branching decisions the CNF engine spent finding this pattern; zero
    /// under the table engine.
    pub solver_decisions: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    KeyFound,
    Timeout,
    IterationCap,
}

/// Full record of a key-recovery run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SatAttackTrace {
    pub dips: Vec<DipRecord>,
    /// Distinguishing-input rounds completed (= `dips.len()`).
    pub iterations: u64,
    /// Elimination rounds including the final none-left check, the measured
    /// analogue of a query-count guarantee. On a completed run this is
    /// `iterations + 1`.
    pub queries: u64,
    pub recovered_key: Option<KeyAssignment>,
    pub terminated: Termination,
}

impl SatAttackTrace {
    /// One JSON object per line, one line per distinguishing input.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for dip in &self.dips {
            out.push_str(&serde_json::to_string(dip).expect("trace serializes"));
            out.push('\n');
        }
        out
    }
}

/// Black-box oracle backed by simulating the original circuit.
pub fn circuit_oracle(original: &Netlist) -> impl FnMut(&[bool]) -> Vec<bool> + '_ {
    move |inputs| evaluate(original, inputs, &[]).expect("oracle inputs match the circuit")
}

fn dims(netlist: &Netlist) -> (u32, u32) {
    (netlist.inputs().len() as u32, netlist.key_inputs().len() as u32)
}

fn use_table_engine(netlist: &Netlist, caps: &AttackCaps) -> Result<bool, AttackError> {
    let (n, l) = dims(netlist);
    Ok(match caps.strategy {
        DipStrategy::Auto => n < 64 && l < 64 && n + l <= caps.budget_bits,
        DipStrategy::Greedy => {
            if n >= 64 || l >= 64 || n + l > caps.budget_bits {
                return Err(SimError::BudgetExceeded {
                    needed: n + l,
                    budget: caps.budget_bits.min(63),
                }
                .into());
            }
            true
        }
        DipStrategy::Solver => false,
    })
}

/// Recover a key for the locked circuit by querying `oracle`, which must
/// behave like the original circuit (inputs and outputs in port order).
/// Returns a trace even when a cap stops the run early; errors are reserved
/// for oracles inconsistent with every key and for unsatisfiable resource
/// demands.
pub fn sat_attack(
    encrypted: &EncryptedNetlist,
    oracle: impl FnMut(&[bool]) -> Vec<bool>,
    caps: &AttackCaps,
) -> Result<SatAttackTrace, AttackError> {
    let netlist = &encrypted.netlist;
    if use_table_engine(netlist, caps)? {
        table_sat_attack(netlist, oracle, caps)
    } else {
        solver_sat_attack(netlist, oracle, caps)
    }
}

fn partial(dips: Vec<DipRecord>, why: Termination) -> SatAttackTrace {
    let iterations = dips.len() as u64;
    SatAttackTrace { dips, iterations, queries: iterations, recovered_key: None, terminated: why }
}

fn finished(dips: Vec<DipRecord>, key: KeyAssignment) -> SatAttackTrace {
    let iterations = dips.len() as u64;
    SatAttackTrace {
        dips,
        iterations,
        queries: iterations + 1,
        recovered_key: Some(key),
        terminated: Termination::KeyFound,
    }
}

/// Exhaustive disagreement grid between the locked circuit and the oracle,
/// plus the set of keys not yet ruled out.
struct TableEngine {
    n: u32,
    l: u32,
    num_inputs: u64,
    num_keys: u64,
    /// Bit (i << l) | k set iff the locked circuit under key k disagrees with
    /// the oracle on input i.
    table: Bits,
    alive: Bits,
    oracle_words: Vec<Vec<u64>>,
}

impl TableEngine {
    fn build(
        netlist: &Netlist,
        mut oracle: impl FnMut(&[bool]) -> Vec<bool>,
    ) -> Result<Self, AttackError> {
        let (n, l) = dims(netlist);
        let num_inputs = 1u64 << n;
        let num_keys = 1u64 << l;
        let blocks = num_inputs.div_ceil(64);
        let lane_mask = if n >= 6 { !0u64 } else { (1u64 << num_inputs) - 1 };
        let num_outputs = netlist.outputs().len();

        let mut oracle_words = vec![vec![0u64; num_outputs]; blocks as usize];
        for i in 0..num_inputs {
            let bits: Vec<bool> = (0..n).map(|b| i >> b & 1 == 1).collect();
            let out = oracle(&bits);
            if out.len() != num_outputs {
                return Err(AttackError::InconsistentOracle);
            }
            for (o, &bit) in out.iter().enumerate() {
                if bit {
                    oracle_words[(i >> 6) as usize][o] |= 1u64 << (i & 63);
                }
            }
        }

        let mut table = Bits::zeros(num_inputs << l);
        let mut input_words = vec![0u64; n as usize];
        for k in 0..num_keys {
            let key_bits: Vec<bool> = (0..l).map(|b| k >> b & 1 == 1).collect();
            for block in 0..blocks {
                for (w, word) in input_words.iter_mut().enumerate() {
                    *word = counting_word(w as u32, block);
                }
                let outs = evaluate_batch(netlist, &input_words, &key_bits)
                    .map_err(AttackError::Sim)?;
                let mut mismatch = 0u64;
                for (o, &word) in outs.iter().enumerate() {
                    mismatch |= word ^ oracle_words[block as usize][o];
                }
                mismatch &= lane_mask;
                while mismatch != 0 {
                    let lane = mismatch.trailing_zeros() as u64;
                    mismatch &= mismatch - 1;
                    table.set((block << 6 | lane) << l | k, true);
                }
            }
        }

        let mut alive = Bits::zeros(num_keys);
        for k in 0..num_keys {
            alive.set(k, true);
        }
        Ok(TableEngine { n, l, num_inputs, num_keys, table, alive, oracle_words })
    }

    /// Input with the most still-alive disagreeing keys; ties go to the
    /// lowest input index.
    fn best_row(&self) -> (u64, u64) {
        let mut best_i = 0u64;
        let mut best_cov = 0u64;
        if self.l >= 6 {
            let row_words = 1usize << (self.l - 6);
            let table = self.table.words();
            let alive = self.alive.words();
            for i in 0..self.num_inputs {
                let base = (i as usize) << (self.l - 6);
                let mut cov = 0u64;
                for w in 0..row_words {
                    cov += (table[base + w] & alive[w]).count_ones() as u64;
                }
                if cov > best_cov {
                    best_cov = cov;
                    best_i = i;
                }
            }
        } else {
            for i in 0..self.num_inputs {
                let mut cov = 0u64;
                for k in 0..self.num_keys {
                    if self.alive.get(k) && self.table.get(i << self.l | k) {
                        cov += 1;
                    }
                }
                if cov > best_cov {
                    best_cov = cov;
                    best_i = i;
                }
            }
        }
        (best_i, best_cov)
    }

    fn eliminate(&mut self, input: u64) {
        if self.l >= 6 {
            let row_words = 1usize << (self.l - 6);
            let base = (input as usize) << (self.l - 6);
            let row: Vec<u64> = self.table.words()[base..base + row_words].to_vec();
            for (word, &mask) in self.alive.words_mut().iter_mut().zip(&row) {
                *word &= !mask;
            }
        } else {
            for k in 0..self.num_keys {
                if self.table.get(input << self.l | k) {
                    self.alive.set(k, false);
                }
            }
        }
    }

    fn lowest_alive(&self) -> Option<u64> {
        (0..self.num_keys).find(|&k| self.alive.get(k))
    }

    fn dip_bits(&self, input: u64) -> Vec<bool> {
        (0..self.n).map(|b| input >> b & 1 == 1).collect()
    }

    fn oracle_out(&self, input: u64) -> Vec<bool> {
        self.oracle_words[(input >> 6) as usize]
            .iter()
            .map(|&word| word >> (input & 63) & 1 == 1)
            .collect()
    }
}

fn table_sat_attack(
    netlist: &Netlist,
    oracle: impl FnMut(&[bool]) -> Vec<bool>,
    caps: &AttackCaps,
) -> Result<SatAttackTrace, AttackError> {
    let started = Instant::now();
    let mut engine = TableEngine::build(netlist, oracle)?;
    let mut dips = Vec::new();
    loop {
        let (input, coverage) = engine.best_row();
        if coverage == 0 {
            return match engine.lowest_alive() {
                None => Err(AttackError::InconsistentOracle),
                Some(k) => Ok(finished(dips, KeyAssignment::from_u64(k, engine.l))),
            };
        }
        if let Some(cap) = caps.max_iterations {
            if dips.len() as u64 >= cap {
                return Ok(partial(dips, Termination::IterationCap));
            }
        }
        if let Some(limit) = caps.timeout {
            if started.elapsed() >= limit {
                return Ok(partial(dips, Termination::Timeout));
            }
        }
        dips.push(DipRecord {
            iter: dips.len() as u64 + 1,
            dip_bits: engine.dip_bits(input),
            oracle_out: engine.oracle_out(input),
            solver_decisions: 0,
        });
        engine.eliminate(input);
    }
}

/// Incremental two-copy difference formula over the locked circuit.
struct MiterEngine {
    sink: SolverSink,
    input_lits: Vec<i32>,
    key_a_lits: Vec<i32>,
    key_a_wires: Vec<Wire>,
    key_b_wires: Vec<Wire>,
    /// Assumption literal gating the difference clause; `None` when the two
    /// copies cannot differ on any output.
    gate: Option<Lit>,
    num_outputs: usize,
}

impl MiterEngine {
    fn build(netlist: &Netlist) -> Self {
        let mut sink = SolverSink::new();
        let fresh_lits = |sink: &mut SolverSink, count: usize| -> Vec<i32> {
            (0..count).map(|_| sink.fresh_var() as i32 + 1).collect()
        };
        let input_lits = fresh_lits(&mut sink, netlist.inputs().len());
        let key_a_lits = fresh_lits(&mut sink, netlist.key_inputs().len());
        let key_b_lits = fresh_lits(&mut sink, netlist.key_inputs().len());
        let wires = |lits: &[i32]| lits.iter().map(|&x| Wire::L(x)).collect::<Vec<_>>();
        let input_wires = wires(&input_lits);
        let key_a_wires = wires(&key_a_lits);
        let key_b_wires = wires(&key_b_lits);

        let out_a = encode_copy(netlist, &mut sink, &input_wires, &key_a_wires, |_, _| {});
        let out_b = encode_copy(netlist, &mut sink, &input_wires, &key_b_wires, |_, _| {});
        let mut diff = Vec::new();
        for (&a, &b) in out_a.iter().zip(&out_b) {
            match wire_neq(&mut sink, a, b) {
                Wire::Const(false) => {}
                Wire::Const(true) => {
                    let t = sink.fresh_var() as i32 + 1;
                    sink.emit(&[t]);
                    diff.push(t);
                }
                Wire::L(x) => diff.push(x),
            }
        }
        let gate = if diff.is_empty() {
            None
        } else {
            let d = sink.fresh_var() as i32 + 1;
            let mut clause = Vec::with_capacity(diff.len() + 1);
            clause.push(-d);
            clause.extend(diff);
            sink.emit(&clause);
            Some(sink.lit(d))
        };
        MiterEngine {
            sink,
            input_lits,
            key_a_lits,
            key_a_wires,
            key_b_wires,
            gate,
            num_outputs: netlist.outputs().len(),
        }
    }

    /// Next input on which two still-consistent keys disagree.
    fn next_dip(&mut self) -> Option<Vec<bool>> {
        let gate = self.gate?;
        match self.sink.solver.solve_with(&[gate]) {
            SatResult::Unsat => None,
            SatResult::Sat => {
                Some(self.input_lits.iter().map(|&x| self.sink.model(x)).collect())
            }
        }
    }

    /// Pin both key copies to reproduce an oracle observation.
    fn constrain(
        &mut self,
        netlist: &Netlist,
        dip: &[bool],
        out: &[bool],
    ) -> Result<(), AttackError> {
        if out.len() != self.num_outputs {
            return Err(AttackError::InconsistentOracle);
        }
        let fixed: Vec<Wire> = dip.iter().map(|&b| Wire::Const(b)).collect();
        let key_wires = [self.key_a_wires.clone(), self.key_b_wires.clone()];
        for keys in &key_wires {
            let outs = encode_copy(netlist, &mut self.sink, &fixed, keys, |_, _| {});
            for (&wire, &want) in outs.iter().zip(out) {
                match wire {
                    Wire::Const(b) if b == want => {}
                    Wire::Const(_) => return Err(AttackError::InconsistentOracle),
                    Wire::L(x) => self.sink.emit(&[if want { x } else { -x }]),
                }
            }
        }
        Ok(())
    }

    /// Any key consistent with every observation so far.
    fn consistent_key(&mut self) -> Option<KeyAssignment> {
        match self.sink.solver.solve() {
            SatResult::Unsat => None,
            SatResult::Sat => Some(KeyAssignment::new(
                self.key_a_lits.iter().map(|&x| self.sink.model(x)).collect(),
            )),
        }
    }

    fn decisions(&self) -> u64 {
        self.sink.solver.num_decisions()
    }
}

fn solver_sat_attack(
    netlist: &Netlist,
    mut oracle: impl FnMut(&[bool]) -> Vec<bool>,
    caps: &AttackCaps,
) -> Result<SatAttackTrace, AttackError> {
    let started = Instant::now();
    let mut engine = MiterEngine::build(netlist);
    let mut dips: Vec<DipRecord> = Vec::new();
    let mut decisions_seen = engine.decisions();
    loop {
        if let Some(cap) = caps.max_iterations {
            if dips.len() as u64 >= cap {
                return Ok(partial(dips, Termination::IterationCap));
            }
        }
        if let Some(limit) = caps.timeout {
            if started.elapsed() >= limit {
                return Ok(partial(dips, Termination::Timeout));
            }
        }
        match engine.next_dip() {
            None => break,
            Some(dip) => {
                let out = oracle(&dip);
                engine.constrain(netlist, &dip, &out)?;
                let now = engine.decisions();
                dips.push(DipRecord {
                    iter: dips.len() as u64 + 1,
                    dip_bits: dip,
                    oracle_out: out,
                    solver_decisions: now - decisions_seen,
                });
                decisions_seen = now;
            }
        }
    }
    match engine.consistent_key() {
        None => Err(AttackError::InconsistentOracle),
        Some(key) => Ok(finished(dips, key)),
    }
}

/// Result of the approximate attack: a key plus a statement of how wrong it
/// still is. `residual_samples` is `None` when the residual was measured
/// exhaustively; `exact` marks runs that eliminated every wrong key rather
/// than stopping at the threshold.
#[derive(Clone, Debug)]
pub struct AppSatOutcome {
    pub key: KeyAssignment,
    pub residual_error: Rational,
    pub residual_samples: Option<u64>,
    pub iterations: u64,
    pub exact: bool,
}

/// Approximate key recovery: run the elimination loop, but after each round
/// sample the current best candidate against the oracle and stop once its
/// observed error rate is at or below `error_threshold`. A threshold of zero
/// disables early stopping and degenerates to the exact attack.
pub fn appsat_attack(
    encrypted: &EncryptedNetlist,
    oracle: impl FnMut(&[bool]) -> Vec<bool>,
    error_threshold: f64,
    probe_samples: u64,
    caps: &AttackCaps,
) -> Result<AppSatOutcome, AttackError> {
    if !(0.0..1.0).contains(&error_threshold) {
        return Err(AttackError::BadThreshold(error_threshold));
    }
    let netlist = &encrypted.netlist;
    if use_table_engine(netlist, caps)? {
        table_appsat(netlist, oracle, error_threshold, probe_samples, caps)
    } else {
        solver_appsat(netlist, oracle, error_threshold, probe_samples, caps)
    }
}

fn table_appsat(
    netlist: &Netlist,
    oracle: impl FnMut(&[bool]) -> Vec<bool>,
    error_threshold: f64,
    probe_samples: u64,
    caps: &AttackCaps,
) -> Result<AppSatOutcome, AttackError> {
    let started = Instant::now();
    let mut engine = TableEngine::build(netlist, oracle)?;
    let mut rng = ChaCha12Rng::seed_from_u64(caps.seed);
    let probing = error_threshold > 0.0 && probe_samples > 0;
    let mut iterations = 0u64;
    let (key, exact) = loop {
        let (input, coverage) = engine.best_row();
        if coverage == 0 {
            let k = engine.lowest_alive().ok_or(AttackError::InconsistentOracle)?;
            break (k, true);
        }
        if caps.max_iterations.is_some_and(|cap| iterations >= cap)
            || caps.timeout.is_some_and(|limit| started.elapsed() >= limit)
        {
            return Err(AttackError::CapExceeded);
        }
        iterations += 1;
        engine.eliminate(input);
        if probing {
            let k = engine.lowest_alive().ok_or(AttackError::InconsistentOracle)?;
            let mut errors = 0u64;
            for _ in 0..probe_samples {
                let i = rng.gen_range(0..engine.num_inputs);
                if engine.table.get(i << engine.l | k) {
                    errors += 1;
                }
            }
            if errors as f64 / probe_samples as f64 <= error_threshold {
                break (k, false);
            }
        }
    };
    let mut errors = 0u64;
    for i in 0..engine.num_inputs {
        if engine.table.get(i << engine.l | key) {
            errors += 1;
        }
    }
    Ok(AppSatOutcome {
        key: KeyAssignment::from_u64(key, engine.l),
        residual_error: Rational::from_biguint(errors.into(), (1u64 << engine.n).into()),
        residual_samples: None,
        iterations,
        exact,
    })
}

fn solver_appsat(
    netlist: &Netlist,
    mut oracle: impl FnMut(&[bool]) -> Vec<bool>,
    error_threshold: f64,
    probe_samples: u64,
    caps: &AttackCaps,
) -> Result<AppSatOutcome, AttackError> {
    let started = Instant::now();
    let mut engine = MiterEngine::build(netlist);
    let mut rng = ChaCha12Rng::seed_from_u64(caps.seed);
    let probing = error_threshold > 0.0 && probe_samples > 0;
    let n = netlist.inputs().len() as u32;
    let mut iterations = 0u64;
    let random_input = |rng: &mut ChaCha12Rng| -> Vec<bool> {
        (0..n).map(|_| rng.gen()).collect()
    };
    let (key, exact) = loop {
        match engine.next_dip() {
            None => {
                let key = engine.consistent_key().ok_or(AttackError::InconsistentOracle)?;
                break (key, true);
            }
            Some(dip) => {
                if caps.max_iterations.is_some_and(|cap| iterations >= cap)
                    || caps.timeout.is_some_and(|limit| started.elapsed() >= limit)
                {
                    return Err(AttackError::CapExceeded);
                }
                iterations += 1;
                let out = oracle(&dip);
                engine.constrain(netlist, &dip, &out)?;
                if probing {
                    let key = engine.consistent_key().ok_or(AttackError::InconsistentOracle)?;
                    let mut errors = 0u64;
                    for _ in 0..probe_samples {
                        let input = random_input(&mut rng);
                        let got = evaluate(netlist, &input, key.bits()).map_err(AttackError::Sim)?;
                        if got != oracle(&input) {
                            errors += 1;
                        }
                    }
                    if errors as f64 / probe_samples as f64 <= error_threshold {
                        break (key, false);
                    }
                }
            }
        }
    };
    if n <= 20 {
        let mut errors = 0u64;
        for i in 0..1u64 << n {
            let input: Vec<bool> = (0..n).map(|b| i >> b & 1 == 1).collect();
            let got = evaluate(netlist, &input, key.bits()).map_err(AttackError::Sim)?;
            if got != oracle(&input) {
                errors += 1;
            }
        }
        Ok(AppSatOutcome {
            key,
            residual_error: Rational::from_biguint(errors.into(), (1u64 << n).into()),
            residual_samples: None,
            iterations,
            exact,
        })
    } else {
        let samples = probe_samples.max(1);
        let mut errors = 0u64;
        for _ in 0..samples {
            let input = random_input(&mut rng);
            let got = evaluate(netlist, &input, key.bits()).map_err(AttackError::Sim)?;
            if got != oracle(&input) {
                errors += 1;
            }
        }
        Ok(AppSatOutcome {
            key,
            residual_error: Rational::new(errors, samples),
            residual_samples: Some(samples),
            iterations,
            exact,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::netlist::parse_bench;
    use crate::schemes::{encrypt_sarlock, encrypt_sfll_hd};
    use crate::sim::keys_functionally_equivalent;

    const TRIPLE: &str =
        "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nt = OR(b, c)\ny = AND(a, t)\n";

    fn caps_with(strategy: DipStrategy) -> AttackCaps {
        AttackCaps { strategy, ..AttackCaps::default() }
    }

    #[test]
    fn sarlock_comparator_needs_one_round_per_wrong_key() {
        let nl = parse_bench(TRIPLE).unwrap();
        for strategy in [DipStrategy::Greedy, DipStrategy::Solver] {
            let enc = encrypt_sarlock(&nl, 3, &KeyAssignment::from_u64(5, 3), None).unwrap();
            let trace =
                sat_attack(&enc, circuit_oracle(&nl), &caps_with(strategy)).unwrap();
            assert_eq!(trace.terminated, Termination::KeyFound, "{strategy:?}");
            assert_eq!(trace.iterations, 7, "{strategy:?}");
            assert_eq!(trace.queries, 8, "{strategy:?}");
            let key = trace.recovered_key.unwrap();
            assert!(keys_functionally_equivalent(&nl, &enc.netlist, &key, 30).unwrap());
        }
    }

    #[test]
    fn recovered_keys_are_always_functionally_correct() {
        let nl = fixtures::c17();
        for strategy in [DipStrategy::Greedy, DipStrategy::Solver] {
            let enc = encrypt_sfll_hd(&nl, 4, 1, &KeyAssignment::from_u64(9, 4), None).unwrap();
            let trace = sat_attack(&enc, circuit_oracle(&nl), &caps_with(strategy)).unwrap();
            let key = trace.recovered_key.expect("run completed");
            assert!(keys_functionally_equivalent(&nl, &enc.netlist, &key, 30).unwrap());
        }
    }

    #[test]
    fn point_function_stripping_falls_in_one_table_round() {
        let nl = fixtures::layered(8, 40, 11);
        let enc = encrypt_sfll_hd(&nl, 6, 0, &KeyAssignment::from_u64(33, 6), None).unwrap();
        let trace =
            sat_attack(&enc, circuit_oracle(&nl), &caps_with(DipStrategy::Greedy)).unwrap();
        assert_eq!(trace.terminated, Termination::KeyFound);
        assert_eq!(trace.iterations, 1);
        assert_eq!(trace.recovered_key.unwrap().as_u64(), 33);
    }

    #[test]
    fn unkeyed_circuit_yields_a_trivial_key_without_dips() {
        let nl = parse_bench(TRIPLE).unwrap();
        let enc = EncryptedNetlist {
            netlist: nl.clone(),
            correct_key: KeyAssignment::new(vec![]),
            config: crate::schemes::SchemeConfig::Sarlock { l: 0 },
            protected_output: "y".into(),
            seed: 0,
            key_prefix: "keyinput".into(),
        };
        for strategy in [DipStrategy::Greedy, DipStrategy::Solver] {
            let trace =
                sat_attack(&enc, circuit_oracle(&nl), &caps_with(strategy)).unwrap();
            assert_eq!(trace.iterations, 0, "{strategy:?}");
            assert_eq!(trace.recovered_key.unwrap().len(), 0, "{strategy:?}");
        }
    }

    #[test]
    fn iteration_cap_returns_a_partial_trace() {
        let nl = parse_bench(TRIPLE).unwrap();
        let enc = encrypt_sarlock(&nl, 3, &KeyAssignment::from_u64(2, 3), None).unwrap();
        let caps = AttackCaps { max_iterations: Some(3), ..AttackCaps::default() };
        let trace = sat_attack(&enc, circuit_oracle(&nl), &caps).unwrap();
        assert_eq!(trace.terminated, Termination::IterationCap);
        assert_eq!(trace.iterations, 3);
        assert!(trace.recovered_key.is_none());
    }

    #[test]
    fn greedy_strategy_refuses_an_oversized_grid() {
        let nl = fixtures::layered(8, 30, 3);
        let enc = encrypt_sarlock(&nl, 8, &KeyAssignment::from_u64(200, 8), None).unwrap();
        let caps = AttackCaps {
            strategy: DipStrategy::Greedy,
            budget_bits: 10,
            ..AttackCaps::default()
        };
        let err = sat_attack(&enc, circuit_oracle(&nl), &caps).unwrap_err();
        assert!(matches!(err, AttackError::Sim(SimError::BudgetExceeded { .. })));
    }

    #[test]
    fn lying_oracle_is_reported_not_believed() {
        // Lying on every output of a two-output circuit leaves no key
        // consistent with the unprotected output, whichever engine runs.
        let nl = fixtures::c17();
        let enc = encrypt_sarlock(&nl, 3, &KeyAssignment::from_u64(1, 3), None).unwrap();
        for strategy in [DipStrategy::Greedy, DipStrategy::Solver] {
            let liar = |inputs: &[bool]| -> Vec<bool> {
                evaluate(&nl, inputs, &[]).unwrap().iter().map(|&b| !b).collect()
            };
            let err = sat_attack(&enc, liar, &caps_with(strategy)).unwrap_err();
            assert!(matches!(err, AttackError::InconsistentOracle), "{strategy:?}");
        }
    }

    #[test]
    fn trace_lines_are_one_json_object_per_dip() {
        let nl = parse_bench(TRIPLE).unwrap();
        let enc = encrypt_sarlock(&nl, 2, &KeyAssignment::from_u64(1, 2), None).unwrap();
        let trace =
            sat_attack(&enc, circuit_oracle(&nl), &AttackCaps::default()).unwrap();
        let jsonl = trace.to_jsonl();
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), trace.dips.len());
        for (line, dip) in lines.iter().zip(&trace.dips) {
            let parsed: DipRecord = serde_json::from_str(line).unwrap();
            assert_eq!(&parsed, dip);
        }
        let value: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert!(value["iter"].is_u64());
        assert!(value["dip_bits"].is_array());
        assert!(value["oracle_out"].is_array());
        assert!(value["solver_decisions"].is_u64());
    }

    #[test]
    fn approximate_stop_accepts_a_low_error_key() {
        let nl = fixtures::layered(10, 60, 7);
        let enc = encrypt_sarlock(&nl, 8, &KeyAssignment::from_u64(200, 8), None).unwrap();
        let outcome = appsat_attack(
            &enc,
            circuit_oracle(&nl),
            0.01,
            500,
            &AttackCaps::default(),
        )
        .unwrap();
        assert!(!outcome.exact);
        assert!(outcome.iterations < 10, "stopped after {}", outcome.iterations);
        assert_eq!(outcome.residual_error, Rational::new(4, 1024));
        assert!(outcome.residual_samples.is_none());
    }

    #[test]
    fn zero_threshold_degenerates_to_the_exact_attack() {
        let nl = parse_bench(TRIPLE).unwrap();
        let enc = encrypt_sarlock(&nl, 3, &KeyAssignment::from_u64(6, 3), None).unwrap();
        for strategy in [DipStrategy::Greedy, DipStrategy::Solver] {
            let outcome = appsat_attack(
                &enc,
                circuit_oracle(&nl),
                0.0,
                500,
                &caps_with(strategy),
            )
            .unwrap();
            assert!(outcome.exact, "{strategy:?}");
            assert!(outcome.residual_error.is_zero(), "{strategy:?}");
            assert_eq!(outcome.iterations, 7, "{strategy:?}");
        }
    }

    #[test]
    fn threshold_out_of_range_is_rejected() {
        let nl = parse_bench(TRIPLE).unwrap();
        let enc = encrypt_sarlock(&nl, 2, &KeyAssignment::from_u64(0, 2), None).unwrap();
        for bad in [-0.1, 1.0, 1.5] {
            let err = appsat_attack(&enc, circuit_oracle(&nl), bad, 10, &AttackCaps::default())
                .unwrap_err();
            assert!(matches!(err, AttackError::BadThreshold(_)));
        }
    }

    #[test]
    fn appsat_cap_is_an_error_not_a_partial_answer() {
        let nl = parse_bench(TRIPLE).unwrap();
        let enc = encrypt_sarlock(&nl, 3, &KeyAssignment::from_u64(3, 3), None).unwrap();
        let caps = AttackCaps { max_iterations: Some(2), ..AttackCaps::default() };
        let err = appsat_attack(&enc, circuit_oracle(&nl), 0.0, 10, &caps).unwrap_err();
        assert!(matches!(err, AttackError::CapExceeded));
    }

    #[test]
    fn solver_decisions_are_attributed_to_rounds() {
        let nl = fixtures::c17();
        let enc = encrypt_sarlock(&nl, 3, &KeyAssignment::from_u64(4, 3), None).unwrap();
        let trace =
            sat_attack(&enc, circuit_oracle(&nl), &caps_with(DipStrategy::Solver)).unwrap();
        assert!(!trace.dips.is_empty());
        assert_eq!(trace.dips.iter().map(|d| d.iter).collect::<Vec<_>>(), (1..=trace.iterations).collect::<Vec<_>>());
    }
}
