//! Circuit simulation and the input×key error table.
//!
//! The error table is the ground truth every other measurement is checked
//! against: bit (i, k) is set iff the locked circuit disagrees with the
//! original on input i under key k. Exhaustive construction is budgeted at
//! n + l ≤ 26 bits (an 8 MiB table) by default; sampled estimators cover
//! everything beyond that.

use crate::bits::Bits;
use crate::netlist::{GateKind, Netlist};
use crate::rational::Rational;
use crate::schemes::{EncryptedNetlist, KeyAssignment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on n + l for exhaustive error tables (2^26 bits = 8 MiB).
pub const DEFAULT_BUDGET_BITS: u32 = 26;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{what}: expected {expected} bits, got {got}")]
    WidthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("exhaustive pass needs 2^{needed} table bits, budget is 2^{budget} (raise the budget or sample)")]
    BudgetExceeded { needed: u32, budget: u32 },
    #[error("circuits are not comparable: {0}")]
    PortMismatch(String),
    #[error("no incorrect keys to measure (key width is zero)")]
    NoIncorrectKeys,
    #[error("width {0} exceeds the 63-bit pattern limit for exhaustive passes")]
    PatternTooWide(usize),
}

trait LogicWord: Copy {
    fn from_bool(b: bool) -> Self;
    fn and(self, o: Self) -> Self;
    fn or(self, o: Self) -> Self;
    fn xor(self, o: Self) -> Self;
    fn not(self) -> Self;
}

impl LogicWord for bool {
    fn from_bool(b: bool) -> Self {
        b
    }
    fn and(self, o: Self) -> Self {
        self && o
    }
    fn or(self, o: Self) -> Self {
        self || o
    }
    fn xor(self, o: Self) -> Self {
        self != o
    }
    fn not(self) -> Self {
        !self
    }
}

impl LogicWord for u64 {
    fn from_bool(b: bool) -> Self {
        if b {
            !0
        } else {
            0
        }
    }
    fn and(self, o: Self) -> Self {
        self & o
    }
    fn or(self, o: Self) -> Self {
        self | o
    }
    fn xor(self, o: Self) -> Self {
        self ^ o
    }
    fn not(self) -> Self {
        !self
    }
}

fn eval_words<W: LogicWord>(netlist: &Netlist, inputs: &[W], keys: &[W]) -> Vec<W> {
    let mut nets = vec![W::from_bool(false); netlist.net_count()];
    for (&net, &value) in netlist.inputs().iter().zip(inputs) {
        nets[net.index()] = value;
    }
    for (&net, &value) in netlist.key_inputs().iter().zip(keys) {
        nets[net.index()] = value;
    }
    for &gi in netlist.topo_order() {
        let gate = &netlist.gates()[gi];
        let value = match gate.kind {
            GateKind::Const0 => W::from_bool(false),
            GateKind::Const1 => W::from_bool(true),
            GateKind::Not => nets[gate.inputs[0].index()].not(),
            GateKind::Buf => nets[gate.inputs[0].index()],
            GateKind::And | GateKind::Nand => {
                let mut acc = nets[gate.inputs[0].index()];
                for &i in &gate.inputs[1..] {
                    acc = acc.and(nets[i.index()]);
                }
                if gate.kind == GateKind::Nand {
                    acc.not()
                } else {
                    acc
                }
            }
            GateKind::Or | GateKind::Nor => {
                let mut acc = nets[gate.inputs[0].index()];
                for &i in &gate.inputs[1..] {
                    acc = acc.or(nets[i.index()]);
                }
                if gate.kind == GateKind::Nor {
                    acc.not()
                } else {
                    acc
                }
            }
            GateKind::Xor | GateKind::Xnor => {
                let mut acc = nets[gate.inputs[0].index()];
                for &i in &gate.inputs[1..] {
                    acc = acc.xor(nets[i.index()]);
                }
                if gate.kind == GateKind::Xnor {
                    acc.not()
                } else {
                    acc
                }
            }
        };
        nets[gate.output.index()] = value;
    }
    netlist.outputs().iter().map(|&o| nets[o.index()]).collect()
}

/// 64-lane evaluation with one gate-driven net forced to toggle — the fault
/// model behind impact-guided key-gate placement.
pub(crate) fn eval_words_toggled(
    netlist: &Netlist,
    inputs: &[u64],
    toggled: Option<crate::netlist::NetId>,
) -> Vec<u64> {
    let mut nets = vec![0u64; netlist.net_count()];
    for (&net, &value) in netlist.inputs().iter().zip(inputs) {
        nets[net.index()] = value;
    }
    for &gi in netlist.topo_order() {
        let gate = &netlist.gates()[gi];
        let ins: Vec<u64> = gate.inputs.iter().map(|i| nets[i.index()]).collect();
        let value = match gate.kind {
            GateKind::Const0 => 0,
            GateKind::Const1 => !0,
            GateKind::Not => !ins[0],
            GateKind::Buf => ins[0],
            GateKind::And => ins.iter().fold(!0u64, |a, &b| a & b),
            GateKind::Nand => !ins.iter().fold(!0u64, |a, &b| a & b),
            GateKind::Or => ins.iter().fold(0u64, |a, &b| a | b),
            GateKind::Nor => !ins.iter().fold(0u64, |a, &b| a | b),
            GateKind::Xor => ins.iter().fold(0u64, |a, &b| a ^ b),
            GateKind::Xnor => !ins.iter().fold(0u64, |a, &b| a ^ b),
        };
        nets[gate.output.index()] = if toggled == Some(gate.output) { !value } else { value };
    }
    netlist.outputs().iter().map(|&o| nets[o.index()]).collect()
}

fn check_widths(netlist: &Netlist, inputs: usize, keys: usize) -> Result<(), SimError> {
    if inputs != netlist.inputs().len() {
        return Err(SimError::WidthMismatch {
            what: "input assignment",
            expected: netlist.inputs().len(),
            got: inputs,
        });
    }
    if keys != netlist.key_inputs().len() {
        return Err(SimError::WidthMismatch {
            what: "key assignment",
            expected: netlist.key_inputs().len(),
            got: keys,
        });
    }
    Ok(())
}

/// Evaluate one input/key assignment. Output order matches the port order.
pub fn evaluate(netlist: &Netlist, inputs: &[bool], keys: &[bool]) -> Result<Vec<bool>, SimError> {
    check_widths(netlist, inputs.len(), keys.len())?;
    Ok(eval_words(netlist, inputs, keys))
}

/// Evaluate 64 input patterns at once. `inputs[p]` packs the value of input
/// port p across the 64 lanes; the key is broadcast to every lane. Bit j of
/// each returned word is the output for lane j.
pub fn evaluate_batch(
    netlist: &Netlist,
    inputs: &[u64],
    keys: &[bool],
) -> Result<Vec<u64>, SimError> {
    check_widths(netlist, inputs.len(), keys.len())?;
    let key_words: Vec<u64> = keys.iter().map(|&b| u64::from_bool(b)).collect();
    Ok(eval_words(netlist, inputs, &key_words))
}

/// Value of input-port bit `bit` across the 64 lanes of pattern block `block`
/// when lanes enumerate patterns `block*64 .. block*64+63`.
#[inline]
pub(crate) fn counting_word(bit: u32, block: u64) -> u64 {
    match bit {
        0 => 0xAAAA_AAAA_AAAA_AAAA,
        1 => 0xCCCC_CCCC_CCCC_CCCC,
        2 => 0xF0F0_F0F0_F0F0_F0F0,
        3 => 0xFF00_FF00_FF00_FF00,
        4 => 0xFFFF_0000_FFFF_0000,
        5 => 0xFFFF_FFFF_0000_0000,
        _ => {
            if block >> (bit - 6) & 1 == 1 {
                !0
            } else {
                0
            }
        }
    }
}

fn u64_to_bits(value: u64, width: u32) -> Vec<bool> {
    (0..width).map(|b| value >> b & 1 == 1).collect()
}

/// Dense 2^n × 2^l bit matrix of disagreements between a locked circuit and
/// its original. Rows are input patterns, columns are keys; the correct-key
/// column is all-zero by the defining identity of a locking scheme.
#[derive(Clone, Debug)]
pub struct ErrorTable {
    n: u32,
    l: u32,
    k_star: u64,
    bits: Bits,
}

#[derive(Serialize, Deserialize)]
struct TableHeader {
    n: u32,
    l: u32,
    k_star: u64,
}

impl ErrorTable {
    /// Build from an explicit disagreement predicate over (input, key).
    pub fn from_fn(
        n: u32,
        l: u32,
        k_star: u64,
        budget_bits: u32,
        mut differs: impl FnMut(u64, u64) -> bool,
    ) -> Result<Self, SimError> {
        if n + l > budget_bits {
            return Err(SimError::BudgetExceeded { needed: n + l, budget: budget_bits });
        }
        if n >= 64 || l >= 64 {
            return Err(SimError::PatternTooWide(n.max(l) as usize));
        }
        let mut bits = Bits::zeros(1u64 << (n + l));
        for i in 0..1u64 << n {
            for k in 0..1u64 << l {
                if differs(i, k) {
                    bits.set(i << l | k, true);
                }
            }
        }
        Ok(ErrorTable { n, l, k_star, bits })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn k_star(&self) -> u64 {
        self.k_star
    }

    #[inline]
    pub fn bit(&self, input: u64, key: u64) -> bool {
        self.bits.get(input << self.l | key)
    }

    fn set(&mut self, input: u64, key: u64) {
        self.bits.set(input << self.l | key, true);
    }

    /// Total number of disagreeing (input, key) entries.
    pub fn error_count(&self) -> u64 {
        self.bits.count_ones()
    }

    /// Errors per key column, indexed by key value.
    pub fn column_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; 1 << self.l];
        let mask = (1u64 << self.l) - 1;
        for (wi, &word) in self.bits.words().iter().enumerate() {
            let mut rem = word;
            while rem != 0 {
                let bit = rem.trailing_zeros() as u64;
                rem &= rem - 1;
                counts[(((wi as u64) << 6 | bit) & mask) as usize] += 1;
            }
        }
        counts
    }

    /// Visit every key k with an error on input row `i`.
    pub fn for_each_error_in_row(&self, input: u64, mut f: impl FnMut(u64)) {
        let start = input << self.l;
        let end = start + (1u64 << self.l);
        let words = self.bits.words();
        let mut idx = start;
        while idx < end {
            let word = words[(idx >> 6) as usize];
            let lo = idx & 63;
            let hi = (end - (idx & !63)).min(64);
            let mask = if hi == 64 { !0u64 } else { (1u64 << hi) - 1 } & !((1u64 << lo) - 1);
            let mut rem = word & mask;
            while rem != 0 {
                let bit = rem.trailing_zeros() as u64;
                rem &= rem - 1;
                f(((idx & !63) | bit) - start);
            }
            idx = (idx & !63) + 64;
        }
    }

    /// Fraction of all (input, key) pairs that disagree: the exhaustive E_FC.
    pub fn efc(&self) -> Rational {
        Rational::from_biguint(self.error_count().into(), num::BigUint::from(1u8) << (self.n + self.l))
    }

    /// Minimum per-key error rate over incorrect keys: the exhaustive E_APP.
    /// A key with an all-zero column is functionally correct and makes this 0.
    pub fn eapp(&self) -> Result<Rational, SimError> {
        if self.l == 0 {
            return Err(SimError::NoIncorrectKeys);
        }
        let counts = self.column_counts();
        let min = counts
            .iter()
            .enumerate()
            .filter(|&(k, _)| k as u64 != self.k_star)
            .map(|(_, &c)| c)
            .min()
            .unwrap();
        Ok(Rational::from_biguint(min.into(), num::BigUint::from(1u8) << self.n))
    }

    /// Serialized form: a small JSON header plus the raw table words,
    /// row-major, little-endian.
    pub fn export(&self) -> (String, Vec<u8>) {
        let header = serde_json::to_string_pretty(&TableHeader {
            n: self.n,
            l: self.l,
            k_star: self.k_star,
        })
        .expect("table header serializes");
        let mut bytes = Vec::with_capacity(self.bits.words().len() * 8);
        for word in self.bits.words() {
            bytes.extend_from_slice(&word.to_le_bytes());
        }
        (header, bytes)
    }

    pub fn import(header: &str, bytes: &[u8]) -> Result<Self, String> {
        let header: TableHeader = serde_json::from_str(header).map_err(|e| e.to_string())?;
        let len = 1u64 << (header.n + header.l);
        let expect_words = len.div_ceil(64) as usize;
        if bytes.len() != expect_words * 8 {
            return Err(format!(
                "table bitmap has {} bytes, expected {}",
                bytes.len(),
                expect_words * 8
            ));
        }
        let words: Vec<u64> = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ErrorTable {
            n: header.n,
            l: header.l,
            k_star: header.k_star,
            bits: Bits::from_words(len, words),
        })
    }
}

pub(crate) fn comparable(original: &Netlist, locked: &Netlist) -> Result<(), SimError> {
    let orig_inputs: Vec<&str> = original.input_names().collect();
    let locked_inputs: Vec<&str> = locked.input_names().collect();
    if orig_inputs != locked_inputs {
        return Err(SimError::PortMismatch(format!(
            "data inputs differ: {orig_inputs:?} vs {locked_inputs:?}"
        )));
    }
    let orig_outputs: Vec<&str> = original.output_names().collect();
    let locked_outputs: Vec<&str> = locked.output_names().collect();
    if orig_outputs != locked_outputs {
        return Err(SimError::PortMismatch(format!(
            "outputs differ: {orig_outputs:?} vs {locked_outputs:?}"
        )));
    }
    if !original.key_inputs().is_empty() {
        return Err(SimError::PortMismatch("reference circuit has key inputs".into()));
    }
    Ok(())
}

/// Exhaustively compare a locked netlist against its original for every
/// (input, key) pair. This is the simulation route; it never consults the
/// closed-form models.
pub fn build_error_table(
    original: &Netlist,
    encrypted: &EncryptedNetlist,
    budget_bits: u32,
) -> Result<ErrorTable, SimError> {
    build_error_table_raw(original, &encrypted.netlist, &encrypted.correct_key, budget_bits)
}

/// Same as [`build_error_table`] but for a bare netlist + key, as parsed back
/// from a `.bench` file and its key sidecar.
pub fn build_error_table_raw(
    original: &Netlist,
    locked: &Netlist,
    correct_key: &KeyAssignment,
    budget_bits: u32,
) -> Result<ErrorTable, SimError> {
    comparable(original, locked)?;
    let n = original.inputs().len() as u32;
    let l = locked.key_inputs().len() as u32;
    if correct_key.len() != l as usize {
        return Err(SimError::WidthMismatch {
            what: "correct key",
            expected: l as usize,
            got: correct_key.len(),
        });
    }
    if n + l > budget_bits {
        return Err(SimError::BudgetExceeded { needed: n + l, budget: budget_bits });
    }
    if n >= 64 || l >= 64 {
        return Err(SimError::PatternTooWide(n.max(l) as usize));
    }

    let blocks = (1u64 << n).div_ceil(64);
    let lane_mask = if n >= 6 { !0u64 } else { (1u64 << (1u64 << n)) - 1 };
    let mut original_outputs: Vec<Vec<u64>> = Vec::with_capacity(blocks as usize);
    let mut input_words = vec![0u64; n as usize];
    for block in 0..blocks {
        for (w, word) in input_words.iter_mut().enumerate() {
            *word = counting_word(w as u32, block);
        }
        original_outputs.push(eval_words(original, &input_words, &[]));
    }

    let mut table = ErrorTable {
        n,
        l,
        k_star: correct_key.as_u64(),
        bits: Bits::zeros(1u64 << (n + l)),
    };
    for k in 0..1u64 << l {
        let key_words: Vec<u64> =
            (0..l).map(|b| if k >> b & 1 == 1 { !0u64 } else { 0 }).collect();
        for block in 0..blocks {
            for (w, word) in input_words.iter_mut().enumerate() {
                *word = counting_word(w as u32, block);
            }
            let locked_out = eval_words(locked, &input_words, &key_words);
            let mut mismatch = 0u64;
            for (o, &word) in locked_out.iter().enumerate() {
                mismatch |= word ^ original_outputs[block as usize][o];
            }
            mismatch &= lane_mask;
            while mismatch != 0 {
                let lane = mismatch.trailing_zeros() as u64;
                mismatch &= mismatch - 1;
                table.set(block << 6 | lane, k);
            }
        }
    }
    Ok(table)
}

/// Error table of an SFLL-HD lock projected onto its l cone bits (rows are
/// cone values, so the table is 2^l × 2^l). The flip depends only on the cone,
/// so the full table is this one with every row replicated 2^(n-l) times;
/// per-column rates and DIP structure are preserved. This is what makes
/// key-size sweeps up to l ≈ 14 tractable.
pub fn sfll_hd_projected_table(
    l: u32,
    h: u32,
    k_star: u64,
    budget_bits: u32,
) -> Result<ErrorTable, SimError> {
    ErrorTable::from_fn(l, l, k_star, budget_bits, |c, k| {
        let strip = (c ^ k_star).count_ones() == h;
        let restore = (c ^ k).count_ones() == h;
        strip != restore
    })
}

/// Check f'(i, k) ≡ f(i) for every input — the defining identity of a correct
/// key. Exhaustive, so n is budget-limited.
pub fn keys_functionally_equivalent(
    original: &Netlist,
    locked: &Netlist,
    key: &KeyAssignment,
    budget_bits: u32,
) -> Result<bool, SimError> {
    comparable(original, locked)?;
    let n = original.inputs().len() as u32;
    if n > budget_bits {
        return Err(SimError::BudgetExceeded { needed: n, budget: budget_bits });
    }
    if n >= 64 {
        return Err(SimError::PatternTooWide(n as usize));
    }
    let key_words: Vec<u64> = key.bits().iter().map(|&b| if b { !0u64 } else { 0 }).collect();
    let blocks = (1u64 << n).div_ceil(64);
    let lane_mask = if n >= 6 { !0u64 } else { (1u64 << (1u64 << n)) - 1 };
    let mut input_words = vec![0u64; n as usize];
    for block in 0..blocks {
        for (w, word) in input_words.iter_mut().enumerate() {
            *word = counting_word(w as u32, block);
        }
        let orig = eval_words(original, &input_words, &[]);
        let locked_out = eval_words(locked, &input_words, &key_words);
        for (o, &word) in locked_out.iter().enumerate() {
            if (word ^ orig[o]) & lane_mask != 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A sampled measurement with its provenance baked in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub value: Rational,
    /// Samples behind `value` (per key, for the per-key protocols).
    pub samples: u64,
    pub seed: u64,
    /// Binomial standard error from the sampled proportion itself.
    pub stderr: f64,
}

fn random_bits(rng: &mut ChaCha12Rng, width: usize) -> Vec<bool> {
    (0..width).map(|_| rng.gen::<bool>()).collect()
}

/// Monte-Carlo E_FC: fraction of uniform random (input, key) pairs where the
/// locked circuit disagrees with the original.
pub fn estimate_efc(
    original: &Netlist,
    locked: &Netlist,
    samples: u64,
    seed: u64,
) -> Result<EmpiricalEstimate, SimError> {
    comparable(original, locked)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = original.inputs().len();
    let l = locked.key_inputs().len();
    let mut mismatches = 0u64;
    for _ in 0..samples {
        let input = random_bits(&mut rng, n);
        let key = random_bits(&mut rng, l);
        let orig = eval_words(original, &input, &[]);
        let lock = eval_words(locked, &input, &key);
        if orig != lock {
            mismatches += 1;
        }
    }
    let p = mismatches as f64 / samples as f64;
    Ok(EmpiricalEstimate {
        value: Rational::new(mismatches, samples),
        samples,
        seed,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
    })
}

/// Sampled E_APP: minimum per-key error rate over sampled incorrect keys.
/// Keys are drawn without replacement; if `key_samples` covers all 2^l − 1
/// incorrect keys they are simply enumerated, and if `samples_per_key` covers
/// all 2^n inputs the per-key rate is computed exhaustively — so with both
/// saturated this equals the exhaustive E_APP.
pub fn estimate_eapp(
    original: &Netlist,
    locked: &Netlist,
    correct_key: &KeyAssignment,
    samples_per_key: u64,
    key_samples: u64,
    seed: u64,
) -> Result<EmpiricalEstimate, SimError> {
    comparable(original, locked)?;
    let n = original.inputs().len();
    let l = locked.key_inputs().len();
    if l == 0 {
        return Err(SimError::NoIncorrectKeys);
    }
    if correct_key.len() != l {
        return Err(SimError::WidthMismatch {
            what: "correct key",
            expected: l,
            got: correct_key.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let keys: Vec<Vec<bool>> = if l < 63 && key_samples >= (1u64 << l) - 1 {
        (0..1u64 << l)
            .filter(|&k| k != correct_key.as_u64())
            .map(|k| u64_to_bits(k, l as u32))
            .collect()
    } else {
        let mut seen = std::collections::HashSet::new();
        let mut keys = Vec::new();
        while keys.len() < key_samples as usize {
            let k = random_bits(&mut rng, l);
            if k == correct_key.bits() || !seen.insert(k.clone()) {
                continue;
            }
            keys.push(k);
        }
        keys
    };

    let exhaust_inputs = n < 63 && samples_per_key >= 1u64 << n;
    let mut best: Option<(u64, u64)> = None; // (mismatches, trials)
    for key in &keys {
        let (mismatches, trials) = if exhaust_inputs {
            let mut m = 0u64;
            for i in 0..1u64 << n {
                let input = u64_to_bits(i, n as u32);
                if eval_words(original, &input, &[]) != eval_words(locked, &input, key) {
                    m += 1;
                }
            }
            (m, 1u64 << n)
        } else {
            let mut m = 0u64;
            for _ in 0..samples_per_key {
                let input = random_bits(&mut rng, n);
                if eval_words(original, &input, &[]) != eval_words(locked, &input, key) {
                    m += 1;
                }
            }
            (m, samples_per_key)
        };
        let better = match &best {
            None => true,
            Some((bm, bt)) => (mismatches as u128) * (*bt as u128) < (*bm as u128) * (trials as u128),
        };
        if better {
            best = Some((mismatches, trials));
        }
    }
    let (mismatches, trials) = best.expect("at least one incorrect key sampled");
    let p = mismatches as f64 / trials as f64;
    Ok(EmpiricalEstimate {
        value: Rational::new(mismatches, trials),
        samples: trials,
        seed,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}
