//! Minimum distinguishing-input estimation as a set-cover problem: every
//! wrong key that errs somewhere must be eliminated by at least one chosen
//! input pattern, so the smallest set of eliminating patterns is a minimum
//! cover of the wrong-key universe by input rows.

use crate::attacks::AttackError;
use crate::rational::{binomial, Rational};
use crate::sim::ErrorTable;
use num::{BigUint, One};

/// A set-cover instance over key values: `universe` is every key that must be
/// eliminated, and each set is an input pattern together with the keys it
/// eliminates. Sets are ordered by input pattern and rows that eliminate
/// nothing are dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverInstance {
    universe: Vec<u64>,
    sets: Vec<(u64, Vec<u64>)>,
}

impl CoverInstance {
    /// Normalize and validate parts: the universe is sorted and deduplicated,
    /// each set keeps only universe keys (sorted, deduplicated), empty sets
    /// are dropped, and every universe key must appear in some set.
    pub fn from_parts(
        universe: Vec<u64>,
        sets: Vec<(u64, Vec<u64>)>,
    ) -> Result<Self, AttackError> {
        let mut universe = universe;
        universe.sort_unstable();
        universe.dedup();
        let mut clean: Vec<(u64, Vec<u64>)> = Vec::with_capacity(sets.len());
        for (input, mut keys) in sets {
            keys.sort_unstable();
            keys.dedup();
            keys.retain(|k| universe.binary_search(k).is_ok());
            if !keys.is_empty() {
                clean.push((input, keys));
            }
        }
        clean.sort_by_key(|&(input, _)| input);
        let mut covered = vec![false; universe.len()];
        for (_, keys) in &clean {
            for k in keys {
                covered[universe.binary_search(k).unwrap()] = true;
            }
        }
        if let Some(pos) = covered.iter().position(|&c| !c) {
            return Err(AttackError::Uncoverable(universe[pos]));
        }
        Ok(CoverInstance { universe, sets: clean })
    }

    pub fn universe(&self) -> &[u64] {
        &self.universe
    }

    pub fn sets(&self) -> &[(u64, Vec<u64>)] {
        &self.sets
    }

    /// Plain-text export: an `elements:` line listing the universe, then one
    /// `set <input>:` line per input pattern listing the keys it eliminates,
    /// all space-separated decimal values.
    pub fn to_text(&self) -> String {
        let join = |vals: &[u64]| {
            vals.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
        };
        let mut out = format!("elements: {}\n", join(&self.universe));
        for (input, keys) in &self.sets {
            out.push_str(&format!("set {input}: {}\n", join(keys)));
        }
        out
    }
}

/// Cover instance of an error table: the universe is every key that errs on
/// at least one input (keys functionally identical to the correct one need no
/// eliminating), and input i's set is the keys erring on i.
pub fn build_cover_instance(table: &ErrorTable) -> CoverInstance {
    let num_keys = 1u64 << table.l();
    let mut erring = vec![false; num_keys as usize];
    let mut sets = Vec::new();
    for input in 0..1u64 << table.n() {
        let mut keys = Vec::new();
        table.for_each_error_in_row(input, |k| {
            keys.push(k);
            erring[k as usize] = true;
        });
        if !keys.is_empty() {
            sets.push((input, keys));
        }
    }
    let universe: Vec<u64> =
        (0..num_keys).filter(|&k| erring[k as usize]).collect();
    CoverInstance { universe, sets }
}

fn position(universe: &[u64], key: u64) -> usize {
    universe.binary_search(&key).expect("set keys lie in the universe")
}

/// Greedy cover: repeatedly take the input eliminating the most not-yet
/// covered keys, ties to the lowest input pattern. Returns the number of
/// patterns and the patterns themselves in pick order.
pub fn greedy_min_dips(instance: &CoverInstance) -> Result<(u64, Vec<u64>), AttackError> {
    let universe = instance.universe();
    let mut covered = vec![false; universe.len()];
    let mut remaining = universe.len();
    let mut chosen = Vec::new();
    while remaining > 0 {
        let mut best_gain = 0usize;
        let mut best: Option<usize> = None;
        for (si, (_, keys)) in instance.sets().iter().enumerate() {
            let gain = keys.iter().filter(|&&k| !covered[position(universe, k)]).count();
            if gain > best_gain {
                best_gain = gain;
                best = Some(si);
            }
        }
        match best {
            None => {
                let missed = covered.iter().position(|&c| !c).expect("remaining > 0");
                return Err(AttackError::Uncoverable(universe[missed]));
            }
            Some(si) => {
                let (input, keys) = &instance.sets()[si];
                for k in keys {
                    let p = position(universe, *k);
                    if !covered[p] {
                        covered[p] = true;
                        remaining -= 1;
                    }
                }
                chosen.push(*input);
            }
        }
    }
    Ok((chosen.len() as u64, chosen))
}

const EXACT_UNIVERSE_MAX: usize = 20;

/// Provably minimum cover size by branch and bound, for universes of at most
/// 20 keys. Branches on an uncovered key with the fewest candidate sets;
/// identical and strictly dominated sets are pruned first.
pub fn exact_min_dips(instance: &CoverInstance) -> Result<u64, AttackError> {
    let universe = instance.universe();
    if universe.len() > EXACT_UNIVERSE_MAX {
        return Err(AttackError::TooLarge { size: universe.len(), max: EXACT_UNIVERSE_MAX });
    }
    if universe.is_empty() {
        return Ok(0);
    }
    let full: u32 = (1u32 << universe.len()) - 1;
    let mut masks: Vec<u32> = instance
        .sets()
        .iter()
        .map(|(_, keys)| {
            keys.iter().fold(0u32, |m, &k| m | 1 << position(universe, k))
        })
        .collect();
    let union = masks.iter().fold(0u32, |a, &m| a | m);
    if union != full {
        let missed = (!union & full).trailing_zeros() as usize;
        return Err(AttackError::Uncoverable(universe[missed]));
    }

    // A set adds nothing when another covers a superset of it.
    masks.sort_unstable_by_key(|m| std::cmp::Reverse(m.count_ones()));
    masks.dedup();
    let mut kept: Vec<u32> = Vec::with_capacity(masks.len());
    for &m in &masks {
        if !kept.iter().any(|&big| m & !big == 0) {
            kept.push(m);
        }
    }
    let masks = kept;
    let widest = masks.iter().map(|m| m.count_ones()).max().unwrap() as u64;

    // Greedy gives the initial upper bound.
    let mut best = {
        let mut covered = 0u32;
        let mut picks = 0u64;
        while covered != full {
            let m = *masks
                .iter()
                .max_by_key(|&&m| (m & !covered).count_ones())
                .expect("union covers");
            covered |= m;
            picks += 1;
        }
        picks
    };

    fn search(masks: &[u32], full: u32, covered: u32, depth: u64, widest: u64, best: &mut u64) {
        if covered == full {
            *best = (*best).min(depth);
            return;
        }
        let remaining = (full & !covered).count_ones() as u64;
        if depth + remaining.div_ceil(widest) >= *best {
            return;
        }
        // Branch on the uncovered key with the fewest candidate sets.
        let mut branch_bit = 0u32;
        let mut branch_count = usize::MAX;
        let mut uncovered = full & !covered;
        while uncovered != 0 {
            let bit = uncovered.trailing_zeros();
            uncovered &= uncovered - 1;
            let count = masks.iter().filter(|&&m| m >> bit & 1 == 1).count();
            if count < branch_count {
                branch_count = count;
                branch_bit = bit;
            }
        }
        for &m in masks.iter().filter(|&&m| m >> branch_bit & 1 == 1) {
            search(masks, full, covered | m, depth + 1, widest, best);
        }
    }
    search(&masks, full, 0, 0, widest, &mut best);
    Ok(best)
}

/// Expected distinguishing-input count of the unguided elimination loop
/// against a distance-h restore unit on an l-bit key: each random pattern
/// eliminates C(l, h) of the 2^l keys, so the expectation is 2^l / C(l, h).
pub fn expected_dips_baseline(l: u32, h: u32) -> Rational {
    assert!(h <= l, "distance {h} exceeds key width {l}");
    Rational::from_biguint(BigUint::one() << l, binomial(l as u64, h as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::schemes::{encrypt_sarlock, KeyAssignment};
    use crate::sim::{build_error_table, sfll_hd_projected_table};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    const TRIPLE: &str =
        "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nt = OR(b, c)\ny = AND(a, t)\n";

    #[test]
    fn comparator_rows_are_singletons_needing_one_dip_each() {
        let nl = parse_bench(TRIPLE).unwrap();
        let enc = encrypt_sarlock(&nl, 3, &KeyAssignment::from_u64(5, 3), None).unwrap();
        let table = build_error_table(&nl, &enc, 30).unwrap();
        let instance = build_cover_instance(&table);
        assert_eq!(instance.universe().len(), 7);
        assert!(instance.sets().iter().all(|(_, keys)| keys.len() == 1));
        let (count, chosen) = greedy_min_dips(&instance).unwrap();
        assert_eq!(count, 7);
        assert_eq!(chosen.len(), 7);
        assert_eq!(exact_min_dips(&instance).unwrap(), 7);
    }

    #[test]
    fn point_function_stripping_collapses_to_one_dip() {
        let table = sfll_hd_projected_table(3, 0, 6, 30).unwrap();
        let instance = build_cover_instance(&table);
        assert_eq!(instance.universe().len(), 7);
        let (count, chosen) = greedy_min_dips(&instance).unwrap();
        assert_eq!(count, 1);
        assert_eq!(chosen, vec![6], "the protected pattern eliminates every wrong key");
        assert_eq!(exact_min_dips(&instance).unwrap(), 1);
    }

    #[test]
    fn error_free_table_needs_no_dips() {
        let table =
            crate::sim::ErrorTable::from_fn(3, 2, 0, 30, |_, _| false).unwrap();
        let instance = build_cover_instance(&table);
        assert!(instance.universe().is_empty());
        assert!(instance.sets().is_empty());
        let (count, chosen) = greedy_min_dips(&instance).unwrap();
        assert_eq!(count, 0);
        assert!(chosen.is_empty());
        assert_eq!(exact_min_dips(&instance).unwrap(), 0);
    }

    fn brute_force_min_cover(instance: &CoverInstance) -> Option<u64> {
        let universe = instance.universe();
        let sets = instance.sets();
        assert!(sets.len() <= 20);
        let full: u32 = if universe.is_empty() { 0 } else { (1u32 << universe.len()) - 1 };
        let masks: Vec<u32> = sets
            .iter()
            .map(|(_, keys)| {
                keys.iter().fold(0u32, |m, &k| m | 1 << position(universe, k))
            })
            .collect();
        let mut best: Option<u64> = None;
        for pick in 0..1u64 << sets.len() {
            let mut covered = 0u32;
            for (si, &mask) in masks.iter().enumerate() {
                if pick >> si & 1 == 1 {
                    covered |= mask;
                }
            }
            if covered == full {
                let size = pick.count_ones() as u64;
                best = Some(best.map_or(size, |b| b.min(size)));
            }
        }
        best
    }

    #[test]
    fn exact_matches_brute_force_on_random_tables() {
        for seed in 0..50u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let table = crate::sim::ErrorTable::from_fn(4, 4, 0, 30, |_, _| {
                rng.gen_bool(0.2)
            })
            .unwrap();
            let instance = build_cover_instance(&table);
            if instance.universe().is_empty() {
                continue;
            }
            let exact = exact_min_dips(&instance).unwrap();
            assert_eq!(Some(exact), brute_force_min_cover(&instance), "seed {seed}");
            let (greedy, _) = greedy_min_dips(&instance).unwrap();
            assert!(greedy >= exact, "seed {seed}: greedy {greedy} < exact {exact}");
            let bound = ((instance.universe().len() as f64).ln() + 1.0) * exact as f64;
            assert!(
                greedy as f64 <= bound,
                "seed {seed}: greedy {greedy} breaks the harmonic bound {bound}"
            );
        }
    }

    #[test]
    fn from_parts_normalizes_and_checks_coverage() {
        let instance = CoverInstance::from_parts(
            vec![3, 1, 1, 2],
            vec![(7, vec![2, 2, 9]), (4, vec![1, 3]), (5, vec![])],
        )
        .unwrap();
        assert_eq!(instance.universe(), &[1, 2, 3]);
        assert_eq!(instance.sets(), &[(4, vec![1, 3]), (7, vec![2])]);

        let err = CoverInstance::from_parts(vec![1, 2], vec![(0, vec![1])]).unwrap_err();
        assert!(matches!(err, AttackError::Uncoverable(2)));
    }

    #[test]
    fn oversized_universe_is_refused_exactly() {
        let universe: Vec<u64> = (0..21).collect();
        let sets = vec![(0u64, universe.clone())];
        let instance = CoverInstance::from_parts(universe, sets).unwrap();
        let err = exact_min_dips(&instance).unwrap_err();
        assert!(matches!(err, AttackError::TooLarge { size: 21, max: 20 }));
        let (count, _) = greedy_min_dips(&instance).unwrap();
        assert_eq!(count, 1, "greedy has no universe cap");
    }

    #[test]
    fn text_export_lists_elements_then_sets() {
        let instance =
            CoverInstance::from_parts(vec![1, 5], vec![(2, vec![5]), (0, vec![1, 5])]).unwrap();
        assert_eq!(instance.to_text(), "elements: 1 5\nset 0: 1 5\nset 2: 5\n");
    }

    #[test]
    fn baseline_matches_the_worked_examples() {
        assert_eq!(expected_dips_baseline(4, 0), Rational::new(16, 1));
        assert_eq!(expected_dips_baseline(4, 2), Rational::new(16, 6));
        for l in 1..=12 {
            for h in 0..=l {
                assert!(expected_dips_baseline(l, h) >= Rational::one());
            }
        }
    }
}
