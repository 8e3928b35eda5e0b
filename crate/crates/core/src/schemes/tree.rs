//! Balanced comparator tree used by the point-function locks, with exact
//! onset counting for arbitrary gate replacements.

use crate::netlist::{GateKind, GateTag, NetId, NetlistBuilder};
use num::BigUint;
use serde::{Deserialize, Serialize};

use super::SchemeError;

/// Gate kind a tree node can be switched to in a diversified lock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeGate {
    Xor,
    Or,
    Nand,
}

impl TreeGate {
    pub fn kind(self) -> GateKind {
        match self {
            TreeGate::Xor => GateKind::Xor,
            TreeGate::Or => GateKind::Or,
            TreeGate::Nand => GateKind::Nand,
        }
    }
}

/// Complete binary tree of 2-input gates over `width` comparator bits.
/// Leaf slots are padded up to the next power of two with constant-1 inputs,
/// so every node has exactly two children. Layer 0 sits directly on the
/// leaves; layer `depth − 1` is the root.
#[derive(Clone, Debug)]
pub struct AndTree {
    width: u32,
    layers: Vec<Vec<GateKind>>,
}

impl AndTree {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn depth(&self) -> u32 {
        self.layers.len() as u32
    }

    pub fn layers(&self) -> &[Vec<GateKind>] {
        &self.layers
    }

    /// Replace the first `count` gates (left to right) of `layer` with `gate`.
    pub fn replace(&mut self, layer: u32, count: u32, gate: TreeGate) -> Result<(), SchemeError> {
        let depth = self.depth();
        let Some(kinds) = self.layers.get_mut(layer as usize) else {
            return Err(SchemeError::InvalidConfig(format!(
                "layer {layer} out of range (tree has {depth} layers)"
            )));
        };
        if count as usize > kinds.len() {
            return Err(SchemeError::InvalidConfig(format!(
                "layer {layer} has {} gates, cannot replace {count}",
                kinds.len()
            )));
        }
        for kind in kinds.iter_mut().take(count as usize) {
            *kind = gate.kind();
        }
        Ok(())
    }

    /// Exact number of leaf assignments on which the tree evaluates to 1.
    /// Counted over the `width` real leaf bits; padded slots are constant.
    /// Works bottom-up on (support size, onset) pairs — every node's children
    /// have disjoint leaf supports, so onsets compose by closed rules rather
    /// than enumeration.
    pub fn onset_count(&self) -> BigUint {
        let slots = 1usize << self.depth();
        let mut level: Vec<(u32, BigUint)> = (0..slots)
            .map(|s| {
                if s < self.width as usize {
                    (1, BigUint::from(1u8))
                } else {
                    (0, BigUint::from(1u8))
                }
            })
            .collect();
        for kinds in &self.layers {
            let mut next = Vec::with_capacity(level.len() / 2);
            for (j, &kind) in kinds.iter().enumerate() {
                let (na, ca) = level[2 * j].clone();
                let (nb, cb) = level[2 * j + 1].clone();
                let pow_a = BigUint::from(1u8) << na;
                let pow_b = BigUint::from(1u8) << nb;
                let onset = match kind {
                    GateKind::And => &ca * &cb,
                    GateKind::Or => &ca * &pow_b + &pow_a * &cb - &ca * &cb,
                    GateKind::Xor => &ca * (&pow_b - &cb) + (&pow_a - &ca) * &cb,
                    GateKind::Nand => &pow_a * &pow_b - &ca * &cb,
                    other => unreachable!("tree node of kind {other:?}"),
                };
                next.push((na + nb, onset));
            }
            level = next;
        }
        level[0].1.clone()
    }

    /// Emit the tree into a netlist over the given leaf nets, returning the
    /// root net. Padded slots become shared constant-1 nets.
    pub fn instantiate(
        &self,
        builder: &mut NetlistBuilder,
        leaves: &[NetId],
        tag: GateTag,
    ) -> NetId {
        assert_eq!(leaves.len(), self.width as usize, "leaf count must match tree width");
        let slots = 1usize << self.depth();
        let mut level: Vec<NetId> = leaves.to_vec();
        if slots > leaves.len() {
            let pad = builder.gate(GateKind::Const1, vec![], "treepad", tag);
            level.resize(slots, pad);
        }
        for kinds in &self.layers {
            let mut next = Vec::with_capacity(level.len() / 2);
            for (j, &kind) in kinds.iter().enumerate() {
                next.push(builder.gate(kind, vec![level[2 * j], level[2 * j + 1]], "tree", tag));
            }
            level = next;
        }
        level[0]
    }
}

/// All-AND comparator tree over `width` bits.
pub fn build_and_tree(width: u32) -> Result<AndTree, SchemeError> {
    if width < 2 {
        return Err(SchemeError::InvalidConfig(format!(
            "comparator tree needs at least 2 bits, got {width}"
        )));
    }
    let depth = 32 - (width - 1).leading_zeros();
    let layers = (0..depth).map(|level| vec![GateKind::And; 1 << (depth - level - 1)]).collect();
    Ok(AndTree { width, layers })
}

/// Onset predicted by the replacement formula (2(2^(2^L) − 1))^N. Only valid
/// when the N replaced gates each span real leaves exclusively, i.e.
/// N · 2^(L+1) ≤ width; returns None otherwise (padded subtrees shift the
/// count, and [`AndTree::onset_count`] is the authority).
pub fn replaced_onset_formula(width: u32, layer: u32, count: u32) -> Option<BigUint> {
    if u64::from(count) << (layer + 1) > u64::from(width) {
        return None;
    }
    let per_gate = ((BigUint::from(1u8) << (1u32 << layer)) - BigUint::from(1u8)) << 1u32;
    Some(num::pow(per_gate, count as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: enumerate all 2^width leaf assignments and fold
    /// the tree gate by gate.
    fn brute_force_onset(tree: &AndTree) -> u64 {
        let slots = 1usize << tree.depth();
        let mut count = 0;
        for z in 0u64..1 << tree.width() {
            let mut level: Vec<bool> =
                (0..slots).map(|s| s >= tree.width() as usize || z >> s & 1 == 1).collect();
            for kinds in tree.layers() {
                level = kinds
                    .iter()
                    .enumerate()
                    .map(|(j, &kind)| {
                        let (a, b) = (level[2 * j], level[2 * j + 1]);
                        match kind {
                            GateKind::And => a && b,
                            GateKind::Or => a || b,
                            GateKind::Xor => a != b,
                            GateKind::Nand => !(a && b),
                            other => unreachable!("{other:?}"),
                        }
                    })
                    .collect();
            }
            if level[0] {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn four_wide_tree_has_three_gates_in_two_layers() {
        let tree = build_and_tree(4).unwrap();
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.layers()[0].len(), 2);
        assert_eq!(tree.layers()[1].len(), 1);
    }

    #[test]
    fn two_wide_tree_is_a_single_gate() {
        let tree = build_and_tree(2).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.layers()[0], vec![GateKind::And]);
    }

    #[test]
    fn width_below_two_rejected() {
        assert!(build_and_tree(1).is_err());
        assert!(build_and_tree(0).is_err());
    }

    #[test]
    fn pure_tree_onset_is_one() {
        for width in 2..=12 {
            assert_eq!(build_and_tree(width).unwrap().onset_count(), BigUint::from(1u8));
        }
    }

    #[test]
    fn single_layer0_xor_doubles_the_onset() {
        let mut tree = build_and_tree(4).unwrap();
        tree.replace(0, 1, TreeGate::Xor).unwrap();
        assert_eq!(tree.onset_count(), BigUint::from(2u8));
        assert_eq!(replaced_onset_formula(4, 0, 1), Some(BigUint::from(2u8)));
    }

    #[test]
    fn two_layer0_xors_give_onset_four() {
        let mut tree = build_and_tree(4).unwrap();
        tree.replace(0, 2, TreeGate::Xor).unwrap();
        assert_eq!(tree.onset_count(), BigUint::from(4u8));
    }

    #[test]
    fn eight_wide_two_layer1_xors_match_brute_force() {
        let mut tree = build_and_tree(8).unwrap();
        tree.replace(1, 2, TreeGate::Xor).unwrap();
        let expected = brute_force_onset(&tree);
        assert_eq!(tree.onset_count(), BigUint::from(expected));
        assert_eq!(replaced_onset_formula(8, 1, 2), Some(BigUint::from(expected)));
    }

    #[test]
    fn onset_matches_brute_force_across_the_grid() {
        for width in 2..=8u32 {
            let depth = 32 - (width - 1).leading_zeros();
            for layer in 0..depth {
                let max_count = 1u32 << (depth - layer - 1);
                for count in 0..=max_count {
                    for gate in [TreeGate::Xor, TreeGate::Or, TreeGate::Nand] {
                        let mut tree = build_and_tree(width).unwrap();
                        tree.replace(layer, count, gate).unwrap();
                        let brute = brute_force_onset(&tree);
                        assert_eq!(
                            tree.onset_count(),
                            BigUint::from(brute),
                            "width={width} layer={layer} count={count} gate={gate:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn formula_agrees_wherever_it_applies() {
        for width in 2..=10u32 {
            let depth = 32 - (width - 1).leading_zeros();
            for layer in 0..depth {
                for count in 0..=1u32 << (depth - layer - 1) {
                    if let Some(formula) = replaced_onset_formula(width, layer, count) {
                        let mut tree = build_and_tree(width).unwrap();
                        tree.replace(layer, count, TreeGate::Xor).unwrap();
                        assert_eq!(
                            tree.onset_count(),
                            formula,
                            "width={width} layer={layer} count={count}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn replace_bounds_checked() {
        let mut tree = build_and_tree(4).unwrap();
        assert!(tree.replace(2, 1, TreeGate::Xor).is_err());
        assert!(tree.replace(0, 3, TreeGate::Xor).is_err());
        assert!(tree.replace(1, 1, TreeGate::Xor).is_ok());
    }
}
