//! Small built-in feature systems used in documentation, demos and tests.

use crate::feature::Feature;
use crate::ground::GroundSet;
use crate::system::FeatureSystem;
use std::sync::Arc;

/// Eight furniture items, two each of wood / steel / wicker / plastic, with
/// one material partition per kind: `p` = wood, `q` = steel, `r` = wicker,
/// `s` = plastic.
pub fn materials() -> FeatureSystem {
    let ground = GroundSet::new(["w1", "w2", "st1", "st2", "wk1", "wk2", "pl1", "pl2"]).unwrap();
    FeatureSystem::from_labelled_ids(
        &ground,
        vec![
            ("p", vec!["w1", "w2"]),
            ("q", vec!["st1", "st2"]),
            ("r", vec!["wk1", "wk2"]),
            ("s", vec!["pl1", "pl2"]),
        ],
    )
    .unwrap()
}

/// Six objects split into three equal blocks `A1 = {1,2}`, `A2 = {3,4}`,
/// `A3 = {5,6}`, with one partition per block against its complement.
pub fn tripartition() -> FeatureSystem {
    let ground = GroundSet::new(["1", "2", "3", "4", "5", "6"]).unwrap();
    FeatureSystem::from_labelled_ids(
        &ground,
        vec![
            ("s1", vec!["1", "2"]),
            ("s2", vec!["3", "4"]),
            ("s3", vec!["5", "6"]),
        ],
    )
    .unwrap()
}

/// All bipartitions of `{1, .., n}`, including the degenerate `{∅, V}`.
/// There are `2^(n-1)` of them.
pub fn all_bipartitions(n: usize) -> FeatureSystem {
    assert!(n >= 1 && n <= 16, "meant for small demonstration universes");
    let ids: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let ground = GroundSet::new(ids).unwrap();
    let mut sides = Vec::new();
    // Canonical representatives: subsets containing object index 0.
    for mask in 0..(1u32 << (n - 1)) {
        let mut members = crate::bitset::BitSet::empty(n);
        members.insert(0);
        for j in 1..n {
            if mask >> (j - 1) & 1 == 1 {
                members.insert(j);
            }
        }
        sides.push(Feature::new(Arc::clone(&ground), members));
    }
    FeatureSystem::new(&ground, sides).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bipartitions_counts() {
        assert_eq!(all_bipartitions(3).len(), 4);
        assert_eq!(all_bipartitions(5).len(), 16);
    }

    #[test]
    fn all_bipartitions_includes_degenerate() {
        let sys = all_bipartitions(3);
        assert!(sys.entries().iter().any(|e| e.degenerate));
    }
}
