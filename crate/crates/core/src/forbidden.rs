//! Forbidden families, consistency, tangles as predicates, stars, and
//! submodularity of feature systems.

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::feature::{join, meet, Feature, Partition};
use crate::system::{FeatureSystem, Provenance, SideSpec, Specification};
use serde::{Deserialize, Serialize};

/// A family of small "atypical" feature sets that a tangle must avoid.
///
/// The built-in kind is the intersection-cardinality threshold family: the
/// sets of up to three features shared by fewer than `n` objects. Explicit
/// user-supplied sets (by exact set match) can be added on top.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbiddenFamily {
    threshold: Option<u32>,
    /// Canonical sorted member-bitset lists, each of size ≤ 3.
    explicit: Vec<Vec<BitSet>>,
}

impl ForbiddenFamily {
    /// The family of all ≤3-sets of features shared by fewer than `n`
    /// objects. `n = 1` forbids exactly the inconsistent triples.
    pub fn intersection_threshold(n: u32) -> ForbiddenFamily {
        assert!(n >= 1, "threshold must be positive");
        ForbiddenFamily {
            threshold: Some(n),
            explicit: Vec::new(),
        }
    }

    /// A family of explicitly listed feature sets, matched exactly.
    pub fn explicit_sets(sets: Vec<Vec<Feature>>) -> ForbiddenFamily {
        ForbiddenFamily {
            threshold: None,
            explicit: sets.into_iter().map(canonical_set).collect(),
        }
    }

    /// Threshold family plus explicit sets; a feature set is forbidden if
    /// either part forbids it.
    pub fn union(n: u32, sets: Vec<Vec<Feature>>) -> ForbiddenFamily {
        assert!(n >= 1, "threshold must be positive");
        ForbiddenFamily {
            threshold: Some(n),
            explicit: sets.into_iter().map(canonical_set).collect(),
        }
    }

    pub fn threshold(&self) -> Option<u32> {
        self.threshold
    }

    pub fn has_explicit_sets(&self) -> bool {
        !self.explicit.is_empty()
    }

    /// Membership test for a feature set of size ≤ 3 (larger sets are never
    /// members: the threshold family is defined only on ≤3-sets).
    ///
    /// Pairs and singletons count as triples by repetition, so for the
    /// threshold family the test is simply on the intersection of all given
    /// members; the empty set's intersection is the whole ground set.
    pub fn forbids(&self, features: &[Feature]) -> bool {
        let set = canonical_set(features.to_vec());
        if set.len() > 3 {
            return false;
        }
        if let Some(n) = self.threshold {
            let count = match set.split_first() {
                None => features
                    .first()
                    .map(|f| f.ground().len())
                    .unwrap_or(usize::MAX),
                Some((first, rest)) => rest
                    .iter()
                    .fold(first.clone(), |acc, m| acc.intersection(m))
                    .count(),
            };
            if count < n as usize {
                return true;
            }
        }
        self.explicit.iter().any(|entry| *entry == set)
    }

    pub fn describe(&self) -> String {
        match (self.threshold, self.explicit.is_empty()) {
            (Some(n), true) => format!("F_{n}"),
            (Some(n), false) => format!("F_{n} plus {} explicit sets", self.explicit.len()),
            (None, _) => format!("{} explicit sets", self.explicit.len()),
        }
    }
}

fn canonical_set(features: Vec<Feature>) -> Vec<BitSet> {
    let mut sets: Vec<BitSet> = features.into_iter().map(|f| f.members().clone()).collect();
    sets.sort();
    sets.dedup();
    sets
}

/// A set of features is consistent when every multiset of up to three of its
/// members has nonempty intersection. (The empty set is consistent.)
pub fn is_consistent(features: &[Feature]) -> bool {
    for i in 0..features.len() {
        for j in i..features.len() {
            let ij = features[i].members().intersection(features[j].members());
            for k in j..features.len() {
                if ij.intersection(features[k].members()).is_empty() {
                    return false;
                }
            }
        }
    }
    true
}

/// A total specification is a tangle when it is consistent and none of its
/// ≤3-subsets lies in the family.
pub fn is_tangle(spec: &Specification, family: &ForbiddenFamily) -> Result<bool> {
    if !spec.is_total() {
        return Err(Error::PartialSpecification);
    }
    let features = spec.features();
    if !is_consistent(&features) {
        return Ok(false);
    }
    if let Some(n) = family.threshold() {
        let n = n as usize;
        for i in 0..features.len() {
            for j in i..features.len() {
                let ij = features[i].members().intersection(features[j].members());
                for k in j..features.len() {
                    if ij.intersection(features[k].members()).count() < n {
                        return Ok(false);
                    }
                }
            }
        }
    }
    if family.has_explicit_sets() {
        let m = features.len();
        for i in 0..m {
            if family.forbids(&[features[i].clone()]) {
                return Ok(false);
            }
            for j in i + 1..m {
                if family.forbids(&[features[i].clone(), features[j].clone()]) {
                    return Ok(false);
                }
                for k in j + 1..m {
                    if family.forbids(&[
                        features[i].clone(),
                        features[j].clone(),
                        features[k].clone(),
                    ]) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// A set of features is a star when their inverses are pairwise disjoint.
pub fn is_star(features: &[Feature]) -> bool {
    let inverses: Vec<Feature> = features.iter().map(Feature::invert).collect();
    for i in 0..inverses.len() {
        for j in i + 1..inverses.len() {
            if features[i] == features[j] {
                continue;
            }
            if !inverses[i].members().is_disjoint_from(inverses[j].members()) {
                return false;
            }
        }
    }
    true
}

/// A system is submodular when for any two oriented sides of distinct
/// partitions, their meet or their join is again a side of the system.
/// (Same-partition orientations are idempotent or compare a side with its
/// inverse; neither constrains the system.)
pub fn is_submodular_system(system: &FeatureSystem) -> bool {
    submodularity_witness(system).is_none()
}

/// The first oriented pair violating submodularity, in scan order.
pub fn submodularity_witness(system: &FeatureSystem) -> Option<(Feature, Feature)> {
    let contains_side = |f: &Feature| {
        system
            .index_of_partition(&Partition::from_side(f.clone()))
            .is_some()
    };
    for i in 0..system.len() {
        for j in i + 1..system.len() {
            for (oi, oj) in [(true, true), (true, false), (false, true), (false, false)] {
                let a = system.feature(i, oi);
                let b = system.feature(j, oj);
                let m = meet(&a, &b).expect("same ground");
                let u = join(&a, &b).expect("same ground");
                if !contains_side(&m) && !contains_side(&u) {
                    return Some((a, b));
                }
            }
        }
    }
    None
}

/// Extends a system with corner partitions until it is submodular, choosing
/// for each violated pair the corner of lower canonical encoding. Errors if
/// more than `cap` partitions would be needed.
pub fn submodular_closure(system: &FeatureSystem, cap: usize) -> Result<FeatureSystem> {
    let mut current = system.clone();
    let mut corner_counter = 0usize;
    loop {
        let Some((a, b)) = submodularity_witness(&current) else {
            return Ok(current);
        };
        if current.len() >= cap {
            return Err(Error::ClosureOverflow(cap));
        }
        let m = meet(&a, &b).expect("same ground");
        let u = join(&a, &b).expect("same ground");
        let pm = Partition::from_side(m.clone());
        let pu = Partition::from_side(u.clone());
        let (side, op) = if pm <= pu { (m, "&") } else { (u, "|") };
        let expr = format!(
            "({} {op} {})",
            side_expr(&current, &a),
            side_expr(&current, &b)
        );
        current = current.extended(vec![SideSpec {
            label: format!("c{corner_counter}"),
            yes_side: side,
            provenance: Provenance::Corner { expression: expr },
        }])?;
        corner_counter += 1;
    }
}

fn side_expr(system: &FeatureSystem, feature: &Feature) -> String {
    let part = Partition::from_side(feature.clone());
    let idx = system.index_of_partition(&part).expect("side of the system");
    let entry = system.entry(idx);
    let canonical = part.side_of(feature).expect("side");
    let yes = canonical == entry.yes_is_canonical;
    format!("{}:{}", entry.label, if yes { "yes" } else { "no" })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn side(sys: &FeatureSystem, label: &str, yes: bool) -> Feature {
        let i = sys.index_of_label(label).unwrap();
        if yes {
            sys.yes_side(i)
        } else {
            sys.yes_side(i).invert()
        }
    }

    #[test]
    fn tripartition_negative_sides_are_inconsistent() {
        let sys = samples::tripartition();
        let negs: Vec<Feature> = ["s1", "s2", "s3"]
            .iter()
            .map(|l| side(&sys, l, false))
            .collect();
        assert!(!is_consistent(&negs));
    }

    #[test]
    fn feature_and_inverse_are_inconsistent() {
        let sys = samples::materials();
        let f = side(&sys, "p", true);
        assert!(!is_consistent(&[f.clone(), f.invert()]));
    }

    #[test]
    fn three_negated_materials_are_consistent() {
        let sys = samples::materials();
        let negs: Vec<Feature> = ["p", "q", "r"]
            .iter()
            .map(|l| side(&sys, l, false))
            .collect();
        // The plastic items have all three.
        assert!(is_consistent(&negs));
    }

    #[test]
    fn threshold_family_counts_shared_objects() {
        let sys = samples::materials();
        let p = side(&sys, "p", true);
        assert!(!ForbiddenFamily::intersection_threshold(2).forbids(&[p.clone()]));
        assert!(ForbiddenFamily::intersection_threshold(3).forbids(&[p]));
    }

    #[test]
    fn f1_forbids_exactly_the_inconsistent_triples() {
        let sys = samples::tripartition();
        let f1 = ForbiddenFamily::intersection_threshold(1);
        let negs: Vec<Feature> = ["s1", "s2", "s3"]
            .iter()
            .map(|l| side(&sys, l, false))
            .collect();
        assert!(f1.forbids(&negs));
        let pos: Vec<Feature> = vec![side(&sys, "s1", true)];
        assert!(!f1.forbids(&pos));
    }

    #[test]
    fn full_ground_set_is_never_forbidden_when_large_enough() {
        let sys = samples::materials();
        let all = Feature::new(
            std::sync::Arc::clone(sys.ground()),
            crate::bitset::BitSet::full(sys.ground().len()),
        );
        for n in 1..=8 {
            assert!(!ForbiddenFamily::intersection_threshold(n)
                .forbids(&[all.clone(), all.clone(), all.clone()]));
        }
        assert!(ForbiddenFamily::intersection_threshold(9).forbids(&[all]));
    }

    #[test]
    fn explicit_families_match_exact_sets() {
        let sys = samples::materials();
        let p = side(&sys, "p", true);
        let q = side(&sys, "q", true);
        let family = ForbiddenFamily::explicit_sets(vec![vec![p.clone(), q.clone()]]);
        assert!(family.forbids(&[q.clone(), p.clone()]));
        assert!(family.forbids(&[p.clone(), q.clone(), q.clone()]));
        assert!(!family.forbids(&[p.clone()]));
        assert!(!family.forbids(&[p, q, side(&sys, "r", true)]));
    }

    #[test]
    fn all_negative_material_spec_is_a_tangle_for_f1_and_f2() {
        let sys = samples::materials();
        let mut spec = Specification::empty(&sys);
        for i in 0..sys.len() {
            let e = sys.entry(i);
            spec.set(i, !e.yes_is_canonical);
        }
        assert!(is_tangle(&spec, &ForbiddenFamily::intersection_threshold(1)).unwrap());
        // Every triple of negated sides is shared by the two items of the
        // fourth material.
        assert!(is_tangle(&spec, &ForbiddenFamily::intersection_threshold(2)).unwrap());
    }

    #[test]
    fn majority_tripartition_spec_is_not_a_tangle() {
        let sys = samples::tripartition();
        let mut spec = Specification::empty(&sys);
        for i in 0..sys.len() {
            let e = sys.entry(i);
            spec.set(i, !e.yes_is_canonical);
        }
        assert!(!is_tangle(&spec, &ForbiddenFamily::intersection_threshold(1)).unwrap());
    }

    #[test]
    fn is_tangle_rejects_partial_specifications() {
        let sys = samples::materials();
        let mut spec = Specification::empty(&sys);
        spec.set(0, true);
        assert!(matches!(
            is_tangle(&spec, &ForbiddenFamily::intersection_threshold(1)),
            Err(Error::PartialSpecification)
        ));
    }

    #[test]
    fn star_checks() {
        let sys = samples::materials();
        // Singletons are stars.
        assert!(is_star(&[side(&sys, "p", true)]));
        // Inverses of the negated wood/steel sides are the disjoint yes-sides.
        assert!(is_star(&[side(&sys, "p", false), side(&sys, "q", false)]));
        let tri = samples::tripartition();
        // Inverses of A1, A2 intersect in {5, 6}.
        assert!(!is_star(&[side(&tri, "s1", true), side(&tri, "s2", true)]));
    }

    #[test]
    fn likert_indicator_negative_sides_form_a_star() {
        let g = crate::ground::GroundSet::new(["o1", "o2", "o3", "o4"]).unwrap();
        let sys = crate::system::likert_expand(
            &g,
            &[("q".to_string(), vec![1, 2, 2, 3])],
            3,
            crate::system::LikertMode::Indicator,
        )
        .unwrap();
        let negs: Vec<Feature> = (0..sys.len()).map(|i| sys.yes_side(i).invert()).collect();
        assert!(is_star(&negs));
    }

    #[test]
    fn submodularity_of_the_sample_systems() {
        // The universe of all bipartitions is closed under meets and joins.
        assert!(is_submodular_system(&samples::all_bipartitions(3)));
        // Wood ∨ steel and wood ∧ steel are both missing from the materials
        // system.
        assert!(!is_submodular_system(&samples::materials()));
        // A single partition only meets itself; idempotence suffices.
        let g = crate::ground::GroundSet::new(["a", "b"]).unwrap();
        let single =
            FeatureSystem::new(&g, vec![Feature::from_ids(&g, ["a"]).unwrap()]).unwrap();
        assert!(is_submodular_system(&single));
    }

    #[test]
    fn closure_reaches_a_submodular_system() {
        let sys = samples::materials();
        let closed = submodular_closure(&sys, 200).unwrap();
        assert!(is_submodular_system(&closed));
        assert!(sys.is_subsystem_of(&closed));
        assert!(closed
            .entries()
            .iter()
            .any(|e| matches!(e.provenance, Provenance::Corner { .. })));
    }
}
