//! Similarity functions on objects, order functions on partitions, order
//! submodularity checks, and the stratification of a feature system.
//!
//! Everything here is exact integer arithmetic: similarities are counts (or
//! weighted counts) of shared features, and the order of a bipartition is
//! the double sum of similarities across it. No floating point enters the
//! order pipeline.

use crate::error::{Error, Result};
use crate::feature::{join, meet, Feature, Partition};
use crate::forbidden::ForbiddenFamily;
use crate::ground::GroundSet;
use crate::system::FeatureSystem;
use crate::tangles::{evolution, Budget, EvolutionForest};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Which agreements a similarity function counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    /// Number of partitions both objects specify the same way.
    Agreement,
    /// Number of partitions both objects specify as the declared default
    /// side; requires default sides on the system.
    OneSidedAgreement,
    /// Weighted agreement count.
    WeightedAgreement,
    /// Weighted one-sided count.
    OneSidedWeighted,
}

/// A similarity function over the objects of one feature system, with the
/// full matrix precomputed.
#[derive(Debug, Clone)]
pub struct SimilarityFunction {
    kind: SimilarityKind,
    system: FeatureSystem,
    /// Row-major |V| times |V| matrix.
    matrix: Vec<u64>,
}

impl SimilarityFunction {
    pub fn agreement(system: &FeatureSystem) -> SimilarityFunction {
        Self::build(system, SimilarityKind::Agreement, None).expect("no defaults needed")
    }

    pub fn one_sided(system: &FeatureSystem) -> Result<SimilarityFunction> {
        Self::build(system, SimilarityKind::OneSidedAgreement, None)
    }

    /// Weights are per partition index; every weight defaults to 1 when the
    /// slice is shorter than the system.
    pub fn weighted(system: &FeatureSystem, weights: &[u64]) -> Result<SimilarityFunction> {
        Self::build(system, SimilarityKind::WeightedAgreement, Some(weights))
    }

    pub fn one_sided_weighted(
        system: &FeatureSystem,
        weights: &[u64],
    ) -> Result<SimilarityFunction> {
        Self::build(system, SimilarityKind::OneSidedWeighted, Some(weights))
    }

    fn build(
        system: &FeatureSystem,
        kind: SimilarityKind,
        weights: Option<&[u64]>,
    ) -> Result<SimilarityFunction> {
        let n = system.ground().len();
        let weight_of = |i: usize| weights.map_or(1, |w| w.get(i).copied().unwrap_or(1));
        if weights.is_some() && (0..system.len()).all(|i| weight_of(i) == 0) {
            return Err(Error::AllZeroWeights);
        }
        let one_sided = matches!(
            kind,
            SimilarityKind::OneSidedAgreement | SimilarityKind::OneSidedWeighted
        );
        // Resolve each partition to the object set that "counts": for the
        // one-sided kinds only joint membership of the default side counts.
        let mut sides: Vec<(Feature, Option<Feature>)> = Vec::with_capacity(system.len());
        for i in 0..system.len() {
            if one_sided {
                sides.push((system.default_side(i)?, None));
            } else {
                let side = system.feature(i, true);
                sides.push((side.clone(), Some(side.invert())));
            }
        }
        let mut matrix = vec![0u64; n * n];
        for u in 0..n {
            for v in u..n {
                let mut total = 0u64;
                for (i, (side, inverse)) in sides.iter().enumerate() {
                    let agree = match inverse {
                        None => side.contains(u) && side.contains(v),
                        Some(inv) => {
                            (side.contains(u) && side.contains(v))
                                || (inv.contains(u) && inv.contains(v))
                        }
                    };
                    if agree {
                        total += weight_of(i);
                    }
                }
                matrix[u * n + v] = total;
                matrix[v * n + u] = total;
            }
        }
        Ok(SimilarityFunction {
            kind,
            system: system.clone(),
            matrix,
        })
    }

    pub fn kind(&self) -> &SimilarityKind {
        &self.kind
    }

    pub fn system(&self) -> &FeatureSystem {
        &self.system
    }

    pub fn ground(&self) -> &Arc<GroundSet> {
        self.system.ground()
    }

    /// Similarity of two objects by position.
    pub fn at(&self, u: usize, v: usize) -> u64 {
        self.matrix[u * self.ground().len() + v]
    }

    /// Similarity of two objects by id.
    pub fn similarity(&self, u: &str, v: &str) -> Result<u64> {
        let ground = self.ground();
        Ok(self.at(ground.position(u)?, ground.position(v)?))
    }

    /// The order of an arbitrary bipartition, given by one side: the sum of
    /// similarities over all cross pairs. Defined for corners too, which is
    /// what makes similarity-derived orders usable with efficient trees.
    pub fn partition_order(&self, side: &Feature) -> Result<u64> {
        if !crate::ground::same_ground(side.ground(), self.ground()) {
            return Err(Error::NotABipartition);
        }
        let members = side.members();
        let mut total = 0u64;
        for a in members.iter() {
            for b in 0..self.ground().len() {
                if !members.contains(b) {
                    total += self.at(a, b);
                }
            }
        }
        Ok(total)
    }
}

/// How the order of a partition is determined.
#[derive(Debug, Clone)]
pub enum OrderSource {
    /// An explicit table over the system's partitions, by index. Undefined
    /// on corners outside the system.
    Explicit(Vec<u64>),
    /// Derived from a similarity function; defined on every bipartition.
    Similarity(SimilarityFunction),
}

/// A feature system together with an order per partition, inducing the
/// strata `S_k = { s : |s| < k }`.
#[derive(Debug, Clone)]
pub struct OrderedSystem {
    system: FeatureSystem,
    source: OrderSource,
}

impl OrderedSystem {
    pub fn explicit(system: &FeatureSystem, orders: Vec<u64>) -> OrderedSystem {
        assert_eq!(orders.len(), system.len(), "one order per partition");
        OrderedSystem {
            system: system.clone(),
            source: OrderSource::Explicit(orders),
        }
    }

    /// Orders from an explicit table by partition label.
    pub fn explicit_by_label(
        system: &FeatureSystem,
        orders: &HashMap<String, u64>,
    ) -> Result<OrderedSystem> {
        let resolved = system
            .entries()
            .iter()
            .map(|e| {
                orders
                    .get(&e.label)
                    .copied()
                    .ok_or_else(|| Error::OrderUndefinedOnCorner(e.label.clone()))
            })
            .collect::<Result<Vec<u64>>>()?;
        Ok(Self::explicit(system, resolved))
    }

    pub fn from_similarity(sim: SimilarityFunction) -> OrderedSystem {
        OrderedSystem {
            system: sim.system().clone(),
            source: OrderSource::Similarity(sim),
        }
    }

    pub fn system(&self) -> &FeatureSystem {
        &self.system
    }

    pub fn source(&self) -> &OrderSource {
        &self.source
    }

    pub fn order_of_index(&self, index: usize) -> u64 {
        match &self.source {
            OrderSource::Explicit(orders) => orders[index],
            OrderSource::Similarity(sim) => sim
                .partition_order(self.system.partition(index).canonical_side())
                .expect("side of own ground"),
        }
    }

    /// The order of an arbitrary bipartition: table lookup for explicit
    /// orders (an error on unknown corners), double sum otherwise.
    pub fn order_of_side(&self, side: &Feature) -> Result<u64> {
        match &self.source {
            OrderSource::Explicit(orders) => {
                let part = Partition::from_side(side.clone());
                match self.system.index_of_partition(&part) {
                    Some(i) => Ok(orders[i]),
                    None => Err(Error::OrderUndefinedOnCorner(format!(
                        "{:?}",
                        side.ids()
                    ))),
                }
            }
            OrderSource::Similarity(sim) => sim.partition_order(side),
        }
    }

    /// The nested strata, one per distinct order value, labelled with the
    /// threshold k for which the stratum equals `S_k` (the previous maximal
    /// order plus one). The final stratum is the whole system.
    pub fn strata(&self) -> Vec<(u64, FeatureSystem)> {
        let orders: Vec<u64> = (0..self.system.len())
            .map(|i| self.order_of_index(i))
            .collect();
        let mut values: Vec<u64> = orders.clone();
        values.sort_unstable();
        values.dedup();
        values
            .into_iter()
            .map(|v| {
                let indices: Vec<usize> = (0..self.system.len())
                    .filter(|&i| orders[i] <= v)
                    .collect();
                (v + 1, self.system.subsystem(&indices))
            })
            .collect()
    }

    /// Tangles of every stratum, linked by induction.
    pub fn evolution(&self, family: &ForbiddenFamily, budget: Budget) -> Result<EvolutionForest> {
        evolution(&self.strata(), family, budget)
    }
}

/// Outcome of a submodularity check: either everything passed or a witness
/// pair of oriented sides violating the inequality.
#[derive(Debug, Clone)]
pub enum SubmodularityCheck {
    Holds,
    Violated { left: Feature, right: Feature },
}

impl SubmodularityCheck {
    pub fn holds(&self) -> bool {
        matches!(self, SubmodularityCheck::Holds)
    }
}

/// Checks `|r ∨ s| + |r ∧ s| ≤ |r| + |s|` on the given oriented pairs.
/// Explicit orders fail with an error when a corner's order is undefined.
pub fn check_order_submodular_on(
    ordered: &OrderedSystem,
    pairs: &[(Feature, Feature)],
) -> Result<SubmodularityCheck> {
    for (a, b) in pairs {
        let m = meet(a, b)?;
        let u = join(a, b)?;
        let lhs = ordered.order_of_side(&m)? + ordered.order_of_side(&u)?;
        let rhs = ordered.order_of_side(a)? + ordered.order_of_side(b)?;
        if lhs > rhs {
            return Ok(SubmodularityCheck::Violated {
                left: a.clone(),
                right: b.clone(),
            });
        }
    }
    Ok(SubmodularityCheck::Holds)
}

/// Exhaustive submodularity check over all oriented pairs of distinct
/// partitions of the system.
pub fn check_order_submodular(ordered: &OrderedSystem) -> Result<SubmodularityCheck> {
    let system = ordered.system();
    let mut pairs = Vec::new();
    for i in 0..system.len() {
        for j in i + 1..system.len() {
            for (oi, oj) in [(true, true), (true, false), (false, true), (false, false)] {
                pairs.push((system.feature(i, oi), system.feature(j, oj)));
            }
        }
    }
    check_order_submodular_on(ordered, &pairs)
}

/// Builds the order function induced by a weight function on partitions:
/// similarities count shared features with their weights, orders are the
/// cross-partition double sums. Defined on arbitrary bipartitions, hence
/// usable for efficient distinguishers.
pub fn weight_to_order(
    system: &FeatureSystem,
    weights: &[u64],
    one_sided: bool,
) -> Result<OrderedSystem> {
    let sim = if one_sided {
        SimilarityFunction::one_sided_weighted(system, weights)?
    } else {
        SimilarityFunction::weighted(system, weights)?
    };
    Ok(OrderedSystem::from_similarity(sim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::GroundSet;
    use crate::samples;

    #[test]
    fn materials_similarities() {
        let sys = samples::materials();
        let sim = SimilarityFunction::agreement(&sys);
        // Two wood items agree on all four partitions.
        assert_eq!(sim.similarity("w1", "w2").unwrap(), 4);
        // Wood vs steel agree on r and s only.
        assert_eq!(sim.similarity("w1", "st1").unwrap(), 2);
        // Self-similarity equals |S| for the agreement kind.
        assert_eq!(sim.similarity("pl2", "pl2").unwrap(), 4);
    }

    #[test]
    fn order_of_the_trivial_partition_is_zero() {
        let sys = samples::materials();
        let sim = SimilarityFunction::agreement(&sys);
        let empty = Feature::new(
            Arc::clone(sys.ground()),
            crate::bitset::BitSet::empty(sys.ground().len()),
        );
        assert_eq!(sim.partition_order(&empty).unwrap(), 0);
        assert_eq!(sim.partition_order(&empty.invert()).unwrap(), 0);
    }

    #[test]
    fn partition_order_matches_the_double_sum_oracle() {
        let sys = samples::materials();
        let sim = SimilarityFunction::agreement(&sys);
        let p = sys.yes_side(0);
        let mut oracle = 0u64;
        for a in p.members().iter() {
            for b in p.invert().members().iter() {
                oracle += sim.at(a, b);
            }
        }
        assert_eq!(sim.partition_order(&p).unwrap(), oracle);
        // Symmetric in the two sides.
        assert_eq!(sim.partition_order(&p.invert()).unwrap(), oracle);
    }

    #[test]
    fn raising_a_weight_leaves_that_partitions_own_order_unchanged() {
        let sys = samples::materials();
        let base = weight_to_order(&sys, &[1, 1, 1, 1], false).unwrap();
        let heavy = weight_to_order(&sys, &[10, 1, 1, 1], false).unwrap();
        assert_eq!(base.order_of_index(0), heavy.order_of_index(0));
    }

    #[test]
    fn raising_a_weight_raises_the_order_of_other_partitions() {
        let sys = samples::materials();
        let base = weight_to_order(&sys, &[1, 1, 1, 1], false).unwrap();
        let heavy = weight_to_order(&sys, &[10, 1, 1, 1], false).unwrap();
        // q splits pairs that agree on p, so its order strictly increases.
        assert!(heavy.order_of_index(1) > base.order_of_index(1));
    }

    #[test]
    fn uniform_weights_scale_the_unweighted_order() {
        let sys = samples::materials();
        let unweighted = OrderedSystem::from_similarity(SimilarityFunction::agreement(&sys));
        let tripled = weight_to_order(&sys, &[3, 3, 3, 3], false).unwrap();
        for i in 0..sys.len() {
            assert_eq!(tripled.order_of_index(i), 3 * unweighted.order_of_index(i));
        }
    }

    #[test]
    fn all_zero_weights_are_rejected() {
        let sys = samples::materials();
        assert!(matches!(
            weight_to_order(&sys, &[0, 0, 0, 0], false),
            Err(Error::AllZeroWeights)
        ));
    }

    #[test]
    fn one_sided_similarity_requires_defaults() {
        let sys = samples::materials();
        assert!(matches!(
            SimilarityFunction::one_sided(&sys),
            Err(Error::MissingDefaultSide(_))
        ));
        let with_defaults = sys.with_yes_defaults();
        let sim = SimilarityFunction::one_sided(&with_defaults).unwrap();
        // w1 and w2 share only the wood default side.
        assert_eq!(sim.similarity("w1", "w2").unwrap(), 1);
        // w1 and st1 share no default side.
        assert_eq!(sim.similarity("w1", "st1").unwrap(), 0);
    }

    #[test]
    fn similarity_derived_orders_are_submodular_on_the_system() {
        let sys = samples::materials();
        let ordered = OrderedSystem::from_similarity(SimilarityFunction::agreement(&sys));
        assert!(check_order_submodular(&ordered).unwrap().holds());
    }

    #[test]
    fn explicit_violation_is_witnessed() {
        // r and s cross; their meet and join are in the system with orders
        // chosen to break the inequality.
        let g = GroundSet::new(["1", "2", "3", "4"]).unwrap();
        let r = Feature::from_ids(&g, ["1", "2"]).unwrap();
        let s = Feature::from_ids(&g, ["2", "3"]).unwrap();
        let m = meet(&r, &s).unwrap();
        let u = join(&r, &s).unwrap();
        let sys = FeatureSystem::new(&g, vec![r.clone(), s.clone(), m, u]).unwrap();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 0, 0, 5]);
        match check_order_submodular_on(&ordered, &[(r, s)]).unwrap() {
            SubmodularityCheck::Violated { left, right } => {
                assert_eq!(left.ids(), vec!["1", "2"]);
                assert_eq!(right.ids(), vec!["2", "3"]);
            }
            SubmodularityCheck::Holds => panic!("expected a violation"),
        }
    }

    #[test]
    fn explicit_orders_error_on_unknown_corners() {
        let sys = samples::materials();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 1, 1, 1]);
        assert!(matches!(
            check_order_submodular(&ordered),
            Err(Error::OrderUndefinedOnCorner(_))
        ));
    }

    #[test]
    fn strata_thresholds_and_nesting() {
        let sys = samples::materials();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 1, 1, 1]);
        let strata = ordered.strata();
        assert_eq!(strata.len(), 2);
        assert_eq!(strata[0].0, 1);
        assert_eq!(strata[0].1.len(), 1);
        assert_eq!(strata[0].1.label(0), "p");
        assert_eq!(strata[1].0, 2);
        assert_eq!(strata[1].1.len(), 4);
        assert!(strata[0].1.is_subsystem_of(&strata[1].1));
    }

    #[test]
    fn equal_orders_give_a_single_stratum() {
        let sys = samples::materials();
        let ordered = OrderedSystem::explicit(&sys, vec![7, 7, 7, 7]);
        let strata = ordered.strata();
        assert_eq!(strata.len(), 1);
        assert_eq!(strata[0].0, 8);
        assert!(strata[0].1.same_partitions_as(&sys));
    }
}
