//! Tangle enumeration, focused and induced tangles, extensions across
//! subsystems, the evolution forest over strata, and the averaging/stable
//! tangle variants.

use crate::error::{Error, Result};
use crate::feature::Feature;
use crate::forbidden::{is_tangle, ForbiddenFamily};
use crate::system::{FeatureSystem, Specification};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

/// Default cap on search nodes for the pruned enumeration.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// A tangle: a total specification that is consistent and avoids every
/// forbidden set of its family. `order` is the stratum index when the tangle
/// was produced from an ordered system.
#[derive(Clone, Debug)]
pub struct Tangle {
    spec: Specification,
    family: ForbiddenFamily,
    order: Option<u64>,
}

impl Tangle {
    pub fn spec(&self) -> &Specification {
        &self.spec
    }

    pub fn family(&self) -> &ForbiddenFamily {
        &self.family
    }

    pub fn order(&self) -> Option<u64> {
        self.order
    }

    pub fn system(&self) -> &FeatureSystem {
        self.spec.system()
    }

    pub fn with_order(mut self, order: u64) -> Tangle {
        self.order = Some(order);
        self
    }

    /// Wraps a specification after checking the tangle property.
    pub fn checked(spec: Specification, family: ForbiddenFamily) -> Result<Tangle> {
        if !is_tangle(&spec, &family)? {
            return Err(Error::VerificationFailed(format!(
                "{spec:?} is not a tangle for {}",
                family.describe()
            )));
        }
        Ok(Tangle {
            spec,
            family,
            order: None,
        })
    }
}

impl PartialEq for Tangle {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Eq for Tangle {}

/// Search-node budget; exceeding it is an explicit error, never a silent
/// truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget(pub u64);

impl Default for Budget {
    fn default() -> Self {
        Budget(DEFAULT_BUDGET)
    }
}

struct SearchCtx<'a> {
    system: &'a FeatureSystem,
    family: &'a ForbiddenFamily,
    /// Partition indices in processing order.
    order: Vec<usize>,
    /// Forced orientation per partition index, for extension searches.
    forced: HashMap<usize, bool>,
    nodes: AtomicU64,
    budget: u64,
}

impl SearchCtx<'_> {
    fn charge(&self) -> Result<()> {
        let used = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if used > self.budget {
            Err(Error::BudgetExceeded(self.budget))
        } else {
            Ok(())
        }
    }

    /// Whether `candidate` can extend the chosen features without creating a
    /// forbidden (or inconsistent) subset. Only subsets involving the new
    /// feature need checking; earlier additions validated the rest.
    fn admits(&self, chosen: &[Feature], candidate: &Feature) -> bool {
        let min = self.family.threshold().unwrap_or(1) as usize;
        if candidate.len() < min {
            return false;
        }
        for i in 0..chosen.len() {
            let pair = candidate.members().intersection(chosen[i].members());
            if pair.count() < min {
                return false;
            }
            for j in i..chosen.len() {
                if pair.intersection(chosen[j].members()).count() < min {
                    return false;
                }
            }
        }
        if self.family.has_explicit_sets() {
            if self.family.forbids(std::slice::from_ref(candidate)) {
                return false;
            }
            for i in 0..chosen.len() {
                if self.family.forbids(&[candidate.clone(), chosen[i].clone()]) {
                    return false;
                }
                for j in i + 1..chosen.len() {
                    if self
                        .family
                        .forbids(&[candidate.clone(), chosen[i].clone(), chosen[j].clone()])
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn orientations_for(&self, index: usize) -> &'static [bool] {
        match self.forced.get(&index) {
            Some(true) => &[true],
            Some(false) => &[false],
            // Canonical side first: deterministic search order.
            None => &[true, false],
        }
    }

    fn dfs(
        &self,
        spec: &mut Specification,
        chosen: &mut Vec<Feature>,
        level: usize,
        out: &mut Vec<Specification>,
    ) -> Result<()> {
        if level == self.order.len() {
            out.push(spec.clone());
            return Ok(());
        }
        let index = self.order[level];
        for &orient in self.orientations_for(index) {
            self.charge()?;
            let feature = self.system.feature(index, orient);
            if !self.admits(chosen, &feature) {
                continue;
            }
            spec.set(index, orient);
            chosen.push(feature);
            self.dfs(spec, chosen, level + 1, out)?;
            chosen.pop();
            spec.unset(index);
        }
        Ok(())
    }
}

fn run_search(ctx: &SearchCtx) -> Result<Vec<Specification>> {
    // Expand a shallow frontier sequentially, then fan the subtrees out to
    // the rayon pool. Results are concatenated in frontier order and sorted
    // canonically, so the outcome is independent of scheduling.
    let fanout_target = rayon::current_num_threads() * 4;
    let mut frontier: Vec<(Specification, Vec<Feature>)> =
        vec![(Specification::empty(ctx.system), Vec::new())];
    let mut depth = 0;
    while depth < ctx.order.len() && frontier.len() < fanout_target {
        let index = ctx.order[depth];
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (spec, chosen) in frontier {
            for &orient in ctx.orientations_for(index) {
                ctx.charge()?;
                let feature = ctx.system.feature(index, orient);
                if !ctx.admits(&chosen, &feature) {
                    continue;
                }
                let mut spec = spec.clone();
                spec.set(index, orient);
                let mut chosen = chosen.clone();
                chosen.push(feature);
                next.push((spec, chosen));
            }
        }
        frontier = next;
        depth += 1;
    }
    let branches: Vec<Result<Vec<Specification>>> = frontier
        .into_par_iter()
        .map(|(mut spec, mut chosen)| {
            let mut out = Vec::new();
            ctx.dfs(&mut spec, &mut chosen, depth, &mut out)?;
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for branch in branches {
        all.extend(branch?);
    }
    all.sort_by_key(Specification::encoding);
    Ok(all)
}

/// Enumerates all tangles of the system for the family, in canonical
/// specification order. Deterministic for a fixed system, independent of the
/// worker count.
pub fn enumerate_tangles(
    system: &FeatureSystem,
    family: &ForbiddenFamily,
    budget: Budget,
) -> Result<Vec<Tangle>> {
    enumerate_tangles_seeded(system, family, budget, None)
}

/// As [`enumerate_tangles`], processing partitions in a caller-chosen order.
/// The output is canonically sorted either way; the seed order only shapes
/// the search tree.
pub fn enumerate_tangles_seeded(
    system: &FeatureSystem,
    family: &ForbiddenFamily,
    budget: Budget,
    seed_order: Option<&[usize]>,
) -> Result<Vec<Tangle>> {
    let order = match seed_order {
        Some(o) => {
            let mut sorted: Vec<usize> = o.to_vec();
            sorted.sort_unstable();
            assert!(
                sorted == (0..system.len()).collect::<Vec<_>>(),
                "seed order must be a permutation of the partition indices"
            );
            o.to_vec()
        }
        None => (0..system.len()).collect(),
    };
    let ctx = SearchCtx {
        system,
        family,
        order,
        forced: HashMap::new(),
        nodes: AtomicU64::new(0),
        budget: budget.0,
    };
    let specs = run_search(&ctx)?;
    Ok(specs
        .into_iter()
        .map(|spec| Tangle {
            spec,
            family: family.clone(),
            order: None,
        })
        .collect())
}

/// The tangle focused on a single object: every partition oriented toward
/// the side containing it. Always a tangle for the inconsistent-triple
/// family.
pub fn focused_tangle(system: &FeatureSystem, object: &str) -> Result<Tangle> {
    let spec = system.object_specification(object)?;
    Tangle::checked(spec, ForbiddenFamily::intersection_threshold(1))
}

/// The restriction of a tangle to a subsystem. Restrictions of tangles stay
/// tangles for the same family.
pub fn induced_tangle(tangle: &Tangle, sub: &FeatureSystem) -> Result<Tangle> {
    let spec = tangle.spec.restrict_to(sub)?;
    debug_assert!(is_tangle(&spec, &tangle.family)?);
    Ok(Tangle {
        spec,
        family: tangle.family.clone(),
        order: None,
    })
}

/// All tangles of the supersystem whose restriction to the tangle's own
/// system equals the tangle. Possibly empty: tangles need not extend.
pub fn extensions(
    tangle: &Tangle,
    super_system: &FeatureSystem,
    family: &ForbiddenFamily,
    budget: Budget,
) -> Result<Vec<Tangle>> {
    if !tangle.system().is_subsystem_of(super_system) {
        return Err(Error::NotASupersystem(format!("{super_system:?}")));
    }
    let mut forced = HashMap::new();
    for (i, e) in tangle.system().entries().iter().enumerate() {
        let target = super_system
            .index_of_partition(&e.partition)
            .expect("subsystem");
        // The canonical side of a partition does not depend on the system,
        // so the orientation bit transfers directly.
        forced.insert(target, tangle.spec.orientation(i).expect("total"));
    }
    let ctx = SearchCtx {
        system: super_system,
        family,
        order: (0..super_system.len()).collect(),
        forced,
        nodes: AtomicU64::new(0),
        budget: budget.0,
    };
    let specs = run_search(&ctx)?;
    Ok(specs
        .into_iter()
        .map(|spec| Tangle {
            spec,
            family: family.clone(),
            order: None,
        })
        .collect())
}

/// What a tangle does looking toward the next stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TangleFate {
    /// No tangle of the next stratum induces it.
    Died,
    /// Exactly one tangle of the next stratum induces it.
    ExtendedUniquely,
    /// Several tangles of the next stratum induce it.
    Spawned,
}

#[derive(Debug, Clone)]
pub struct EvolutionNode {
    pub tangle: Tangle,
    /// Index into the strata list.
    pub stratum: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// The forest of tangles across a chain of nested strata, with an edge
/// wherever the deeper tangle induces the shallower one.
#[derive(Debug, Clone)]
pub struct EvolutionForest {
    strata: Vec<FeatureSystem>,
    /// Stratum thresholds (the k for which each stratum is S_k).
    thresholds: Vec<u64>,
    nodes: Vec<EvolutionNode>,
}

impl EvolutionForest {
    pub fn nodes(&self) -> &[EvolutionNode] {
        &self.nodes
    }

    pub fn strata(&self) -> &[FeatureSystem] {
        &self.strata
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    /// Child-count status; `None` for nodes of the final stratum, which have
    /// no next stratum to extend into.
    pub fn fate(&self, node: usize) -> Option<TangleFate> {
        if self.nodes[node].stratum + 1 == self.strata.len() {
            return None;
        }
        Some(match self.nodes[node].children.len() {
            0 => TangleFate::Died,
            1 => TangleFate::ExtendedUniquely,
            _ => TangleFate::Spawned,
        })
    }

    /// A tangle is newly born at its stratum when it is not the unique
    /// extension of a previous tangle: either a root, or one of several
    /// siblings spawned by its parent.
    pub fn is_newly_born(&self, node: usize) -> bool {
        match self.nodes[node].parent {
            None => true,
            Some(p) => self.nodes[p].children.len() >= 2,
        }
    }

    /// The maximal tangles: those not induced by any tangle of higher order
    /// (childless nodes, including the whole final stratum).
    pub fn maximal(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].children.is_empty())
            .collect()
    }

    pub fn node_ids_of_stratum(&self, stratum: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].stratum == stratum)
            .collect()
    }
}

/// Enumerates tangles of every stratum and links each tangle to the tangle
/// it induces one stratum down.
pub fn evolution(
    strata: &[(u64, FeatureSystem)],
    family: &ForbiddenFamily,
    budget: Budget,
) -> Result<EvolutionForest> {
    assert!(!strata.is_empty(), "at least one stratum required");
    let mut nodes: Vec<EvolutionNode> = Vec::new();
    let mut previous: HashMap<Vec<u8>, usize> = HashMap::new();
    for (stratum_idx, (threshold, system)) in strata.iter().enumerate() {
        let tangles = enumerate_tangles(system, family, budget)?;
        let mut current = HashMap::new();
        for tangle in tangles {
            let id = nodes.len();
            let parent = if stratum_idx == 0 {
                None
            } else {
                let induced = tangle.spec.restrict_to(&strata[stratum_idx - 1].1)?;
                let parent_id = *previous
                    .get(&induced.encoding())
                    .expect("restriction of a tangle is a tangle of the substratum");
                nodes[parent_id].children.push(id);
                Some(parent_id)
            };
            current.insert(tangle.spec.encoding(), id);
            nodes.push(EvolutionNode {
                tangle: tangle.with_order(*threshold),
                stratum: stratum_idx,
                parent,
                children: Vec::new(),
            });
        }
        previous = current;
    }
    Ok(EvolutionForest {
        strata: strata.iter().map(|(_, s)| s.clone()).collect(),
        thresholds: strata.iter().map(|(k, _)| *k).collect(),
        nodes,
    })
}

/// Sum and count of `|f_i ∧ f_j ∧ f_k|` over all unordered triples with
/// repetition, the same triple convention the forbidden-set test uses.
pub fn triple_intersection_stats(features: &[Feature]) -> (u128, u128) {
    let mut sum = 0u128;
    let mut count = 0u128;
    for i in 0..features.len() {
        for j in i..features.len() {
            let ij = features[i].members().intersection(features[j].members());
            for k in j..features.len() {
                sum += ij.intersection(features[k].members()).count() as u128;
                count += 1;
            }
        }
    }
    (sum, count)
}

/// Whether the mean triple-intersection size over all unordered triples with
/// repetition is at least `n`. Every F_n-tangle is averaging for the same n.
pub fn is_averaging_tangle(spec: &Specification, n: u32) -> Result<bool> {
    if !spec.is_total() {
        return Err(Error::PartialSpecification);
    }
    let (sum, count) = triple_intersection_stats(&spec.features());
    Ok(sum >= n as u128 * count)
}

/// Whether replacing any single feature with its inverse strictly reduces
/// the mean triple-intersection size.
pub fn is_stable(spec: &Specification) -> Result<bool> {
    if !spec.is_total() {
        return Err(Error::PartialSpecification);
    }
    let (sum, _) = triple_intersection_stats(&spec.features());
    for index in 0..spec.system().len() {
        let mut flipped = spec.clone();
        flipped.set(index, !spec.orientation(index).expect("total"));
        let (flipped_sum, _) = triple_intersection_stats(&flipped.features());
        // The triple count is the same on both sides, so comparing sums
        // compares means exactly.
        if flipped_sum >= sum {
            return Ok(false);
        }
    }
    Ok(true)
}
