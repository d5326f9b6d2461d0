//! Features and partitions: the two complementary sides of a bipartition of
//! the ground set, and the Boolean operations on them.

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::ground::{same_ground, GroundSet};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::sync::Arc;

/// One oriented side of a bipartition: the subset of objects having the
/// feature. Features produced by [`meet`]/[`join`] need not correspond to any
/// partition of a feature system; they are "corner" features until a caller
/// promotes them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Feature {
    ground: Arc<GroundSet>,
    members: BitSet,
}

impl Feature {
    pub fn new(ground: Arc<GroundSet>, members: BitSet) -> Feature {
        assert_eq!(members.universe_len(), ground.len());
        Feature { ground, members }
    }

    pub fn from_ids(
        ground: &Arc<GroundSet>,
        ids: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Feature> {
        let mut members = BitSet::empty(ground.len());
        for id in ids {
            members.insert(ground.position(id.as_ref())?);
        }
        Ok(Feature::new(Arc::clone(ground), members))
    }

    pub fn ground(&self) -> &Arc<GroundSet> {
        &self.ground
    }

    pub fn members(&self) -> &BitSet {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.count()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.members.contains(position)
    }

    /// Object identifiers of the members, in ground-set order.
    pub fn ids(&self) -> Vec<String> {
        self.members
            .iter()
            .map(|i| self.ground.id(i).to_string())
            .collect()
    }

    /// The complementary feature over the same ground set.
    pub fn invert(&self) -> Feature {
        Feature {
            ground: Arc::clone(&self.ground),
            members: self.members.complement(),
        }
    }
}

impl PartialEq for Feature {
    fn eq(&self, other: &Self) -> bool {
        same_ground(&self.ground, &other.ground) && self.members == other.members
    }
}

impl Eq for Feature {}

impl PartialOrd for Feature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Feature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.members.cmp(&other.members)
    }
}

fn check_same_ground(a: &Feature, b: &Feature) -> Result<()> {
    if same_ground(&a.ground, &b.ground) {
        Ok(())
    } else {
        Err(Error::MixedGroundSet)
    }
}

/// Set intersection of two features: the objects having both.
pub fn meet(a: &Feature, b: &Feature) -> Result<Feature> {
    check_same_ground(a, b)?;
    Ok(Feature {
        ground: Arc::clone(&a.ground),
        members: a.members.intersection(&b.members),
    })
}

/// Set union of two features: the objects having at least one.
pub fn join(a: &Feature, b: &Feature) -> Result<Feature> {
    check_same_ground(a, b)?;
    Ok(Feature {
        ground: Arc::clone(&a.ground),
        members: a.members.union(&b.members),
    })
}

/// An unordered pair of complementary features. The canonical side stored
/// first is the one containing the object at ground position 0, so that
/// `{A, B}` and `{B, A}` construct identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    canonical: Feature,
}

impl Partition {
    pub fn from_side(side: Feature) -> Partition {
        if side.contains(0) || side.ground().is_empty() {
            Partition { canonical: side }
        } else {
            Partition {
                canonical: side.invert(),
            }
        }
    }

    /// The side containing the lowest-index object.
    pub fn canonical_side(&self) -> &Feature {
        &self.canonical
    }

    pub fn other_side(&self) -> Feature {
        self.canonical.invert()
    }

    pub fn ground(&self) -> &Arc<GroundSet> {
        self.canonical.ground()
    }

    /// `true` for the degenerate partition `{∅, V}`.
    pub fn is_degenerate(&self) -> bool {
        self.canonical.members().is_full()
    }

    /// Orients the partition: `true` selects the canonical side.
    pub fn side(&self, canonical: bool) -> Feature {
        if canonical {
            self.canonical.clone()
        } else {
            self.other_side()
        }
    }

    /// Whether `feature` is one of this partition's two sides, and if so
    /// which (`Some(true)` for the canonical one).
    pub fn side_of(&self, feature: &Feature) -> Option<bool> {
        if feature == &self.canonical {
            Some(true)
        } else if feature.members() == &self.canonical.members().complement() {
            Some(false)
        } else {
            None
        }
    }

    /// The orientation whose side contains the given object position.
    pub fn orientation_containing(&self, position: usize) -> bool {
        self.canonical.contains(position)
    }

    /// `partition A,B  and  partition C,D  are nested when one side of each
    /// is contained in a side of the other (the four-inclusion test).
    pub fn is_nested_with(&self, other: &Partition) -> bool {
        let a = self.canonical.members();
        let a_inv = a.complement();
        let b = other.canonical.members();
        let b_inv = b.complement();
        a.is_subset_of(b) || a.is_subset_of(&b_inv) || a_inv.is_subset_of(b) || a_inv.is_subset_of(&b_inv)
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Partition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground() -> Arc<GroundSet> {
        GroundSet::new(["a", "b", "c", "d"]).unwrap()
    }

    #[test]
    fn invert_is_an_involution() {
        let g = ground();
        let f = Feature::from_ids(&g, ["a", "c"]).unwrap();
        assert_eq!(f.invert().invert(), f);
        assert_eq!(f.invert().ids(), vec!["b", "d"]);
    }

    #[test]
    fn invert_of_extremes() {
        let g = ground();
        let all = Feature::new(Arc::clone(&g), BitSet::full(4));
        let none = all.invert();
        assert!(none.is_empty());
        assert_eq!(none.invert(), all);
    }

    #[test]
    fn meet_and_join_are_idempotent() {
        let g = ground();
        let f = Feature::from_ids(&g, ["a", "b"]).unwrap();
        assert_eq!(meet(&f, &f).unwrap(), f);
        assert_eq!(join(&f, &f).unwrap(), f);
    }

    #[test]
    fn mixed_ground_sets_are_rejected() {
        let g1 = ground();
        let g2 = GroundSet::new(["x", "y", "z", "w"]).unwrap();
        let f1 = Feature::from_ids(&g1, ["a"]).unwrap();
        let f2 = Feature::from_ids(&g2, ["x"]).unwrap();
        assert!(matches!(meet(&f1, &f2), Err(Error::MixedGroundSet)));
    }

    #[test]
    fn partition_canonical_form_is_orientation_free() {
        let g = ground();
        let side = Feature::from_ids(&g, ["b", "c"]).unwrap();
        let p1 = Partition::from_side(side.clone());
        let p2 = Partition::from_side(side.invert());
        assert_eq!(p1, p2);
        // Canonical side contains "a" (position 0).
        assert!(p1.canonical_side().contains(0));
    }

    #[test]
    fn disjoint_sides_are_nested() {
        let g = ground();
        let p = Partition::from_side(Feature::from_ids(&g, ["a"]).unwrap());
        let q = Partition::from_side(Feature::from_ids(&g, ["b"]).unwrap());
        assert!(p.is_nested_with(&q));
    }

    #[test]
    fn crossing_partitions_are_not_nested() {
        let g = ground();
        let p = Partition::from_side(Feature::from_ids(&g, ["a", "b"]).unwrap());
        let q = Partition::from_side(Feature::from_ids(&g, ["b", "c"]).unwrap());
        assert!(!p.is_nested_with(&q));
    }
}
