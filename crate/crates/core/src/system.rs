//! Feature systems (the set S of potential features) and specifications
//! (a choice of one side per partition).

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::feature::{Feature, Partition};
use crate::ground::{same_ground, GroundSet};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// Where a partition of the system came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Supplied directly (a question column, or a programmatic side).
    Original,
    /// Produced by expanding a Likert-scale question.
    LikertDerived { question: String, level: u32 },
    /// A Boolean combination of other partitions, added for submodularity.
    Corner { expression: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub label: String,
    pub partition: Partition,
    /// Whether the canonical side is the declared positive ("yes") side.
    pub yes_is_canonical: bool,
    pub provenance: Provenance,
    /// Set for `{∅, V}`: permitted in a system, excluded from tree sets.
    pub degenerate: bool,
}

struct SystemInner {
    ground: Arc<GroundSet>,
    entries: Vec<PartitionEntry>,
    by_side: HashMap<BitSet, usize>,
    /// Optional default orientation per partition (true = canonical side),
    /// needed by one-sided similarity and by the dual construction.
    defaults: Option<Vec<bool>>,
    /// Set when this system was produced by `dual_feature_system`.
    dual_of: Option<DualOrigin>,
}

pub(crate) struct DualOrigin {
    /// Object ids of the original ground set, in order; dual partition i
    /// belongs to original object i.
    pub objects: Vec<String>,
}

/// An ordered set S of partitions over one ground set. Cheap to clone;
/// immutable once built.
#[derive(Clone)]
pub struct FeatureSystem {
    inner: Arc<SystemInner>,
}

impl fmt::Debug for FeatureSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureSystem")
            .field("objects", &self.ground().len())
            .field(
                "partitions",
                &self
                    .entries()
                    .iter()
                    .map(|e| e.label.as_str())
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

/// A positive side together with its label and provenance, for constructing
/// systems with non-default metadata.
pub struct SideSpec {
    pub label: String,
    pub yes_side: Feature,
    pub provenance: Provenance,
}

impl FeatureSystem {
    /// Builds a system from positive sides, labelled `s0, s1, ..` in input
    /// order. Degenerate sides (∅ or V) are accepted and flagged.
    pub fn new(ground: &Arc<GroundSet>, sides: Vec<Feature>) -> Result<FeatureSystem> {
        let specs = sides
            .into_iter()
            .enumerate()
            .map(|(i, yes_side)| SideSpec {
                label: format!("s{i}"),
                yes_side,
                provenance: Provenance::Original,
            })
            .collect();
        Self::from_side_specs(ground, specs)
    }

    /// Builds a system from object-id subsets with explicit labels.
    pub fn from_labelled_ids(
        ground: &Arc<GroundSet>,
        sides: Vec<(impl Into<String>, Vec<&str>)>,
    ) -> Result<FeatureSystem> {
        let specs = sides
            .into_iter()
            .map(|(label, ids)| {
                Ok(SideSpec {
                    label: label.into(),
                    yes_side: Feature::from_ids(ground, ids)?,
                    provenance: Provenance::Original,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_side_specs(ground, specs)
    }

    pub fn from_side_specs(
        ground: &Arc<GroundSet>,
        sides: Vec<SideSpec>,
    ) -> Result<FeatureSystem> {
        let mut entries = Vec::with_capacity(sides.len());
        let mut by_side = HashMap::new();
        for spec in sides {
            if !same_ground(spec.yes_side.ground(), ground) {
                return Err(Error::MixedGroundSet);
            }
            let partition = Partition::from_side(spec.yes_side.clone());
            let yes_is_canonical = spec.yes_side == *partition.canonical_side();
            let key = partition.canonical_side().members().clone();
            if let Some(&prev) = by_side.get(&key) {
                let prev_entry: &PartitionEntry = &entries[prev];
                return Err(Error::DuplicatePartition(
                    prev_entry.label.clone(),
                    spec.label,
                ));
            }
            by_side.insert(key, entries.len());
            let degenerate = partition.is_degenerate();
            entries.push(PartitionEntry {
                label: spec.label,
                partition,
                yes_is_canonical,
                provenance: spec.provenance,
                degenerate,
            });
        }
        Ok(FeatureSystem {
            inner: Arc::new(SystemInner {
                ground: Arc::clone(ground),
                entries,
                by_side,
                defaults: None,
                dual_of: None,
            }),
        })
    }

    /// Declares a default side per partition, by label, `true` meaning the
    /// positive ("yes") side. Required by one-sided similarity and duals.
    pub fn with_default_sides(&self, defaults: &HashMap<String, bool>) -> Result<FeatureSystem> {
        let resolved = self
            .entries()
            .iter()
            .map(|e| {
                defaults
                    .get(&e.label)
                    .map(|&yes| if yes { e.yes_is_canonical } else { !e.yes_is_canonical })
                    .ok_or_else(|| Error::MissingDefaultSide(e.label.clone()))
            })
            .collect::<Result<Vec<bool>>>()?;
        self.replace_defaults(Some(resolved))
    }

    /// Declares every partition's positive side as its default side.
    pub fn with_yes_defaults(&self) -> FeatureSystem {
        let resolved = self.entries().iter().map(|e| e.yes_is_canonical).collect();
        self.replace_defaults(Some(resolved)).expect("total defaults")
    }

    fn replace_defaults(&self, defaults: Option<Vec<bool>>) -> Result<FeatureSystem> {
        Ok(FeatureSystem {
            inner: Arc::new(SystemInner {
                ground: Arc::clone(&self.inner.ground),
                entries: self.inner.entries.clone(),
                by_side: self.inner.by_side.clone(),
                defaults,
                dual_of: self.inner.dual_of.as_ref().map(|d| DualOrigin {
                    objects: d.objects.clone(),
                }),
            }),
        })
    }

    pub(crate) fn with_dual_origin(&self, objects: Vec<String>) -> FeatureSystem {
        FeatureSystem {
            inner: Arc::new(SystemInner {
                ground: Arc::clone(&self.inner.ground),
                entries: self.inner.entries.clone(),
                by_side: self.inner.by_side.clone(),
                defaults: self.inner.defaults.clone(),
                dual_of: Some(DualOrigin { objects }),
            }),
        }
    }

    pub(crate) fn dual_origin_objects(&self) -> Option<&[String]> {
        self.inner.dual_of.as_ref().map(|d| d.objects.as_slice())
    }

    pub fn ground(&self) -> &Arc<GroundSet> {
        &self.inner.ground
    }

    pub fn len(&self) -> usize {
        self.inner.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.entries.is_empty()
    }

    pub fn entries(&self) -> &[PartitionEntry] {
        &self.inner.entries
    }

    pub fn entry(&self, index: usize) -> &PartitionEntry {
        &self.inner.entries[index]
    }

    pub fn partition(&self, index: usize) -> &Partition {
        &self.inner.entries[index].partition
    }

    pub fn label(&self, index: usize) -> &str {
        &self.inner.entries[index].label
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.inner.entries.iter().position(|e| e.label == label)
    }

    /// Looks a partition up by value.
    pub fn index_of_partition(&self, partition: &Partition) -> Option<usize> {
        self.inner
            .by_side
            .get(partition.canonical_side().members())
            .copied()
    }

    /// The oriented feature for partition `index`; `true` = canonical side.
    pub fn feature(&self, index: usize, canonical: bool) -> Feature {
        self.partition(index).side(canonical)
    }

    /// The declared positive ("yes") side of partition `index`.
    pub fn yes_side(&self, index: usize) -> Feature {
        let e = self.entry(index);
        e.partition.side(e.yes_is_canonical)
    }

    /// The declared default side, if defaults were declared.
    pub fn default_side(&self, index: usize) -> Result<Feature> {
        let orient = self.default_orientation(index)?;
        Ok(self.feature(index, orient))
    }

    pub(crate) fn default_orientation(&self, index: usize) -> Result<bool> {
        match &self.inner.defaults {
            Some(d) => Ok(d[index]),
            None => Err(Error::MissingDefaultSide(self.label(index).to_string())),
        }
    }

    pub fn has_defaults(&self) -> bool {
        self.inner.defaults.is_some()
    }

    /// Same object list, compared by value with a pointer fast path.
    pub fn same_ground_as(&self, other: &FeatureSystem) -> bool {
        same_ground(&self.inner.ground, &other.inner.ground)
    }

    /// Every partition of `self` occurs in `other` (over the same ground).
    pub fn is_subsystem_of(&self, other: &FeatureSystem) -> bool {
        self.same_ground_as(other)
            && self
                .entries()
                .iter()
                .all(|e| other.index_of_partition(&e.partition).is_some())
    }

    /// A new system containing the partitions at `indices`, preserving
    /// labels, provenance and defaults.
    pub fn subsystem(&self, indices: &[usize]) -> FeatureSystem {
        let entries: Vec<PartitionEntry> = indices
            .iter()
            .map(|&i| self.inner.entries[i].clone())
            .collect();
        let by_side = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.partition.canonical_side().members().clone(), i))
            .collect();
        let defaults = self
            .inner
            .defaults
            .as_ref()
            .map(|d| indices.iter().map(|&i| d[i]).collect());
        FeatureSystem {
            inner: Arc::new(SystemInner {
                ground: Arc::clone(&self.inner.ground),
                entries,
                by_side,
                defaults,
                dual_of: None,
            }),
        }
    }

    /// A new system with extra partitions appended (used by the submodular
    /// closure). Fails on duplicates.
    pub fn extended(&self, extra: Vec<SideSpec>) -> Result<FeatureSystem> {
        let mut specs: Vec<SideSpec> = self
            .entries()
            .iter()
            .map(|e| SideSpec {
                label: e.label.clone(),
                yes_side: e.partition.side(e.yes_is_canonical),
                provenance: e.provenance.clone(),
            })
            .collect();
        specs.extend(extra);
        let sys = Self::from_side_specs(&self.inner.ground, specs)?;
        match &self.inner.defaults {
            // Extensions drop defaults: there is no declared side for the
            // new corners. Callers that need defaults re-declare them.
            Some(_) => Ok(sys),
            None => Ok(sys),
        }
    }

    /// The specification of S given by a single object: for each partition,
    /// the side containing it.
    pub fn object_specification(&self, object: &str) -> Result<Specification> {
        let pos = self.inner.ground.position(object)?;
        let mut spec = Specification::empty(self);
        for i in 0..self.len() {
            spec.set(i, self.partition(i).orientation_containing(pos));
        }
        Ok(spec)
    }

    /// True when two systems hold exactly the same partitions in the same
    /// order (labels may differ).
    pub fn same_partitions_as(&self, other: &FeatureSystem) -> bool {
        self.same_ground_as(other)
            && self.len() == other.len()
            && self
                .entries()
                .iter()
                .zip(other.entries())
                .all(|(a, b)| a.partition == b.partition)
    }
}

/// A (possibly partial) specification: per covered partition of one system,
/// an orientation bit selecting a side.
#[derive(Clone)]
pub struct Specification {
    system: FeatureSystem,
    covered: BitSet,
    /// Orientation per partition index; bit set = canonical side. Only
    /// meaningful where `covered`.
    positive: BitSet,
}

impl Specification {
    pub fn empty(system: &FeatureSystem) -> Specification {
        Specification {
            system: system.clone(),
            covered: BitSet::empty(system.len()),
            positive: BitSet::empty(system.len()),
        }
    }

    pub fn system(&self) -> &FeatureSystem {
        &self.system
    }

    pub fn set(&mut self, index: usize, canonical: bool) {
        self.covered.insert(index);
        if canonical {
            self.positive.insert(index);
        } else {
            self.positive.remove(index);
        }
    }

    pub fn unset(&mut self, index: usize) {
        self.covered.remove(index);
        self.positive.remove(index);
    }

    pub fn covers(&self, index: usize) -> bool {
        self.covered.contains(index)
    }

    pub fn orientation(&self, index: usize) -> Option<bool> {
        self.covers(index).then(|| self.positive.contains(index))
    }

    pub fn is_total(&self) -> bool {
        self.covered.count() == self.system.len()
    }

    pub fn covered_count(&self) -> usize {
        self.covered.count()
    }

    pub fn covered_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.covered.iter()
    }

    /// The chosen feature for a covered partition.
    pub fn feature(&self, index: usize) -> Option<Feature> {
        self.orientation(index)
            .map(|orient| self.system.feature(index, orient))
    }

    /// All chosen features, in system order.
    pub fn features(&self) -> Vec<Feature> {
        self.covered_indices()
            .map(|i| self.feature(i).expect("covered"))
            .collect()
    }

    /// Restriction to the covered partitions of `sub` (which must be a
    /// subsystem). Every partition of `sub` must be covered here.
    pub fn restrict_to(&self, sub: &FeatureSystem) -> Result<Specification> {
        if !sub.is_subsystem_of(&self.system) {
            return Err(Error::NotASubsystem(format!("{sub:?}")));
        }
        let mut out = Specification::empty(sub);
        for (i, e) in sub.entries().iter().enumerate() {
            let here = self
                .system
                .index_of_partition(&e.partition)
                .expect("subsystem");
            match self.orientation(here) {
                Some(orient) => out.set(i, orient),
                None => return Err(Error::PartialSpecification),
            }
        }
        Ok(out)
    }

    /// Lexicographic encoding of the orientation bits in system order, with
    /// the canonical side sorting first. Partial specs sort by coverage too.
    pub fn encoding(&self) -> Vec<u8> {
        (0..self.system.len())
            .map(|i| match self.orientation(i) {
                Some(true) => 0,
                Some(false) => 1,
                None => 2,
            })
            .collect()
    }

    /// Human-readable orientations by label: `(label, chose_yes_side)`.
    pub fn by_label(&self) -> Vec<(String, bool)> {
        self.covered_indices()
            .map(|i| {
                let e = self.system.entry(i);
                let canonical = self.positive.contains(i);
                (e.label.clone(), canonical == e.yes_is_canonical)
            })
            .collect()
    }
}

impl PartialEq for Specification {
    fn eq(&self, other: &Self) -> bool {
        self.system.same_partitions_as(&other.system)
            && self.covered == other.covered
            && self.positive == other.positive
    }
}

impl Eq for Specification {}

impl fmt::Debug for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Spec{{")?;
        let mut first = true;
        for i in self.covered_indices() {
            if !first {
                write!(f, ", ")?;
            }
            let e = self.system.entry(i);
            let yes = self.positive.contains(i) == e.yes_is_canonical;
            write!(f, "{}={}", e.label, if yes { "yes" } else { "no" })?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// Likert expansion mode (footnote-style translation of scale questions into
/// yes/no partitions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikertMode {
    /// One partition per level: "is the value exactly i?". The yes-sides are
    /// pairwise disjoint, so the no-sides form a star.
    Indicator,
    /// One partition per threshold: "is the value greater than i?".
    Threshold,
}

/// Expands an object-by-question table with values in `1..=levels` into a
/// feature system of indicator (or threshold) partitions.
///
/// Constant columns yield `{∅, V}`; such sides are kept and flagged
/// degenerate, collapsing duplicates within a question to a single entry.
pub fn likert_expand(
    ground: &Arc<GroundSet>,
    questions: &[(String, Vec<u32>)],
    levels: u32,
    mode: LikertMode,
) -> Result<FeatureSystem> {
    assert!(levels >= 2, "a Likert scale needs at least two levels");
    let mut specs: Vec<SideSpec> = Vec::new();
    for (question, values) in questions {
        if values.len() != ground.len() {
            return Err(Error::NotABipartition);
        }
        for (pos, &v) in values.iter().enumerate() {
            if v < 1 || v > levels {
                return Err(Error::OutOfRangeCell {
                    object: ground.id(pos).to_string(),
                    question: question.clone(),
                    value: v as i64,
                });
            }
        }
        let mut seen_in_question: Vec<BitSet> = Vec::new();
        let range: Vec<u32> = match mode {
            LikertMode::Indicator => (1..=levels).collect(),
            LikertMode::Threshold => (1..levels).collect(),
        };
        for i in range {
            let members = BitSet::from_indices(
                ground.len(),
                values.iter().enumerate().filter_map(|(pos, &v)| {
                    let hit = match mode {
                        LikertMode::Indicator => v == i,
                        LikertMode::Threshold => v > i,
                    };
                    hit.then_some(pos)
                }),
            );
            let canonical_key = if members.contains(0) || ground.is_empty() {
                members.clone()
            } else {
                members.complement()
            };
            if seen_in_question.contains(&canonical_key) {
                // A constant column produces the same degenerate partition at
                // every level; keep one entry per question.
                continue;
            }
            seen_in_question.push(canonical_key);
            let suffix = match mode {
                LikertMode::Indicator => format!("={i}"),
                LikertMode::Threshold => format!(">{i}"),
            };
            specs.push(SideSpec {
                label: format!("{question}{suffix}"),
                yes_side: Feature::new(Arc::clone(ground), members),
                provenance: Provenance::LikertDerived {
                    question: question.clone(),
                    level: i,
                },
            });
        }
    }
    FeatureSystem::from_side_specs(ground, specs)
}
