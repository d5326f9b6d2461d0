//! Nested tangle-distinguishing tree sets: distinguishers, efficient
//! distinguishers, construction of the tree of tangles, the regions it cuts
//! the ground set into, and its consistent specifications.
//!
//! Construction is by recursive splitting of the tangle set: each split
//! picks a distinguisher from S and commits the corner of its chosen side
//! with the current cell region. Member sides therefore form a laminar
//! family, which makes nestedness structural rather than something to
//! repair afterwards. Every build is still verified against the
//! postcondition oracle before it is returned, and a bounded exhaustive
//! search over the Boolean closure of the picked distinguishers stands in
//! when the splitting stalls.

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::feature::{Feature, Partition};
use crate::forbidden::{is_consistent, ForbiddenFamily};
use crate::order::OrderedSystem;
use crate::system::{FeatureSystem, Specification};
use crate::tangles::{Budget, EvolutionForest, Tangle};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

/// A Boolean combination of oriented sides of a feature system, denoting one
/// side of a corner partition. Leaves name partitions by index with an
/// orientation; `true` selects the canonical side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SideExpr {
    Leaf { index: usize, canonical: bool },
    Meet(Box<SideExpr>, Box<SideExpr>),
    Join(Box<SideExpr>, Box<SideExpr>),
}

impl SideExpr {
    pub fn leaf(index: usize, canonical: bool) -> SideExpr {
        SideExpr::Leaf { index, canonical }
    }

    /// The set the expression denotes over the reference system.
    pub fn denoted_side(&self, system: &FeatureSystem) -> Feature {
        match self {
            SideExpr::Leaf { index, canonical } => system.feature(*index, *canonical),
            SideExpr::Meet(a, b) => {
                crate::feature::meet(&a.denoted_side(system), &b.denoted_side(system))
                    .expect("one system")
            }
            SideExpr::Join(a, b) => {
                crate::feature::join(&a.denoted_side(system), &b.denoted_side(system))
                    .expect("one system")
            }
        }
    }

    /// How a specification orients the corner: substitute, for each leaf,
    /// whether the specification chose that side, and fold meets as "and"
    /// and joins as "or". `None` when some leaf partition is not covered.
    ///
    /// This is exactly the orientation forced by consistency: a tangle that
    /// chose the leaf sides making the expression true cannot consistently
    /// take the complement of the corner, and vice versa.
    pub fn orientation_under(
        &self,
        reference: &FeatureSystem,
        spec: &Specification,
    ) -> Option<bool> {
        match self {
            SideExpr::Leaf { index, canonical } => {
                let partition = reference.partition(*index);
                let local = spec.system().index_of_partition(partition)?;
                spec.orientation(local).map(|o| o == *canonical)
            }
            SideExpr::Meet(a, b) => Some(
                a.orientation_under(reference, spec)? && b.orientation_under(reference, spec)?,
            ),
            SideExpr::Join(a, b) => Some(
                a.orientation_under(reference, spec)? || b.orientation_under(reference, spec)?,
            ),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            SideExpr::Leaf { .. } => 0,
            SideExpr::Meet(a, b) | SideExpr::Join(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Renders the expression with labels, e.g. `(p:yes & (q:no & r:no))`.
    pub fn render(&self, system: &FeatureSystem) -> String {
        match self {
            SideExpr::Leaf { index, canonical } => {
                let entry = system.entry(*index);
                let yes = *canonical == entry.yes_is_canonical;
                format!(
                    "{}:{}",
                    render_label(&entry.label),
                    if yes { "yes" } else { "no" }
                )
            }
            SideExpr::Meet(a, b) => format!("({} & {})", a.render(system), b.render(system)),
            SideExpr::Join(a, b) => format!("({} | {})", a.render(system), b.render(system)),
        }
    }

    /// Parses the `render` format back, resolving labels in the system.
    pub fn parse(input: &str, system: &FeatureSystem) -> Result<SideExpr> {
        let mut parser = ExprParser {
            rest: input.trim(),
            system,
        };
        let expr = parser.expr()?;
        if !parser.rest.trim().is_empty() {
            return Err(Error::ProvenanceParse(format!(
                "trailing input: {:?}",
                parser.rest
            )));
        }
        Ok(expr)
    }
}

fn render_label(label: &str) -> String {
    let bare = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "_.=<>-".contains(c));
    if bare {
        label.to_string()
    } else {
        format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

struct ExprParser<'a> {
    rest: &'a str,
    system: &'a FeatureSystem,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn expr(&mut self) -> Result<SideExpr> {
        self.skip_ws();
        if let Some(stripped) = self.rest.strip_prefix('(') {
            self.rest = stripped;
            let left = self.expr()?;
            self.skip_ws();
            let op = self
                .rest
                .chars()
                .next()
                .ok_or_else(|| Error::ProvenanceParse("unexpected end".into()))?;
            if op != '&' && op != '|' {
                return Err(Error::ProvenanceParse(format!(
                    "expected & or |, got {op:?}"
                )));
            }
            self.rest = &self.rest[1..];
            let right = self.expr()?;
            self.skip_ws();
            if !self.rest.starts_with(')') {
                return Err(Error::ProvenanceParse("expected )".into()));
            }
            self.rest = &self.rest[1..];
            Ok(match op {
                '&' => SideExpr::Meet(Box::new(left), Box::new(right)),
                _ => SideExpr::Join(Box::new(left), Box::new(right)),
            })
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<SideExpr> {
        self.skip_ws();
        let label = if let Some(stripped) = self.rest.strip_prefix('"') {
            let mut out = String::new();
            let mut chars = stripped.char_indices();
            loop {
                let (i, c) = chars
                    .next()
                    .ok_or_else(|| Error::ProvenanceParse("unterminated label".into()))?;
                match c {
                    '\\' => {
                        let (_, esc) = chars
                            .next()
                            .ok_or_else(|| Error::ProvenanceParse("bad escape".into()))?;
                        out.push(esc);
                    }
                    '"' => {
                        self.rest = &stripped[i + 1..];
                        break;
                    }
                    _ => out.push(c),
                }
            }
            out
        } else {
            let end = self
                .rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || "_.=<>-".contains(c)))
                .unwrap_or(self.rest.len());
            if end == 0 {
                return Err(Error::ProvenanceParse(format!(
                    "expected a label at {:?}",
                    self.rest
                )));
            }
            let label = self.rest[..end].to_string();
            self.rest = &self.rest[end..];
            label
        };
        if !self.rest.starts_with(':') {
            return Err(Error::ProvenanceParse("expected : after label".into()));
        }
        self.rest = &self.rest[1..];
        let yes = if let Some(stripped) = self.rest.strip_prefix("yes") {
            self.rest = stripped;
            true
        } else if let Some(stripped) = self.rest.strip_prefix("no") {
            self.rest = stripped;
            false
        } else {
            return Err(Error::ProvenanceParse("expected yes or no".into()));
        };
        let index = self
            .system
            .index_of_label(&label)
            .ok_or_else(|| Error::ProvenanceParse(format!("unknown label {label:?}")))?;
        let entry = self.system.entry(index);
        Ok(SideExpr::Leaf {
            index,
            canonical: yes == entry.yes_is_canonical,
        })
    }
}

/// How a tree member was obtained.
#[derive(Debug, Clone)]
pub enum MemberSource {
    /// A partition of the reference system itself.
    System { index: usize },
    /// A corner: the expression denotes `denoted_canonical`'s side of the
    /// partition.
    Corner {
        expr: SideExpr,
        denoted_canonical: bool,
    },
}

/// One member of a tree set: a bipartition of V, possibly a corner with its
/// Boolean provenance, plus its order when built over an ordered system.
#[derive(Debug, Clone)]
pub struct TreeMember {
    pub partition: Partition,
    pub source: MemberSource,
    pub order: Option<u64>,
}

impl TreeMember {
    /// Depth of the provenance expression (0 for system partitions).
    pub fn provenance_depth(&self) -> usize {
        match &self.source {
            MemberSource::System { .. } => 0,
            MemberSource::Corner { expr, .. } => expr.depth(),
        }
    }

    /// The side the provenance denotes; the canonical side for raw members.
    pub fn export_side(&self, system: &FeatureSystem) -> Feature {
        match &self.source {
            MemberSource::System { .. } => self.partition.canonical_side().clone(),
            MemberSource::Corner { expr, .. } => expr.denoted_side(system),
        }
    }
}

/// A nested set of bipartitions of V together with the reference system its
/// provenance expressions speak about.
#[derive(Debug, Clone)]
pub struct TreeSet {
    system: FeatureSystem,
    members: Vec<TreeMember>,
}

/// An orientation of a tree set: the canonical-side flag per member.
pub type TreeOrientation = Vec<bool>;

impl TreeSet {
    pub fn new(system: &FeatureSystem, members: Vec<TreeMember>) -> TreeSet {
        TreeSet {
            system: system.clone(),
            members,
        }
    }

    pub fn empty(system: &FeatureSystem) -> TreeSet {
        Self::new(system, Vec::new())
    }

    pub fn system(&self) -> &FeatureSystem {
        &self.system
    }

    pub fn members(&self) -> &[TreeMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Nested, free of `{∅, V}`, and duplicate-free.
    pub fn is_valid(&self) -> bool {
        let mut seen = HashSet::new();
        for m in &self.members {
            if !seen.insert(m.partition.canonical_side().members().clone()) {
                return false;
            }
        }
        is_tree_set(
            &self
                .members
                .iter()
                .map(|m| m.partition.clone())
                .collect::<Vec<_>>(),
        )
    }

    /// How a specification orients a member: directly for system members,
    /// through the provenance expression for corners. `None` when the
    /// specification does not cover the generating partitions.
    pub fn orientation_of(&self, member: usize, spec: &Specification) -> Option<bool> {
        let m = &self.members[member];
        match &m.source {
            MemberSource::System { index } => {
                let partition = self.system.partition(*index);
                let local = spec.system().index_of_partition(partition)?;
                spec.orientation(local)
            }
            MemberSource::Corner {
                expr,
                denoted_canonical,
            } => expr
                .orientation_under(&self.system, spec)
                .map(|toward_denoted| toward_denoted == *denoted_canonical),
        }
    }

    /// The side a specification chooses for a member.
    pub fn side_chosen(&self, member: usize, spec: &Specification) -> Option<Feature> {
        self.orientation_of(member, spec)
            .map(|o| self.members[member].partition.side(o))
    }

    /// The full orientation of the tree by a specification, if it orients
    /// every member.
    pub fn orientation_by(&self, spec: &Specification) -> Option<TreeOrientation> {
        (0..self.members.len())
            .map(|i| self.orientation_of(i, spec))
            .collect()
    }

    /// All consistent specifications of the tree set: orientations in which
    /// no two chosen sides are disjoint. These correspond to the nodes of
    /// the structure tree, so a tree with ℓ members has exactly ℓ + 1.
    pub fn consistent_specifications(&self) -> Vec<TreeOrientation> {
        fn recurse(
            sides: &[(BitSet, BitSet)],
            current: &mut Vec<bool>,
            out: &mut Vec<TreeOrientation>,
        ) {
            let level = current.len();
            if level == sides.len() {
                out.push(current.clone());
                return;
            }
            'orient: for orient in [true, false] {
                let chosen = if orient {
                    &sides[level].0
                } else {
                    &sides[level].1
                };
                for (i, &earlier) in current.iter().enumerate() {
                    let other = if earlier { &sides[i].0 } else { &sides[i].1 };
                    if chosen.is_disjoint_from(other) {
                        continue 'orient;
                    }
                }
                current.push(orient);
                recurse(sides, current, out);
                current.pop();
            }
        }
        let sides: Vec<(BitSet, BitSet)> = self
            .members
            .iter()
            .map(|m| {
                let c = m.partition.canonical_side().members().clone();
                let i = c.complement();
                (c, i)
            })
            .collect();
        let mut out = Vec::new();
        recurse(&sides, &mut Vec::new(), &mut out);
        out
    }

    /// The structure tree: one node per consistent specification, one edge
    /// per member, joining the two specifications that differ exactly in
    /// that member. Returns (nodes, edges as (node, node, member)).
    pub fn structure_tree(&self) -> (Vec<TreeOrientation>, Vec<(usize, usize, usize)>) {
        let nodes = self.consistent_specifications();
        let mut edges = Vec::new();
        for a in 0..nodes.len() {
            for b in a + 1..nodes.len() {
                let diff: Vec<usize> = (0..self.members.len())
                    .filter(|&m| nodes[a][m] != nodes[b][m])
                    .collect();
                if let [member] = diff.as_slice() {
                    edges.push((a, b, *member));
                }
            }
        }
        (nodes, edges)
    }
}

/// The four-inclusion nestedness test over a set of bipartitions, also
/// requiring that `{∅, V}` is absent.
pub fn is_tree_set(partitions: &[Partition]) -> bool {
    for p in partitions {
        if p.is_degenerate() {
            return false;
        }
    }
    for i in 0..partitions.len() {
        for j in i + 1..partitions.len() {
            if partitions[i] == partitions[j] {
                continue;
            }
            if !partitions[i].is_nested_with(&partitions[j]) {
                return false;
            }
        }
    }
    true
}

/// Orientation of a partition forced on a specification by consistency:
/// the unique side whose complement would create an inconsistent subset.
/// `None` when both or neither side is consistent with the specification.
pub fn orient_by_consistency(spec: &Specification, partition: &Partition) -> Option<bool> {
    let features = spec.features();
    let fits = |side: Feature| {
        let mut with = features.clone();
        with.push(side);
        is_consistent(&with)
    };
    match (fits(partition.side(true)), fits(partition.side(false))) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

/// Whether a partition distinguishes two tangles: both orient it (directly,
/// or forced by consistency for corners) and they orient it differently.
pub fn distinguishes(partition: &Partition, t1: &Tangle, t2: &Tangle) -> Result<bool> {
    let orient = |t: &Tangle| -> Result<bool> {
        if let Some(i) = t.system().index_of_partition(partition) {
            t.spec().orientation(i).ok_or(Error::PartialSpecification)
        } else {
            orient_by_consistency(t.spec(), partition).ok_or_else(|| {
                Error::UnspecifiedPartition(format!("{:?}", partition.canonical_side().ids()))
            })
        }
    };
    Ok(orient(t1)? != orient(t2)?)
}

/// Minimum order over all partitions of S that distinguish the two tangles,
/// with the first partition index attaining it. `None` when no partition of
/// S is oriented differently by both.
pub fn minimum_distinguisher(
    ordered: &OrderedSystem,
    t1: &Tangle,
    t2: &Tangle,
) -> Option<(usize, u64)> {
    let mut best: Option<(usize, u64)> = None;
    for (i, e) in ordered.system().entries().iter().enumerate() {
        let o1 = t1
            .system()
            .index_of_partition(&e.partition)
            .and_then(|j| t1.spec().orientation(j));
        let o2 = t2
            .system()
            .index_of_partition(&e.partition)
            .and_then(|j| t2.spec().orientation(j));
        if let (Some(a), Some(b)) = (o1, o2) {
            if a != b {
                let order = ordered.order_of_index(i);
                if best.map_or(true, |(_, prev)| order < prev) {
                    best = Some((i, order));
                }
            }
        }
    }
    best
}

/// Whether `partition` distinguishes the two tangles and no partition of S
/// of lower order does.
pub fn distinguishes_efficiently(
    ordered: &OrderedSystem,
    partition: &Partition,
    t1: &Tangle,
    t2: &Tangle,
) -> Result<bool> {
    let (_, scan_min) =
        minimum_distinguisher(ordered, t1, t2).ok_or(Error::NotDistinguishable(0, 1))?;
    if !distinguishes(partition, t1, t2)? {
        return Ok(false);
    }
    let order = ordered.order_of_side(partition.canonical_side())?;
    Ok(order <= scan_min)
}

/// Per unordered tangle pair: a minimum-order distinguisher from S, and the
/// tree member covering the pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistinguisherEntry {
    /// Indices into the tangle list handed to the builder (for efficient
    /// trees: node ids of the evolution forest).
    pub pair: (usize, usize),
    /// Index into the reference system of a distinguisher from S: the first
    /// of minimum order for ordered builds, the first in system order
    /// otherwise.
    pub partition_index: usize,
    /// Its order, which equals the exhaustive-scan minimum, when ordered.
    pub order: Option<u64>,
    /// Whether the reported partition distinguishes the pair efficiently;
    /// `None` when no order function is in play.
    pub efficient: Option<bool>,
    /// A tree member distinguishing the pair: the one of minimal order
    /// (ties toward the lower index), or the lowest index if unordered.
    pub member: usize,
    pub member_order: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DistinguisherReport {
    pub entries: Vec<DistinguisherEntry>,
}

/// The tree of tangles for a fixed feature system: a nested set of at most
/// `tangles.len() - 1` partitions (of S, or corners built from S) such that
/// every pair of the given tangles orients some member differently.
pub fn build_tree_of_tangles(
    system: &FeatureSystem,
    tangles: &[Tangle],
) -> Result<(TreeSet, DistinguisherReport)> {
    if tangles.is_empty() {
        return Err(Error::EmptyTangleList);
    }
    for t in tangles {
        if !t.system().same_partitions_as(system) || !t.spec().is_total() {
            return Err(Error::TreeTangleMismatch(
                "tangles must be total on the build system".into(),
            ));
        }
    }
    for i in 0..tangles.len() {
        for j in i + 1..tangles.len() {
            if tangles[i].spec() == tangles[j].spec() {
                return Err(Error::NoDistinguisher(i, j));
            }
        }
    }
    let mut builder = Builder {
        full: system.clone(),
        ordered: None,
        used_sides: HashSet::new(),
        members: Vec::new(),
    };
    let all: Vec<usize> = (0..tangles.len()).collect();
    let specs: Vec<&Specification> = tangles.iter().map(|t| t.spec()).collect();
    let region = BitSet::full(system.ground().len());
    let built = builder.split(&all, &specs, system, region, None).and_then(|_| {
        let tree = minimise(TreeSet::new(system, builder.members.clone()), tangles);
        verify_tree_of_tangles(&tree, tangles)?;
        Ok(tree)
    });
    let tree = match built {
        Ok(tree) => tree,
        // The splitting stalled or produced an invalid tree; fall back to
        // the exhaustive search over the closure of picked distinguishers.
        Err(_) => {
            let tree = fallback_tree(system, tangles, None)?;
            let tree = minimise(tree, tangles);
            verify_tree_of_tangles(&tree, tangles)?;
            tree
        }
    };
    let report = unordered_report(system, tangles, &tree)?;
    Ok((tree, report))
}

fn unordered_report(
    system: &FeatureSystem,
    tangles: &[Tangle],
    tree: &TreeSet,
) -> Result<DistinguisherReport> {
    let mut entries = Vec::new();
    for i in 0..tangles.len() {
        for j in i + 1..tangles.len() {
            let partition_index = (0..system.len())
                .find(|&k| tangles[i].spec().orientation(k) != tangles[j].spec().orientation(k))
                .expect("distinct total specifications differ somewhere");
            let member = (0..tree.len())
                .find(|&m| {
                    let a = tree.orientation_of(m, tangles[i].spec());
                    let b = tree.orientation_of(m, tangles[j].spec());
                    matches!((a, b), (Some(x), Some(y)) if x != y)
                })
                .ok_or_else(|| {
                    Error::VerificationFailed(format!("pair ({i},{j}) not distinguished"))
                })?;
            entries.push(DistinguisherEntry {
                pair: (i, j),
                partition_index,
                order: None,
                efficient: None,
                member,
                member_order: None,
            });
        }
    }
    Ok(DistinguisherReport { entries })
}

struct Builder {
    full: FeatureSystem,
    ordered: Option<OrderedSystem>,
    used_sides: HashSet<BitSet>,
    members: Vec<TreeMember>,
}

type Cell = (BitSet, Option<SideExpr>);

impl Builder {
    fn order_of(&self, side: &Feature) -> Result<Option<u64>> {
        match &self.ordered {
            None => Ok(None),
            Some(o) => o.order_of_side(side).map(Some),
        }
    }

    /// Recursively splits `group` (indices into `specs`, all total on
    /// `sys`) inside the cell `region`/`expr`. Returns each group element's
    /// final cell.
    fn split(
        &mut self,
        group: &[usize],
        specs: &[&Specification],
        sys: &FeatureSystem,
        region: BitSet,
        expr: Option<SideExpr>,
    ) -> Result<HashMap<usize, Cell>> {
        if group.len() <= 1 {
            let mut out = HashMap::new();
            if let Some(&only) = group.first() {
                out.insert(only, (region, expr));
            }
            return Ok(out);
        }
        // Candidate splitters: partitions of sys the group disagrees on,
        // cheapest order first.
        let mut candidates: Vec<(Option<u64>, usize)> = Vec::new();
        for k in 0..sys.len() {
            let mut orientations = group.iter().map(|&g| specs[g].orientation(k));
            let first = orientations.next().unwrap();
            if orientations.any(|o| o != first) {
                let order = self.order_of(sys.partition(k).canonical_side())?;
                candidates.push((order, k));
            }
        }
        candidates.sort();
        if candidates.is_empty() {
            return Err(Error::UncrossingFailure);
        }
        let min_split_order = candidates[0].0;
        // A member option: meet one side of a splitter with the region.
        // Rank valid options by: does not exhaust the region (keeps the
        // sibling cell nonempty), efficiency (order at most the cheapest
        // splitter's), order, side encoding.
        struct MemberOption {
            exhausts_region: bool,
            inefficient: bool,
            order: Option<u64>,
            side: BitSet,
            splitter: usize,
            splitter_canonical: bool,
        }
        let mut options: Vec<MemberOption> = Vec::new();
        for &(_, k) in &candidates {
            for canonical in [true, false] {
                let side_bits = sys.feature(k, canonical).members().intersection(&region);
                if side_bits.is_empty() || side_bits.is_full() {
                    continue;
                }
                let canonical_key = if side_bits.contains(0) {
                    side_bits.clone()
                } else {
                    side_bits.complement()
                };
                if self.used_sides.contains(&canonical_key) {
                    continue;
                }
                let feature = Feature::new(Arc::clone(sys.ground()), side_bits.clone());
                let order = self.order_of(&feature)?;
                let inefficient = match (order, min_split_order) {
                    (Some(o), Some(min)) => o > min,
                    _ => false,
                };
                options.push(MemberOption {
                    exhausts_region: side_bits == region,
                    inefficient,
                    order,
                    side: side_bits,
                    splitter: k,
                    splitter_canonical: canonical,
                });
            }
            if self.ordered.is_none() && !options.is_empty() {
                // Unordered builds take the first splitter in system order
                // that admits an option.
                break;
            }
        }
        options.sort_by(|a, b| {
            (
                a.exhausts_region,
                a.inefficient,
                a.order,
                &a.side,
                a.splitter,
            )
                .cmp(&(
                    b.exhausts_region,
                    b.inefficient,
                    b.order,
                    &b.side,
                    b.splitter,
                ))
        });
        let Some(choice) = options.first() else {
            return Err(Error::UncrossingFailure);
        };
        let corner = Feature::new(Arc::clone(sys.ground()), choice.side.clone());
        let partition = Partition::from_side(corner.clone());
        let full_index = self
            .full
            .index_of_partition(sys.partition(choice.splitter))
            .expect("stratum partitions are in the full system");
        let leaf = SideExpr::leaf(full_index, choice.splitter_canonical);
        let member_expr = match &expr {
            None => leaf,
            Some(path) => SideExpr::Meet(Box::new(leaf), Box::new(path.clone())),
        };
        let source = match self.full.index_of_partition(&partition) {
            Some(index) => MemberSource::System { index },
            None => MemberSource::Corner {
                denoted_canonical: partition.side_of(&corner).expect("built from side"),
                expr: member_expr.clone(),
            },
        };
        self.used_sides
            .insert(partition.canonical_side().members().clone());
        self.members.push(TreeMember {
            partition,
            source,
            order: self.order_of(&corner)?,
        });
        let splitter = choice.splitter;
        let splitter_canonical = choice.splitter_canonical;
        let inner_region = choice.side.clone();
        let (inside, outside): (Vec<usize>, Vec<usize>) = group
            .iter()
            .partition(|&&g| specs[g].orientation(splitter) == Some(splitter_canonical));
        let outer_region =
            region.intersection(sys.feature(splitter, !splitter_canonical).members());
        let outer_leaf = SideExpr::leaf(full_index, !splitter_canonical);
        let outer_expr = match &expr {
            None => outer_leaf,
            Some(path) => SideExpr::Meet(Box::new(outer_leaf), Box::new(path.clone())),
        };
        let mut cells = self.split(&inside, specs, sys, inner_region, Some(member_expr))?;
        cells.extend(self.split(&outside, specs, sys, outer_region, Some(outer_expr))?);
        Ok(cells)
    }
}

/// Drops members whose removal keeps every pair distinguished, scanning in
/// reverse construction order.
fn minimise(tree: TreeSet, tangles: &[Tangle]) -> TreeSet {
    let system = tree.system().clone();
    let mut members = tree.members().to_vec();
    let mut index = members.len();
    while index > 0 {
        index -= 1;
        let mut without = members.clone();
        without.remove(index);
        let candidate = TreeSet::new(&system, without);
        if all_pairs_distinguished(&candidate, tangles) {
            members = candidate.members().to_vec();
        }
    }
    TreeSet::new(&system, members)
}

fn all_pairs_distinguished(tree: &TreeSet, tangles: &[Tangle]) -> bool {
    for i in 0..tangles.len() {
        for j in i + 1..tangles.len() {
            let covered = (0..tree.len()).any(|m| {
                let a = tree.orientation_of(m, tangles[i].spec());
                let b = tree.orientation_of(m, tangles[j].spec());
                matches!((a, b), (Some(x), Some(y)) if x != y)
            });
            if !covered {
                return false;
            }
        }
    }
    true
}

/// Postcondition oracle for the tree of tangles; run after every build and
/// by the bundle re-checker.
pub fn verify_tree_of_tangles(tree: &TreeSet, tangles: &[Tangle]) -> Result<()> {
    if !tree.is_valid() {
        return Err(Error::VerificationFailed(
            "members are not a nested, nontrivial, duplicate-free set".into(),
        ));
    }
    if tangles.len() > 1 && tree.len() > tangles.len() - 1 {
        return Err(Error::VerificationFailed(format!(
            "{} members exceed the bound of {} tangles - 1",
            tree.len(),
            tangles.len()
        )));
    }
    let ground_len = tree.system().ground().len();
    if tree.len() >= 2 * ground_len {
        return Err(Error::VerificationFailed(format!(
            "{} members reach the bound 2|V| = {}",
            tree.len(),
            2 * ground_len
        )));
    }
    if !all_pairs_distinguished(tree, tangles) {
        return Err(Error::VerificationFailed(
            "some tangle pair is not distinguished".into(),
        ));
    }
    for (i, t) in tangles.iter().enumerate() {
        if tree.orientation_by(t.spec()).is_none() {
            return Err(Error::VerificationFailed(format!(
                "tangle {i} does not orient every member"
            )));
        }
    }
    let regions = tangle_regions(tree, tangles)?;
    let mut union = BitSet::empty(ground_len);
    for region in &regions {
        if !union.is_disjoint_from(region) {
            return Err(Error::VerificationFailed("regions overlap".into()));
        }
        union = union.union(region);
    }
    if !union.is_full() {
        return Err(Error::VerificationFailed(
            "regions do not exhaust the ground set".into(),
        ));
    }
    let specs = tree.consistent_specifications();
    if specs.len() != tree.len() + 1 {
        return Err(Error::VerificationFailed(format!(
            "{} consistent specifications for {} members",
            specs.len(),
            tree.len()
        )));
    }
    Ok(())
}

/// The region of each tangle: the intersection of the sides it chooses over
/// the tree members. Regions are pairwise disjoint and exhaust V; they may
/// be empty.
pub fn tangle_regions(tree: &TreeSet, tangles: &[Tangle]) -> Result<Vec<BitSet>> {
    let n = tree.system().ground().len();
    tangles
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut region = BitSet::full(n);
            for m in 0..tree.len() {
                let side = tree.side_chosen(m, t.spec()).ok_or_else(|| {
                    Error::TreeTangleMismatch(format!("tangle {i} does not orient member {m}"))
                })?;
                region = region.intersection(side.members());
            }
            Ok(region)
        })
        .collect()
}

/// Exhaustive fallback: searches nested subsets of the meet/join closure of
/// the picked distinguishers' sides for a distinguishing tree set, smallest
/// first, first hit in canonical order.
fn fallback_tree(
    system: &FeatureSystem,
    tangles: &[Tangle],
    ordered: Option<&OrderedSystem>,
) -> Result<TreeSet> {
    let mut generator_indices: Vec<usize> = Vec::new();
    for i in 0..tangles.len() {
        for j in i + 1..tangles.len() {
            let found = match ordered {
                Some(o) => minimum_distinguisher(o, &tangles[i], &tangles[j]).map(|(k, _)| k),
                None => (0..system.len()).find(|&k| {
                    let a = tangles[i]
                        .system()
                        .index_of_partition(system.partition(k))
                        .and_then(|l| tangles[i].spec().orientation(l));
                    let b = tangles[j]
                        .system()
                        .index_of_partition(system.partition(k))
                        .and_then(|l| tangles[j].spec().orientation(l));
                    matches!((a, b), (Some(x), Some(y)) if x != y)
                }),
            };
            if let Some(k) = found {
                if !generator_indices.contains(&k) {
                    generator_indices.push(k);
                }
            }
        }
    }
    // Close the generator sides under meet and join; keep one expression
    // per distinct side, first construction wins.
    const CLOSURE_CAP: usize = 4096;
    let mut closure: Vec<(BitSet, SideExpr)> = Vec::new();
    let mut seen: HashSet<BitSet> = HashSet::new();
    for &k in &generator_indices {
        for canonical in [true, false] {
            let side = system.feature(k, canonical).members().clone();
            if seen.insert(side.clone()) {
                closure.push((side, SideExpr::leaf(k, canonical)));
            }
        }
    }
    let mut frontier = 0;
    while frontier < closure.len() && closure.len() < CLOSURE_CAP {
        let upto = closure.len();
        for a in frontier..upto {
            for b in 0..a {
                let (sa, ea) = (closure[a].0.clone(), closure[a].1.clone());
                let (sb, eb) = (closure[b].0.clone(), closure[b].1.clone());
                let m = sa.intersection(&sb);
                if seen.insert(m.clone()) {
                    closure.push((m, SideExpr::Meet(Box::new(ea.clone()), Box::new(eb.clone()))));
                }
                let u = sa.union(&sb);
                if seen.insert(u.clone()) {
                    closure.push((u, SideExpr::Join(Box::new(ea), Box::new(eb))));
                }
                if closure.len() >= CLOSURE_CAP {
                    break;
                }
            }
            if closure.len() >= CLOSURE_CAP {
                break;
            }
        }
        frontier = upto;
    }
    let mut candidates: Vec<(BitSet, SideExpr)> = Vec::new();
    let mut seen_partitions: HashSet<BitSet> = HashSet::new();
    closure.sort_by(|a, b| a.0.cmp(&b.0));
    for (side, expr) in closure {
        if side.is_empty() || side.is_full() {
            continue;
        }
        let key = if side.contains(0) {
            side.clone()
        } else {
            side.complement()
        };
        if seen_partitions.insert(key) {
            candidates.push((side, expr));
        }
    }
    let n = system.ground().len();
    let max_members = tangles.len().saturating_sub(1).min(2 * n - 1);
    let orientations: Vec<Option<Vec<bool>>> = candidates
        .iter()
        .map(|(_, expr)| {
            tangles
                .iter()
                .map(|t| expr.orientation_under(system, t.spec()))
                .collect()
        })
        .collect();
    struct Search<'a> {
        candidates: &'a [(BitSet, SideExpr)],
        orientations: &'a [Option<Vec<bool>>],
        chosen: Vec<usize>,
        budget: u64,
    }
    impl Search<'_> {
        fn run(
            &mut self,
            from: usize,
            target: usize,
            undone: &[(usize, usize)],
        ) -> Option<Vec<usize>> {
            if undone.is_empty() {
                return Some(self.chosen.clone());
            }
            if self.chosen.len() == target || self.budget == 0 {
                return None;
            }
            for c in from..self.candidates.len() {
                self.budget = self.budget.saturating_sub(1);
                let Some(orient) = &self.orientations[c] else {
                    continue;
                };
                let nested = self.chosen.iter().all(|&e| {
                    let a = &self.candidates[e].0;
                    let b = &self.candidates[c].0;
                    let a_inv = a.complement();
                    let b_inv = b.complement();
                    a.is_subset_of(b)
                        || a.is_subset_of(&b_inv)
                        || a_inv.is_subset_of(b)
                        || a_inv.is_subset_of(&b_inv)
                });
                if !nested {
                    continue;
                }
                let remaining: Vec<(usize, usize)> = undone
                    .iter()
                    .copied()
                    .filter(|&(i, j)| orient[i] == orient[j])
                    .collect();
                // In a minimal tree every member is the unique distinguisher
                // of some pair, so members that settle nothing can be
                // skipped without losing completeness.
                if remaining.len() == undone.len() {
                    continue;
                }
                self.chosen.push(c);
                if let Some(found) = self.run(c + 1, target, &remaining) {
                    return Some(found);
                }
                self.chosen.pop();
            }
            None
        }
    }
    let pairs: Vec<(usize, usize)> = (0..tangles.len())
        .flat_map(|i| (i + 1..tangles.len()).map(move |j| (i, j)))
        .collect();
    for target in 0..=max_members {
        let mut search = Search {
            candidates: &candidates,
            orientations: &orientations,
            chosen: Vec::new(),
            budget: 50_000_000,
        };
        if let Some(found) = search.run(0, target, &pairs) {
            let members = found
                .into_iter()
                .map(|c| {
                    let (side, expr) = &candidates[c];
                    let feature = Feature::new(Arc::clone(system.ground()), side.clone());
                    let partition = Partition::from_side(feature.clone());
                    let source = match system.index_of_partition(&partition) {
                        Some(index) => MemberSource::System { index },
                        None => MemberSource::Corner {
                            denoted_canonical: partition.side_of(&feature).expect("side"),
                            expr: expr.clone(),
                        },
                    };
                    let order = match ordered {
                        Some(o) => Some(o.order_of_side(&feature)?),
                        None => None,
                    };
                    Ok(TreeMember {
                        partition,
                        source,
                        order,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(TreeSet::new(system, members));
        }
    }
    Err(Error::UncrossingFailure)
}

/// The output of the efficient (variable-order) tree construction.
#[derive(Debug, Clone)]
pub struct EfficientTree {
    pub forest: EvolutionForest,
    /// Node ids of the maximal tangles, in forest order.
    pub maximal: Vec<usize>,
    pub tree: TreeSet,
    /// One entry per unordered pair of distinguishable forest nodes.
    pub report: DistinguisherReport,
}

impl EfficientTree {
    /// The structure-tree nodes compatible with a tangle's (possibly
    /// partial) orientation of the members: maximal tangles sit at single
    /// nodes, non-maximal tangles span subtrees.
    pub fn compatible_nodes(&self, node: usize) -> Vec<usize> {
        let spec = self.forest.nodes()[node].tangle.spec();
        let (nodes, _) = self.tree.structure_tree();
        (0..nodes.len())
            .filter(|&s| {
                (0..self.tree.len()).all(|m| match self.tree.orientation_of(m, spec) {
                    Some(orient) => nodes[s][m] == orient,
                    None => true,
                })
            })
            .collect()
    }
}

/// Builds a tree set distinguishing every pair of distinguishable tangles
/// across all strata of the ordered system, each pair efficiently. Requires
/// a submodular order function.
pub fn build_efficient_tree(
    ordered: &OrderedSystem,
    family: &ForbiddenFamily,
    budget: Budget,
) -> Result<EfficientTree> {
    match crate::order::check_order_submodular(ordered)? {
        crate::order::SubmodularityCheck::Holds => {}
        crate::order::SubmodularityCheck::Violated { left, right } => {
            return Err(Error::NonSubmodularOrder(
                format!("{:?}", left.ids()),
                format!("{:?}", right.ids()),
            ));
        }
    }
    let forest = ordered.evolution(family, budget)?;
    let strata = ordered.strata();
    let system = ordered.system().clone();
    let mut builder = Builder {
        full: system.clone(),
        ordered: Some(ordered.clone()),
        used_sides: HashSet::new(),
        members: Vec::new(),
    };
    // Split stratum by stratum: first the tangles of the lowest stratum
    // inside the whole ground set, then each node's children inside the
    // cell their parent ended up in.
    let node_specs: Vec<&Specification> =
        forest.nodes().iter().map(|n| n.tangle.spec()).collect();
    let mut cells: HashMap<usize, Cell> = HashMap::new();
    let mut build_result: Result<()> = Ok(());
    'build: for (level, (_, stratum_sys)) in strata.iter().enumerate() {
        let groups: Vec<(Vec<usize>, Cell)> = if level == 0 {
            vec![(
                forest.node_ids_of_stratum(0),
                (BitSet::full(system.ground().len()), None),
            )]
        } else {
            forest
                .node_ids_of_stratum(level - 1)
                .into_iter()
                .filter(|&p| !forest.nodes()[p].children.is_empty())
                .map(|p| {
                    let cell = cells.get(&p).cloned().expect("parent was placed");
                    (forest.nodes()[p].children.clone(), cell)
                })
                .collect()
        };
        for (group, (region, expr)) in groups {
            match builder.split(&group, &node_specs, stratum_sys, region, expr) {
                Ok(placed) => cells.extend(placed),
                Err(e) => {
                    build_result = Err(e);
                    break 'build;
                }
            }
        }
    }
    let maximal = forest.maximal();
    let max_tangles: Vec<Tangle> = maximal
        .iter()
        .map(|&id| forest.nodes()[id].tangle.clone())
        .collect();
    let tree = match build_result {
        Ok(()) => {
            let tree = minimise_efficient(
                TreeSet::new(&system, builder.members.clone()),
                ordered,
                &forest,
            );
            match verify_efficient_tree(&tree, ordered, &forest) {
                Ok(()) => tree,
                Err(_) => fallback_efficient(&system, ordered, &forest, &max_tangles)?,
            }
        }
        Err(_) => fallback_efficient(&system, ordered, &forest, &max_tangles)?,
    };
    verify_efficient_tree(&tree, ordered, &forest)?;
    let report = efficient_report(ordered, &forest, &tree)?;
    Ok(EfficientTree {
        maximal,
        forest,
        tree,
        report,
    })
}

fn fallback_efficient(
    system: &FeatureSystem,
    ordered: &OrderedSystem,
    forest: &EvolutionForest,
    max_tangles: &[Tangle],
) -> Result<TreeSet> {
    let tree = fallback_tree(system, max_tangles, Some(ordered))?;
    verify_efficient_tree(&tree, ordered, forest)?;
    Ok(tree)
}

/// All unordered pairs of forest nodes that are distinguishable, with the
/// exhaustive scan minimum for each.
pub fn distinguishable_pairs(
    ordered: &OrderedSystem,
    forest: &EvolutionForest,
) -> Vec<((usize, usize), (usize, u64))> {
    let nodes = forest.nodes();
    let mut out = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if let Some(found) = minimum_distinguisher(ordered, &nodes[i].tangle, &nodes[j].tangle)
            {
                out.push(((i, j), found));
            }
        }
    }
    out
}

fn minimise_efficient(tree: TreeSet, ordered: &OrderedSystem, forest: &EvolutionForest) -> TreeSet {
    let system = tree.system().clone();
    let mut members = tree.members().to_vec();
    let mut index = members.len();
    while index > 0 {
        index -= 1;
        let mut without = members.clone();
        without.remove(index);
        let candidate = TreeSet::new(&system, without);
        if verify_efficient_tree(&candidate, ordered, forest).is_ok() {
            members = candidate.members().to_vec();
        }
    }
    TreeSet::new(&system, members)
}

/// Validity plus efficiency: every distinguishable pair of forest nodes is
/// distinguished by some member whose order does not exceed the exhaustive
/// scan minimum over S.
pub fn verify_efficient_tree(
    tree: &TreeSet,
    ordered: &OrderedSystem,
    forest: &EvolutionForest,
) -> Result<()> {
    if !tree.is_valid() {
        return Err(Error::VerificationFailed(
            "members are not a nested, nontrivial, duplicate-free set".into(),
        ));
    }
    let nodes = forest.nodes();
    for ((i, j), (_, scan_min)) in distinguishable_pairs(ordered, forest) {
        let mut best: Option<u64> = None;
        for m in 0..tree.len() {
            let a = tree.orientation_of(m, nodes[i].tangle.spec());
            let b = tree.orientation_of(m, nodes[j].tangle.spec());
            if matches!((a, b), (Some(x), Some(y)) if x != y) {
                let order = tree.members()[m]
                    .order
                    .ok_or_else(|| Error::VerificationFailed("member without an order".into()))?;
                if best.map_or(true, |prev| order < prev) {
                    best = Some(order);
                }
            }
        }
        match best {
            None => {
                return Err(Error::VerificationFailed(format!(
                    "distinguishable pair ({i},{j}) not distinguished"
                )))
            }
            Some(order) if order > scan_min => {
                return Err(Error::VerificationFailed(format!(
                    "pair ({i},{j}) only distinguished at order {order} > scan minimum {scan_min}"
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn efficient_report(
    ordered: &OrderedSystem,
    forest: &EvolutionForest,
    tree: &TreeSet,
) -> Result<DistinguisherReport> {
    let nodes = forest.nodes();
    let mut entries = Vec::new();
    for ((i, j), (partition_index, scan_min)) in distinguishable_pairs(ordered, forest) {
        let mut member_best: Option<(u64, usize)> = None;
        for m in 0..tree.len() {
            let a = tree.orientation_of(m, nodes[i].tangle.spec());
            let b = tree.orientation_of(m, nodes[j].tangle.spec());
            if matches!((a, b), (Some(x), Some(y)) if x != y) {
                let order = tree.members()[m].order.expect("ordered build");
                if member_best.map_or(true, |(prev, _)| order < prev) {
                    member_best = Some((order, m));
                }
            }
        }
        let (member_order, member) = member_best.ok_or_else(|| {
            Error::VerificationFailed(format!("pair ({i},{j}) not distinguished"))
        })?;
        entries.push(DistinguisherEntry {
            pair: (i, j),
            partition_index,
            order: Some(scan_min),
            efficient: Some(true),
            member,
            member_order: Some(member_order),
        });
    }
    Ok(DistinguisherReport { entries })
}

/// Serialized form of a tree member: the denoted side by object ids, the
/// rendered provenance expression (null for partitions of the system), and
/// the order if any.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeMemberJson {
    pub id: usize,
    pub side: Vec<String>,
    pub provenance: Option<String>,
    pub order: Option<u64>,
}

impl TreeSet {
    pub fn to_json_members(&self) -> Vec<TreeMemberJson> {
        self.members
            .iter()
            .enumerate()
            .map(|(id, m)| TreeMemberJson {
                id,
                side: m.export_side(&self.system).ids(),
                provenance: match &m.source {
                    MemberSource::System { .. } => None,
                    MemberSource::Corner { expr, .. } => Some(expr.render(&self.system)),
                },
                order: m.order,
            })
            .collect()
    }

    /// Rebuilds a tree set from its serialized members, checking that every
    /// provenance expression actually denotes the recorded side.
    pub fn from_json_members(
        system: &FeatureSystem,
        members: &[TreeMemberJson],
    ) -> Result<TreeSet> {
        let rebuilt = members
            .iter()
            .map(|m| {
                let side = Feature::from_ids(system.ground(), m.side.iter())?;
                let partition = Partition::from_side(side.clone());
                let source = match &m.provenance {
                    None => {
                        let index = system.index_of_partition(&partition).ok_or_else(|| {
                            Error::VerificationFailed(format!(
                                "member {} has no provenance and is not a system partition",
                                m.id
                            ))
                        })?;
                        MemberSource::System { index }
                    }
                    Some(text) => {
                        let expr = SideExpr::parse(text, system)?;
                        if expr.denoted_side(system) != side {
                            return Err(Error::VerificationFailed(format!(
                                "member {}: provenance does not denote the recorded side",
                                m.id
                            )));
                        }
                        MemberSource::Corner {
                            denoted_canonical: partition.side_of(&side).expect("side"),
                            expr,
                        }
                    }
                };
                Ok(TreeMember {
                    partition,
                    source,
                    order: m.order,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeSet::new(system, rebuilt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forbidden::is_star;
    use crate::samples;
    use crate::tangles::enumerate_tangles;

    fn f(n: u32) -> ForbiddenFamily {
        ForbiddenFamily::intersection_threshold(n)
    }

    fn material_tangles() -> (FeatureSystem, Vec<Tangle>) {
        let sys = samples::materials();
        let tangles = enumerate_tangles(&sys, &f(2), Budget::default()).unwrap();
        (sys, tangles)
    }

    #[test]
    fn tree_set_checks() {
        let g = crate::ground::GroundSet::new(["1", "2", "3"]).unwrap();
        let a = Partition::from_side(Feature::from_ids(&g, ["1"]).unwrap());
        let b = Partition::from_side(Feature::from_ids(&g, ["1", "2"]).unwrap());
        assert!(is_tree_set(&[a.clone(), b]));
        assert!(is_tree_set(&[a.clone()]));
        let degenerate =
            Partition::from_side(Feature::from_ids(&g, ["1", "2", "3"]).unwrap());
        assert!(!is_tree_set(&[a, degenerate]));
        // Disjoint blocks of the tripartition are nested, so pairs from it
        // do form tree sets (the four-inclusion test holds).
        let tri = samples::tripartition();
        assert!(is_tree_set(&[
            tri.partition(0).clone(),
            tri.partition(1).clone()
        ]));
    }

    #[test]
    fn crossing_partitions_are_not_a_tree_set() {
        let g = crate::ground::GroundSet::new(["1", "2", "3", "4"]).unwrap();
        let a = Partition::from_side(Feature::from_ids(&g, ["1", "2"]).unwrap());
        let b = Partition::from_side(Feature::from_ids(&g, ["2", "3"]).unwrap());
        assert!(!is_tree_set(&[a, b]));
    }

    #[test]
    fn identical_tangles_are_distinguished_by_nothing() {
        let (sys, tangles) = material_tangles();
        for t in &tangles {
            for i in 0..sys.len() {
                assert!(!distinguishes(sys.partition(i), t, t).unwrap());
            }
        }
    }

    #[test]
    fn wood_and_steel_tangles_are_distinguished_by_p_and_q_not_r() {
        let (sys, tangles) = material_tangles();
        let find = |label: &str| {
            tangles
                .iter()
                .find(|t| {
                    t.spec()
                        .by_label()
                        .iter()
                        .all(|(l, yes)| (l == label) == *yes)
                })
                .unwrap()
        };
        let wood = find("p");
        let steel = find("q");
        assert!(distinguishes(sys.partition(0), wood, steel).unwrap());
        assert!(distinguishes(sys.partition(1), wood, steel).unwrap());
        assert!(!distinguishes(sys.partition(2), wood, steel).unwrap());
    }

    #[test]
    fn focused_tangles_of_the_universe_are_distinguished_by_singletons() {
        let sys = samples::all_bipartitions(3);
        let t1 = crate::tangles::focused_tangle(&sys, "1").unwrap();
        let t2 = crate::tangles::focused_tangle(&sys, "2").unwrap();
        let single = Partition::from_side(
            Feature::from_ids(sys.ground(), ["1"]).unwrap(),
        );
        assert!(distinguishes(&single, &t1, &t2).unwrap());
    }

    #[test]
    fn unique_distinguisher_is_efficient() {
        let sys = samples::tripartition();
        let tangles = enumerate_tangles(&sys, &f(1), Budget::default()).unwrap();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 1, 2]);
        // Tangles that differ exactly on s1 are distinguished efficiently
        // by it.
        let a = &tangles[0];
        let diff: Vec<&Tangle> = tangles
            .iter()
            .filter(|t| {
                t.spec().orientation(0) != a.spec().orientation(0)
                    && t.spec().orientation(1) == a.spec().orientation(1)
                    && t.spec().orientation(2) == a.spec().orientation(2)
            })
            .collect();
        if let Some(b) = diff.first() {
            assert!(distinguishes_efficiently(&ordered, sys.partition(0), a, b).unwrap());
        }
    }

    #[test]
    fn efficiency_prefers_lower_order() {
        let (sys, tangles) = material_tangles();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 1, 1, 1]);
        let find = |label: &str| {
            tangles
                .iter()
                .find(|t| {
                    t.spec()
                        .by_label()
                        .iter()
                        .all(|(l, yes)| (l == label) == *yes)
                })
                .unwrap()
        };
        let wood = find("p");
        let steel = find("q");
        assert!(distinguishes_efficiently(&ordered, sys.partition(0), wood, steel).unwrap());
        assert!(!distinguishes_efficiently(&ordered, sys.partition(1), wood, steel).unwrap());
    }

    #[test]
    fn induced_tangles_are_not_distinguishable_from_their_source() {
        let sys = samples::materials();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 1, 1, 1]);
        let strata = ordered.strata();
        let deep = enumerate_tangles(&sys, &f(2), Budget::default()).unwrap();
        let shallow = crate::tangles::induced_tangle(&deep[0], &strata[0].1).unwrap();
        assert!(minimum_distinguisher(&ordered, &deep[0], &shallow).is_none());
        assert!(matches!(
            distinguishes_efficiently(&ordered, sys.partition(0), &deep[0], &shallow),
            Err(Error::NotDistinguishable(..))
        ));
    }

    #[test]
    fn single_tangle_gives_the_empty_tree() {
        let (sys, tangles) = material_tangles();
        let (tree, report) = build_tree_of_tangles(&sys, &tangles[..1]).unwrap();
        assert!(tree.is_empty());
        assert!(report.entries.is_empty());
        let regions = tangle_regions(&tree, &tangles[..1]).unwrap();
        assert!(regions[0].is_full());
    }

    #[test]
    fn materials_tree_has_four_nested_members() {
        let (sys, tangles) = material_tangles();
        let (tree, report) = build_tree_of_tangles(&sys, &tangles).unwrap();
        assert_eq!(tree.len(), 4);
        assert!(tree.is_valid());
        verify_tree_of_tangles(&tree, &tangles).unwrap();
        assert_eq!(report.entries.len(), 10);
        // The all-negative tangle's region is empty; the others hold the
        // two items of their material.
        let regions = tangle_regions(&tree, &tangles).unwrap();
        let sizes: Vec<usize> = regions.iter().map(BitSet::count).collect();
        let mut sorted = sizes.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 2, 2, 2, 2]);
    }

    #[test]
    fn universe_focused_tangles_tree() {
        let sys = samples::all_bipartitions(3);
        let tangles = enumerate_tangles(&sys, &f(1), Budget::default()).unwrap();
        assert_eq!(tangles.len(), 3);
        let (tree, _) = build_tree_of_tangles(&sys, &tangles).unwrap();
        assert_eq!(tree.len(), 2);
        verify_tree_of_tangles(&tree, &tangles).unwrap();
        assert_eq!(tree.consistent_specifications().len(), 3);
    }

    #[test]
    fn duplicate_tangles_are_rejected() {
        let (sys, tangles) = material_tangles();
        let doubled = vec![tangles[0].clone(), tangles[0].clone()];
        assert!(matches!(
            build_tree_of_tangles(&sys, &doubled),
            Err(Error::NoDistinguisher(0, 1))
        ));
    }

    #[test]
    fn consistent_specification_counts() {
        let g = crate::ground::GroundSet::new(["1", "2", "3"]).unwrap();
        let sys = FeatureSystem::from_labelled_ids(
            &g,
            vec![("a", vec!["1"]), ("b", vec!["1", "2"])],
        )
        .unwrap();
        let chain = TreeSet::new(
            &sys,
            vec![
                TreeMember {
                    partition: sys.partition(0).clone(),
                    source: MemberSource::System { index: 0 },
                    order: None,
                },
                TreeMember {
                    partition: sys.partition(1).clone(),
                    source: MemberSource::System { index: 1 },
                    order: None,
                },
            ],
        );
        assert_eq!(chain.consistent_specifications().len(), 3);
        let empty = TreeSet::empty(&sys);
        assert_eq!(empty.consistent_specifications().len(), 1);
    }

    #[test]
    fn star_tree_center_is_counted() {
        // Three disjoint singleton sides over |V| = 3: the structure tree is
        // a star whose center specification has an empty total intersection
        // but is still a node.
        let g = crate::ground::GroundSet::new(["1", "2", "3"]).unwrap();
        let sys = FeatureSystem::from_labelled_ids(
            &g,
            vec![("a", vec!["1"]), ("b", vec!["2"]), ("c", vec!["3"])],
        )
        .unwrap();
        let tree = TreeSet::new(
            &sys,
            (0..3)
                .map(|i| TreeMember {
                    partition: sys.partition(i).clone(),
                    source: MemberSource::System { index: i },
                    order: None,
                })
                .collect(),
        );
        assert!(tree.is_valid());
        assert_eq!(tree.consistent_specifications().len(), 4);
        let (nodes, edges) = tree.structure_tree();
        assert_eq!(nodes.len(), 4);
        assert_eq!(edges.len(), 3);
    }

    #[test]
    fn materials_strata_efficient_tree() {
        let sys = samples::materials();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 1, 1, 1]);
        let result = build_efficient_tree(&ordered, &f(2), Budget::default()).unwrap();
        // Two stratum-1 tangles; the five stratum-2 tangles are maximal.
        assert_eq!(result.maximal.len(), 5);
        verify_efficient_tree(&result.tree, &ordered, &result.forest).unwrap();
        // The stratum-1 pair (orientations of p) is distinguished by p at
        // order 0, and efficiency was asserted for every reported pair.
        let stratum1: Vec<usize> = result.forest.node_ids_of_stratum(0);
        let entry = result
            .report
            .entries
            .iter()
            .find(|e| e.pair == (stratum1[0], stratum1[1]))
            .unwrap();
        assert_eq!(entry.partition_index, 0);
        assert_eq!(entry.order, Some(0));
        assert_eq!(entry.efficient, Some(true));
        // Every reported order equals the exhaustive scan minimum.
        for entry in &result.report.entries {
            let nodes = result.forest.nodes();
            let (_, scan) = minimum_distinguisher(
                &ordered,
                &nodes[entry.pair.0].tangle,
                &nodes[entry.pair.1].tangle,
            )
            .unwrap();
            assert_eq!(entry.order, Some(scan));
        }
    }

    #[test]
    fn efficient_tree_rejects_non_submodular_orders() {
        let g = crate::ground::GroundSet::new(["1", "2", "3", "4"]).unwrap();
        let r = Feature::from_ids(&g, ["1", "2"]).unwrap();
        let s = Feature::from_ids(&g, ["2", "3"]).unwrap();
        let m = crate::feature::meet(&r, &s).unwrap();
        let u = crate::feature::join(&r, &s).unwrap();
        let sys = FeatureSystem::new(&g, vec![r, s, m, u]).unwrap();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 0, 0, 5]);
        assert!(matches!(
            build_efficient_tree(&ordered, &f(1), Budget::default()),
            Err(Error::NonSubmodularOrder(..))
        ));
    }

    #[test]
    fn non_maximal_tangles_sit_on_subtrees() {
        let sys = samples::materials();
        let ordered = OrderedSystem::explicit(&sys, vec![0, 1, 1, 1]);
        let result = build_efficient_tree(&ordered, &f(2), Budget::default()).unwrap();
        for node in 0..result.forest.nodes().len() {
            let compatible = result.compatible_nodes(node);
            assert!(!compatible.is_empty());
            if result.maximal.contains(&node) {
                assert_eq!(compatible.len(), 1);
            }
        }
    }

    #[test]
    fn corner_members_render_and_reparse() {
        let (sys, tangles) = material_tangles();
        let (tree, _) = build_tree_of_tangles(&sys, &tangles).unwrap();
        let json = tree.to_json_members();
        let back = TreeSet::from_json_members(&sys, &json).unwrap();
        assert_eq!(back.len(), tree.len());
        for (a, b) in tree.members().iter().zip(back.members()) {
            assert_eq!(a.partition, b.partition);
        }
        verify_tree_of_tangles(&back, &tangles).unwrap();
    }

    #[test]
    fn provenance_expression_roundtrip() {
        let sys = samples::materials();
        let expr = SideExpr::Meet(
            Box::new(SideExpr::leaf(0, true)),
            Box::new(SideExpr::Join(
                Box::new(SideExpr::leaf(1, false)),
                Box::new(SideExpr::leaf(2, true)),
            )),
        );
        let text = expr.render(&sys);
        let parsed = SideExpr::parse(&text, &sys).unwrap();
        assert_eq!(parsed, expr);
        assert_eq!(expr.depth(), 2);
    }

    #[test]
    fn fallback_search_builds_a_valid_tree() {
        let (sys, tangles) = material_tangles();
        let tree = fallback_tree(&sys, &tangles, None).unwrap();
        verify_tree_of_tangles(&minimise(tree, &tangles), &tangles).unwrap();
    }

    #[test]
    fn splitting_star_shapes_from_the_materials_tree() {
        let (sys, tangles) = material_tangles();
        let (tree, _) = build_tree_of_tangles(&sys, &tangles).unwrap();
        for spec in tree.consistent_specifications() {
            let sides: Vec<Feature> = (0..tree.len())
                .map(|m| tree.members()[m].partition.side(spec[m]))
                .collect();
            // Minimal chosen sides form a star.
            let minimal: Vec<Feature> = sides
                .iter()
                .filter(|s| {
                    !sides
                        .iter()
                        .any(|o| o != *s && o.members().is_subset_of(s.members()))
                })
                .cloned()
                .collect();
            assert!(is_star(&minimal));
        }
    }
}
