//! Abstract tangles of set partitions over object-by-feature tables.
//!
//! A *feature system* is a ground set of objects together with a set of
//! bipartitions of it; each side of a bipartition is an oriented feature.
//! A *tangle* is a choice of one side per partition that is consistent and
//! avoids a family of forbidden small feature sets — a bundle of features
//! that typically occur together, without any single object having to carry
//! all of them.
//!
//! The crate provides:
//!
//! * the core data model ([`FeatureSystem`], [`Specification`],
//!   [`ForbiddenFamily`]) with Boolean feature algebra,
//! * pruned exhaustive tangle enumeration and the evolution of tangles
//!   across nested strata,
//! * similarity-derived submodular order functions and stratification,
//! * construction of nested tangle-distinguishing tree sets and the regions
//!   they cut the ground set into,
//! * tangle-precluding certificates (the exactly-one dichotomy) and the dual
//!   feature system,
//! * clustering and prediction: witnessing sets, p-deciders, similarity
//!   rankings, tree distances, and specification prediction from answers on
//!   the distinguishing tree.
//!
//! Everything is exact integer/rational arithmetic; outputs are canonically
//! ordered and deterministic for fixed input, independent of worker counts.

mod bitset;
mod error;
mod feature;
mod forbidden;
mod ground;
mod system;
mod tangles;

pub mod cluster;
pub mod duality;
pub mod order;
pub mod samples;
pub mod tree;

pub use bitset::BitSet;
pub use error::{Error, Result};
pub use feature::{join, meet, Feature, Partition};
pub use forbidden::{
    is_consistent, is_star, is_submodular_system, is_tangle, submodular_closure,
    submodularity_witness, ForbiddenFamily,
};
pub use ground::GroundSet;
pub use system::{
    likert_expand, FeatureSystem, LikertMode, PartitionEntry, Provenance, SideSpec, Specification,
};
pub use tangles::{
    enumerate_tangles, enumerate_tangles_seeded, evolution, extensions, focused_tangle,
    induced_tangle, is_averaging_tangle, is_stable, triple_intersection_stats, Budget,
    EvolutionForest, EvolutionNode, Tangle, TangleFate, DEFAULT_BUDGET,
};
