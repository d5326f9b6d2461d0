//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Everything that can go wrong when building or analysing a feature system.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("unknown object id: {0}")]
    UnknownObjectId(String),
    #[error("object ids must be unique and nonempty; offender: {0:?}")]
    BadObjectId(String),
    #[error("duplicate partition: {0} and {1} induce the same bipartition")]
    DuplicatePartition(String, String),
    #[error("features belong to different ground sets")]
    MixedGroundSet,
    #[error("cell out of range at object {object}, question {question}: {value}")]
    OutOfRangeCell {
        object: String,
        question: String,
        value: i64,
    },
    #[error("specification is partial; a total specification is required")]
    PartialSpecification,
    #[error("{0} is not a subsystem of the tangle's feature system")]
    NotASubsystem(String),
    #[error("{0} is not a supersystem of the tangle's feature system")]
    NotASupersystem(String),
    #[error("search budget of {0} nodes exceeded")]
    BudgetExceeded(u64),
    #[error("no default side declared for partition {0}")]
    MissingDefaultSide(String),
    #[error("sides do not form a bipartition of the ground set")]
    NotABipartition,
    #[error("order undefined on corner partition {0} (explicit orders cover only the original system)")]
    OrderUndefinedOnCorner(String),
    #[error("weight function is zero everywhere")]
    AllZeroWeights,
    #[error("partition {0} is not specified by both tangles")]
    UnspecifiedPartition(String),
    #[error("tangles {0} and {1} are not distinguishable")]
    NotDistinguishable(usize, usize),
    #[error("tangles {0} and {1} are identical; no partition distinguishes them")]
    NoDistinguisher(usize, usize),
    #[error("uncrossing stalled and the fallback search found no valid tree set")]
    UncrossingFailure,
    #[error("order function is not submodular; witness pair: {0}, {1}")]
    NonSubmodularOrder(String, String),
    #[error("tree set does not belong to the given tangles: {0}")]
    TreeTangleMismatch(String),
    #[error("witnessing set must be nonempty")]
    EmptySet,
    #[error("p must lie in [1/2, 1]; got {0}")]
    POutOfRange(String),
    #[error("tangle list is empty")]
    EmptyTangleList,
    #[error("specifications share no partitions")]
    DisjointDomains,
    #[error("tree member {0} has order 0; 1/order is undefined (shift all orders by +1)")]
    ZeroOrderMember(String),
    #[error("answers are inconsistent on the tree set: {0}")]
    InconsistentAnswers(String),
    #[error("no tangle matches the given answers; the tree passed in is not minimal for these tangles")]
    NoMatchingTangle,
    #[error("specification is not over a dual feature system")]
    NotADualTangle,
    #[error("objects {0} and {1} induce identical partitions of the question set")]
    IndistinctDuals(String, String),
    #[error("duality search incomplete on non-submodular input; features forced into any tangle: [{0}]")]
    IncompleteDuality(String),
    #[error("submodular closure exceeded the cap of {0} partitions")]
    ClosureOverflow(usize),
    #[error("provenance expression parse error: {0}")]
    ProvenanceParse(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
