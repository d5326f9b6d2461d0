//! Tangle-tree duality (in progress).
