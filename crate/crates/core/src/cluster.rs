//! Clustering and prediction (in progress).
