//! Ground sets: the ordered universe of objects under analysis.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// The set V of objects, with a fixed ordering that anchors every
/// deterministic choice made downstream (canonical partition sides, search
/// order, serialized output).
#[derive(Debug, Serialize, Deserialize)]
pub struct GroundSet {
    objects: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl GroundSet {
    /// Builds a ground set from object identifiers, which must be unique and
    /// nonempty. The input ordering is preserved forever.
    pub fn new(objects: impl IntoIterator<Item = impl Into<String>>) -> Result<Arc<GroundSet>> {
        let objects: Vec<String> = objects.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(objects.len());
        for (i, id) in objects.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::BadObjectId(id.clone()));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::BadObjectId(id.clone()));
            }
        }
        Ok(Arc::new(GroundSet { objects, index }))
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownObjectId(id.to_string()))
    }

    pub fn id(&self, position: usize) -> &str {
        &self.objects[position]
    }

    pub fn ids(&self) -> &[String] {
        &self.objects
    }
}

impl PartialEq for GroundSet {
    fn eq(&self, other: &Self) -> bool {
        self.objects == other.objects
    }
}

impl Eq for GroundSet {}

/// Two ground sets are interchangeable when they hold the same objects in the
/// same order. Pointer equality is the fast path.
pub(crate) fn same_ground(a: &Arc<GroundSet>, b: &Arc<GroundSet>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_and_empty_ids() {
        assert!(GroundSet::new(["a", "a"]).is_err());
        assert!(GroundSet::new(["a", ""]).is_err());
    }

    #[test]
    fn positions_follow_input_order() {
        let g = GroundSet::new(["x", "y", "z"]).unwrap();
        assert_eq!(g.position("y").unwrap(), 1);
        assert_eq!(g.id(2), "z");
        assert!(g.position("w").is_err());
    }
}
