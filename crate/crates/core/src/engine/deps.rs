use std::collections::BTreeSet;

use crate::value::FactRef;

/// Facts and record types consulted during an evaluation.
///
/// A monoid under [`DependencySet::union`] with the empty set as identity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependencySet {
    pub field_deps: BTreeSet<FactRef>,
    pub type_deps: BTreeSet<String>,
}

impl DependencySet {
    pub fn new() -> Self {
        DependencySet::default()
    }

    pub fn is_empty(&self) -> bool {
        self.field_deps.is_empty() && self.type_deps.is_empty()
    }

    pub fn union(mut self, other: DependencySet) -> Self {
        self.extend(other);
        self
    }

    pub fn extend(&mut self, mut other: DependencySet) {
        if self.is_empty() {
            *self = other;
            return;
        }
        self.field_deps.append(&mut other.field_deps);
        self.type_deps.append(&mut other.type_deps);
    }

    pub fn is_subset(&self, other: &DependencySet) -> bool {
        self.field_deps.is_subset(&other.field_deps) && self.type_deps.is_subset(&other.type_deps)
    }

    /// Field dependencies rendered as `Type[key].field`, sorted.
    pub fn field_strings(&self) -> Vec<String> {
        self.field_deps.iter().map(ToString::to_string).collect()
    }

    pub fn type_strings(&self) -> Vec<String> {
        self.type_deps.iter().cloned().collect()
    }
}
