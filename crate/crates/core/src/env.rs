//! Environments binding attribute names to values.

use crate::value::{Name, Value};

/// A partial map from names to values. Later bindings override earlier ones,
/// so `a.compose(&b)` behaves as `a;b`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Environment {
    bindings: Vec<(Name, Value)>,
}

impl Environment {
    pub fn new() -> Self {
        Environment::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.iter().rev().find(|(n, _)| n.as_str() == name).map(|(_, v)| v)
    }

    pub fn is_bound(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Adds one binding, overriding any earlier binding of the same name.
    pub fn bind(mut self, name: Name, value: Value) -> Self {
        self.bindings.push((name, value));
        self
    }

    /// `self;η` where η binds `labels` to `record` position-wise.
    pub fn extend(&self, labels: &[Name], record: &[Value]) -> Self {
        let mut b = Vec::with_capacity(self.bindings.len() + labels.len());
        b.extend_from_slice(&self.bindings);
        b.extend(labels.iter().cloned().zip(record.iter().cloned()));
        Environment { bindings: b }
    }

    /// `self;other`: agrees with `other` where it is defined, else with `self`.
    pub fn compose(&self, other: &Environment) -> Self {
        let mut b = self.bindings.clone();
        b.extend(other.bindings.iter().cloned());
        Environment { bindings: b }
    }

    /// Distinct bound names, innermost binding first.
    pub fn names(&self) -> Vec<&Name> {
        let mut out: Vec<&Name> = Vec::new();
        for (n, _) in self.bindings.iter().rev() {
            if !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }
}

impl FromIterator<(Name, Value)> for Environment {
    fn from_iter<I: IntoIterator<Item = (Name, Value)>>(iter: I) -> Self {
        Environment { bindings: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_overrides_rightward() {
        let a: Environment = [(Name::new("A"), Value::int(1)), (Name::new("B"), Value::int(2))].into_iter().collect();
        let b: Environment = [(Name::new("A"), Value::Null)].into_iter().collect();
        let c = a.compose(&b);
        assert_eq!(c.get("A"), Some(&Value::Null));
        assert_eq!(c.get("B"), Some(&Value::int(2)));
        assert_eq!(b.compose(&a).get("A"), Some(&Value::int(1)));
        assert_eq!(c.get("C"), None);
    }
}
