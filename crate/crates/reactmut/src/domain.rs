//! Concrete values, finite variable domains, and valuations.
//!
//! Every variable ranges over a finite domain: booleans, named enumeration
//! literals, or a bounded integer interval. Canonical value order is the
//! domain order (`false < true`, enum declaration order, ascending integers);
//! canonical valuation order is lexicographic by variable name, then domain
//! order. All downstream ordering (successor lists, witness tie-breaking,
//! `nd` encodings) derives from it.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Enum literal reserved for "absence of output"; auto-added to output enum domains.
pub const EPS: &str = "eps";

/// A concrete value of a finite-domain variable.
///
/// The derived ordering is structural (for use as collection keys); the
/// canonical domain order goes through [`VarDomain::index_of`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Enum(String),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Enum(_) => "enum",
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Enum(s) => write!(f, "{s}"),
        }
    }
}

/// A finite variable domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarDomain {
    Bool,
    /// Named literals in declaration order.
    Enum(Vec<String>),
    /// Closed integer interval `lo..=hi`.
    Int { lo: i64, hi: i64 },
}

impl VarDomain {
    /// Number of values in the domain.
    pub fn size(&self) -> usize {
        match self {
            VarDomain::Bool => 2,
            VarDomain::Enum(lits) => lits.len(),
            VarDomain::Int { lo, hi } => (hi - lo + 1) as usize,
        }
    }

    /// The value at position `idx` in domain order.
    pub fn value_at(&self, idx: usize) -> Value {
        match self {
            VarDomain::Bool => Value::Bool(idx != 0),
            VarDomain::Enum(lits) => Value::Enum(lits[idx].clone()),
            VarDomain::Int { lo, .. } => Value::Int(lo + idx as i64),
        }
    }

    /// Position of `v` in domain order, if `v` belongs to the domain.
    pub fn index_of(&self, v: &Value) -> Option<usize> {
        match (self, v) {
            (VarDomain::Bool, Value::Bool(b)) => Some(usize::from(*b)),
            (VarDomain::Enum(lits), Value::Enum(s)) => lits.iter().position(|l| l == s),
            (VarDomain::Int { lo, hi }, Value::Int(i)) if lo <= i && i <= hi => {
                Some((i - lo) as usize)
            }
            _ => None,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.index_of(v).is_some()
    }

    /// All values in domain order.
    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.size()).map(|i| self.value_at(i))
    }
}

impl fmt::Display for VarDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarDomain::Bool => write!(f, "bool"),
            VarDomain::Enum(lits) => write!(f, "enum {{ {} }}", lits.join(", ")),
            VarDomain::Int { lo, hi } => write!(f, "int[{lo}..{hi}]"),
        }
    }
}

/// A total assignment of values to a set of variables.
///
/// Backed by a name-sorted map, so iteration order is the canonical variable
/// order and equality/hashing are structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Valuation(pub BTreeMap<String, Value>);

impl Valuation {
    pub fn new() -> Self {
        Valuation(BTreeMap::new())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.0.insert(name.into(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise restriction to the named variables (absent names are dropped).
    pub fn restrict(&self, vars: &[&str]) -> Valuation {
        Valuation(
            self.0
                .iter()
                .filter(|(k, _)| vars.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }

    /// Restriction that drops the named variables instead of keeping them.
    pub fn without(&self, vars: &[&str]) -> Valuation {
        Valuation(
            self.0
                .iter()
                .filter(|(k, _)| !vars.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }

    /// Union of two valuations over disjoint variable sets.
    pub fn merged(&self, other: &Valuation) -> Valuation {
        let mut map = self.0.clone();
        for (k, v) in &other.0 {
            map.insert(k.clone(), v.clone());
        }
        Valuation(map)
    }

    pub fn from_pairs(pairs: &[(&str, Value)]) -> Valuation {
        Valuation(pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Shorthand constructors used throughout tests and builders.
pub fn bool_v(b: bool) -> Value {
    Value::Bool(b)
}
pub fn int_v(i: i64) -> Value {
    Value::Int(i)
}
pub fn enum_v(s: &str) -> Value {
    Value::Enum(s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_order_is_canonical() {
        let d = VarDomain::Enum(vec!["eps".into(), "coff".into(), "tea".into()]);
        assert_eq!(d.index_of(&enum_v("coff")), Some(1));
        assert_eq!(d.value_at(2), enum_v("tea"));
        assert_eq!(d.size(), 3);
        assert!(!d.contains(&enum_v("milk")));

        let b = VarDomain::Bool;
        assert_eq!(b.index_of(&bool_v(false)), Some(0));
        assert_eq!(b.index_of(&bool_v(true)), Some(1));

        let i = VarDomain::Int { lo: -1, hi: 2 };
        assert_eq!(i.size(), 4);
        assert_eq!(i.value_at(0), int_v(-1));
        assert_eq!(i.index_of(&int_v(2)), Some(3));
        assert!(!i.contains(&int_v(3)));
    }

    #[test]
    fn valuation_restrict_and_merge() {
        let v = Valuation::from_pairs(&[("a", int_v(1)), ("b", bool_v(true))]);
        assert_eq!(v.restrict(&["a"]).len(), 1);
        assert_eq!(v.restrict(&[]).len(), 0);
        assert_eq!(v.without(&["a"]).get("b"), Some(&bool_v(true)));
        let w = Valuation::from_pairs(&[("c", enum_v("x"))]);
        assert_eq!(v.merged(&w).len(), 3);
    }
}
