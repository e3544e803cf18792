//! Scalar values and the data domains they live in.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Kind of a data domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    /// A set of object identifiers (strings).
    Identifier,
    /// Natural numbers, zero included.
    Natural,
    /// Strictly positive reals.
    PositiveReal,
    /// Free-form strings.
    String,
}

impl DomainKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, DomainKind::Natural | DomainKind::PositiveReal)
    }

    /// Coerces `value` into this domain, or returns `None` if it is not a member.
    ///
    /// Naturals written without a fractional part are accepted for positive-real
    /// domains, and integral reals for natural domains.
    pub fn admit(self, value: &Value) -> Option<Value> {
        match (self, value) {
            (DomainKind::Identifier | DomainKind::String, Value::Str(s)) => {
                Some(Value::Str(s.clone()))
            }
            (DomainKind::Natural, Value::Nat(n)) => Some(Value::Nat(*n)),
            (DomainKind::Natural, Value::Real(r)) => {
                if r.is_finite() && *r >= 0.0 && r.fract() == 0.0 && *r <= u64::MAX as f64 {
                    Some(Value::Nat(*r as u64))
                } else {
                    None
                }
            }
            (DomainKind::PositiveReal, Value::Real(r)) => {
                (r.is_finite() && *r > 0.0).then_some(Value::Real(*r))
            }
            (DomainKind::PositiveReal, Value::Nat(n)) => (*n > 0).then_some(Value::Real(*n as f64)),
            _ => None,
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Identifier => "identifier",
            DomainKind::Natural => "natural",
            DomainKind::PositiveReal => "positive-real",
            DomainKind::String => "string",
        })
    }
}

/// A named data domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataDomain {
    pub name: String,
    pub kind: DomainKind,
}

/// A scalar token or object component.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Nat(u64),
    Real(f64),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Nat(n) => Some(*n as f64),
            Value::Real(r) => Some(*r),
            Value::Str(_) => None,
        }
    }

    /// Ordering used by priority comparators: numbers numerically, strings
    /// lexicographically. Mixed string/number pairs order numbers first.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Nat(a), Value::Nat(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Str(_), _) => Ordering::Greater,
            (_, Value::Str(_)) => Ordering::Less,
            (a, b) => a
                .as_f64()
                .unwrap_or(f64::NAN)
                .total_cmp(&b.as_f64().unwrap_or(f64::NAN)),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Str(s) => serde_json::Value::String(s.clone()),
            Value::Nat(n) => serde_json::Value::from(*n),
            Value::Real(r) => serde_json::Number::from_f64(*r)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
        }
    }

    /// Converts a JSON scalar. Non-negative integers become `Nat`, every other
    /// number becomes `Real`.
    pub fn from_json(value: &serde_json::Value) -> Option<Value> {
        match value {
            serde_json::Value::String(s) => Some(Value::Str(s.clone())),
            serde_json::Value::Number(n) => {
                if let Some(u) = n.as_u64() {
                    Some(Value::Nat(u))
                } else {
                    n.as_f64().map(Value::Real)
                }
            }
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            Value::Nat(n) => write!(f, "{n}"),
            Value::Real(r) => write!(f, "{r:?}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}

impl From<u64> for Value {
    fn from(n: u64) -> Self {
        Value::Nat(n)
    }
}

impl From<f64> for Value {
    fn from(r: f64) -> Self {
        Value::Real(r)
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(deserializer)?;
        Value::from_json(&raw).ok_or_else(|| {
            serde::de::Error::custom(format!("expected a string or number, got {raw}"))
        })
    }
}
