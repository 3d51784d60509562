//! Runtime values and their canonical text form.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

pub type Row = Vec<Value>;

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "unknown",
            Value::Int(_) => "integer",
            Value::Float(_) => "double precision",
            Value::Text(_) => "text",
            Value::Bool(_) => "boolean",
        }
    }

    /// Canonical cell encoding used by the result hash: a type prefix
    /// followed by the value.
    pub fn canonical(&self) -> String {
        match self {
            Value::Null => "n:".to_string(),
            Value::Int(v) => format!("i:{v}"),
            Value::Float(v) => format!("f:{}", canonical_float(*v)),
            Value::Text(s) => format!("s:{s}"),
            Value::Bool(b) => format!("b:{b}"),
        }
    }

    /// SQL comparison; `None` if either side is NULL or the types are not
    /// comparable.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Some(float_total(x, y)),
                _ => None,
            },
        }
    }

    /// Total order used for sorting: NULLs compare greater than everything
    /// (ascending puts them last).
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        match (self.is_null(), other.is_null()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            _ => self.sql_cmp(other).unwrap_or_else(|| self.type_rank().cmp(&other.type_rank())),
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            Value::Null => 4,
            Value::Bool(_) => 0,
            Value::Int(_) | Value::Float(_) => 1,
            Value::Text(_) => 2,
        }
    }
}

/// Shortest round-trip decimal form, with `-0.0` folded into `0.0`.
pub fn canonical_float(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    if v.is_nan() {
        return "NaN".to_string();
    }
    format!("{v:?}")
}

fn float_total(x: f64, y: f64) -> Ordering {
    // NaN sorts above all numbers, as in PostgreSQL.
    match (x.is_nan(), y.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
    }
}

/// Grouping equality: NULLs are equal to each other, numbers compare by
/// value across int/float.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Null, _) | (_, Value::Null) => false,
            (Value::Float(a), Value::Float(b)) => norm_bits(*a) == norm_bits(*b),
            _ => self.sql_cmp(other) == Some(Ordering::Equal),
        }
    }
}

impl Eq for Value {}

fn norm_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else if v.is_nan() {
        f64::NAN.to_bits()
    } else {
        v.to_bits()
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Null => 0u8.hash(state),
            Value::Int(v) => {
                // Keep Int(n) and Float(n.0) in the same bucket.
                1u8.hash(state);
                norm_bits(*v as f64).hash(state);
            }
            Value::Float(v) => {
                1u8.hash(state);
                norm_bits(*v).hash(state);
            }
            Value::Text(s) => {
                2u8.hash(state);
                s.hash(state);
            }
            Value::Bool(b) => {
                3u8.hash(state);
                b.hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => f.write_str(&canonical_float(*v)),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => f.write_str(if *b { "t" } else { "f" }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(Value::Int(-3).canonical(), "i:-3");
        assert_eq!(Value::Float(2.5).canonical(), "f:2.5");
        assert_eq!(Value::Float(-0.0).canonical(), "f:0.0");
        assert_eq!(Value::Float(1e300).canonical(), "f:1e300");
        assert_eq!(Value::Text("a".into()).canonical(), "s:a");
        assert_eq!(Value::Null.canonical(), "n:");
        assert_eq!(Value::Bool(true).canonical(), "b:true");
    }

    #[test]
    fn comparisons() {
        assert_eq!(Value::Int(2).sql_cmp(&Value::Float(2.5)), Some(Ordering::Less));
        assert_eq!(Value::Null.sql_cmp(&Value::Int(1)), None);
        assert_eq!(Value::Text("b".into()).sql_cmp(&Value::Int(1)), None);
        assert_eq!(Value::Null.sort_cmp(&Value::Int(1)), Ordering::Greater);
        assert_eq!(Value::Int(1), Value::Float(1.0));
        assert_eq!(Value::Null, Value::Null);
    }
}
