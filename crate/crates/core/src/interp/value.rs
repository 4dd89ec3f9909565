use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::frontend::{ArithOp, CmpOp};

use super::RuntimeErrorKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Real(r) => r,
        }
    }

    pub(crate) fn arith(self, op: ArithOp, rhs: Value) -> Result<Value, RuntimeErrorKind> {
        use ArithOp::*;
        match (self, rhs) {
            (Value::Int(a), Value::Int(b)) => match op {
                Add => a.checked_add(b).map(Value::Int).ok_or(RuntimeErrorKind::IntegerOverflow),
                Sub => a.checked_sub(b).map(Value::Int).ok_or(RuntimeErrorKind::IntegerOverflow),
                Mul => a.checked_mul(b).map(Value::Int).ok_or(RuntimeErrorKind::IntegerOverflow),
                Div => {
                    if b == 0 {
                        return Err(RuntimeErrorKind::DivisionByZero);
                    }
                    real(a as f64 / b as f64)
                }
                FloorDiv => {
                    if b == 0 {
                        return Err(RuntimeErrorKind::DivisionByZero);
                    }
                    let q = a.checked_div(b).ok_or(RuntimeErrorKind::IntegerOverflow)?;
                    let adjust = a % b != 0 && ((a < 0) != (b < 0));
                    Ok(Value::Int(if adjust { q - 1 } else { q }))
                }
            },
            (a, b) => {
                let (a, b) = (a.as_f64(), b.as_f64());
                match op {
                    Add => real(a + b),
                    Sub => real(a - b),
                    Mul => real(a * b),
                    Div | FloorDiv if b == 0.0 => Err(RuntimeErrorKind::DivisionByZero),
                    Div => real(a / b),
                    FloorDiv => real((a / b).floor()),
                }
            }
        }
    }

    /// In-language comparison: exact, with Int promoted to Real when mixed.
    pub(crate) fn compare(self, op: CmpOp, rhs: Value) -> bool {
        let ord = match (self, rhs) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(&b)),
            (a, b) => a.as_f64().partial_cmp(&b.as_f64()),
        };
        match (op, ord) {
            (CmpOp::Ne, None) => true,
            (_, None) => false,
            (CmpOp::Lt, Some(o)) => o == Ordering::Less,
            (CmpOp::Gt, Some(o)) => o == Ordering::Greater,
            (CmpOp::Le, Some(o)) => o != Ordering::Greater,
            (CmpOp::Ge, Some(o)) => o != Ordering::Less,
            (CmpOp::Eq, Some(o)) => o == Ordering::Equal,
            (CmpOp::Ne, Some(o)) => o != Ordering::Equal,
        }
    }
}

fn real(x: f64) -> Result<Value, RuntimeErrorKind> {
    if x.is_finite() {
        Ok(Value::Real(x))
    } else {
        Err(RuntimeErrorKind::NonFiniteResult)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
        }
    }
}

// Ints serialize without a decimal point, Reals always with one.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Value::Int(i) => s.serialize_i64(i),
            Value::Real(r) => s.serialize_f64(r),
        }
    }
}

/// Name of the pseudo-variable a `return` writes. Not lexable as a user identifier.
pub const RETURN_SLOT: &str = "__ret__";

/// Variable bindings. An identifier absent from the map holds ε (never assigned).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    bindings: BTreeMap<String, Value>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.bindings.get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: Value) {
        match self.bindings.get_mut(name) {
            Some(slot) => *slot = value,
            None => {
                self.bindings.insert(name.to_owned(), value);
            }
        }
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(String::as_str)
    }
}

impl<'a> FromIterator<(&'a str, Value)> for State {
    fn from_iter<I: IntoIterator<Item = (&'a str, Value)>>(iter: I) -> Self {
        let mut s = State::new();
        for (k, v) in iter {
            s.set(k, v);
        }
        s
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.bindings.len()))?;
        for (k, v) in &self.bindings {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}
