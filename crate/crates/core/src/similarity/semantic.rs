//! State-transition similarity between two execution traces.

use crate::interp::{State, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticScore {
    pub q_semantic: f64,
    pub matched: usize,
    pub t_min: usize,
    pub t_max: usize,
}

/// Two states match when they define exactly the same identifiers and agree
/// on every value. Ints compare exactly; anything involving a Real compares
/// within `tolerance`.
pub fn states_match(a: &State, b: &State, tolerance: f64) -> bool {
    a.len() == b.len()
        && a.iter().all(|(name, va)| match b.get(name) {
            Some(vb) => values_match(va, vb, tolerance),
            None => false,
        })
}

pub fn values_match(a: Value, b: Value, tolerance: f64) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (x, y) => (x.as_f64() - y.as_f64()).abs() <= tolerance,
    }
}

/// Fraction of timestamps, normalized by the longer trace, at which both
/// traces hold matching states. Two empty traces score 0.
pub fn semantic_from_states(reference: &[State], predicted: &[State], tolerance: f64) -> SemanticScore {
    let t_min = reference.len().min(predicted.len());
    let t_max = reference.len().max(predicted.len());
    let matched = reference
        .iter()
        .zip(predicted)
        .filter(|(r, p)| states_match(r, p, tolerance))
        .count();
    let q_semantic = if t_max == 0 { 0.0 } else { matched as f64 / t_max as f64 };
    SemanticScore { q_semantic, matched, t_min, t_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::RETURN_SLOT;

    fn st(pairs: &[(&str, Value)]) -> State {
        pairs.iter().copied().collect()
    }

    #[test]
    fn epsilon_mismatch() {
        let a = st(&[("x", Value::Int(1))]);
        let b = st(&[("x", Value::Int(1)), ("y", Value::Int(0))]);
        assert!(!states_match(&a, &b, 1e-6));
        assert!(!states_match(&b, &a, 1e-6));
    }

    #[test]
    fn tolerance_applies_to_reals_only() {
        assert!(values_match(Value::Real(1.0), Value::Real(1.0 + 1e-7), 1e-6));
        assert!(!values_match(Value::Real(1.0), Value::Real(1.0 + 1e-5), 1e-6));
        assert!(values_match(Value::Int(2), Value::Real(2.0), 1e-6));
        assert!(!values_match(Value::Int(2), Value::Int(3), 1e-6));
    }

    #[test]
    fn both_empty_scores_zero() {
        let s = semantic_from_states(&[], &[], 1e-6);
        assert_eq!((s.q_semantic, s.matched, s.t_min, s.t_max), (0.0, 0, 0, 0));
    }

    #[test]
    fn truncated_prefix() {
        let r = vec![st(&[("x", Value::Int(0))]), st(&[("x", Value::Int(0)), (RETURN_SLOT, Value::Int(0))])];
        let s = semantic_from_states(&r, &r[..1], 1e-6);
        assert_eq!(s.matched, 1);
        assert_eq!(s.q_semantic, 0.5);
    }
}
