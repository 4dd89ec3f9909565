use std::collections::HashMap;
use std::hash::Hash;

/// Sentence-level BLEU with uniform weights over orders `1..=max_order`.
///
/// Unigram precision is the plain clipped precision; orders two and up use
/// add-one smoothing, `(matches + 1) / (candidate_ngrams + 1)`. The brevity
/// penalty `exp(1 - r/c)` applies when the candidate is shorter than the
/// reference. An empty candidate scores 0.
pub fn bleu<T: Eq + Hash>(reference: &[T], candidate: &[T], max_order: usize) -> f64 {
    assert!(max_order >= 1, "BLEU needs max_order >= 1");
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_order {
        let (matches, total) = clipped_matches(reference, candidate, n);
        let precision = if n == 1 {
            if matches == 0 {
                return 0.0;
            }
            matches as f64 / total as f64
        } else {
            (matches + 1) as f64 / (total + 1) as f64
        };
        log_sum += precision.ln();
    }
    let (r, c) = (reference.len() as f64, candidate.len() as f64);
    let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    brevity * (log_sum / max_order as f64).exp()
}

/// Clipped n-gram matches and the number of candidate n-grams.
fn clipped_matches<T: Eq + Hash>(reference: &[T], candidate: &[T], n: usize) -> (usize, usize) {
    if candidate.len() < n {
        return (0, 0);
    }
    let mut ref_counts: HashMap<&[T], usize> = HashMap::new();
    if reference.len() >= n {
        for g in reference.windows(n) {
            *ref_counts.entry(g).or_default() += 1;
        }
    }
    let mut matches = 0;
    let mut total = 0;
    for g in candidate.windows(n) {
        total += 1;
        if let Some(c) = ref_counts.get_mut(g) {
            if *c > 0 {
                *c -= 1;
                matches += 1;
            }
        }
    }
    (matches, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_is_one() {
        let t = toks("func simulation ( ) { return 5 ; }");
        assert_eq!(bleu(&t, &t, 4), 1.0);
        assert_eq!(bleu(&t[..1], &t[..1], 4), 1.0);
    }

    #[test]
    fn empty_candidate_is_zero() {
        let t = toks("a b c");
        assert_eq!(bleu(&t, &[], 4), 0.0);
        assert_eq!(bleu::<&str>(&[], &[], 4), 0.0);
    }

    #[test]
    fn worked_example() {
        // p1 = 3/4, p2 = 3/4, p3 = 2/3, p4 = 1/2, BP = 1.
        let expected = (0.75f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        let got = bleu(&toks("a b c d"), &toks("a b c e"), 4);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.6580).abs() < 1e-4);
    }

    #[test]
    fn clipping_and_brevity() {
        // Candidate "a a" vs reference "a b c": p1 = 1/2 (clipped), p2 = 1/2, BP = exp(1 - 3/2).
        let got = bleu(&toks("a b c"), &toks("a a"), 2);
        let expected = (1.0f64 - 1.5).exp() * (0.5f64 * 0.5).sqrt();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(bleu(&toks("a b"), &toks("c d"), 4), 0.0);
    }
}
