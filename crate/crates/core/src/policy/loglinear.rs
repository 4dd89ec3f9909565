use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::vocab::{fnv1a, EncodedContext, TokenClass, TokenId, Vocabulary, BOS};
use super::{PolicyModel, TrainingPair, WeightedSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Weight table size is `2^hash_bits`.
    pub hash_bits: u32,
    /// Conjoin question content words with the token history.
    pub question_words: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { hash_bits: 18, question_words: true }
    }
}

// Feature template tags.
const T_BIAS: u64 = 1;
const T_P1: u64 = 2;
const T_P2P1: u64 = 3;
const T_POS: u64 = 4;
const T_IN_TEXT: u64 = 5;
const T_DEPTH: u64 = 6;
const T_W: u64 = 7;
const T_WP1: u64 = 8;
const T_WP2P1: u64 = 9;
const T_RETURNED: u64 = 10;
const T_RIGHT: u64 = 11;
const T_RIGHT_P2P1: u64 = 12;
const T_LEFT: u64 = 13;
const T_LEFT_RIGHT: u64 = 14;
/// Stands in for the candidate in features shared by every COPY slot.
const ANY_COPY: u64 = u64::MAX;

fn last_two(prefix: &[TokenId]) -> (u64, u64) {
    let n = prefix.len();
    let p1 = if n >= 1 { prefix[n - 1] } else { BOS };
    let p2 = if n >= 2 { prefix[n - 2] } else { BOS };
    (p2 as u64, p1 as u64)
}

#[inline]
fn mix(h: u64, x: u64) -> u64 {
    let mut z = (h ^ x.wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn position_bucket(pos: usize) -> u64 {
    match pos {
        0..=3 => pos as u64,
        4..=7 => 4 + (pos as u64 - 4) / 2,
        8..=15 => 6 + (pos as u64 - 8) / 4,
        16..=31 => 8 + (pos as u64 - 16) / 8,
        32..=63 => 10 + (pos as u64 - 32) / 16,
        _ => 12,
    }
}

/// Hashed sparse features of the history, scored by a linear model and
/// normalized with a softmax over the allowed tokens.
///
/// Every feature is a conjunction of some history key with the candidate
/// token: the previous one and two tokens, a position bucket, the brace
/// depth, whether a `return` was emitted, whether a numeric candidate occurs
/// in the text, and question content words combined with the history.
/// COPY candidates also get features of the words around their number,
/// shared across slots so that number choice does not hinge on position.
#[derive(Debug, Clone)]
pub struct LogLinearPolicy {
    vocab: Vocabulary,
    features: FeatureConfig,
    weights: Vec<f64>,
    lbrace: Option<TokenId>,
    rbrace: Option<TokenId>,
    ret: Option<TokenId>,
    grad: Vec<f64>,
    touched: Vec<usize>,
}

/// Per-step feature indices of each allowed candidate.
struct Step {
    candidates: Vec<TokenId>,
    /// `offsets[i]..offsets[i + 1]` indexes `features` for `candidates[i]`.
    offsets: Vec<usize>,
    features: Vec<usize>,
    probs: Vec<f64>,
}

impl LogLinearPolicy {
    pub fn new(vocab: Vocabulary, features: FeatureConfig) -> Self {
        assert!((4..=28).contains(&features.hash_bits), "hash_bits out of range");
        let weights = vec![0.0; 1 << features.hash_bits];
        Self::from_parts(vocab, features, weights)
    }

    pub(crate) fn from_parts(vocab: Vocabulary, features: FeatureConfig, weights: Vec<f64>) -> Self {
        Self {
            lbrace: vocab.id("{"),
            rbrace: vocab.id("}"),
            ret: vocab.id("return"),
            vocab,
            features,
            weights,
            grad: Vec::new(),
            touched: Vec::new(),
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn history_keys(&self, ctx: &EncodedContext, prefix: &[TokenId]) -> (Vec<u64>, u64) {
        let (p2, p1) = last_two(prefix);
        let n = prefix.len();
        let depth = prefix.iter().fold(0i64, |d, &t| {
            if Some(t) == self.lbrace {
                d + 1
            } else if Some(t) == self.rbrace {
                d - 1
            } else {
                d
            }
        });
        let returned = prefix.iter().any(|&t| Some(t) == self.ret) as u64;
        let depth = depth.clamp(-1, 8) as u64;
        let mut keys = vec![
            mix(T_BIAS, 0),
            mix(T_P1, p1),
            mix(mix(T_P2P1, p2), p1),
            mix(T_POS, position_bucket(n)),
            mix(mix(T_DEPTH, depth), p1),
            mix(mix(mix(T_RETURNED, returned), depth), p1),
        ];
        if self.features.question_words {
            for &w in &ctx.words {
                keys.push(mix(T_W, w));
                keys.push(mix(mix(T_WP1, w), p1));
                keys.push(mix(mix(mix(T_WP2P1, w), p2), p1));
            }
        }
        (keys, mix(T_IN_TEXT, p1))
    }

    fn step(&self, ctx: &EncodedContext, prefix: &[TokenId]) -> Step {
        let mask = (1usize << self.features.hash_bits) - 1;
        let (keys, in_text_key) = self.history_keys(ctx, prefix);
        let mut step = Step {
            candidates: Vec::with_capacity(self.vocab.len()),
            offsets: vec![0],
            features: Vec::with_capacity(self.vocab.len() * (keys.len() + 1)),
            probs: Vec::with_capacity(self.vocab.len()),
        };
        let mut logits = Vec::with_capacity(self.vocab.len());
        for c in 0..self.vocab.len() {
            if !ctx.allowed[c] {
                continue;
            }
            let start = step.features.len();
            step.features.extend(keys.iter().map(|&k| mix(k, c as u64) as usize & mask));
            if ctx.in_text[c] {
                step.features.push(mix(in_text_key, c as u64) as usize & mask);
            }
            if let TokenClass::Copy(slot) = self.vocab.class(c as TokenId) {
                let (p2, p1) = last_two(prefix);
                let number = &ctx.numbers[slot];
                let left = number.left.as_deref().map_or(0, |w| fnv1a(w.as_bytes()));
                let right = number.right.as_deref().map_or(0, |w| fnv1a(w.as_bytes()));
                for key in [
                    mix(mix(T_RIGHT, right), p1),
                    mix(mix(mix(T_RIGHT_P2P1, right), p2), p1),
                    mix(mix(T_LEFT, left), p1),
                    mix(mix(mix(T_LEFT_RIGHT, left), right), p1),
                ] {
                    step.features.push(mix(key, ANY_COPY) as usize & mask);
                }
            }
            logits.push(step.features[start..].iter().map(|&i| self.weights[i]).sum::<f64>());
            step.candidates.push(c as TokenId);
            step.offsets.push(step.features.len());
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in &logits {
            let e = (l - max).exp();
            step.probs.push(e);
            total += e;
        }
        for p in &mut step.probs {
            *p /= total;
        }
        step
    }

    /// Adds `scale * d log p(seq) / dw` to `sink`, one call per feature
    /// occurrence. Steps whose target is not allowed in `ctx` are skipped.
    fn logprob_gradient(&self, ctx: &EncodedContext, seq: &[TokenId], scale: f64, mut sink: impl FnMut(usize, f64)) {
        for t in 0..seq.len() {
            let y = seq[t];
            if !ctx.allowed[y as usize] {
                continue;
            }
            let step = self.step(ctx, &seq[..t]);
            for (i, &c) in step.candidates.iter().enumerate() {
                let indicator = if c == y { 1.0 } else { 0.0 };
                let g = scale * (indicator - step.probs[i]);
                for &f in &step.features[step.offsets[i]..step.offsets[i + 1]] {
                    sink(f, g);
                }
            }
        }
    }

    /// Sparse gradient of `log p(seq)` with respect to the weights.
    pub fn gradient(&self, ctx: &EncodedContext, seq: &[TokenId]) -> BTreeMap<usize, f64> {
        let mut g = BTreeMap::new();
        self.logprob_gradient(ctx, seq, 1.0, |i, v| *g.entry(i).or_insert(0.0) += v);
        g
    }

    /// Gradient ascent on `sum(scale * log p(seq))`, all gradients taken at
    /// the current weights before any are applied.
    fn ascend<'a>(&mut self, items: impl Iterator<Item = (&'a EncodedContext, &'a [TokenId], f64)>, lr: f64) {
        let mut grad = std::mem::take(&mut self.grad);
        let mut touched = std::mem::take(&mut self.touched);
        grad.resize(self.weights.len(), 0.0);
        for (ctx, seq, scale) in items {
            if scale == 0.0 {
                continue;
            }
            self.logprob_gradient(ctx, seq, scale, |i, v| {
                if grad[i] == 0.0 {
                    touched.push(i);
                }
                grad[i] += v;
            });
        }
        for &i in &touched {
            self.weights[i] += lr * grad[i];
            grad[i] = 0.0;
        }
        touched.clear();
        self.grad = grad;
        self.touched = touched;
    }
}

impl PolicyModel for LogLinearPolicy {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_dist(&self, ctx: &EncodedContext, prefix: &[TokenId]) -> Vec<f64> {
        let step = self.step(ctx, prefix);
        let mut dist = vec![0.0; self.vocab.len()];
        for (&c, &p) in step.candidates.iter().zip(&step.probs) {
            dist[c as usize] = p;
        }
        dist
    }

    fn sequence_logprob(&self, ctx: &EncodedContext, seq: &[TokenId]) -> f64 {
        (0..seq.len())
            .map(|t| {
                let step = self.step(ctx, &seq[..t]);
                step.candidates.iter().position(|&c| c == seq[t]).map_or(f64::NEG_INFINITY, |i| step.probs[i].ln())
            })
            .sum()
    }

    fn mle_update(&mut self, batch: &[TrainingPair<'_>], lr: f64) {
        let scale = 1.0 / batch.len() as f64;
        self.ascend(batch.iter().map(|b| (b.context, b.tokens, scale)), lr);
    }

    fn reinforce_update(&mut self, batch: &[WeightedSequence<'_>], lr: f64) {
        let n = batch.len() as f64;
        self.ascend(batch.iter().map(|b| (b.context, b.tokens, b.weight / n)), lr);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::vocab::{VocabConfig, EOS};

    fn setup() -> (LogLinearPolicy, EncodedContext, Vec<TokenId>) {
        let (c, q, p) = ("Add 4 g to 3 g.", "How many grams?", "func simulation() { x = 4 + 3; return x; }");
        let vocab = Vocabulary::build([(c, q, p)], VocabConfig::default());
        let ctx = vocab.encode_context(c, q);
        let (seq, _) = vocab.encode_program(&ctx, p).unwrap();
        (LogLinearPolicy::new(vocab, FeatureConfig { hash_bits: 12, question_words: true }), ctx, seq)
    }

    #[test]
    fn uniform_at_zero_weights() {
        let (m, ctx, _) = setup();
        let d = m.next_dist(&ctx, &[]);
        let allowed = ctx.allowed.iter().filter(|&&a| a).count();
        for (i, p) in d.iter().enumerate() {
            let expected = if ctx.allowed[i] { 1.0 / allowed as f64 } else { 0.0 };
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn updates_raise_target_probability() {
        let (mut m, ctx, seq) = setup();
        let before = m.sequence_logprob(&ctx, &seq);
        for _ in 0..20 {
            m.mle_update(&[TrainingPair { context: &ctx, tokens: &seq }], 0.1);
        }
        let after = m.sequence_logprob(&ctx, &seq);
        assert!(after > before + 1.0, "{before} -> {after}");
        assert!(m.touched.is_empty() && m.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn disallowed_targets_have_zero_probability() {
        let (m, ctx, _) = setup();
        assert_eq!(m.sequence_logprob(&ctx, &[BOS]), f64::NEG_INFINITY);
        assert!(m.sequence_logprob(&ctx, &[EOS]).is_finite());
    }

    #[test]
    fn position_buckets_are_monotone() {
        let b: Vec<u64> = (0..100).map(position_bucket).collect();
        assert!(b.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(b[99], 12);
    }
}
