use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::vocab::{render_source, EncodedContext, TokenId, EOS};
use super::PolicyModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub n_return: usize,
    /// Maximum generated tokens, counting the final EOS.
    pub max_len: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { beam_width: 32, n_return: 8, max_len: 96 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamCandidate {
    /// Generated token ids, without the final EOS.
    pub ids: Vec<TokenId>,
    /// Surface lexemes with COPY slots resolved to their numbers.
    pub tokens: Vec<String>,
    pub logprob: f64,
    /// Ended with EOS rather than by hitting `max_len`.
    pub finished: bool,
}

impl BeamCandidate {
    pub fn source(&self) -> String {
        render_source(&self.tokens)
    }

    /// The scored sequence: ids plus EOS when finished.
    pub fn sequence(&self) -> Vec<TokenId> {
        let mut s = self.ids.clone();
        if self.finished {
            s.push(EOS);
        }
        s
    }
}

struct Hyp {
    ids: Vec<TokenId>,
    logprob: f64,
}

/// Higher logprob first; ties go to the lexicographically smaller sequence.
fn rank(a_lp: f64, a: &[TokenId], b_lp: f64, b: &[TokenId]) -> Ordering {
    b_lp.total_cmp(&a_lp).then_with(|| a.cmp(b))
}

/// Length-capped beam search from BOS. Each step expands every live
/// hypothesis by every token of nonzero probability and keeps the best
/// `beam_width` non-EOS extensions; EOS extensions ranked within the top
/// `beam_width` are finished. Search stops early once `n_return` finished
/// candidates are at least as likely as every live hypothesis.
pub fn beam_search<M: PolicyModel + ?Sized>(model: &M, ctx: &EncodedContext, cfg: &BeamConfig) -> Vec<BeamCandidate> {
    assert!(cfg.beam_width >= cfg.n_return && cfg.n_return >= 1, "need beam_width >= n_return >= 1");
    let vocab = model.vocab();
    let mut alive = vec![Hyp { ids: Vec::new(), logprob: 0.0 }];
    let mut finished: Vec<Hyp> = Vec::new();
    let mut reached_cap = true;
    for _ in 0..cfg.max_len {
        let mut expansions: Vec<(f64, usize, TokenId)> = Vec::new();
        for (h_idx, h) in alive.iter().enumerate() {
            let dist = model.next_dist(ctx, &h.ids);
            for (c, &p) in dist.iter().enumerate() {
                if p > 0.0 {
                    expansions.push((h.logprob + p.ln(), h_idx, c as TokenId));
                }
            }
        }
        expansions.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| alive[a.1].ids.cmp(&alive[b.1].ids))
                .then_with(|| a.2.cmp(&b.2))
        });
        let mut next = Vec::with_capacity(cfg.beam_width);
        for (position, &(lp, h_idx, c)) in expansions.iter().enumerate() {
            if next.len() == cfg.beam_width && position >= cfg.beam_width {
                break;
            }
            if c == EOS {
                if position < cfg.beam_width {
                    finished.push(Hyp { ids: alive[h_idx].ids.clone(), logprob: lp });
                }
            } else if next.len() < cfg.beam_width {
                let mut ids = alive[h_idx].ids.clone();
                ids.push(c);
                next.push(Hyp { ids, logprob: lp });
            }
        }
        alive = next;
        if alive.is_empty() {
            reached_cap = false;
            break;
        }
        if finished.len() >= cfg.n_return {
            finished.sort_by(|a, b| rank(a.logprob, &a.ids, b.logprob, &b.ids));
            if alive[0].logprob <= finished[cfg.n_return - 1].logprob {
                reached_cap = false;
                break;
            }
        }
    }
    let mut out: Vec<BeamCandidate> = finished
        .into_iter()
        .map(|h| (h, true))
        .chain(alive.into_iter().filter(|_| reached_cap).map(|h| (h, false)))
        .map(|(h, done)| BeamCandidate {
            tokens: vocab.lexemes(ctx, &h.ids),
            ids: h.ids,
            logprob: h.logprob,
            finished: done,
        })
        .collect();
    out.sort_by(|a, b| rank(a.logprob, &a.ids, b.logprob, &b.ids));
    out.truncate(cfg.n_return);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{FeatureConfig, LogLinearPolicy, OraclePolicy, VocabConfig, Vocabulary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const C: &str = "Add 4 g to 3 g.";
    const Q: &str = "How many grams?";
    const P: &str = "func simulation() { x = 4 + 3; return x; }";

    fn random_policy(seed: u64) -> (LogLinearPolicy, EncodedContext) {
        let vocab = Vocabulary::build([(C, Q, P)], VocabConfig { copy_slots: 2, max_identifiers: 2 });
        let ctx = vocab.encode_context(C, Q);
        let mut m = LogLinearPolicy::new(vocab, FeatureConfig { hash_bits: 10, question_words: false });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in m.weights_mut() {
            *w = rng.gen_range(-2.0..2.0);
        }
        (m, ctx)
    }

    fn greedy(m: &LogLinearPolicy, ctx: &EncodedContext, max_len: usize) -> (Vec<TokenId>, f64, bool) {
        let mut ids = Vec::new();
        let mut lp = 0.0;
        for _ in 0..max_len {
            let d = m.next_dist(ctx, &ids);
            let best = (0..d.len()).fold(0, |b, c| if d[c] > d[b] { c } else { b });
            lp += d[best].ln();
            if best as TokenId == EOS {
                return (ids, lp, true);
            }
            ids.push(best as TokenId);
        }
        (ids, lp, false)
    }

    #[test]
    fn width_one_is_greedy() {
        for seed in 0..10 {
            let (m, ctx) = random_policy(seed);
            let cfg = BeamConfig { beam_width: 1, n_return: 1, max_len: 12 };
            let b = &beam_search(&m, &ctx, &cfg)[0];
            let (ids, lp, done) = greedy(&m, &ctx, 12);
            assert_eq!((&b.ids, b.finished), (&ids, done));
            assert!((b.logprob - lp).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_program_found_at_any_width() {
        let vocab = Vocabulary::build([(C, Q, P)], VocabConfig::default());
        let ctx = vocab.encode_context(C, Q);
        let (target, _) = vocab.encode_program(&ctx, P).unwrap();
        let m = OraclePolicy::new(vocab, target);
        for w in [1, 4, 32] {
            let out = beam_search(&m, &ctx, &BeamConfig { beam_width: w, n_return: 1, max_len: 96 });
            assert_eq!(out.len(), 1);
            assert!(out[0].finished && out[0].logprob.abs() < 1e-12);
            assert_eq!(out[0].source(), "func simulation ( ) { x = 4 + 3 ; return x ; }");
        }
    }

    #[test]
    fn results_sorted_and_bounded() {
        let (m, ctx) = random_policy(3);
        let out = beam_search(&m, &ctx, &BeamConfig { beam_width: 8, n_return: 5, max_len: 10 });
        assert!(!out.is_empty() && out.len() <= 5);
        assert!(out.windows(2).all(|w| w[0].logprob >= w[1].logprob));
        for c in &out {
            let lp = m.sequence_logprob(&ctx, &c.sequence());
            assert!((lp - c.logprob).abs() < 1e-9);
            assert!(c.finished || c.ids.len() == 10);
        }
    }

    #[test]
    fn deterministic() {
        let (m, ctx) = random_policy(4);
        let cfg = BeamConfig { beam_width: 6, n_return: 3, max_len: 15 };
        assert_eq!(beam_search(&m, &ctx, &cfg), beam_search(&m, &ctx, &cfg));
    }
}
