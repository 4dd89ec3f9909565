use super::vocab::{EncodedContext, TokenId, Vocabulary, EOS};
use super::{PolicyModel, TrainingPair, WeightedSequence};

/// Puts all mass on one fixed sequence; after leaving it, on EOS.
/// Updates are ignored.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    vocab: Vocabulary,
    target: Vec<TokenId>,
}

impl OraclePolicy {
    /// `target` ends with EOS, or EOS is implied after it.
    pub fn new(vocab: Vocabulary, target: Vec<TokenId>) -> Self {
        Self { vocab, target }
    }
}

impl PolicyModel for OraclePolicy {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_dist(&self, _ctx: &EncodedContext, prefix: &[TokenId]) -> Vec<f64> {
        let mut dist = vec![0.0; self.vocab.len()];
        let next = if self.target.starts_with(prefix) {
            self.target.get(prefix.len()).copied().unwrap_or(EOS)
        } else {
            EOS
        };
        dist[next as usize] = 1.0;
        dist
    }

    fn mle_update(&mut self, _batch: &[TrainingPair<'_>], _lr: f64) {}

    fn reinforce_update(&mut self, _batch: &[WeightedSequence<'_>], _lr: f64) {}
}
