//! Autoregressive program policies over DSL tokens, conditioned on a
//! context and question, with beam-search decoding.

mod beam;
mod checkpoint;
mod loglinear;
mod oracle;
mod train;
mod vocab;

pub use beam::{beam_search, BeamCandidate, BeamConfig};
pub use checkpoint::{CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loglinear::{FeatureConfig, LogLinearPolicy};
pub use oracle::OraclePolicy;
pub use train::{loglinear_gradient_check, mle_pretrain, MleConfig, MleReport, TrainError};
pub use vocab::{
    content_words, copy_token, extract_numbers, render_source, EncodedContext, TextNumber, TokenClass, TokenId,
    VocabConfig, VocabError, VocabReport, Vocabulary, BOS, EOS, UNK,
};

/// A target program for supervised training.
#[derive(Debug, Clone, Copy)]
pub struct TrainingPair<'a> {
    pub context: &'a EncodedContext,
    /// Token ids ending with EOS.
    pub tokens: &'a [TokenId],
}

/// A sampled program with its reward weight.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSequence<'a> {
    pub context: &'a EncodedContext,
    pub tokens: &'a [TokenId],
    pub weight: f64,
}

/// `p(program | context, question)` factored over tokens.
///
/// Distributions are read-only queries and may run concurrently; updates
/// take `&mut self`.
pub trait PolicyModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Probability of each vocabulary entry following `prefix`. Entries not
    /// allowed in `ctx` are zero.
    fn next_dist(&self, ctx: &EncodedContext, prefix: &[TokenId]) -> Vec<f64>;

    fn sequence_logprob(&self, ctx: &EncodedContext, seq: &[TokenId]) -> f64 {
        (0..seq.len())
            .map(|t| self.next_dist(ctx, &seq[..t])[seq[t] as usize].ln())
            .sum()
    }

    /// One gradient step on the mean negative log-likelihood of `batch`.
    fn mle_update(&mut self, batch: &[TrainingPair<'_>], lr: f64);

    /// One gradient step on `-(1/|batch|) * sum(weight * log p(tokens))`.
    fn reinforce_update(&mut self, batch: &[WeightedSequence<'_>], lr: f64);
}
