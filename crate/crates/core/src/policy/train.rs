use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loglinear::LogLinearPolicy;
use super::vocab::{EncodedContext, TokenId};
use super::{PolicyModel, TrainingPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self { epochs: 10, learning_rate: 0.05, batch_size: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleReport {
    /// Mean per-example negative log-likelihood, at initialization and
    /// after each epoch.
    pub nll: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: NLL {previous:.4} -> {current:.4}")]
    Diverged { epoch: usize, previous: f64, current: f64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

pub fn mean_nll<M: PolicyModel + ?Sized>(model: &M, data: &[TrainingPair<'_>]) -> f64 {
    data.iter().map(|p| -model.sequence_logprob(p.context, p.tokens)).sum::<f64>() / data.len() as f64
}

/// Minibatch gradient descent on the cross-entropy of the target programs.
/// Aborts when the mean NLL grows by more than 10% between epochs.
pub fn mle_pretrain<M: PolicyModel + ?Sized>(
    model: &mut M,
    data: &[TrainingPair<'_>],
    cfg: &MleConfig,
) -> Result<MleReport, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(TrainError::Config("batch size and learning rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut nll = vec![mean_nll(model, data)];
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainingPair<'_>> = chunk.iter().map(|&i| data[i]).collect();
            model.mle_update(&batch, cfg.learning_rate);
        }
        let previous = *nll.last().unwrap();
        let current = mean_nll(model, data);
        if !current.is_finite() || current > previous * 1.1 {
            return Err(TrainError::Diverged { epoch, previous, current });
        }
        nll.push(current);
    }
    Ok(MleReport { nll })
}

/// Largest relative disagreement between the analytic gradient of
/// `log p(seq)` and central finite differences, over the weights the
/// sequence touches. Relative error uses a denominator floor of 1e-3 so
/// near-zero components are compared absolutely.
pub fn loglinear_gradient_check(model: &LogLinearPolicy, ctx: &EncodedContext, seq: &[TokenId]) -> f64 {
    const H: f64 = 1e-5;
    const MAX_COORDS: usize = 400;
    let analytic = model.gradient(ctx, seq);
    let coords: Vec<(usize, f64)> = analytic.into_iter().collect();
    let stride = coords.len().div_ceil(MAX_COORDS).max(1);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for &(i, a) in coords.iter().step_by(stride) {
        let w = probe.weights()[i];
        probe.weights_mut()[i] = w + H;
        let up = probe.sequence_logprob(ctx, seq);
        probe.weights_mut()[i] = w - H;
        let down = probe.sequence_logprob(ctx, seq);
        probe.weights_mut()[i] = w;
        let numeric = (up - down) / (2.0 * H);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{FeatureConfig, VocabConfig, Vocabulary, WeightedSequence};
    use rand::Rng;

    const C: &str = "The flask holds 12 g of salt. Each hour 3 g dissolve.";
    const Q: &str = "How many grams are left after 2 hours?";
    const P: &str = "func simulation() { salt = 12; repeat(2) { salt = salt - 3; } return salt; }";

    fn setup() -> (LogLinearPolicy, EncodedContext, Vec<TokenId>) {
        let vocab = Vocabulary::build([(C, Q, P)], VocabConfig::default());
        let ctx = vocab.encode_context(C, Q);
        let (seq, unk) = vocab.encode_program(&ctx, P).unwrap();
        assert_eq!(unk, 0);
        (LogLinearPolicy::new(vocab, FeatureConfig { hash_bits: 12, question_words: true }), ctx, seq)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (mut m, ctx, seq) = setup();
        assert!(loglinear_gradient_check(&m, &ctx, &seq) < 1e-4);
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for w in m.weights_mut() {
                *w = rng.gen_range(-1.0..1.0);
            }
            let err = loglinear_gradient_check(&m, &ctx, &seq);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn single_token_vocabulary_has_zero_gradient() {
        let m = LogLinearPolicy::new(Vocabulary::minimal(), FeatureConfig { hash_bits: 6, question_words: true });
        let ctx = m.vocab().encode_context(C, Q);
        let seq = [super::super::EOS];
        assert!(m.gradient(&ctx, &seq).values().all(|&g| g == 0.0));
        assert_eq!(m.sequence_logprob(&ctx, &seq), 0.0);
        assert_eq!(loglinear_gradient_check(&m, &ctx, &seq), 0.0);
    }

    #[test]
    fn memorizes_a_single_example() {
        let (mut m, ctx, seq) = setup();
        let data = [TrainingPair { context: &ctx, tokens: &seq }];
        let cfg = MleConfig { epochs: 40, learning_rate: 0.1, batch_size: 1, seed: 0 };
        let report = mle_pretrain(&mut m, &data, &cfg).unwrap();
        assert!(report.nll.windows(2).all(|w| w[1] <= w[0]));
        let out = crate::policy::beam_search(&m, &ctx, &crate::policy::BeamConfig { beam_width: 1, n_return: 1, max_len: 64 });
        assert_eq!(out[0].sequence(), seq);
    }

    #[test]
    fn empty_dataset_and_divergence() {
        let (mut m, ctx, seq) = setup();
        assert_eq!(mle_pretrain(&mut m, &[], &MleConfig::default()), Err(TrainError::EmptyDataset));
        let data = [TrainingPair { context: &ctx, tokens: &seq }];
        let wild = MleConfig { epochs: 5, learning_rate: 1e4, batch_size: 1, seed: 0 };
        let mut diverged = false;
        for _ in 0..3 {
            if matches!(mle_pretrain(&mut m, &data, &wild), Err(TrainError::Diverged { .. })) {
                diverged = true;
                break;
            }
        }
        assert!(diverged);
    }

    #[test]
    fn weighted_update_reduces_to_mle() {
        let (mut a, ctx, seq) = setup();
        let mut b = a.clone();
        a.mle_update(&[TrainingPair { context: &ctx, tokens: &seq }], 0.3);
        b.reinforce_update(&[WeightedSequence { context: &ctx, tokens: &seq, weight: 1.0 }], 0.3);
        assert!(a.weights().iter().zip(b.weights()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let before = b.weights().to_vec();
        b.reinforce_update(&[WeightedSequence { context: &ctx, tokens: &seq, weight: 0.0 }], 0.3);
        assert_eq!(b.weights(), &before[..]);
    }
}
