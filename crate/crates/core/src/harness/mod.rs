//! Execution-guided training and question answering: MLE pre-training,
//! beam sampling, reward-ranked candidate selection and reward-weighted
//! policy-gradient updates, plus evaluation and reward-mix sweeps.

mod eval;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::QAExample;
use crate::policy::{BeamConfig, EncodedContext, MleConfig, PolicyModel, TokenId, TrainError, Vocabulary};
use crate::similarity::{PreparedReference, RewardConfig, RewardError};

pub use eval::{
    answer_question, evaluate_accuracy, gamma_sweep, AccuracyReport, Answer, CandidateFailure, EvalMode,
    ExampleResult, SweepReport, SweepRow,
};
pub use train::{reinforce_train, CandidateLogEntry, TrainingRecord, TrainingReport};

/// What the training reward is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    /// `gamma * BLEU + (1 - gamma) * state agreement`.
    #[default]
    Combined,
    /// BLEU alone; candidates are never executed for the reward.
    SyntacticOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    /// Candidates returned by beam search per example (N).
    pub n_candidates: usize,
    /// Highest-reward candidates kept per example (S).
    pub top_s: usize,
    /// Candidates per policy update (B).
    pub batch_size: usize,
    pub gamma: f64,
    pub beam_width: usize,
    /// Token cap for generated programs, counting EOS.
    pub max_len: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Step cap when executing generated and reference programs.
    pub max_steps: u64,
    /// Seeds the per-epoch example shuffle.
    pub seed: u64,
    pub reward_source: RewardSource,
    pub real_equality_tolerance: f64,
    pub bleu_max_order: usize,
    /// Run MLE pre-training on the reference programs first.
    pub pretrain: Option<MleConfig>,
    /// Keep every scored candidate in the training report.
    pub log_candidates: bool,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            n_candidates: 8,
            top_s: 4,
            batch_size: 32,
            gamma: 0.5,
            beam_width: 32,
            max_len: 96,
            learning_rate: 0.05,
            epochs: 5,
            max_steps: 10_000,
            seed: 0,
            reward_source: RewardSource::Combined,
            real_equality_tolerance: 1e-6,
            bleu_max_order: 4,
            pretrain: None,
            log_candidates: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid harness configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("example `{id}`: {source}")]
    Reference { id: String, source: RewardError },
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Config(m.to_owned()));
        if self.n_candidates == 0 || self.top_s == 0 || self.batch_size == 0 || self.beam_width == 0 {
            return fail("N, S, B and beam width must be at least 1");
        }
        if self.top_s > self.n_candidates {
            return fail("S must not exceed N");
        }
        if self.batch_size < self.top_s {
            return fail("B must be at least S");
        }
        if self.beam_width < self.n_candidates {
            return fail("beam width must be at least N");
        }
        if self.max_len == 0 || self.max_steps == 0 {
            return fail("max_len and max_steps must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning rate must be positive");
        }
        self.reward().validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn reward(&self) -> RewardConfig {
        RewardConfig {
            gamma: self.gamma,
            real_equality_tolerance: self.real_equality_tolerance,
            bleu_max_order: self.bleu_max_order,
            max_steps: self.max_steps,
        }
    }

    pub fn beam(&self) -> BeamConfig {
        BeamConfig { beam_width: self.beam_width, n_return: self.n_candidates, max_len: self.max_len }
    }
}

/// An example encoded for one vocabulary, with its reference trace.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub id: String,
    pub context: EncodedContext,
    /// Reference program as token ids ending in EOS.
    pub target: Vec<TokenId>,
    /// Lexemes of the reference the vocabulary cannot express.
    pub unk_tokens: usize,
    pub reference: PreparedReference,
    pub gold: f64,
    pub options: Vec<f64>,
}

pub fn prepare_examples(
    vocab: &Vocabulary,
    examples: &[QAExample],
    reward: &RewardConfig,
) -> Result<Vec<PreparedExample>, HarnessError> {
    examples
        .iter()
        .map(|e| {
            let context = vocab.encode_context(&e.context, &e.question);
            let reference = PreparedReference::new(&e.reference_program, reward)
                .map_err(|source| HarnessError::Reference { id: e.id.clone(), source })?;
            let (target, unk_tokens) = vocab
                .encode_program(&context, &e.reference_program)
                .expect("a parsed reference lexes");
            Ok(PreparedExample {
                id: e.id.clone(),
                context,
                target,
                unk_tokens,
                reference,
                gold: e.gold_answer,
                options: e.options.clone(),
            })
        })
        .collect()
}

/// MLE pre-training on the reference programs of `examples`. Examples whose
/// reference needs UNK are left out, since they cannot be generated.
pub fn pretrain<M: PolicyModel + ?Sized>(
    model: &mut M,
    examples: &[QAExample],
    cfg: &MleConfig,
) -> Result<crate::policy::MleReport, HarnessError> {
    let prepared = prepare_examples(model.vocab(), examples, &RewardConfig::default())?;
    let pairs: Vec<_> = prepared
        .iter()
        .filter(|p| p.unk_tokens == 0)
        .map(|p| crate::policy::TrainingPair { context: &p.context, tokens: &p.target })
        .collect();
    Ok(crate::policy::mle_pretrain(model, &pairs, cfg)?)
}
