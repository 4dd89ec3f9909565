//! Program-pair scoring: BLEU over lexemes, state-transition agreement over
//! execution traces, and their weighted mix
//! `q = gamma * q_syntactic + (1 - gamma) * q_semantic`.

mod bleu;
mod semantic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{parse_source, program_tokens, Diagnostic, Program};
use crate::interp::{answer_of, execute, execute_and_get_state, Limits, State};

pub use bleu::bleu;
pub use semantic::{semantic_from_states, states_match, values_match, SemanticScore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub gamma: f64,
    pub real_equality_tolerance: f64,
    pub bleu_max_order: usize,
    /// Step cap applied when executing either program.
    pub max_steps: u64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            real_equality_tolerance: 1e-6,
            bleu_max_order: 4,
            max_steps: crate::interp::DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("gamma must lie in [0, 1], got {0}")]
    Gamma(f64),
    #[error("real equality tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("BLEU max order must be at least 1")]
    MaxOrder,
}

impl RewardConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self { gamma, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(ConfigError::Gamma(self.gamma));
        }
        if !(self.real_equality_tolerance > 0.0) {
            return Err(ConfigError::Tolerance(self.real_equality_tolerance));
        }
        if self.bleu_max_order == 0 {
            return Err(ConfigError::MaxOrder);
        }
        Ok(())
    }

    fn limits(&self) -> Limits {
        Limits { max_steps: self.max_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityScores {
    pub q_syntactic: f64,
    pub q_semantic: f64,
    pub gamma: f64,
    #[serde(rename = "q")]
    pub q_combined: f64,
    #[serde(rename = "matched")]
    pub matched_states: usize,
    pub t_min: usize,
    pub t_max: usize,
    /// False when the predicted source failed to lex or parse.
    #[serde(skip)]
    pub predicted_parseable: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("reference program is invalid: {}", .0.first().map(|d| d.message.as_str()).unwrap_or("unknown error"))]
    InvalidReference(Vec<Diagnostic>),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// State-transition reward between two parsed programs.
pub fn semantic_reward(reference: &Program, predicted: &Program, config: &RewardConfig) -> SemanticScore {
    let r = execute_and_get_state(reference, config.limits());
    let p = execute_and_get_state(predicted, config.limits());
    semantic_from_states(&r, &p, config.real_equality_tolerance)
}

/// A reference program with its lexemes and state trace computed once, for
/// scoring many candidates against it.
#[derive(Debug, Clone)]
pub struct PreparedReference {
    tokens: Vec<String>,
    states: Vec<State>,
}

impl PreparedReference {
    pub fn new(source: &str, config: &RewardConfig) -> Result<Self, RewardError> {
        let program = parse_source(source).map_err(RewardError::InvalidReference)?;
        let tokens = program_tokens(source).expect("parsed source lexes");
        let states = execute_and_get_state(&program, config.limits());
        Ok(Self { tokens, states })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn score(&self, predicted_source: &str, config: &RewardConfig) -> SimilarityScores {
        self.score_with_answer(predicted_source, config).0
    }

    /// Scores plus the value the predicted program returns, if it runs to a
    /// `return`.
    pub fn score_with_answer(&self, predicted_source: &str, config: &RewardConfig) -> (SimilarityScores, Option<f64>) {
        let predicted_tokens = program_tokens(predicted_source).ok();
        let q_syntactic = predicted_tokens
            .as_ref()
            .map_or(0.0, |t| bleu(&self.tokens, t, config.bleu_max_order));
        let parsed = predicted_tokens.and(parse_source(predicted_source).ok());
        let (semantic, answer) = match &parsed {
            Some(program) => {
                let outcome = execute(program, config.limits());
                let answer = answer_of(&outcome);
                let p: Vec<State> = outcome.trace.records.into_iter().map(|r| r.state).collect();
                (semantic_from_states(&self.states, &p, config.real_equality_tolerance), answer)
            }
            None => (
                SemanticScore {
                    q_semantic: 0.0,
                    matched: 0,
                    t_min: 0,
                    t_max: self.states.len(),
                },
                None,
            ),
        };
        let gamma = config.gamma;
        let scores = SimilarityScores {
            q_syntactic,
            q_semantic: semantic.q_semantic,
            gamma,
            q_combined: gamma * q_syntactic + (1.0 - gamma) * semantic.q_semantic,
            matched_states: semantic.matched,
            t_min: semantic.t_min,
            t_max: semantic.t_max,
            predicted_parseable: parsed.is_some(),
        };
        (scores, answer)
    }

    /// Syntactic similarity alone, without executing the candidate.
    pub fn syntactic(&self, predicted_source: &str, config: &RewardConfig) -> f64 {
        program_tokens(predicted_source).map_or(0.0, |t| bleu(&self.tokens, &t, config.bleu_max_order))
    }
}

/// Score a predicted program against a reference. An unparseable prediction
/// still receives BLEU over its lexemes (0 when it does not lex) and
/// `q_semantic = 0`, with `predicted_parseable` cleared.
pub fn combined_reward(
    reference_source: &str,
    predicted_source: &str,
    config: &RewardConfig,
) -> Result<SimilarityScores, RewardError> {
    config.validate()?;
    Ok(PreparedReference::new(reference_source, config)?.score(predicted_source, config))
}
