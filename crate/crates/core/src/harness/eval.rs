use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::QAExample;
use crate::frontend::parse_source;
use crate::interp::{answer_of, execute, ExecutionStatus, ExecutionTrace, Limits};
use crate::policy::{beam_search, PolicyModel};

use super::{reinforce_train, HarnessConfig, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFailure {
    /// Position in beam order, from 0.
    pub rank: usize,
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    pub answer: Option<f64>,
    pub program_source: Option<String>,
    #[serde(skip)]
    pub trace: Option<ExecutionTrace>,
    /// Why each candidate before the chosen one (or every candidate, when
    /// none worked) was rejected.
    pub diagnostics: Vec<CandidateFailure>,
}

/// Decodes N candidates and answers with the first, in logprob order, that
/// parses and executes to a returned value.
pub fn answer_question<M: PolicyModel + ?Sized>(model: &M, context: &str, question: &str, cfg: &HarnessConfig) -> Answer {
    let ctx = model.vocab().encode_context(context, question);
    let limits = Limits { max_steps: cfg.max_steps };
    let mut diagnostics = Vec::new();
    for (rank, cand) in beam_search(model, &ctx, &cfg.beam()).into_iter().enumerate() {
        let source = cand.source();
        let fail = |reason: String| CandidateFailure { rank, source: source.clone(), reason };
        if !cand.finished {
            diagnostics.push(fail(format!("generation stopped at the {}-token cap", cfg.max_len)));
            continue;
        }
        let program = match parse_source(&source) {
            Ok(p) => p,
            Err(d) => {
                diagnostics.push(fail(format!("parse error: {}", d[0].message)));
                continue;
            }
        };
        let outcome = execute(&program, limits);
        match (answer_of(&outcome), &outcome.status) {
            (Some(v), _) => {
                return Answer {
                    answer: Some(v),
                    program_source: Some(source),
                    trace: Some(outcome.trace),
                    diagnostics,
                }
            }
            (None, ExecutionStatus::RuntimeError(e)) => diagnostics.push(fail(format!("runtime error: {e}"))),
            (None, _) => diagnostics.push(fail("program ends without returning".into())),
        }
    }
    Answer { answer: None, program_source: None, trace: None, diagnostics }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    MultipleChoice,
}

/// Relative 1e-4, or absolute 1e-6 near zero.
pub fn exact_match(predicted: f64, gold: f64) -> bool {
    (predicted - gold).abs() <= (1e-4 * gold.abs()).max(1e-6)
}

/// The option closest to `predicted`; the earlier one on ties.
pub fn nearest_option(predicted: f64, options: &[f64]) -> Option<f64> {
    options
        .iter()
        .copied()
        .fold(None, |best: Option<f64>, o| match best {
            Some(b) if (b - predicted).abs() <= (o - predicted).abs() => Some(b),
            _ => Some(o),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleResult {
    pub id: String,
    pub gold: f64,
    pub predicted: Option<f64>,
    /// Multiple-choice mode only.
    pub chosen_option: Option<f64>,
    pub correct: bool,
    pub program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub mode: EvalMode,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub results: Vec<ExampleResult>,
}

pub fn evaluate_accuracy<M: PolicyModel + ?Sized>(
    model: &M,
    test_set: &[QAExample],
    cfg: &HarnessConfig,
    mode: EvalMode,
) -> AccuracyReport {
    let results: Vec<ExampleResult> = test_set
        .par_iter()
        .map(|e| {
            let a = answer_question(model, &e.context, &e.question, cfg);
            let chosen_option = match mode {
                EvalMode::MultipleChoice => a.answer.and_then(|v| nearest_option(v, &e.options)),
                EvalMode::Exact => None,
            };
            let correct = match (mode, a.answer) {
                (_, None) => false,
                (EvalMode::Exact, Some(v)) => exact_match(v, e.gold_answer),
                (EvalMode::MultipleChoice, Some(_)) => chosen_option == Some(e.gold_answer),
            };
            ExampleResult {
                id: e.id.clone(),
                gold: e.gold_answer,
                predicted: a.answer,
                chosen_option,
                correct,
                program: a.program_source,
            }
        })
        .collect();
    let correct = results.iter().filter(|r| r.correct).count();
    let total = results.len();
    AccuracyReport {
        mode,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        correct,
        total,
        results,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub accuracy: f64,
    /// Mean Q over the final training epoch.
    pub final_mean_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    /// Accuracy of the starting checkpoint, before any reward training.
    pub baseline_accuracy: f64,
    pub rows: Vec<SweepRow>,
}

/// Fine-tunes a fresh copy of `checkpoint` for each gamma and evaluates it.
/// `cfg.gamma` is overridden per row and `cfg.pretrain` is ignored.
pub fn gamma_sweep<M: PolicyModel + Clone>(
    checkpoint: &M,
    train: &[QAExample],
    test: &[QAExample],
    gammas: &[f64],
    cfg: &HarnessConfig,
    mode: EvalMode,
) -> Result<SweepReport, HarnessError> {
    let baseline_accuracy = evaluate_accuracy(checkpoint, test, cfg, mode).accuracy;
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let row_cfg = HarnessConfig { gamma, pretrain: None, ..cfg.clone() };
        let mut model = checkpoint.clone();
        let report = reinforce_train(&mut model, train, &row_cfg)?;
        let accuracy = evaluate_accuracy(&model, test, &row_cfg, mode).accuracy;
        rows.push(SweepRow { gamma, accuracy, final_mean_q: report.mean_q_by_epoch().last().copied().unwrap_or(0.0) });
    }
    Ok(SweepReport { baseline_accuracy, rows })
}
