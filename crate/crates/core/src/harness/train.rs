use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::QAExample;
use crate::policy::{beam_search, MleReport, PolicyModel, TokenId, WeightedSequence};

use super::{prepare_examples, pretrain, HarnessConfig, HarnessError, PreparedExample, RewardSource};

/// Summary of one policy update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingRecord {
    pub epoch: usize,
    pub batch: usize,
    /// Candidates in the batch: B except for an epoch's final flush.
    pub size: usize,
    /// `-(1/size) * sum(Q * log p)` before the update.
    pub loss: f64,
    pub mean_q: f64,
    pub frac_parseable: f64,
    pub frac_executable: f64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

/// One scored beam candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateLogEntry {
    pub epoch: usize,
    pub example: String,
    pub source: String,
    /// Token ids ending in EOS when the candidate finished.
    pub ids: Vec<TokenId>,
    pub logprob: f64,
    pub q: f64,
    pub q_syntactic: f64,
    pub q_semantic: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainingReport {
    pub pretrain: Option<MleReport>,
    pub records: Vec<TrainingRecord>,
    #[serde(skip)]
    pub candidates: Vec<CandidateLogEntry>,
}

impl TrainingReport {
    /// Candidate-weighted mean Q of each epoch.
    pub fn mean_q_by_epoch(&self) -> Vec<f64> {
        let epochs = self.records.iter().map(|r| r.epoch).max().unwrap_or(0);
        (1..=epochs)
            .map(|e| {
                let (sum, n) = self
                    .records
                    .iter()
                    .filter(|r| r.epoch == e)
                    .fold((0.0, 0), |(s, n), r| (s + r.mean_q * r.size as f64, n + r.size));
                if n == 0 { 0.0 } else { sum / n as f64 }
            })
            .collect()
    }
}

struct Scored {
    seq: Vec<TokenId>,
    source: String,
    logprob: f64,
    q: f64,
    q_syntactic: f64,
    q_semantic: f64,
    parseable: bool,
    executable: bool,
}

struct BatchItem {
    example: usize,
    seq: Vec<TokenId>,
    q: f64,
    parseable: bool,
    executable: bool,
}

fn decode_and_score<M: PolicyModel + ?Sized>(model: &M, ex: &PreparedExample, cfg: &HarnessConfig) -> Vec<Scored> {
    let reward = cfg.reward();
    beam_search(model, &ex.context, &cfg.beam())
        .into_iter()
        .map(|c| {
            let source = c.source();
            let (scores, answer) = ex.reference.score_with_answer(&source, &reward);
            let q = match cfg.reward_source {
                RewardSource::Combined => scores.q_combined,
                RewardSource::SyntacticOnly => scores.q_syntactic,
            };
            Scored {
                seq: c.sequence(),
                source,
                logprob: c.logprob,
                q,
                q_syntactic: scores.q_syntactic,
                q_semantic: scores.q_semantic,
                parseable: scores.predicted_parseable,
                executable: answer.is_some(),
            }
        })
        .collect()
}

/// Indices of the `s` best candidates: highest Q, then highest logprob,
/// then beam order.
pub(crate) fn select_top(candidates: &[(f64, f64)], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by(|&a, &b| {
        candidates[b].0.total_cmp(&candidates[a].0).then(candidates[b].1.total_cmp(&candidates[a].1)).then(a.cmp(&b))
    });
    idx.truncate(s);
    idx
}

fn flush<M: PolicyModel + ?Sized>(
    model: &mut M,
    prepared: &[PreparedExample],
    batch: &mut Vec<BatchItem>,
    cfg: &HarnessConfig,
    epoch: usize,
    records: &mut Vec<TrainingRecord>,
) {
    if batch.is_empty() {
        return;
    }
    let n = batch.len() as f64;
    // Zero-reward terms contribute nothing and may have log p = -inf.
    let loss = -batch
        .iter()
        .filter(|b| b.q != 0.0)
        .map(|b| b.q * model.sequence_logprob(&prepared[b.example].context, &b.seq))
        .sum::<f64>()
        / n;
    let weighted: Vec<WeightedSequence<'_>> = batch
        .iter()
        .map(|b| WeightedSequence { context: &prepared[b.example].context, tokens: &b.seq, weight: b.q })
        .collect();
    model.reinforce_update(&weighted, cfg.learning_rate);
    records.push(TrainingRecord {
        epoch,
        batch: records.iter().filter(|r| r.epoch == epoch).count() + 1,
        size: batch.len(),
        loss,
        mean_q: batch.iter().map(|b| b.q).sum::<f64>() / n,
        frac_parseable: batch.iter().filter(|b| b.parseable).count() as f64 / n,
        frac_executable: batch.iter().filter(|b| b.executable).count() as f64 / n,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
    });
    batch.clear();
}

/// Reward-guided fine-tuning. Per epoch, examples are visited in a seeded
/// shuffle; each is beam-decoded into N candidates, every candidate is
/// scored against the reference, and the S highest-scoring join the batch.
/// A full batch of B candidates triggers one update on
/// `-(1/B) * sum(Q * log p)`; a partial batch left at the end of an epoch is
/// flushed with the mean over its actual size.
///
/// Candidates for the examples that fill the current batch are decoded in
/// parallel; updates are applied in order, so results do not depend on the
/// thread count.
pub fn reinforce_train<M: PolicyModel + ?Sized>(
    model: &mut M,
    examples: &[QAExample],
    cfg: &HarnessConfig,
) -> Result<TrainingReport, HarnessError> {
    cfg.validate()?;
    let mut report = TrainingReport::default();
    if let Some(mle) = &cfg.pretrain {
        report.pretrain = Some(pretrain(model, examples, mle)?);
    }
    let prepared = prepare_examples(model.vocab(), examples, &cfg.reward())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut batch: Vec<BatchItem> = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut next = 0;
        while next < order.len() {
            let room = cfg.batch_size - batch.len();
            let take = room.div_ceil(cfg.top_s).min(order.len() - next);
            let group = &order[next..next + take];
            next += take;
            let frozen: &M = model;
            let decoded: Vec<Vec<Scored>> =
                group.par_iter().map(|&i| decode_and_score(frozen, &prepared[i], cfg)).collect();
            for (&ex, candidates) in group.iter().zip(decoded) {
                let keys: Vec<(f64, f64)> = candidates.iter().map(|c| (c.q, c.logprob)).collect();
                let chosen = select_top(&keys, cfg.top_s);
                if cfg.log_candidates {
                    for (i, c) in candidates.iter().enumerate() {
                        report.candidates.push(CandidateLogEntry {
                            epoch,
                            example: prepared[ex].id.clone(),
                            source: c.source.clone(),
                            ids: c.seq.clone(),
                            logprob: c.logprob,
                            q: c.q,
                            q_syntactic: c.q_syntactic,
                            q_semantic: c.q_semantic,
                            selected: chosen.contains(&i),
                        });
                    }
                }
                let mut candidates: Vec<Option<Scored>> = candidates.into_iter().map(Some).collect();
                for i in chosen {
                    let c = candidates[i].take().unwrap();
                    batch.push(BatchItem {
                        example: ex,
                        seq: c.seq,
                        q: c.q,
                        parseable: c.parseable,
                        executable: c.executable,
                    });
                    if batch.len() == cfg.batch_size {
                        flush(model, &prepared, &mut batch, cfg, epoch, &mut report.records);
                    }
                }
            }
        }
        flush(model, &prepared, &mut batch, cfg, epoch, &mut report.records);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_prefers_q_then_logprob() {
        let c = [(0.5, -3.0), (0.9, -9.0), (0.5, -1.0), (0.1, 0.0), (0.9, -2.0)];
        assert_eq!(select_top(&c, 3), vec![4, 1, 2]);
        assert_eq!(select_top(&c, 10).len(), 5);
    }
}
