use std::collections::HashMap;

use simdsl::dataset::synthetic::generate_corpus;
use simdsl::dataset::QAExample;
use simdsl::harness::{
    answer_question, evaluate_accuracy, gamma_sweep, reinforce_train, CandidateLogEntry, EvalMode, HarnessConfig,
    RewardSource,
};
use simdsl::policy::{
    EncodedContext, FeatureConfig, LogLinearPolicy, MleConfig, OraclePolicy, PolicyModel, VocabConfig, Vocabulary,
    WeightedSequence,
};
use simdsl::similarity::combined_reward;

const ARITH: &str = "func simulation() { x = 0; repeat(5) { x = x + 2; } return x; }";

fn vocab_for(examples: &[QAExample]) -> Vocabulary {
    Vocabulary::build(
        examples.iter().map(|e| (e.context.as_str(), e.question.as_str(), e.reference_program.as_str())),
        VocabConfig::default(),
    )
}

fn fresh_policy(examples: &[QAExample]) -> LogLinearPolicy {
    LogLinearPolicy::new(vocab_for(examples), FeatureConfig::default())
}

fn small_config() -> HarnessConfig {
    HarnessConfig {
        n_candidates: 8,
        top_s: 4,
        batch_size: 8,
        beam_width: 8,
        epochs: 2,
        max_len: 64,
        learning_rate: 0.05,
        ..HarnessConfig::default()
    }
}

fn pretrained(examples: &[QAExample], epochs: usize) -> LogLinearPolicy {
    let mut model = fresh_policy(examples);
    simdsl::harness::pretrain(&mut model, examples, &MleConfig { epochs, ..MleConfig::default() }).unwrap();
    model
}

fn oracle_for(program: &str) -> (OraclePolicy, EncodedContext) {
    let vocab = Vocabulary::build([("", "", program)], VocabConfig::default());
    let ctx = vocab.encode_context("", "");
    let (target, unk) = vocab.encode_program(&ctx, program).unwrap();
    assert_eq!(unk, 0);
    (OraclePolicy::new(vocab, target), ctx)
}

#[test]
fn answers_with_the_oracle_program() {
    let (model, _) = oracle_for("func simulation() { return 5; }");
    let a = answer_question(&model, "", "", &HarnessConfig::default());
    assert_eq!(a.answer, Some(5.0));
    assert!(a.diagnostics.is_empty());

    let (model, _) = oracle_for(ARITH);
    let a = answer_question(&model, "", "", &HarnessConfig::default());
    assert_eq!(a.answer, Some(10.0));
    assert_eq!(a.program_source.as_deref(), Some("func simulation ( ) { x = 0 ; repeat ( 5 ) { x = x + 2 ; } return x ; }"));
    assert_eq!(a.trace.unwrap().len(), 7);
}

#[test]
fn unparseable_candidates_each_get_a_diagnostic() {
    let tokens = ["<bos>", "<eos>", "<unk>", "x", ";"].map(String::from).to_vec();
    let vocab = Vocabulary::from_tokens(tokens, 0).unwrap();
    let model = LogLinearPolicy::new(vocab, FeatureConfig::default());
    let cfg = HarnessConfig { max_len: 5, ..HarnessConfig::default() };
    let a = answer_question(&model, "Some context with 3 numbers.", "What?", &cfg);
    assert_eq!(a.answer, None);
    assert_eq!(a.program_source, None);
    assert_eq!(a.diagnostics.len(), cfg.n_candidates);
    let ranks: Vec<usize> = a.diagnostics.iter().map(|d| d.rank).collect();
    assert_eq!(ranks, (0..cfg.n_candidates).collect::<Vec<_>>());
}

#[test]
fn accuracy_extremes() {
    let corpus = generate_corpus(8, 3);
    let cfg = HarnessConfig::default();
    // Every example's oracle answers its own question.
    for e in &corpus {
        let vocab = vocab_for(std::slice::from_ref(e));
        let ctx = vocab.encode_context(&e.context, &e.question);
        let (target, _) = vocab.encode_program(&ctx, &e.reference_program).unwrap();
        let model = OraclePolicy::new(vocab, target);
        for mode in [EvalMode::Exact, EvalMode::MultipleChoice] {
            let r = evaluate_accuracy(&model, std::slice::from_ref(e), &cfg, mode);
            assert_eq!((r.correct, r.total, r.accuracy), (1, 1, 1.0), "{}", e.id);
        }
    }
    let silent = LogLinearPolicy::new(Vocabulary::minimal(), FeatureConfig::default());
    let r = evaluate_accuracy(&silent, &corpus, &cfg, EvalMode::MultipleChoice);
    assert_eq!((r.correct, r.total, r.accuracy), (0, 8, 0.0));
    assert!(r.results.iter().all(|x| x.predicted.is_none() && !x.correct));
}

#[test]
fn zero_reward_batches_change_nothing() {
    // The only generatable program is empty, which scores zero against any reference.
    let corpus = generate_corpus(12, 1);
    let mut model = LogLinearPolicy::new(Vocabulary::minimal(), FeatureConfig::default());
    model.weights_mut().iter_mut().enumerate().for_each(|(i, w)| *w = (i % 7) as f64 * 0.01);
    let before = model.weights().to_vec();
    let cfg = HarnessConfig { n_candidates: 1, top_s: 1, batch_size: 4, beam_width: 1, ..small_config() };
    let report = reinforce_train(&mut model, &corpus, &cfg).unwrap();
    assert_eq!(report.records.len(), 2 * 3);
    assert!(report.records.iter().all(|r| r.mean_q == 0.0 && r.loss == 0.0 && r.frac_parseable == 0.0));
    assert_eq!(model.weights(), &before[..]);

    // Directly, on a model that can generate programs.
    let mut model = pretrained(&corpus, 1);
    let before = model.weights().to_vec();
    let ctx = model.vocab().encode_context(&corpus[0].context, &corpus[0].question);
    let (seq, _) = model.vocab().encode_program(&ctx, &corpus[0].reference_program).unwrap();
    model.reinforce_update(&[WeightedSequence { context: &ctx, tokens: &seq, weight: 0.0 }; 3], 1.0);
    assert_eq!(model.weights(), &before[..]);
}

fn contexts(model: &impl PolicyModel, examples: &[QAExample]) -> HashMap<String, EncodedContext> {
    examples.iter().map(|e| (e.id.clone(), model.vocab().encode_context(&e.context, &e.question))).collect()
}

/// Candidates of one (epoch, example) visit, in beam order.
fn visits(log: &[CandidateLogEntry], n: usize) -> Vec<&[CandidateLogEntry]> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < log.len() {
        let mut end = start + 1;
        while end < log.len() && end - start < n && log[end].example == log[start].example && log[end].epoch == log[start].epoch {
            end += 1;
        }
        out.push(&log[start..end]);
        start = end;
    }
    out
}

/// Selected entries of one visit in the order they enter the batch.
fn selected_in_batch_order(visit: &[CandidateLogEntry]) -> Vec<&CandidateLogEntry> {
    let mut chosen: Vec<(usize, &CandidateLogEntry)> = visit.iter().enumerate().filter(|(_, c)| c.selected).collect();
    chosen.sort_by(|(i, a), (j, b)| b.q.total_cmp(&a.q).then(b.logprob.total_cmp(&a.logprob)).then(i.cmp(j)));
    chosen.into_iter().map(|(_, c)| c).collect()
}

#[test]
fn logged_candidates_replay_the_training_run() {
    let corpus = generate_corpus(24, 9);
    let start = pretrained(&corpus, 3);
    let cfg = HarnessConfig { batch_size: 12, log_candidates: true, ..small_config() };
    let mut model = start.clone();
    let report = reinforce_train(&mut model, &corpus, &cfg).unwrap();
    let refs: HashMap<&str, &str> = corpus.iter().map(|e| (e.id.as_str(), e.reference_program.as_str())).collect();

    // Reward plumbing: each logged Q is the offline combined reward.
    for c in &report.candidates {
        let offline = combined_reward(refs[c.example.as_str()], &c.source, &cfg.reward()).unwrap();
        assert_eq!(c.q.to_bits(), offline.q_combined.to_bits(), "{} {}", c.example, c.source);
        assert_eq!(c.q_syntactic.to_bits(), offline.q_syntactic.to_bits());
        assert_eq!(c.q_semantic.to_bits(), offline.q_semantic.to_bits());
    }

    // Selection law.
    let visits = visits(&report.candidates, cfg.n_candidates);
    assert_eq!(visits.len(), cfg.epochs * corpus.len());
    for v in &visits {
        let chosen: Vec<_> = v.iter().filter(|c| c.selected).collect();
        assert_eq!(chosen.len(), cfg.top_s.min(v.len()));
        for s in &chosen {
            for c in v.iter().filter(|c| !c.selected) {
                assert!(s.q > c.q || (s.q == c.q && s.logprob >= c.logprob), "{} beats {}", c.source, s.source);
            }
        }
    }

    // Batch sizes: exactly B, except each epoch's final flush.
    for epoch in 1..=cfg.epochs {
        let sizes: Vec<usize> = report.records.iter().filter(|r| r.epoch == epoch).map(|r| r.size).collect();
        assert_eq!(sizes.iter().sum::<usize>(), corpus.len() * cfg.top_s);
        assert!(sizes[..sizes.len() - 1].iter().all(|&s| s == cfg.batch_size), "{sizes:?}");
    }

    // Replaying the batches reproduces every loss and the final parameters.
    let ctxs = contexts(&start, &corpus);
    let mut replay = start.clone();
    let queue: Vec<&CandidateLogEntry> = visits.iter().flat_map(|v| selected_in_batch_order(v)).collect();
    let mut at = 0;
    for record in &report.records {
        let batch = &queue[at..at + record.size];
        at += record.size;
        let loss = -batch
            .iter()
            .filter(|c| c.q != 0.0)
            .map(|c| c.q * replay.sequence_logprob(&ctxs[&c.example], &c.ids))
            .sum::<f64>()
            / record.size as f64;
        assert!((loss - record.loss).abs() <= 1e-12 * loss.abs().max(1.0), "{loss} vs {}", record.loss);
        let mean_q = batch.iter().map(|c| c.q).sum::<f64>() / record.size as f64;
        assert_eq!(mean_q.to_bits(), record.mean_q.to_bits());
        let weighted: Vec<WeightedSequence<'_>> = batch
            .iter()
            .map(|c| WeightedSequence { context: &ctxs[&c.example], tokens: &c.ids, weight: c.q })
            .collect();
        replay.reinforce_update(&weighted, cfg.learning_rate);
    }
    assert_eq!(at, queue.len());
    assert_eq!(replay.weights(), model.weights());
}

#[test]
fn unit_sizes_reduce_to_weighted_mle_on_the_beam_top() {
    let corpus = generate_corpus(10, 4);
    let start = pretrained(&corpus, 2);
    let cfg = HarnessConfig {
        n_candidates: 1,
        top_s: 1,
        batch_size: 1,
        beam_width: 1,
        log_candidates: true,
        ..small_config()
    };
    let mut model = start.clone();
    let report = reinforce_train(&mut model, &corpus, &cfg).unwrap();
    assert_eq!(report.records.len(), cfg.epochs * corpus.len());
    assert!(report.records.iter().all(|r| r.size == 1));

    let ctxs = contexts(&start, &corpus);
    let mut replay = start.clone();
    for c in &report.candidates {
        assert!(c.selected);
        // The logged candidate is the greedy decode of the current parameters.
        let top = &simdsl::policy::beam_search(&replay, &ctxs[&c.example], &cfg.beam())[0];
        assert_eq!(top.sequence(), c.ids);
        replay.reinforce_update(
            &[WeightedSequence { context: &ctxs[&c.example], tokens: &c.ids, weight: c.q }],
            cfg.learning_rate,
        );
    }
    assert_eq!(replay.weights(), model.weights());
}

#[test]
fn bleu_only_rewards_match_gamma_one() {
    let corpus = generate_corpus(16, 6);
    let start = pretrained(&corpus, 2);
    let combined = HarnessConfig { gamma: 1.0, ..small_config() };
    let syntactic = HarnessConfig { reward_source: RewardSource::SyntacticOnly, gamma: 0.3, ..combined.clone() };
    let (mut a, mut b) = (start.clone(), start);
    let ra = reinforce_train(&mut a, &corpus, &combined).unwrap();
    let rb = reinforce_train(&mut b, &corpus, &syntactic).unwrap();
    assert_eq!(a.weights(), b.weights());
    let strip = |r: &simdsl::harness::TrainingReport| -> Vec<(u64, u64)> {
        r.records.iter().map(|x| (x.loss.to_bits(), x.mean_q.to_bits())).collect()
    };
    assert_eq!(strip(&ra), strip(&rb));
}

#[test]
fn training_is_independent_of_thread_count() {
    let corpus = generate_corpus(16, 2);
    let start = pretrained(&corpus, 2);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let mut m = start.clone();
        pool.install(|| reinforce_train(&mut m, &corpus, &small_config())).unwrap();
        m
    };
    assert_eq!(run(1).weights(), run(4).weights());
}

/// Pre-trains on `example` alone until its reference is among the beam
/// candidates, then returns the policy.
fn reachable_start(corpus: &[QAExample], example: &QAExample, cfg: &HarnessConfig) -> LogLinearPolicy {
    let mut model = fresh_policy(corpus);
    let ctx = model.vocab().encode_context(&example.context, &example.question);
    let (target, _) = model.vocab().encode_program(&ctx, &example.reference_program).unwrap();
    let one = std::slice::from_ref(example);
    for _ in 0..20 {
        let mle = MleConfig { epochs: 1, batch_size: 1, ..MleConfig::default() };
        simdsl::harness::pretrain(&mut model, one, &mle).unwrap();
        if simdsl::policy::beam_search(&model, &ctx, &cfg.beam()).iter().any(|c| c.sequence() == target) {
            return model;
        }
    }
    panic!("reference of {} never entered the beam", example.id);
}

#[test]
fn mean_reward_rises_on_a_toy_example() {
    let mut rising = 0;
    for seed in 0..5 {
        let corpus = generate_corpus(20, seed);
        let example = &corpus[seed as usize];
        let cfg = HarnessConfig { top_s: 1, batch_size: 1, epochs: 5, seed, ..small_config() };
        let mut model = reachable_start(&corpus, example, &cfg);
        let q = reinforce_train(&mut model, std::slice::from_ref(example), &cfg).unwrap().mean_q_by_epoch();
        if q.windows(2).all(|w| w[1] >= w[0]) {
            rising += 1;
        }
    }
    assert!(rising >= 4, "mean Q non-decreasing in only {rising} of 5 seeds");
}

#[test]
fn sweep_emits_one_row_per_gamma() {
    let corpus = generate_corpus(16, 8);
    let (train, test): (Vec<_>, Vec<_>) =
        corpus.into_iter().partition(|e| e.split == simdsl::dataset::Split::Train);
    let start = pretrained(&train, 2);
    let cfg = HarnessConfig { epochs: 1, ..small_config() };
    let sweep = gamma_sweep(&start, &train, &test, &[0.0, 0.5, 1.0], &cfg, EvalMode::Exact).unwrap();
    let gammas: Vec<f64> = sweep.rows.iter().map(|r| r.gamma).collect();
    assert_eq!(gammas, vec![0.0, 0.5, 1.0]);
    assert!(sweep.rows.iter().all(|r| (0.0..=1.0).contains(&r.accuracy) && (0.0..=1.0).contains(&r.final_mean_q)));
    // Same checkpoint and seed: a repeated row is identical.
    let again = gamma_sweep(&start, &train, &test, &[0.5], &cfg, EvalMode::Exact).unwrap();
    assert_eq!(again.rows[0], sweep.rows[1]);
    assert_eq!(again.baseline_accuracy, sweep.baseline_accuracy);
}
