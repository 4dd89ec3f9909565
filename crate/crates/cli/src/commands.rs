use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use simdsl::dataset::{classify_program, load_dataset, split_examples, Complexity, QAExample, Split};
use simdsl::frontend::{parse_source, pretty_print, Program};
use simdsl::harness::{
    evaluate_accuracy, gamma_sweep, reinforce_train, EvalMode, HarnessConfig, RewardSource,
};
use simdsl::interp::{execute, ExecutionStatus, Limits, DEFAULT_MAX_STEPS};
use simdsl::policy::{FeatureConfig, LogLinearPolicy, MleConfig, VocabConfig, Vocabulary};
use simdsl::similarity::{combined_reward, RewardConfig, RewardError};

use crate::{Failure, Format, Mode, SplitArg, TrainArgs};

const MAX_STEPS_ENV: &str = "SIMDSL_MAX_STEPS";

/// `--max-steps`, else `SIMDSL_MAX_STEPS`, else `default`.
fn max_steps(flag: Option<u64>, default: u64) -> Result<u64, Failure> {
    let steps = match flag {
        Some(n) => n,
        None => match std::env::var(MAX_STEPS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Input(format!("{MAX_STEPS_ENV}={v:?} is not a step count")))?,
            Err(std::env::VarError::NotPresent) => default,
            Err(e) => return Err(Failure::Input(format!("{MAX_STEPS_ENV}: {e}"))),
        },
    };
    if steps == 0 {
        return Err(Failure::Input("step limit must be at least 1".into()));
    }
    Ok(steps)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_file(path: &Path) -> Result<(String, Program), Failure> {
    let source = read(path)?;
    match parse_source(&source) {
        Ok(p) => Ok((source, p)),
        Err(diags) => {
            let name = path.display().to_string();
            let rendered: Vec<String> = diags.iter().map(|d| d.render(&name, &source)).collect();
            Err(Failure::Input(rendered.join("\n")))
        }
    }
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Internal(format!("cannot write output: {e}")))
}

fn emit_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
    emit(&text)
}

pub fn check(file: &Path, fmt: Format) -> Result<(), Failure> {
    let source = read(file)?;
    match parse_source(&source) {
        Ok(program) => {
            let canonical = pretty_print(&program);
            match fmt {
                Format::Text => emit(canonical.trim_end()),
                Format::Json => emit_json(&json!({ "ok": true, "canonical": canonical })),
            }
        }
        Err(diags) => {
            let name = file.display().to_string();
            if fmt == Format::Json {
                let list: Vec<_> = diags
                    .iter()
                    .map(|d| {
                        let (line, col) = simdsl::frontend::line_col(&source, d.span.start);
                        json!({ "line": line, "col": col, "message": d.message })
                    })
                    .collect();
                emit_json(&json!({ "ok": false, "diagnostics": list }))?;
            }
            let rendered: Vec<String> = diags.iter().map(|d| d.render(&name, &source)).collect();
            Err(Failure::Input(rendered.join("\n")))
        }
    }
}

pub fn run(file: &Path, with_trace: bool, steps: Option<u64>, fmt: Format) -> Result<(), Failure> {
    let (_, program) = parse_file(file)?;
    let outcome = execute(&program, Limits { max_steps: max_steps(steps, DEFAULT_MAX_STEPS)? });
    if fmt == Format::Json {
        let mut body = json!({
            "answer": outcome.returned(),
            "steps": outcome.steps_executed,
            "error": outcome.error().map(|e| e.to_string()),
        });
        if with_trace {
            body["trace"] = serde_json::to_value(&outcome.trace).map_err(|e| Failure::Internal(e.to_string()))?;
        }
        emit_json(&body)?;
    } else {
        if let Some(v) = outcome.returned() {
            emit(&v.to_string())?;
        }
        if with_trace {
            emit(&outcome.trace.to_json())?;
        }
    }
    match outcome.status {
        ExecutionStatus::Returned(_) => Ok(()),
        ExecutionStatus::NoReturn => {
            eprintln!("simdsl: program ends without returning");
            Ok(())
        }
        ExecutionStatus::RuntimeError(e) => Err(Failure::Runtime(format!("runtime error: {e}"))),
    }
}

pub fn trace(file: &Path, steps: Option<u64>, fmt: Format) -> Result<(), Failure> {
    let (_, program) = parse_file(file)?;
    let outcome = execute(&program, Limits { max_steps: max_steps(steps, DEFAULT_MAX_STEPS)? });
    match fmt {
        Format::Json => emit(&outcome.trace.to_json())?,
        Format::Text => {
            for r in &outcome.trace.records {
                let state: Vec<String> = r.state.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(str::to_owned));
                emit(&format!("{:>4}  {:<6}  {}", r.step, kind.unwrap_or_default(), state.join(" ")))?;
            }
        }
    }
    match outcome.status {
        ExecutionStatus::RuntimeError(e) => Err(Failure::Runtime(format!("runtime error: {e}"))),
        _ => Ok(()),
    }
}

pub fn score(reference: &Path, predicted: &Path, gamma: f64, steps: Option<u64>, fmt: Format) -> Result<(), Failure> {
    let cfg = RewardConfig { gamma, max_steps: max_steps(steps, DEFAULT_MAX_STEPS)?, ..RewardConfig::default() };
    let reference_src = read(reference)?;
    let predicted_src = read(predicted)?;
    let scores = combined_reward(&reference_src, &predicted_src, &cfg).map_err(|e| match e {
        RewardError::InvalidReference(diags) => {
            let name = reference.display().to_string();
            let rendered: Vec<String> = diags.iter().map(|d| d.render(&name, &reference_src)).collect();
            Failure::Input(rendered.join("\n"))
        }
        RewardError::Config(c) => Failure::Input(c.to_string()),
    })?;
    match fmt {
        Format::Json => emit_json(&scores),
        Format::Text => emit(&format!(
            "q            {:.4}\nq_syntactic  {:.4}\nq_semantic   {:.4}\ngamma        {}\nmatched      {}/{}{}",
            scores.q_combined,
            scores.q_syntactic,
            scores.q_semantic,
            scores.gamma,
            scores.matched_states,
            scores.t_max,
            if scores.predicted_parseable { "" } else { "\n(predicted program does not parse)" },
        )),
    }
}

fn load(path: &Path) -> Result<Vec<QAExample>, Failure> {
    let (examples, report) = load_dataset(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    for q in &report.quarantined {
        eprintln!("simdsl: {}:{}: skipped: {}", path.display(), q.line, q.reason);
    }
    if examples.is_empty() {
        return Err(Failure::Input(format!("{}: no usable examples", path.display())));
    }
    Ok(examples)
}

fn harness_config(args: &TrainArgs) -> Result<HarnessConfig, Failure> {
    let defaults = HarnessConfig::default();
    let cfg = HarnessConfig {
        n_candidates: args.n,
        top_s: args.s,
        batch_size: args.batch,
        gamma: args.gamma,
        beam_width: args.beam_width,
        learning_rate: args.lr,
        epochs: args.epochs,
        max_steps: max_steps(args.max_steps, defaults.max_steps)?,
        seed: args.seed,
        reward_source: if args.syntactic_only { RewardSource::SyntacticOnly } else { RewardSource::Combined },
        ..defaults
    };
    cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
    if !(args.mle_lr > 0.0) {
        return Err(Failure::Input("--mle-lr must be positive".into()));
    }
    Ok(cfg)
}

/// The `--init` checkpoint, or a fresh policy over the training split's
/// vocabulary after MLE pre-training.
fn starting_policy(args: &TrainArgs, train: &[QAExample]) -> Result<LogLinearPolicy, Failure> {
    if let Some(path) = &args.init {
        return LogLinearPolicy::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())));
    }
    let vocab = Vocabulary::build(
        train.iter().map(|e| (e.context.as_str(), e.question.as_str(), e.reference_program.as_str())),
        VocabConfig::default(),
    );
    let mut model = LogLinearPolicy::new(vocab, FeatureConfig::default());
    let mle = MleConfig { epochs: args.mle_epochs, learning_rate: args.mle_lr, seed: args.seed, ..MleConfig::default() };
    simdsl::harness::pretrain(&mut model, train, &mle).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(model)
}

fn training_split(examples: &[QAExample]) -> Result<Vec<QAExample>, Failure> {
    let train = split_examples(examples, Split::Train);
    if train.is_empty() {
        return Err(Failure::Input("dataset has no train examples".into()));
    }
    Ok(train)
}

pub fn train(args: &TrainArgs, checkpoint_out: Option<&Path>, log: Option<&Path>, fmt: Format) -> Result<(), Failure> {
    let cfg = harness_config(args)?;
    let log_file = log
        .map(|p| File::create(p).map(BufWriter::new).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))))
        .transpose()?;
    let examples = load(&args.data)?;
    let train = training_split(&examples)?;
    let mut model = starting_policy(args, &train)?;
    let report = reinforce_train(&mut model, &train, &cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    if let Some(mut w) = log_file {
        for r in &report.records {
            serde_json::to_writer(&mut w, r)
                .map_err(std::io::Error::from)
                .and_then(|_| writeln!(w))
                .map_err(|e| Failure::Internal(format!("cannot write log: {e}")))?;
        }
        w.flush().map_err(|e| Failure::Internal(format!("cannot write log: {e}")))?;
    }
    if let Some(path) = checkpoint_out {
        model.save(path).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
    }
    let mean_q = report.mean_q_by_epoch();
    match fmt {
        Format::Json => emit_json(&json!({
            "examples": train.len(),
            "updates": report.records.len(),
            "mean_q_by_epoch": mean_q,
            "checkpoint": checkpoint_out.map(|p| p.display().to_string()),
        })),
        Format::Text => {
            emit(&format!("trained on {} examples, {} updates", train.len(), report.records.len()))?;
            for (i, q) in mean_q.iter().enumerate() {
                emit(&format!("epoch {:>2}  mean Q {q:.4}", i + 1))?;
            }
            Ok(())
        }
    }
}

fn eval_mode(mode: Mode) -> EvalMode {
    match mode {
        Mode::Exact => EvalMode::Exact,
        Mode::MultipleChoice => EvalMode::MultipleChoice,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    data: &Path,
    checkpoint: &Path,
    mode: Mode,
    split: SplitArg,
    n: usize,
    beam_width: usize,
    steps: Option<u64>,
    fmt: Format,
) -> Result<(), Failure> {
    let defaults = HarnessConfig::default();
    let cfg = HarnessConfig {
        n_candidates: n,
        top_s: 1,
        batch_size: 1,
        beam_width,
        max_steps: max_steps(steps, defaults.max_steps)?,
        ..defaults
    };
    cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let model = LogLinearPolicy::load(checkpoint).map_err(|e| Failure::Input(format!("{}: {e}", checkpoint.display())))?;
    let examples = load(data)?;
    let examples = match split {
        SplitArg::Train => split_examples(&examples, Split::Train),
        SplitArg::Test => split_examples(&examples, Split::Test),
        SplitArg::All => examples,
    };
    let report = evaluate_accuracy(&model, &examples, &cfg, eval_mode(mode));
    match fmt {
        Format::Json => emit_json(&report),
        Format::Text => emit(&format!("accuracy {:.4} ({}/{})", report.accuracy, report.correct, report.total)),
    }
}

pub fn sweep(args: &TrainArgs, gammas: &[f64], mode: Mode, fmt: Format) -> Result<(), Failure> {
    let cfg = harness_config(args)?;
    for &g in gammas {
        HarnessConfig { gamma: g, ..cfg.clone() }.validate().map_err(|e| Failure::Input(e.to_string()))?;
    }
    if gammas.is_empty() {
        return Err(Failure::Input("--gammas is empty".into()));
    }
    let examples = load(&args.data)?;
    let train = training_split(&examples)?;
    let test = split_examples(&examples, Split::Test);
    if test.is_empty() {
        return Err(Failure::Input("dataset has no test examples".into()));
    }
    let model = starting_policy(args, &train)?;
    let report = gamma_sweep(&model, &train, &test, gammas, &cfg, eval_mode(mode)).map_err(|e| Failure::Runtime(e.to_string()))?;
    match fmt {
        Format::Json => emit_json(&report),
        Format::Text => {
            emit(&format!("baseline accuracy {:.4}", report.baseline_accuracy))?;
            emit("gamma   accuracy  final_mean_q")?;
            for r in &report.rows {
                emit(&format!("{:<6}  {:.4}    {:.4}", r.gamma, r.accuracy, r.final_mean_q))?;
            }
            Ok(())
        }
    }
}

fn class_name(c: Complexity) -> &'static str {
    match c {
        Complexity::Complex => "complex",
        Complexity::Simple => "simple",
        Complexity::Other => "other",
    }
}

pub fn classify(path: &Path, steps: Option<u64>, fmt: Format) -> Result<(), Failure> {
    let limits = Limits { max_steps: max_steps(steps, DEFAULT_MAX_STEPS)? };
    if path.extension().is_some_and(|e| e == "jsonl") {
        let examples = load(path)?;
        let mut rows = Vec::with_capacity(examples.len());
        for e in &examples {
            let program = parse_source(&e.reference_program)
                .map_err(|_| Failure::Internal(format!("example `{}` passed validation but does not parse", e.id)))?;
            rows.push((e.id.as_str(), classify_program(&program, limits)));
        }
        let count = |c: Complexity| rows.iter().filter(|(_, l)| l.class == c).count();
        let counts = json!({
            "complex": count(Complexity::Complex),
            "simple": count(Complexity::Simple),
            "other": count(Complexity::Other),
        });
        match fmt {
            Format::Json => {
                let labels: Vec<_> = rows.iter().map(|(id, l)| json!({ "id": id, "label": l })).collect();
                emit_json(&json!({ "examples": labels, "counts": counts }))
            }
            Format::Text => {
                for (id, l) in &rows {
                    emit(&format!("{id}\t{}", class_name(l.class)))?;
                }
                emit(&format!("complex {}  simple {}  other {}", counts["complex"], counts["simple"], counts["other"]))
            }
        }
    } else {
        let (_, program) = parse_file(path)?;
        let label = classify_program(&program, limits);
        match fmt {
            Format::Json => emit_json(&label),
            Format::Text => emit(&format!(
                "{}  (if {}, repeat {}, state changes {})",
                class_name(label.class),
                label.if_branches,
                label.loop_branches,
                label.state_changes
            )),
        }
    }
}
