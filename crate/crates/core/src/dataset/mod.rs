//! Question-answering examples: loading and validation, multiple-choice
//! distractors, complexity strata, and a template-generated corpus.

mod complexity;
mod distractors;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::parse_source;
use crate::interp::{answer_of, execute, ExecutionStatus, Limits};

pub use complexity::{classify_complexity, classify_program, Complexity, ComplexityLabel};
pub use distractors::{generate_distractors, options_with_gold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetVersion {
    V1,
    V2,
}

impl fmt::Display for DatasetVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetVersion::V1 => "v1",
            DatasetVersion::V2 => "v2",
        })
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub version: DatasetVersion,
    pub split: Split,
    pub context: String,
    pub question: String,
    #[serde(rename = "answer")]
    pub gold_answer: f64,
    pub options: Vec<f64>,
    #[serde(rename = "program")]
    pub reference_program: String,
}

/// Relative tolerance for a reference program reproducing its gold answer.
pub const GOLD_TOLERANCE: f64 = 1e-6;

pub fn answers_agree(value: f64, gold: f64) -> bool {
    (value - gold).abs() <= GOLD_TOLERANCE * gold.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidExample {
    #[error("expected 4 options, found {0}")]
    OptionCount(usize),
    #[error("gold answer is not among the options")]
    GoldNotInOptions,
    #[error("options are not pairwise distinct")]
    DuplicateOptions,
    #[error("non-finite number in answer or options")]
    NonFinite,
    #[error("reference program does not parse: {0}")]
    Unparseable(String),
    #[error("reference program does not return a value: {0}")]
    NoAnswer(String),
    #[error("reference program returns {got} but the gold answer is {gold}")]
    AnswerMismatch { got: f64, gold: f64 },
}

impl QAExample {
    /// Checks every example invariant, including that the reference program
    /// executes and reproduces the gold answer.
    pub fn validate(&self, limits: Limits) -> Result<(), InvalidExample> {
        if !self.gold_answer.is_finite() || self.options.iter().any(|o| !o.is_finite()) {
            return Err(InvalidExample::NonFinite);
        }
        if self.options.len() != 4 {
            return Err(InvalidExample::OptionCount(self.options.len()));
        }
        if !self.options.contains(&self.gold_answer) {
            return Err(InvalidExample::GoldNotInOptions);
        }
        for (i, a) in self.options.iter().enumerate() {
            if self.options[i + 1..].contains(a) {
                return Err(InvalidExample::DuplicateOptions);
            }
        }
        let program = parse_source(&self.reference_program).map_err(|d| {
            InvalidExample::Unparseable(d.first().map(|d| d.message.clone()).unwrap_or_default())
        })?;
        let outcome = execute(&program, limits);
        let got = match (&outcome.status, answer_of(&outcome)) {
            (_, Some(v)) => v,
            (ExecutionStatus::RuntimeError(e), None) => return Err(InvalidExample::NoAnswer(e.to_string())),
            (_, None) => return Err(InvalidExample::NoAnswer("no return executed".into())),
        };
        if !answers_agree(got, self.gold_answer) {
            return Err(InvalidExample::AnswerMismatch { got, gold: self.gold_answer });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuarantinedLine {
    /// 1-based line number in the input.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub quarantined: Vec<QuarantinedLine>,
    pub by_version: BTreeMap<String, usize>,
    pub by_split: BTreeMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(Vec<QAExample>, LoadReport), DatasetError> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}

/// Parses JSON-lines, validating each example. Invalid lines are quarantined
/// into the report rather than failing the load.
pub fn read_dataset(reader: impl BufRead) -> Result<(Vec<QAExample>, LoadReport), DatasetError> {
    read_dataset_with(reader, |line| {
        serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))
    })
}

/// Like [`read_dataset`] with a custom per-line converter, for importing
/// files in another schema. Converter errors are quarantined verbatim.
pub fn read_dataset_with(
    reader: impl BufRead,
    convert: impl Fn(&str) -> Result<QAExample, String>,
) -> Result<(Vec<QAExample>, LoadReport), DatasetError> {
    let mut examples = Vec::new();
    let mut report = LoadReport::default();
    let mut seen_ids = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut quarantine = |reason: String| report.quarantined.push(QuarantinedLine { line: line_no, reason });
        let example = match convert(&line) {
            Ok(e) => e,
            Err(reason) => {
                quarantine(reason);
                continue;
            }
        };
        if let Err(e) = example.validate(Limits::default()) {
            quarantine(e.to_string());
            continue;
        }
        if !seen_ids.insert(example.id.clone()) {
            quarantine(format!("duplicate id `{}`", example.id));
            continue;
        }
        *report.by_version.entry(example.version.to_string()).or_default() += 1;
        *report.by_split.entry(example.split.to_string()).or_default() += 1;
        examples.push(example);
    }
    report.loaded = examples.len();
    Ok((examples, report))
}

pub fn write_dataset(examples: &[QAExample], mut out: impl std::io::Write) -> std::io::Result<()> {
    for e in examples {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn split_examples(examples: &[QAExample], split: Split) -> Vec<QAExample> {
    examples.iter().filter(|e| e.split == split).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(program: &str, answer: f64) -> QAExample {
        QAExample {
            id: "ex1".into(),
            version: DatasetVersion::V1,
            split: Split::Train,
            context: "Every minute 2 grams are added to 4 grams.".into(),
            question: "How many grams after 3 minutes?".into(),
            gold_answer: answer,
            options: vec![answer, answer + 1.0, answer + 2.0, answer - 1.0],
            reference_program: program.into(),
        }
    }

    fn jsonl(examples: &[QAExample]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_dataset(examples, &mut buf).unwrap();
        buf
    }

    const PROG: &str = "func simulation() { t = 4; repeat(3) { t = t + 2; } return t; }";

    #[test]
    fn single_valid_example() {
        let (ex, report) = read_dataset(&jsonl(&[example(PROG, 10.0)])[..]).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(report.loaded, 1);
        assert!(report.quarantined.is_empty());
        assert_eq!(report.by_version["v1"], 1);
    }

    #[test]
    fn mismatched_gold_is_quarantined() {
        let prog = "func simulation() { return 9; }";
        let (ex, report) = read_dataset(&jsonl(&[example(prog, 10.0)])[..]).unwrap();
        assert!(ex.is_empty());
        assert_eq!(report.quarantined.len(), 1);
        assert_eq!(report.quarantined[0].line, 1);
        assert!(report.quarantined[0].reason.contains("returns 9 but the gold answer is 10"));
    }

    #[test]
    fn malformed_and_invalid_lines() {
        let mut buf = jsonl(&[example(PROG, 10.0)]);
        buf.extend_from_slice(b"{not json}\n\n");
        let mut bad_opts = example(PROG, 10.0);
        bad_opts.id = "ex2".into();
        bad_opts.options = vec![10.0, 10.0, 11.0, 12.0];
        buf.extend(jsonl(&[bad_opts]));
        buf.extend(jsonl(&[example(PROG, 10.0)]));
        let (ex, report) = read_dataset(&buf[..]).unwrap();
        assert_eq!(ex.len(), 1);
        let reasons: Vec<_> = report.quarantined.iter().map(|q| (q.line, q.reason.as_str())).collect();
        assert_eq!(reasons.len(), 3);
        assert!(reasons[0].1.starts_with("malformed JSON"));
        assert_eq!(reasons[1], (4, "options are not pairwise distinct"));
        assert!(reasons[2].1.contains("duplicate id"));
    }

    #[test]
    fn validation_errors() {
        let lim = Limits::default();
        let mut e = example(PROG, 10.0);
        e.options.pop();
        assert_eq!(e.validate(lim), Err(InvalidExample::OptionCount(3)));
        let mut e = example(PROG, 10.0);
        e.options[0] = 99.0;
        assert_eq!(e.validate(lim), Err(InvalidExample::GoldNotInOptions));
        let e = example("func simulation() { x = 1 / 0; return x; }", 1.0);
        assert!(matches!(e.validate(lim), Err(InvalidExample::NoAnswer(_))));
        let e = example("func simulation() { repeat(n) { x = 1; } }", 1.0);
        assert!(matches!(e.validate(lim), Err(InvalidExample::Unparseable(_))));
    }

    #[test]
    fn gold_tolerance_is_relative() {
        assert!(answers_agree(1_000_000.0005, 1_000_000.0));
        assert!(!answers_agree(1.00001, 1.0));
        assert!(answers_agree(1e-7, 0.0));
    }
}
