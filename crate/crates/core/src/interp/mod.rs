//! Tree-walking interpreter that records the memory state after every
//! executed instruction.
//!
//! An instruction is a dynamically executed statement that can change memory:
//! each assignment (once per loop iteration) and the final `return`, which
//! binds [`RETURN_SLOT`]. Condition tests and loop bookkeeping leave no record.

mod value;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{Expr, ExprKind, Program, Rhs, Span, Stmt, StmtKind};

pub use value::{State, Value, RETURN_SLOT};

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Cap on executed statements of every kind (a `repeat` counts once per
    /// execution of the statement, its body statements count per iteration).
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_steps: DEFAULT_MAX_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum RuntimeErrorKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    IntegerOverflow,
    #[error("read of undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("step limit exceeded")]
    StepLimitExceeded,
    #[error("arithmetic produced a non-finite real")]
    NonFiniteResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{kind} at step {step}")]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    /// Index the next instruction record would have had.
    pub step: usize,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionKind {
    Assign,
    Return,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstructionRecord {
    #[serde(rename = "t")]
    pub step: usize,
    pub kind: InstructionKind,
    #[serde(skip)]
    pub stmt_span: Span,
    pub state: State,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ExecutionTrace {
    pub records: Vec<InstructionRecord>,
}

impl ExecutionTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.records.iter().map(|r| &r.state)
    }

    /// JSON array of `{"t", "kind", "state"}` objects.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace values are finite")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecutionStatus {
    Returned(Value),
    NoReturn,
    RuntimeError(RuntimeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub status: ExecutionStatus,
    pub trace: ExecutionTrace,
    /// Statements executed, including `if` tests and `repeat` headers.
    pub steps_executed: u64,
}

impl ExecutionOutcome {
    pub fn returned(&self) -> Option<Value> {
        match self.status {
            ExecutionStatus::Returned(v) => Some(v),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<&RuntimeError> {
        match &self.status {
            ExecutionStatus::RuntimeError(e) => Some(e),
            _ => None,
        }
    }
}

pub fn execute(program: &Program, limits: Limits) -> ExecutionOutcome {
    let mut m = Machine {
        state: State::new(),
        records: Vec::new(),
        steps: 0,
        limits,
    };
    let status = match m.block(&program.body) {
        Ok(Flow::Next) => ExecutionStatus::NoReturn,
        Ok(Flow::Return(v)) => ExecutionStatus::Returned(v),
        Err((kind, span)) => ExecutionStatus::RuntimeError(RuntimeError {
            kind,
            step: m.records.len(),
            span,
        }),
    };
    ExecutionOutcome {
        status,
        trace: ExecutionTrace { records: m.records },
        steps_executed: m.steps,
    }
}

/// State snapshots of the trace, in order. Runtime errors yield the prefix
/// completed before the fault.
pub fn execute_and_get_state(program: &Program, limits: Limits) -> Vec<State> {
    execute(program, limits).trace.records.into_iter().map(|r| r.state).collect()
}

/// Returned value widened to `f64`; `None` without a return.
pub fn answer_of(outcome: &ExecutionOutcome) -> Option<f64> {
    outcome.returned().map(Value::as_f64)
}

/// Number of executed assignments (the return is not counted).
pub fn count_state_changes(program: &Program, limits: Limits) -> usize {
    execute(program, limits)
        .trace
        .records
        .iter()
        .filter(|r| r.kind == InstructionKind::Assign)
        .count()
}

enum Flow {
    Next,
    Return(Value),
}

type Fault = (RuntimeErrorKind, Span);

struct Machine {
    state: State,
    records: Vec<InstructionRecord>,
    steps: u64,
    limits: Limits,
}

impl Machine {
    fn tick(&mut self, span: Span) -> Result<(), Fault> {
        if self.steps >= self.limits.max_steps {
            return Err((RuntimeErrorKind::StepLimitExceeded, span));
        }
        self.steps += 1;
        Ok(())
    }

    fn record(&mut self, kind: InstructionKind, span: Span) {
        self.records.push(InstructionRecord {
            step: self.records.len(),
            kind,
            stmt_span: span,
            state: self.state.clone(),
        });
    }

    fn block(&mut self, block: &[Stmt]) -> Result<Flow, Fault> {
        for stmt in block {
            if let Flow::Return(v) = self.stmt(stmt)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, Fault> {
        match &stmt.kind {
            StmtKind::Repeat { count, body } => {
                self.tick(stmt.span)?;
                for _ in 0..count.value {
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Next)
            }
            StmtKind::If { cond, body } => {
                self.tick(stmt.span)?;
                let lhs = self.read(&cond.lhs.name, cond.lhs.span)?;
                let rhs = self.eval(&cond.rhs)?;
                if lhs.compare(cond.op, rhs) {
                    self.block(body)
                } else {
                    Ok(Flow::Next)
                }
            }
            StmtKind::Return(e) => {
                self.tick(stmt.span)?;
                let v = self.eval(e)?;
                self.state.set(RETURN_SLOT, v);
                self.record(InstructionKind::Return, stmt.span);
                Ok(Flow::Return(v))
            }
            StmtKind::Assign { target, rhs } => {
                self.tick(stmt.span)?;
                let v = match rhs {
                    Rhs::Atom(e) => self.eval(e)?,
                    Rhs::Binary { lhs, op, rhs } => {
                        let a = self.eval(lhs)?;
                        let b = self.eval(rhs)?;
                        a.arith(*op, b).map_err(|k| (k, stmt.span))?
                    }
                };
                self.state.set(&target.name, v);
                self.record(InstructionKind::Assign, stmt.span);
                Ok(Flow::Next)
            }
        }
    }

    fn read(&self, name: &str, span: Span) -> Result<Value, Fault> {
        self.state
            .get(name)
            .ok_or_else(|| (RuntimeErrorKind::UndefinedVariable(name.to_owned()), span))
    }

    fn eval(&self, e: &Expr) -> Result<Value, Fault> {
        match &e.kind {
            ExprKind::Var(name) => self.read(name, e.span),
            ExprKind::Int(lit) => Ok(Value::Int(lit.value)),
            ExprKind::Real(lit) => Ok(Value::Real(lit.value)),
        }
    }
}
