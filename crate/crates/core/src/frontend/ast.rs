//! Syntax tree for validated programs.
//!
//! Every node carries the span of the source text it was parsed from.
//! Generated trees (see [`crate::generate`]) use [`Span::default`].
//! [`Program::without_spans`] gives the structural form used for
//! round-trip comparisons.

use super::token::{ArithOp, CmpOp, Span};

pub const MAX_PROGRAM_TOKENS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Repeat { count: IntLit, body: Vec<Stmt> },
    If { cond: Condition, body: Vec<Stmt> },
    Return(Expr),
    Assign { target: Ident, rhs: Rhs },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub lhs: Ident,
    pub op: CmpOp,
    pub rhs: Expr,
    pub span: Span,
}

/// Right-hand side of an assignment: a single atom or exactly one binary operation.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Atom(Expr),
    Binary { lhs: Expr, op: ArithOp, rhs: Expr },
}

impl Rhs {
    pub fn span(&self) -> Span {
        match self {
            Rhs::Atom(e) => e.span,
            Rhs::Binary { lhs, rhs, .. } => lhs.span.to(rhs.span),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Var(String),
    Int(IntLit),
    Real(RealLit),
}

/// Integer literal, optionally negated. `digits` is the source lexeme and
/// `value` the signed value it denotes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntLit {
    pub negated: bool,
    pub digits: String,
    pub value: i64,
}

impl IntLit {
    pub fn from_value(value: i64) -> Self {
        Self {
            negated: value < 0,
            digits: value.unsigned_abs().to_string(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealLit {
    pub negated: bool,
    pub digits: String,
    pub value: f64,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr { kind: ExprKind::Var(name.into()), span: Span::default() }
    }

    pub fn int(value: i64) -> Self {
        Expr { kind: ExprKind::Int(IntLit::from_value(value)), span: Span::default() }
    }
}

impl Program {
    /// Copy of the tree with every span reset, for structural comparison.
    pub fn without_spans(&self) -> Program {
        Program {
            body: strip_block(&self.body),
            span: Span::default(),
        }
    }

    /// Pre-order walk over every statement, including nested ones.
    pub fn walk(&self, f: &mut impl FnMut(&Stmt)) {
        walk_block(&self.body, f);
    }

    pub fn count_statements(&self, pred: impl Fn(&StmtKind) -> bool) -> usize {
        let mut n = 0;
        self.walk(&mut |s| {
            if pred(&s.kind) {
                n += 1;
            }
        });
        n
    }
}

fn walk_block(block: &[Stmt], f: &mut impl FnMut(&Stmt)) {
    for stmt in block {
        f(stmt);
        match &stmt.kind {
            StmtKind::Repeat { body, .. } | StmtKind::If { body, .. } => walk_block(body, f),
            StmtKind::Return(_) | StmtKind::Assign { .. } => {}
        }
    }
}

fn strip_block(block: &[Stmt]) -> Vec<Stmt> {
    block.iter().map(strip_stmt).collect()
}

fn strip_stmt(stmt: &Stmt) -> Stmt {
    let kind = match &stmt.kind {
        StmtKind::Repeat { count, body } => StmtKind::Repeat {
            count: count.clone(),
            body: strip_block(body),
        },
        StmtKind::If { cond, body } => StmtKind::If {
            cond: Condition {
                lhs: strip_ident(&cond.lhs),
                op: cond.op,
                rhs: strip_expr(&cond.rhs),
                span: Span::default(),
            },
            body: strip_block(body),
        },
        StmtKind::Return(e) => StmtKind::Return(strip_expr(e)),
        StmtKind::Assign { target, rhs } => StmtKind::Assign {
            target: strip_ident(target),
            rhs: match rhs {
                Rhs::Atom(e) => Rhs::Atom(strip_expr(e)),
                Rhs::Binary { lhs, op, rhs } => Rhs::Binary {
                    lhs: strip_expr(lhs),
                    op: *op,
                    rhs: strip_expr(rhs),
                },
            },
        },
    };
    Stmt { kind, span: Span::default() }
}

fn strip_ident(id: &Ident) -> Ident {
    Ident { name: id.name.clone(), span: Span::default() }
}

fn strip_expr(e: &Expr) -> Expr {
    Expr { kind: e.kind.clone(), span: Span::default() }
}
