//! Lexing, parsing, validation and canonical printing of `.sdsl` programs.

mod ast;
mod diagnostic;
mod lexer;
mod parser;
mod printer;
mod token;

pub use ast::{
    Condition, Expr, ExprKind, Ident, IntLit, Program, RealLit, Rhs, Stmt, StmtKind,
    MAX_PROGRAM_TOKENS,
};
pub use diagnostic::{line_col, Diagnostic, Severity};
pub use lexer::{program_tokens, tokenize, LexError};
pub use parser::{parse, parse_source, parse_with, ParseOptions};
pub use printer::pretty_print;
pub use token::{ArithOp, CmpOp, Keyword, Span, Token, TokenKind};
