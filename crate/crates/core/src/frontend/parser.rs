//! Recursive-descent parser with panic-mode recovery.

use super::ast::{
    Condition, Expr, ExprKind, Ident, IntLit, Program, RealLit, Rhs, Stmt, StmtKind,
    MAX_PROGRAM_TOKENS,
};
use super::diagnostic::Diagnostic;
use super::lexer::tokenize;
use super::token::{ArithOp, Keyword, Span, Token, TokenKind};

// Grammar:
//
// program -> 'func' 'simulation' '(' ')' block EOF
// block   -> '{' stmt+ '}'
// stmt    -> 'repeat' '(' INT ')' block
//          | 'if' '(' cond ')' block
//          | 'return' atom ';'
//          | IDENT '=' atom (arith_op atom)? ';'
// cond    -> IDENT cmp_op atom
// atom    -> IDENT | INT | '-'INT | REAL | '-'REAL      ; no space after '-'

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub max_tokens: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { max_tokens: MAX_PROGRAM_TOKENS }
    }
}

pub fn parse(tokens: &[Token]) -> Result<Program, Vec<Diagnostic>> {
    parse_with(tokens, ParseOptions::default())
}

pub fn parse_with(tokens: &[Token], opts: ParseOptions) -> Result<Program, Vec<Diagnostic>> {
    if tokens.len() > opts.max_tokens {
        let span = tokens[opts.max_tokens].span;
        return Err(vec![Diagnostic::error(
            format!("program exceeds the maximum length of {} tokens", opts.max_tokens),
            span,
        )]);
    }
    let mut p = Parser { tokens, pos: 0, diags: Vec::new() };
    let program = p.program();
    match program {
        Some(program) if p.diags.is_empty() => Ok(program),
        _ => {
            debug_assert!(!p.diags.is_empty());
            Err(p.diags)
        }
    }
}

/// Lex and parse in one step; lexing failures become a diagnostic.
pub fn parse_source(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let tokens = tokenize(source).map_err(|e| vec![Diagnostic::from(e)])?;
    if tokens.is_empty() {
        return Err(vec![Diagnostic::error("empty program: expected `func`", Span::new(0, 0))]);
    }
    parse(&tokens)
}

/// Marker for an error that has already been recorded as a diagnostic.
struct Reported;

type PResult<T> = Result<T, Reported>;

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn eof_span(&self) -> Span {
        let end = self.tokens.last().map_or(0, |t| t.span.end);
        Span::new(end, end)
    }

    fn current_span(&self) -> Span {
        self.peek().map_or_else(|| self.eof_span(), |t| t.span)
    }

    fn bump(&mut self) -> &'t Token {
        let tok = &self.tokens[self.pos];
        self.pos += 1;
        tok
    }

    fn error<T>(&mut self, message: impl Into<String>, span: Span) -> PResult<T> {
        self.diags.push(Diagnostic::error(message, span));
        Err(Reported)
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => format!("`{}`", t.lexeme),
            None => "end of input".to_owned(),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<&'t Token> {
        if self.peek_kind() == Some(kind) {
            Ok(self.bump())
        } else {
            let msg = format!("expected {kind}, found {}", self.found());
            self.error(msg, self.current_span())
        }
    }

    fn program(&mut self) -> Option<Program> {
        let header = (|| {
            let start = self.expect(TokenKind::Keyword(Keyword::Func))?.span;
            self.expect(TokenKind::Keyword(Keyword::Simulation))?;
            self.expect(TokenKind::LParen)?;
            if self.peek_kind() != Some(TokenKind::RParen) {
                let span = self.current_span();
                return self.error("`simulation` takes no parameters", span);
            }
            self.bump();
            Ok(start)
        })();
        let start = header.ok()?;
        let (body, block_span) = self.block().ok()?;
        if let Some(tok) = self.peek() {
            let span = tok.span;
            let _ = self.error::<()>(
                format!("unexpected `{}` after the end of `simulation`", tok.lexeme),
                span,
            );
            return None;
        }
        Some(Program { body, span: start.to(block_span) })
    }

    fn block(&mut self) -> PResult<(Vec<Stmt>, Span)> {
        let open = self.expect(TokenKind::LBrace)?.span;
        let mut stmts = Vec::new();
        let mut failed = false;
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => break,
                None => {
                    let span = self.eof_span();
                    return self.error("unclosed block: expected `}`", open.to(span));
                }
                Some(_) => match self.statement() {
                    Ok(s) => stmts.push(s),
                    Err(Reported) => {
                        failed = true;
                        self.synchronize();
                    }
                },
            }
        }
        let close = self.bump().span;
        let span = open.to(close);
        if failed {
            return Err(Reported);
        }
        if stmts.is_empty() {
            return self.error("block must contain at least one statement", span);
        }
        Ok((stmts, span))
    }

    /// Skip to just past the next `;`, or up to (not past) the next `}`.
    fn synchronize(&mut self) {
        let mut depth = 0usize;
        while let Some(kind) = self.peek_kind() {
            match kind {
                TokenKind::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace if depth == 0 => return,
                TokenKind::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        return;
                    }
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let tok = self.peek().expect("caller checked for a token");
        match tok.kind {
            TokenKind::Keyword(Keyword::Repeat) => self.repeat(),
            TokenKind::Keyword(Keyword::If) => self.if_stmt(),
            TokenKind::Keyword(Keyword::Return) => self.return_stmt(),
            TokenKind::Ident => self.assign(),
            _ => {
                let msg = format!("expected a statement, found `{}`", tok.lexeme);
                let span = tok.span;
                self.pos += 1;
                self.error(msg, span)
            }
        }
    }

    fn repeat(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        self.expect(TokenKind::LParen)?;
        let count = match self.peek() {
            Some(t) if t.kind == TokenKind::Int => {
                self.bump();
                let lit = self.int_literal(t, false)?;
                Some(lit)
            }
            _ => {
                let span = self.current_span();
                self.diags.push(Diagnostic::error(
                    format!(
                        "repeat count must be a non-negative integer literal, found {}",
                        self.found()
                    ),
                    span,
                ));
                // Recover inside the parentheses so the body is still checked.
                while !matches!(self.peek_kind(), None | Some(TokenKind::RParen | TokenKind::LBrace)) {
                    self.bump();
                }
                None
            }
        };
        self.expect(TokenKind::RParen)?;
        let (body, block_span) = self.block()?;
        let count = count.ok_or(Reported)?;
        Ok(Stmt { kind: StmtKind::Repeat { count, body }, span: start.to(block_span) })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        self.expect(TokenKind::LParen)?;
        let cond = self.condition();
        if cond.is_err() {
            while !matches!(self.peek_kind(), None | Some(TokenKind::RParen | TokenKind::LBrace)) {
                self.bump();
            }
        }
        self.expect(TokenKind::RParen)?;
        let (body, block_span) = self.block()?;
        let cond = cond?;
        Ok(Stmt { kind: StmtKind::If { cond, body }, span: start.to(block_span) })
    }

    fn condition(&mut self) -> PResult<Condition> {
        let lhs = match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.bump();
                Ident { name: t.lexeme.clone(), span: t.span }
            }
            Some(t) if matches!(t.kind, TokenKind::Int | TokenKind::Real | TokenKind::Arith(ArithOp::Sub)) => {
                let span = t.span;
                return self.error("condition left-hand side must be an identifier, not a literal", span);
            }
            _ => {
                let msg = format!("expected identifier in condition, found {}", self.found());
                return self.error(msg, self.current_span());
            }
        };
        let op = match self.peek_kind() {
            Some(TokenKind::Cmp(op)) => {
                self.bump();
                op
            }
            _ => {
                let msg = format!("expected comparison operator, found {}", self.found());
                return self.error(msg, self.current_span());
            }
        };
        let rhs = self.atom()?;
        let span = lhs.span.to(rhs.span);
        Ok(Condition { lhs, op, rhs, span })
    }

    fn return_stmt(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        let value = self.atom()?;
        if let Some(TokenKind::Arith(_)) = self.peek_kind() {
            let span = self.current_span();
            return self.error(
                "return takes a single identifier or literal; assign the computation to a variable first",
                span,
            );
        }
        let end = self.expect(TokenKind::Semi)?.span;
        Ok(Stmt { kind: StmtKind::Return(value), span: start.to(end) })
    }

    fn assign(&mut self) -> PResult<Stmt> {
        let tok = self.bump();
        let target = Ident { name: tok.lexeme.clone(), span: tok.span };
        self.expect(TokenKind::Assign)?;
        let first = self.atom()?;
        let rhs = match self.peek_kind() {
            Some(TokenKind::Arith(op)) => {
                self.bump();
                let second = self.atom()?;
                if let Some(TokenKind::Arith(_)) = self.peek_kind() {
                    let span = self.current_span();
                    return self.error("assignment allows at most one binary operator", span);
                }
                Rhs::Binary { lhs: first, op, rhs: second }
            }
            _ => Rhs::Atom(first),
        };
        let end = self.expect(TokenKind::Semi)?.span;
        Ok(Stmt { kind: StmtKind::Assign { target: target.clone(), rhs }, span: target.span.to(end) })
    }

    fn atom(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return self.error("expected an identifier or literal, found end of input", self.eof_span());
        };
        match tok.kind {
            TokenKind::Ident => {
                self.bump();
                Ok(Expr { kind: ExprKind::Var(tok.lexeme.clone()), span: tok.span })
            }
            TokenKind::Int => {
                self.bump();
                let lit = self.int_literal(tok, false)?;
                Ok(Expr { kind: ExprKind::Int(lit), span: tok.span })
            }
            TokenKind::Real => {
                self.bump();
                let lit = self.real_literal(tok, false)?;
                Ok(Expr { kind: ExprKind::Real(lit), span: tok.span })
            }
            TokenKind::Arith(ArithOp::Sub) => {
                self.bump();
                let minus = tok.span;
                match self.peek() {
                    Some(lit) if matches!(lit.kind, TokenKind::Int | TokenKind::Real) => {
                        if lit.span.start != minus.end {
                            return self.error("no space allowed between `-` and the literal", minus.to(lit.span));
                        }
                        self.bump();
                        let span = minus.to(lit.span);
                        let kind = if lit.kind == TokenKind::Int {
                            ExprKind::Int(self.int_literal(lit, true)?)
                        } else {
                            ExprKind::Real(self.real_literal(lit, true)?)
                        };
                        Ok(Expr { kind, span })
                    }
                    Some(t) if t.kind == TokenKind::Ident => {
                        self.error("negation applies only to numeric literals, not identifiers", minus.to(t.span))
                    }
                    _ => {
                        let msg = format!("expected a numeric literal after `-`, found {}", self.found());
                        self.error(msg, minus)
                    }
                }
            }
            _ => {
                let msg = format!("expected an identifier or literal, found `{}`", tok.lexeme);
                self.error(msg, tok.span)
            }
        }
    }

    fn int_literal(&mut self, tok: &Token, negated: bool) -> PResult<IntLit> {
        match tok.lexeme.parse::<i64>() {
            Ok(v) => Ok(IntLit {
                negated,
                digits: tok.lexeme.clone(),
                value: if negated { -v } else { v },
            }),
            Err(_) => self.error("integer literal does not fit in 64 bits", tok.span),
        }
    }

    fn real_literal(&mut self, tok: &Token, negated: bool) -> PResult<RealLit> {
        match tok.lexeme.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(RealLit {
                negated,
                digits: tok.lexeme.clone(),
                value: if negated { -v } else { v },
            }),
            _ => self.error("real literal is out of range", tok.span),
        }
    }
}
