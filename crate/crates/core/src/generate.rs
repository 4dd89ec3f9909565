//! Grammar-directed random program generator, used for property tests and
//! fuzzing the toolchain.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::frontend::{
    ArithOp, CmpOp, Condition, Expr, ExprKind, Ident, IntLit, Keyword, Program, RealLit, Rhs, Span,
    Stmt, StmtKind,
};

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Maximum nesting depth of `repeat`/`if` blocks. Zero means straight-line code.
    pub max_depth: usize,
    /// Maximum statements per block (at least one is always generated).
    pub max_block_len: usize,
    /// Largest `repeat` count.
    pub max_repeat: i64,
    /// Magnitude bound for integer literals.
    pub max_int: i64,
    pub allow_reals: bool,
    /// Only read variables that are certainly defined at that point and end
    /// with a `return`, so programs usually execute to completion.
    pub executable: bool,
    /// Variable names to draw from. Empty means invent fresh names.
    pub identifiers: Vec<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            max_block_len: 4,
            max_repeat: 5,
            max_int: 100,
            allow_reals: true,
            executable: false,
            identifiers: Vec::new(),
        }
    }
}

impl GenConfig {
    /// Straight-line executable programs: only assignments and a final return.
    pub fn straight_line(max_assigns: usize) -> Self {
        Self {
            max_depth: 0,
            max_block_len: max_assigns,
            executable: true,
            identifiers: ["a", "b", "c", "d"].map(String::from).to_vec(),
            ..Self::default()
        }
    }

    /// Small executable programs with loops and branches.
    pub fn executable() -> Self {
        Self {
            max_depth: 2,
            max_block_len: 3,
            max_repeat: 3,
            max_int: 20,
            executable: true,
            identifiers: ["x", "y", "z"].map(String::from).to_vec(),
            ..Self::default()
        }
    }
}

pub fn random_program<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Program {
    let mut g = Gen { rng, cfg, defined: Vec::new() };
    let mut body = g.block(0, true);
    if cfg.executable && !matches!(body.last().map(|s| &s.kind), Some(StmtKind::Return(_))) {
        let e = g.atom(true);
        body.push(stmt(StmtKind::Return(e)));
    }
    Program { body, span: Span::default() }
}

struct Gen<'a, R: ?Sized> {
    rng: &'a mut R,
    cfg: &'a GenConfig,
    /// Variables certainly defined at the current point.
    defined: Vec<String>,
}

fn stmt(kind: StmtKind) -> Stmt {
    Stmt { kind, span: Span::default() }
}

fn expr(kind: ExprKind) -> Expr {
    Expr { kind, span: Span::default() }
}

impl<R: Rng + ?Sized> Gen<'_, R> {
    fn block(&mut self, depth: usize, top: bool) -> Vec<Stmt> {
        let n = self.rng.gen_range(1..=self.cfg.max_block_len.max(1));
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let last = i + 1 == n;
            out.push(self.statement(depth, top && last));
            if matches!(out.last().map(|s| &s.kind), Some(StmtKind::Return(_))) {
                break;
            }
        }
        out
    }

    fn statement(&mut self, depth: usize, final_top: bool) -> Stmt {
        let can_nest = depth < self.cfg.max_depth;
        let roll = self.rng.gen_range(0..100);
        if can_nest && roll < 15 {
            return self.repeat(depth);
        }
        if can_nest && roll < 30 && (!self.cfg.executable || !self.defined.is_empty()) {
            return self.if_stmt(depth);
        }
        let return_chance = if self.cfg.executable { if final_top { 100 } else { 3 } } else { 8 };
        if roll >= 100 - return_chance && (!self.cfg.executable || !self.defined.is_empty()) {
            let e = self.atom(true);
            return stmt(StmtKind::Return(e));
        }
        self.assign()
    }

    fn repeat(&mut self, depth: usize) -> Stmt {
        let lo = if self.cfg.executable { 1 } else { 0 };
        let value = self.rng.gen_range(lo..=self.cfg.max_repeat.max(lo));
        let count = self.int_lit(value, false);
        let body = self.block(depth + 1, false);
        stmt(StmtKind::Repeat { count, body })
    }

    fn if_stmt(&mut self, depth: usize) -> Stmt {
        let lhs = Ident { name: self.read_name(), span: Span::default() };
        let op = *CmpOp::ALL.choose(self.rng).unwrap();
        let rhs = self.atom(true);
        let saved = self.defined.clone();
        let body = self.block(depth + 1, false);
        self.defined = saved;
        stmt(StmtKind::If {
            cond: Condition { lhs, op, rhs, span: Span::default() },
            body,
        })
    }

    fn assign(&mut self) -> Stmt {
        let rhs = if self.rng.gen_bool(0.6) {
            let op = *ArithOp::ALL.choose(self.rng).unwrap();
            Rhs::Binary { lhs: self.atom(true), op, rhs: self.atom(false) }
        } else {
            Rhs::Atom(self.atom(true))
        };
        let name = self.write_name();
        if !self.defined.contains(&name) {
            self.defined.push(name.clone());
        }
        stmt(StmtKind::Assign { target: Ident { name, span: Span::default() }, rhs })
    }

    fn atom(&mut self, prefer_var: bool) -> Expr {
        let can_read = !self.cfg.executable || !self.defined.is_empty();
        let var_p = if prefer_var { 0.6 } else { 0.35 };
        if can_read && self.rng.gen_bool(var_p) {
            return expr(ExprKind::Var(self.read_name()));
        }
        let negated = self.rng.gen_bool(0.15);
        if self.cfg.allow_reals && self.rng.gen_bool(0.25) {
            let whole = self.rng.gen_range(0..=self.cfg.max_int.max(0));
            let frac = self.rng.gen_range(0..100);
            let digits = format!("{whole}.{frac}");
            let v: f64 = digits.parse().unwrap();
            return expr(ExprKind::Real(RealLit {
                negated,
                digits,
                value: if negated { -v } else { v },
            }));
        }
        let v = self.rng.gen_range(0..=self.cfg.max_int.max(0));
        expr(ExprKind::Int(self.int_lit(v, negated)))
    }

    fn int_lit(&mut self, magnitude: i64, negated: bool) -> IntLit {
        // Occasional leading zeros exercise lexeme preservation.
        let digits = if !self.cfg.executable && self.rng.gen_bool(0.05) {
            format!("0{magnitude}")
        } else {
            magnitude.to_string()
        };
        IntLit { negated, digits, value: if negated { -magnitude } else { magnitude } }
    }

    fn read_name(&mut self) -> String {
        if self.cfg.executable {
            return self.defined.choose(self.rng).expect("caller checked").clone();
        }
        self.any_name()
    }

    fn write_name(&mut self) -> String {
        if self.cfg.executable && self.cfg.identifiers.is_empty() && !self.defined.is_empty() && self.rng.gen_bool(0.5) {
            return self.defined.choose(self.rng).unwrap().clone();
        }
        self.any_name()
    }

    fn any_name(&mut self) -> String {
        if let Some(name) = self.cfg.identifiers.choose(self.rng) {
            return name.clone();
        }
        loop {
            const FIRST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
            const REST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
            let len = self.rng.gen_range(0..6);
            let mut s = String::new();
            s.push(*FIRST.choose(self.rng).unwrap() as char);
            for _ in 0..len {
                s.push(*REST.choose(self.rng).unwrap() as char);
            }
            if Keyword::from_ident(&s).is_none() {
                return s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_source, pretty_print};
    use crate::interp::{execute, ExecutionStatus, Limits};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_programs_parse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = random_program(&mut rng, &GenConfig::default());
            let src = pretty_print(&p);
            let parsed = parse_source(&src).unwrap_or_else(|d| panic!("{src}\n{d:?}"));
            assert_eq!(parsed.without_spans(), p);
        }
    }

    #[test]
    fn executable_programs_mostly_return() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut returned = 0;
        for _ in 0..200 {
            let p = random_program(&mut rng, &GenConfig::executable());
            let out = execute(&p, Limits::default());
            if let ExecutionStatus::RuntimeError(e) = &out.status {
                assert!(!matches!(e.kind, crate::interp::RuntimeErrorKind::UndefinedVariable(_)));
            }
            if out.returned().is_some() {
                returned += 1;
            }
        }
        assert!(returned > 120, "{returned}");
    }
}
