//! Canonical formatting: one statement per line, four-space indent,
//! single spaces between tokens.

use std::fmt::Write;

use super::ast::{Condition, Expr, ExprKind, Program, Rhs, Stmt, StmtKind};

pub fn pretty_print(program: &Program) -> String {
    let mut out = String::from("func simulation() {\n");
    print_block(&mut out, &program.body, 1);
    out.push_str("}\n");
    out
}

fn print_block(out: &mut String, block: &[Stmt], depth: usize) {
    for stmt in block {
        print_stmt(out, stmt, depth);
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    indent(out, depth);
    match &stmt.kind {
        StmtKind::Repeat { count, body } => {
            let _ = writeln!(out, "repeat({}) {{", count.digits);
            print_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::If { cond, body } => {
            let _ = writeln!(out, "if({}) {{", condition(cond));
            print_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Return(e) => {
            let _ = writeln!(out, "return {};", expr(e));
        }
        StmtKind::Assign { target, rhs } => {
            let rhs = match rhs {
                Rhs::Atom(e) => expr(e),
                Rhs::Binary { lhs, op, rhs } => format!("{} {} {}", expr(lhs), op.as_str(), expr(rhs)),
            };
            let _ = writeln!(out, "{} = {};", target.name, rhs);
        }
    }
}

fn condition(c: &Condition) -> String {
    format!("{} {} {}", c.lhs.name, c.op.as_str(), expr(&c.rhs))
}

pub(crate) fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Var(name) => name.clone(),
        ExprKind::Int(lit) => format!("{}{}", if lit.negated { "-" } else { "" }, lit.digits),
        ExprKind::Real(lit) => format!("{}{}", if lit.negated { "-" } else { "" }, lit.digits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_source, program_tokens};

    #[test]
    fn minimal_program() {
        let p = parse_source("func simulation() { return 5; }").unwrap();
        assert_eq!(pretty_print(&p), "func simulation() {\n    return 5;\n}\n");
    }

    #[test]
    fn nested_layout() {
        let src = "func simulation(){x=1;repeat(3){if(x<=10){x=x//2;}}return x;}";
        let p = parse_source(src).unwrap();
        let expected = "\
func simulation() {
    x = 1;
    repeat(3) {
        if(x <= 10) {
            x = x // 2;
        }
    }
    return x;
}
";
        assert_eq!(pretty_print(&p), expected);
    }

    #[test]
    fn token_stream_preserved() {
        let src = "func simulation(){ a = -0; b = 1.50 - -007; if(b != -0.0){ a = b / a; } return a; }";
        let p = parse_source(src).unwrap();
        let printed = pretty_print(&p);
        assert_eq!(program_tokens(src).unwrap(), program_tokens(&printed).unwrap());
        let again = parse_source(&printed).unwrap();
        assert_eq!(again.without_spans(), p.without_spans());
        assert_eq!(pretty_print(&again), printed);
    }
}
