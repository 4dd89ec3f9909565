//! Independent oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use simdsl::frontend::{parse_source, pretty_print, program_tokens, Program};
use simdsl::generate::{random_program, GenConfig};
use simdsl::interp::{execute, ExecutionStatus, Limits, State, Value, RETURN_SLOT};

pub fn program(seed: u64, cfg: &GenConfig) -> Program {
    random_program(&mut ChaCha8Rng::seed_from_u64(seed), cfg)
}

pub fn source(seed: u64, cfg: &GenConfig) -> String {
    pretty_print(&program(seed, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Naive {
    I(i64),
    R(f64),
}

/// Evaluates straight-line code directly from its lexemes.
pub fn naive_eval(tokens: &[String]) -> Result<BTreeMap<String, Naive>, String> {
    let body = &tokens[5..tokens.len() - 1];
    let mut env: BTreeMap<String, Naive> = BTreeMap::new();
    let mut i = 0;
    let atom = |env: &BTreeMap<String, Naive>, i: &mut usize| -> Result<Naive, String> {
        let negate = body[*i] == "-";
        if negate {
            *i += 1;
        }
        let lex = &body[*i];
        *i += 1;
        let v = if lex.chars().next().unwrap().is_ascii_digit() {
            if lex.contains('.') {
                Naive::R(lex.parse::<f64>().unwrap())
            } else {
                Naive::I(lex.parse::<i64>().unwrap())
            }
        } else {
            *env.get(lex.as_str()).ok_or_else(|| format!("undefined {lex}"))?
        };
        Ok(match (negate, v) {
            (false, v) => v,
            (true, Naive::I(x)) => Naive::I(-x),
            (true, Naive::R(x)) => Naive::R(-x),
        })
    };
    while i < body.len() {
        if body[i] == "return" {
            i += 1;
            let v = atom(&env, &mut i)?;
            env.insert(RETURN_SLOT.to_owned(), v);
            return Ok(env);
        }
        let target = body[i].clone();
        i += 2;
        let a = atom(&env, &mut i)?;
        let v = if body[i] == ";" {
            a
        } else {
            let op = body[i].clone();
            i += 1;
            let b = atom(&env, &mut i)?;
            apply(&op, a, b)?
        };
        i += 1;
        env.insert(target, v);
    }
    Ok(env)
}

fn apply(op: &str, a: Naive, b: Naive) -> Result<Naive, String> {
    let finite = |x: f64| if x.is_finite() { Ok(Naive::R(x)) } else { Err("non-finite".to_owned()) };
    match (a, b) {
        (Naive::I(x), Naive::I(y)) => {
            let (x, y) = (x as i128, y as i128);
            let wide = match op {
                "+" => x + y,
                "-" => x - y,
                "*" => x * y,
                "/" if y == 0 => return Err("div0".into()),
                "/" => return finite(x as f64 / y as f64),
                "//" if y == 0 => return Err("div0".into()),
                "//" if y > 0 => x.div_euclid(y),
                "//" => (-x).div_euclid(-y),
                _ => unreachable!("{op}"),
            };
            i64::try_from(wide).map(Naive::I).map_err(|_| "overflow".to_owned())
        }
        _ => {
            let f = |v: Naive| match v {
                Naive::I(x) => x as f64,
                Naive::R(x) => x,
            };
            let (x, y) = (f(a), f(b));
            match op {
                "+" => finite(x + y),
                "-" => finite(x - y),
                "*" => finite(x * y),
                "/" | "//" if y == 0.0 => Err("div0".into()),
                "/" => finite(x / y),
                "//" => finite((x / y).floor()),
                _ => unreachable!("{op}"),
            }
        }
    }
}

fn same_value(a: Value, b: Naive) -> bool {
    match (a, b) {
        (Value::Int(x), Naive::I(y)) => x == y,
        (Value::Real(x), Naive::R(y)) => x.to_bits() == y.to_bits(),
        _ => false,
    }
}

pub fn straight_line_agrees(seed: u64) -> Result<(), String> {
    let src = source(seed, &GenConfig::straight_line(10));
    let tokens = program_tokens(&src).unwrap();
    let outcome = execute(&parse_source(&src).unwrap(), Limits::default());
    match naive_eval(&tokens) {
        Err(e) => match outcome.status {
            ExecutionStatus::RuntimeError(_) => Ok(()),
            other => Err(format!("{src}: naive failed with {e}, interpreter {other:?}")),
        },
        Ok(expected) => {
            let last = outcome.trace.records.last().map(|r| r.state.clone()).unwrap_or_default();
            let agree = last.len() == expected.len()
                && expected.iter().all(|(k, v)| last.get(k).is_some_and(|a| same_value(a, *v)));
            if agree {
                Ok(())
            } else {
                Err(format!("{src}: naive {expected:?}, interpreter {last:?}"))
            }
        }
    }
}

pub fn naive_semantic(r: &[State], p: &[State], tol: f64) -> f64 {
    let longest = r.len().max(p.len());
    if longest == 0 {
        return 0.0;
    }
    let dict = |s: &State| s.iter().map(|(k, v)| (k.to_owned(), v)).collect::<BTreeMap<String, Value>>();
    let mut matched = 0;
    for t in 0..r.len().min(p.len()) {
        let (a, b) = (dict(&r[t]), dict(&p[t]));
        let same = a.keys().eq(b.keys())
            && a.iter().all(|(k, va)| match (*va, b[k]) {
                (Value::Int(x), Value::Int(y)) => x == y,
                (x, y) => (x.as_f64() - y.as_f64()).abs() <= tol,
            });
        matched += usize::from(same);
    }
    matched as f64 / longest as f64
}

