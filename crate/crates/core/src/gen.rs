//! Seeded random L and W programs for property checks.
//!
//! Generated programs compute over integers. Every loop is guarded by the
//! counter `n`, which is only ever decremented right before a back edge,
//! so runs terminate.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bta::{analyze_with, BindingTime, Division};
use crate::guest::WProgram;
use crate::lang::{Assign, Block, Expr, Jump, Prim, Program};
use crate::mix::StaticStore;
use crate::value::{Symbol, Value};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const PARAMS: [&str; 3] = ["n", "a", "b"];
const LOCALS: [&str; 2] = ["t", "u"];
const ASSIGNABLE: [&str; 4] = ["a", "b", "t", "u"];

fn var(x: &str) -> Expr {
    Expr::Var(Symbol::new(x))
}

fn quote(v: i64) -> Expr {
    Expr::Const(Value::int(v))
}

fn op(p: Prim, args: Vec<Expr>) -> Expr {
    Expr::Prim(p, args)
}

fn int_expr<R: Rng>(rng: &mut R, vars: &[&str], depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.7) {
            var(vars.choose(rng).expect("vars"))
        } else {
            quote(rng.gen_range(-3..=5))
        };
    }
    let sub = |rng: &mut R| int_expr(rng, vars, depth - 1);
    match rng.gen_range(0..5) {
        0 => op(Prim::Add, vec![sub(rng), sub(rng)]),
        1 => op(Prim::Sub, vec![sub(rng), sub(rng)]),
        2 => op(Prim::Mul, vec![sub(rng), sub(rng)]),
        3 => op(Prim::Quotient, vec![sub(rng), quote(rng.gen_range(1..=3))]),
        _ => op(Prim::Remainder, vec![sub(rng), quote(rng.gen_range(2..=4))]),
    }
}

fn cond_expr<R: Rng>(rng: &mut R, vars: &[&str]) -> Expr {
    let (a, b) = (int_expr(rng, vars, 1), int_expr(rng, vars, 1));
    match rng.gen_range(0..4) {
        0 => op(Prim::Lt, vec![a, b]),
        1 => op(Prim::NumEq, vec![a, b]),
        2 => op(Prim::Eq, vec![a, b]),
        _ => op(Prim::Not, vec![op(Prim::Lt, vec![a, b])]),
    }
}

fn loop_guard() -> Expr {
    op(Prim::Lt, vec![quote(0), var("n")])
}

fn decrement() -> Assign {
    Assign {
        target: Symbol::new("n"),
        expr: op(Prim::Sub, vec![var("n"), quote(1)]),
    }
}

/// A random L program with parameters `(n a b)` and locals `t`, `u`.
pub fn random_program<R: Rng>(rng: &mut R) -> Program {
    let nblocks = rng.gen_range(2..=5);
    let label = |i: usize| Value::sym(&format!("b{i}"));
    let exit = Value::sym("exit");
    let readable: Vec<&str> = PARAMS.iter().chain(LOCALS.iter()).copied().collect();
    let mut blocks = Vec::new();
    for i in 0..nblocks {
        let mut assigns = Vec::new();
        if i == 0 {
            for x in LOCALS {
                assigns.push(Assign {
                    target: Symbol::new(x),
                    expr: int_expr(rng, &PARAMS, 1),
                });
            }
        }
        for _ in 0..rng.gen_range(0..=2) {
            assigns.push(Assign {
                target: Symbol::new(ASSIGNABLE.choose(rng).expect("targets")),
                expr: int_expr(rng, &readable, 2),
            });
        }
        let last = i + 1 == nblocks;
        let later = |rng: &mut R| {
            if last {
                exit.clone()
            } else {
                label(rng.gen_range(i + 1..nblocks))
            }
        };
        let jump = match rng.gen_range(0..5) {
            0 | 1 if !last => {
                if rng.gen_bool(0.5) {
                    Jump::Goto(later(rng))
                } else {
                    Jump::If(cond_expr(rng, &readable), later(rng), later(rng))
                }
            }
            2 | 3 => {
                assigns.push(decrement());
                Jump::If(loop_guard(), label(rng.gen_range(0..=i)), later(rng))
            }
            _ => Jump::Return(int_expr(rng, &readable, 2)),
        };
        blocks.push(Block {
            label: label(i),
            assigns,
            jump,
        });
    }
    blocks.push(Block {
        label: exit,
        assigns: vec![],
        jump: Jump::Return(int_expr(rng, &readable, 2)),
    });
    Program {
        params: PARAMS.iter().map(|x| Symbol::new(x)).collect(),
        entry: label(0),
        blocks,
    }
}

/// A random congruent division for `p`: each parameter is static with
/// probability one half, each other variable is forced dynamic with
/// probability one quarter, and the analysis closes the rest.
pub fn random_division<R: Rng>(rng: &mut R, p: &Program) -> Division {
    let param_classes = p
        .params
        .iter()
        .map(|x| {
            let bt = if rng.gen_bool(0.5) {
                BindingTime::Static
            } else {
                BindingTime::Dynamic
            };
            (x.clone(), bt)
        })
        .collect();
    let forced: Vec<Symbol> = p
        .variables()
        .into_iter()
        .filter(|x| !p.params.contains(x) && rng.gen_bool(0.25))
        .collect();
    analyze_with(p, &param_classes, &forced)
}

pub fn random_int<R: Rng>(rng: &mut R) -> Value {
    Value::int(rng.gen_range(-3..=6))
}

/// Values for the static parameters of `p` under `d`.
pub fn random_static_store<R: Rng>(rng: &mut R, p: &Program, d: &Division) -> StaticStore {
    p.params
        .iter()
        .filter(|x| d.is_static(x))
        .map(|x| (x.clone(), random_int(rng)))
        .collect()
}

pub fn random_tuple<R: Rng>(rng: &mut R, len: usize) -> Vec<Value> {
    (0..len).map(|_| random_int(rng)).collect()
}

fn w(head: &str, rest: Vec<Value>) -> Value {
    Value::list(std::iter::once(Value::sym(head)).chain(rest))
}

fn w_expr<R: Rng>(rng: &mut R, vars: &[&str], depth: u32) -> Value {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.7) {
            w("ref", vec![Value::sym(vars.choose(rng).expect("vars"))])
        } else {
            w("const", vec![Value::int(rng.gen_range(-3..=5))])
        };
    }
    let name = ["+", "-", "*"].choose(rng).expect("prims");
    let (a, b) = (w_expr(rng, vars, depth - 1), w_expr(rng, vars, depth - 1));
    w("prim", vec![Value::sym(name), a, b])
}

fn w_cond<R: Rng>(rng: &mut R, vars: &[&str]) -> Value {
    let name = ["<", "="].choose(rng).expect("prims");
    let (a, b) = (w_expr(rng, vars, 1), w_expr(rng, vars, 1));
    w("prim", vec![Value::sym(name), a, b])
}

fn w_stmts<R: Rng>(rng: &mut R, depth: u32, out: &mut Vec<Value>) {
    let vars = ["n", "x", "y", "z"];
    for _ in 0..rng.gen_range(1..=3) {
        let target = ["x", "y", "z"].choose(rng).expect("targets");
        match rng.gen_range(0..6) {
            0 if depth > 0 => {
                let mut body = Vec::new();
                w_stmts(rng, depth - 1, &mut body);
                body.push(w("set", vec![Value::sym("n"), w_expr_sub1()]));
                out.push(w("while", vec![w_guard(), Value::list(body)]));
            }
            1 if depth > 0 => {
                let (mut t, mut e) = (Vec::new(), Vec::new());
                w_stmts(rng, depth - 1, &mut t);
                w_stmts(rng, depth - 1, &mut e);
                out.push(w(
                    "if",
                    vec![w_cond(rng, &vars), Value::list(t), Value::list(e)],
                ));
            }
            2 if rng.gen_bool(0.3) => out.push(w("return", vec![w_expr(rng, &vars, 2)])),
            _ => out.push(w("set", vec![Value::sym(target), w_expr(rng, &vars, 2)])),
        }
    }
}

fn w_guard() -> Value {
    w(
        "prim",
        vec![
            Value::sym("<"),
            w("const", vec![Value::int(0)]),
            w("ref", vec![Value::sym("n")]),
        ],
    )
}

fn w_expr_sub1() -> Value {
    w(
        "prim",
        vec![
            Value::sym("-"),
            w("ref", vec![Value::sym("n")]),
            w("const", vec![Value::int(1)]),
        ],
    )
}

/// A random W program with parameters `(n x)`. Locals `y` and `z` are set
/// before anything else runs; loops count `n` down.
pub fn random_w_program<R: Rng>(rng: &mut R) -> WProgram {
    let mut stmts = vec![
        w("set", vec![Value::sym("y"), w_expr(rng, &["n", "x"], 1)]),
        w("set", vec![Value::sym("z"), w_expr(rng, &["n", "x"], 1)]),
    ];
    w_stmts(rng, 2, &mut stmts);
    stmts.push(w("return", vec![w_expr(rng, &["n", "x", "y", "z"], 2)]));
    let program = Value::list([
        Value::sym("wprogram"),
        Value::list([Value::sym("n"), Value::sym("x")]),
        Value::list(stmts),
    ]);
    WProgram::from_value(&program).expect("generated W programs are well formed")
}
