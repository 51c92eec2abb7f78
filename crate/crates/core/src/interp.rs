//! Reference semantics of L.
//!
//! Programs are lowered to a slot-indexed form before execution so that
//! variable access and jumps are array lookups. The specializer reuses the
//! same lowering.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::lang::{validate, Expr, Jump, Label, Prim, Program};
use crate::value::{List, Symbol, Value};

pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

/// A snapshot of variable bindings, ordered by name.
pub type Store = BTreeMap<Symbol, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunErrorKind {
    /// Read of a variable that is neither a parameter nor assigned anywhere.
    UnboundVariable,
    /// Primitive applied to values of the wrong shape.
    TypeError,
    StepBudgetExceeded,
    /// Read of an assignable variable before its first assignment.
    Uninitialized,
    /// Wrong number of inputs for the program's parameters.
    ArityMismatch,
    /// The program failed validation.
    InvalidProgram,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct RunError {
    pub kind: RunErrorKind,
    pub detail: String,
    /// Block label and assignment index; the jump has index `assigns.len()`.
    pub at: Option<(Label, usize)>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)?;
        if let Some((label, index)) = &self.at {
            write!(f, " (block {label}, step {index})")?;
        }
        Ok(())
    }
}

impl RunError {
    pub(crate) fn new(kind: RunErrorKind, detail: impl Into<String>) -> RunError {
        RunError {
            kind,
            detail: detail.into(),
            at: None,
        }
    }
}

fn type_error(p: Prim, args: &[&Value]) -> RunError {
    let shown: Vec<String> = args.iter().map(|a| abbreviate(a)).collect();
    RunError::new(
        RunErrorKind::TypeError,
        format!("({} {})", p.name(), shown.join(" ")),
    )
}

fn abbreviate(v: &Value) -> String {
    let s = v.to_string();
    if s.len() > 60 {
        format!("{}...", &s[..57])
    } else {
        s
    }
}

pub fn apply_prim1(p: Prim, x: &Value) -> Result<Value, RunError> {
    match p {
        Prim::Car => match x {
            Value::Seq(l) if !l.is_empty() => Ok(l.head().cloned().expect("non-empty")),
            _ => Err(type_error(p, &[x])),
        },
        Prim::Cdr => match x {
            Value::Seq(l) if !l.is_empty() => Ok(Value::Seq(l.tail().cloned().expect("non-empty"))),
            _ => Err(type_error(p, &[x])),
        },
        Prim::Atom => Ok(Value::bool(!matches!(x, Value::Seq(_)))),
        Prim::Not => Ok(Value::bool(x.is_symbol("false"))),
        _ => Err(RunError::new(
            RunErrorKind::TypeError,
            format!("{} applied to one argument", p.name()),
        )),
    }
}

pub fn apply_prim2(p: Prim, x: &Value, y: &Value) -> Result<Value, RunError> {
    let ints = || match (x, y) {
        (Value::Int(a), Value::Int(b)) => Ok((a, b)),
        _ => Err(type_error(p, &[x, y])),
    };
    match p {
        Prim::Cons => match y {
            Value::Seq(l) => Ok(Value::Seq(List::cons(x.clone(), l.clone()))),
            _ => Err(type_error(p, &[x, y])),
        },
        Prim::Eq => Ok(Value::bool(x == y)),
        Prim::Add => ints().map(|(a, b)| Value::Int(a.add(b))),
        Prim::Sub => ints().map(|(a, b)| Value::Int(a.sub(b))),
        Prim::Mul => ints().map(|(a, b)| Value::Int(a.mul(b))),
        Prim::Quotient => {
            let (a, b) = ints()?;
            a.quotient(b)
                .map(Value::Int)
                .ok_or_else(|| type_error(p, &[x, y]))
        }
        Prim::Remainder => {
            let (a, b) = ints()?;
            a.remainder(b)
                .map(Value::Int)
                .ok_or_else(|| type_error(p, &[x, y]))
        }
        Prim::Lt => ints().map(|(a, b)| Value::bool(a.less_than(b))),
        Prim::NumEq => ints().map(|(a, b)| Value::bool(a == b)),
        _ => Err(RunError::new(
            RunErrorKind::TypeError,
            format!("{} applied to two arguments", p.name()),
        )),
    }
}

/// Applies a primitive to already evaluated arguments.
pub fn apply_prim(p: Prim, args: &[Value]) -> Result<Value, RunError> {
    match args {
        [x] => apply_prim1(p, x),
        [x, y] => apply_prim2(p, x, y),
        _ => Err(RunError::new(
            RunErrorKind::TypeError,
            format!("{} applied to {} arguments", p.name(), args.len()),
        )),
    }
}

#[derive(Debug, Clone)]
pub(crate) enum CExpr {
    Const(Value),
    Var(usize),
    Prim1(Prim, Box<CExpr>),
    Prim2(Prim, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone)]
pub(crate) enum CJump {
    Goto(usize),
    If(CExpr, usize, usize),
    Return(CExpr),
}

#[derive(Debug, Clone)]
pub(crate) struct CBlock {
    pub label: Label,
    pub assigns: Vec<(usize, CExpr)>,
    pub jump: CJump,
}

/// A program lowered to slot indices.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub vars: Vec<Symbol>,
    pub slots: HashMap<Symbol, usize>,
    pub params: Vec<usize>,
    pub assigned: Vec<bool>,
    pub blocks: Vec<CBlock>,
    pub entry: usize,
}

impl Compiled {
    pub fn new(p: &Program) -> Result<Compiled, RunError> {
        if let Some(d) = validate(p).into_iter().next() {
            return Err(RunError::new(RunErrorKind::InvalidProgram, d.to_string()));
        }
        let vars = p.variables();
        let slots: HashMap<Symbol, usize> = vars
            .iter()
            .enumerate()
            .map(|(i, x)| (x.clone(), i))
            .collect();
        let labels: HashMap<&Label, usize> = p
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (&b.label, i))
            .collect();
        let mut assigned = vec![false; vars.len()];
        for b in &p.blocks {
            for a in &b.assigns {
                assigned[slots[&a.target]] = true;
            }
        }
        let lower = |e: &Expr| lower_expr(e, &slots);
        let blocks = p
            .blocks
            .iter()
            .map(|b| CBlock {
                label: b.label.clone(),
                assigns: b
                    .assigns
                    .iter()
                    .map(|a| (slots[&a.target], lower(&a.expr)))
                    .collect(),
                jump: match &b.jump {
                    Jump::Goto(l) => CJump::Goto(labels[l]),
                    Jump::If(c, t, e) => CJump::If(lower(c), labels[t], labels[e]),
                    Jump::Return(e) => CJump::Return(lower(e)),
                },
            })
            .collect();
        Ok(Compiled {
            params: p.params.iter().map(|x| slots[x]).collect(),
            entry: labels[&p.entry],
            vars,
            slots,
            assigned,
            blocks,
        })
    }

    fn unset(&self, slot: usize) -> RunError {
        let x = &self.vars[slot];
        if self.assigned[slot] || self.params.contains(&slot) {
            RunError::new(
                RunErrorKind::Uninitialized,
                format!("`{x}` read before assignment"),
            )
        } else {
            RunError::new(
                RunErrorKind::UnboundVariable,
                format!("`{x}` is never assigned"),
            )
        }
    }

    pub fn eval(&self, e: &CExpr, store: &[Option<Value>]) -> Result<Value, RunError> {
        self.eval_ref(e, store).map(Cow::into_owned)
    }

    /// Evaluates without cloning constants and variables that are only
    /// read.
    fn eval_ref<'a>(
        &self,
        e: &'a CExpr,
        store: &'a [Option<Value>],
    ) -> Result<Cow<'a, Value>, RunError> {
        match e {
            CExpr::Const(v) => Ok(Cow::Borrowed(v)),
            CExpr::Var(slot) => store[*slot]
                .as_ref()
                .map(Cow::Borrowed)
                .ok_or_else(|| self.unset(*slot)),
            CExpr::Prim1(p, a) => apply_prim1(*p, &*self.eval_ref(a, store)?).map(Cow::Owned),
            CExpr::Prim2(p, a, b) => {
                let x = self.eval_ref(a, store)?;
                let y = self.eval_ref(b, store)?;
                apply_prim2(*p, &x, &y).map(Cow::Owned)
            }
        }
    }

    fn snapshot(&self, store: &[Option<Value>]) -> Store {
        store
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.clone().map(|v| (self.vars[i].clone(), v)))
            .collect()
    }

    fn execute(
        &self,
        inputs: &[Value],
        step_budget: u64,
        trace: Option<&mut Vec<(Label, Store)>>,
    ) -> Result<Value, RunError> {
        self.execute_counted(inputs, step_budget, trace)
            .map(|(v, _)| v)
    }

    fn execute_counted(
        &self,
        inputs: &[Value],
        step_budget: u64,
        mut trace: Option<&mut Vec<(Label, Store)>>,
    ) -> Result<(Value, u64), RunError> {
        if inputs.len() != self.params.len() {
            return Err(RunError::new(
                RunErrorKind::ArityMismatch,
                format!(
                    "program takes {} input(s), got {}",
                    self.params.len(),
                    inputs.len()
                ),
            ));
        }
        let mut store: Vec<Option<Value>> = vec![None; self.vars.len()];
        for (&slot, v) in self.params.iter().zip(inputs) {
            store[slot] = Some(v.clone());
        }
        let mut steps = 0u64;
        let mut cur = self.entry;
        loop {
            let block = &self.blocks[cur];
            if let Some(t) = trace.as_deref_mut() {
                t.push((block.label.clone(), self.snapshot(&store)));
            }
            let at = |i: usize| Some((block.label.clone(), i));
            for (i, (slot, e)) in block.assigns.iter().enumerate() {
                steps += 1;
                if steps > step_budget {
                    return Err(budget_error(step_budget, at(i)));
                }
                let v = self.eval(e, &store).map_err(|mut err| {
                    err.at = at(i);
                    err
                })?;
                store[*slot] = Some(v);
            }
            steps += 1;
            if steps > step_budget {
                return Err(budget_error(step_budget, at(block.assigns.len())));
            }
            let locate = |mut err: RunError| {
                err.at = at(block.assigns.len());
                err
            };
            cur = match &block.jump {
                CJump::Goto(t) => *t,
                CJump::If(c, t, e) => {
                    if self.eval_ref(c, &store).map_err(locate)?.is_truthy() {
                        *t
                    } else {
                        *e
                    }
                }
                CJump::Return(e) => {
                    return self.eval(e, &store).map_err(locate).map(|v| (v, steps))
                }
            };
        }
    }
}

fn budget_error(budget: u64, at: Option<(Label, usize)>) -> RunError {
    RunError {
        kind: RunErrorKind::StepBudgetExceeded,
        detail: format!("exceeded {budget} steps"),
        at,
    }
}

pub(crate) fn lower_expr(e: &Expr, slots: &HashMap<Symbol, usize>) -> CExpr {
    match e {
        Expr::Const(v) => CExpr::Const(v.clone()),
        Expr::Var(x) => CExpr::Var(slots[x]),
        Expr::Prim(p, args) => match args.as_slice() {
            [a] => CExpr::Prim1(*p, Box::new(lower_expr(a, slots))),
            [a, b] => CExpr::Prim2(
                *p,
                Box::new(lower_expr(a, slots)),
                Box::new(lower_expr(b, slots)),
            ),
            _ => unreachable!("arity is checked when programs are built"),
        },
    }
}

/// Runs `p` on `inputs`, failing after `step_budget` assignments and jumps.
pub fn run(p: &Program, inputs: &[Value], step_budget: u64) -> Result<Value, RunError> {
    Compiled::new(p)?.execute(inputs, step_budget, None)
}

/// Like [`run`], also recording every block entry with the store at that point.
pub fn run_traced(
    p: &Program,
    inputs: &[Value],
    step_budget: u64,
) -> Result<(Value, Vec<(Label, Store)>), RunError> {
    let compiled = Compiled::new(p)?;
    let mut trace = Vec::new();
    let v = compiled.execute(inputs, step_budget, Some(&mut trace))?;
    Ok((v, trace))
}

/// A program prepared once and run many times.
#[derive(Debug, Clone)]
pub struct Machine {
    compiled: Compiled,
}

impl Machine {
    pub fn new(p: &Program) -> Result<Machine, RunError> {
        Ok(Machine {
            compiled: Compiled::new(p)?,
        })
    }

    pub fn run(&self, inputs: &[Value], step_budget: u64) -> Result<Value, RunError> {
        self.compiled.execute(inputs, step_budget, None)
    }

    /// Like [`Machine::run`], also returning the number of steps taken.
    pub fn run_counted(
        &self,
        inputs: &[Value],
        step_budget: u64,
    ) -> Result<(Value, u64), RunError> {
        self.compiled.execute_counted(inputs, step_budget, None)
    }
}
