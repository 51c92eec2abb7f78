//! The host specializer: offline polyvariant specialization of L programs
//! with transition compression.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::bta::{analyze, check_congruence, BindingTime, Division};
use crate::interp::{apply_prim, CExpr, CJump, Compiled, RunError, RunErrorKind};
use crate::lang::{canonicalize, Assign, Block, Expr, Jump, Label, Program};
use crate::value::{print_datum, Symbol, Value};

pub const DEFAULT_BLOCK_BUDGET: usize = 200_000;
pub const DEFAULT_STATIC_STEP_BUDGET: u64 = 100_000_000;

/// Values of static variables, ordered by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct StaticStore(BTreeMap<Symbol, Value>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed static store: {0}")]
pub struct StoreFormatError(pub String);

impl StaticStore {
    pub fn new() -> StaticStore {
        StaticStore::default()
    }

    pub fn insert(&mut self, x: Symbol, v: Value) {
        self.0.insert(x, v);
    }

    pub fn get(&self, x: &Symbol) -> Option<&Value> {
        self.0.get(x)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Value)> {
        self.0.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Symbol> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `((var datum) ...)` sorted by variable name.
    pub fn to_value(&self) -> Value {
        Value::list(
            self.0
                .iter()
                .map(|(x, v)| Value::list([Value::Sym(x.clone()), v.clone()])),
        )
    }

    pub fn from_value(v: &Value) -> Result<StaticStore, StoreFormatError> {
        let bad = |v: &Value| StoreFormatError(print_datum(v));
        let mut store = StaticStore::new();
        for entry in v.as_list().ok_or_else(|| bad(v))?.iter() {
            match entry.items().as_deref() {
                Some([Value::Sym(x), datum]) => store.insert(x.clone(), (*datum).clone()),
                _ => return Err(bad(entry)),
            }
        }
        Ok(store)
    }
}

impl FromIterator<(Symbol, Value)> for StaticStore {
    fn from_iter<I: IntoIterator<Item = (Symbol, Value)>>(iter: I) -> StaticStore {
        StaticStore(iter.into_iter().collect())
    }
}

impl fmt::Display for StaticStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecializeOptions {
    /// Maximum number of specialization states (residual blocks).
    pub block_budget: usize,
    /// Maximum static assignments and jumps processed for one state.
    pub step_budget_static: u64,
    pub compress_gotos: bool,
}

impl Default for SpecializeOptions {
    fn default() -> Self {
        SpecializeOptions {
            block_budget: DEFAULT_BLOCK_BUDGET,
            step_budget_static: DEFAULT_STATIC_STEP_BUDGET,
            compress_gotos: true,
        }
    }
}

/// A program point paired with the static store restricted to the static
/// variables live there.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpecState {
    pub label: Label,
    pub vs: StaticStore,
}

impl fmt::Display for SpecState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = self.vs.to_string();
        if text.len() > 200 {
            write!(f, "({} {}...)", self.label, &text[..200])
        } else {
            write!(f, "({} {})", self.label, text)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecializeError {
    #[error("more than {budget} specialization states (at {state})")]
    BlockBudgetExceeded { budget: usize, state: SpecState },
    #[error("more than {budget} static steps while specializing {state}")]
    StaticStepBudgetExceeded { budget: u64, state: SpecState },
    #[error("static computation depends on dynamic data at {state}: {detail}")]
    CongruenceBreach { detail: String, state: SpecState },
    #[error("static evaluation failed at {state}: {error}")]
    Fold { error: RunError, state: SpecState },
    #[error("invalid specializer input: {0}")]
    InvalidInput(String),
}

/// For each block label, the variables live on entry to that block.
pub fn live_variables(p: &Program) -> Result<HashMap<Label, BTreeSet<Symbol>>, RunError> {
    let c = Compiled::new(p)?;
    let live = liveness(&c);
    Ok(c.blocks
        .iter()
        .zip(live)
        .map(|(b, set)| {
            let vars = set
                .iter()
                .enumerate()
                .filter(|(_, &live)| live)
                .map(|(i, _)| c.vars[i].clone())
                .collect();
            (b.label.clone(), vars)
        })
        .collect())
}

fn cexpr_vars(e: &CExpr, out: &mut Vec<usize>) {
    match e {
        CExpr::Const(_) => {}
        CExpr::Var(s) => out.push(*s),
        CExpr::Prim1(_, a) => cexpr_vars(a, out),
        CExpr::Prim2(_, a, b) => {
            cexpr_vars(a, out);
            cexpr_vars(b, out);
        }
    }
}

/// Backward may-liveness over slots, one flag vector per block.
fn liveness(c: &Compiled) -> Vec<Vec<bool>> {
    let n = c.vars.len();
    let mut gen = Vec::with_capacity(c.blocks.len());
    let mut kill = Vec::with_capacity(c.blocks.len());
    for b in &c.blocks {
        let mut g = vec![false; n];
        let mut k = vec![false; n];
        let mut uses = Vec::new();
        for (t, e) in &b.assigns {
            uses.clear();
            cexpr_vars(e, &mut uses);
            for &u in &uses {
                if !k[u] {
                    g[u] = true;
                }
            }
            k[*t] = true;
        }
        uses.clear();
        match &b.jump {
            CJump::If(e, _, _) | CJump::Return(e) => cexpr_vars(e, &mut uses),
            CJump::Goto(_) => {}
        }
        for &u in &uses {
            if !k[u] {
                g[u] = true;
            }
        }
        gen.push(g);
        kill.push(k);
    }
    let succs = |j: &CJump| match j {
        CJump::Goto(t) => vec![*t],
        CJump::If(_, t, e) => vec![*t, *e],
        CJump::Return(_) => vec![],
    };
    let mut live = gen.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for i in (0..c.blocks.len()).rev() {
            for s in succs(&c.blocks[i].jump) {
                for v in 0..n {
                    if live[s][v] && !kill[i][v] && !live[i][v] {
                        live[i][v] = true;
                        changed = true;
                    }
                }
            }
        }
    }
    live
}

enum Reduced {
    Const(Value),
    Dyn(Expr),
}

impl Reduced {
    fn into_expr(self) -> Expr {
        match self {
            Reduced::Const(v) => Expr::Const(v),
            Reduced::Dyn(e) => e,
        }
    }
}

type StateKey = (usize, Vec<Option<Value>>);

struct Specializer<'a> {
    c: &'a Compiled,
    is_static: Vec<bool>,
    /// Static live slots per block, ordered by variable name.
    live_static: Vec<Vec<usize>>,
    opts: SpecializeOptions,
    states: Vec<StateKey>,
    index: HashMap<StateKey, usize>,
    queue: VecDeque<usize>,
}

impl<'a> Specializer<'a> {
    fn describe(&self, block: usize, vs: &[Option<Value>]) -> SpecState {
        let store = self.live_static[block]
            .iter()
            .filter_map(|&s| vs[s].clone().map(|v| (self.c.vars[s].clone(), v)))
            .collect();
        SpecState {
            label: self.c.blocks[block].label.clone(),
            vs: store,
        }
    }

    fn describe_key(&self, key: &StateKey) -> SpecState {
        let (block, vals) = key;
        let store = self.live_static[*block]
            .iter()
            .zip(vals)
            .filter_map(|(&s, v)| v.clone().map(|v| (self.c.vars[s].clone(), v)))
            .collect();
        SpecState {
            label: self.c.blocks[*block].label.clone(),
            vs: store,
        }
    }

    /// Interns the state for `block` under `vs`, queueing it if new.
    fn state(&mut self, block: usize, vs: &[Option<Value>]) -> Result<usize, SpecializeError> {
        let key: StateKey = (
            block,
            self.live_static[block]
                .iter()
                .map(|&s| vs[s].clone())
                .collect(),
        );
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        if self.states.len() >= self.opts.block_budget {
            return Err(SpecializeError::BlockBudgetExceeded {
                budget: self.opts.block_budget,
                state: self.describe_key(&key),
            });
        }
        let i = self.states.len();
        self.states.push(key.clone());
        self.index.insert(key, i);
        self.queue.push_back(i);
        Ok(i)
    }

    fn reduce(&self, e: &CExpr, vs: &[Option<Value>]) -> Result<Reduced, RunError> {
        match e {
            CExpr::Const(v) => Ok(Reduced::Const(v.clone())),
            CExpr::Var(s) if self.is_static[*s] => self.c.eval(e, vs).map(Reduced::Const),
            CExpr::Var(s) => Ok(Reduced::Dyn(Expr::Var(self.c.vars[*s].clone()))),
            CExpr::Prim1(p, a) => {
                let a = self.reduce(a, vs)?;
                match a {
                    Reduced::Const(x) => apply_prim(*p, &[x]).map(Reduced::Const),
                    a => Ok(Reduced::Dyn(Expr::Prim(*p, vec![a.into_expr()]))),
                }
            }
            CExpr::Prim2(p, a, b) => {
                let a = self.reduce(a, vs)?;
                let b = self.reduce(b, vs)?;
                match (a, b) {
                    (Reduced::Const(x), Reduced::Const(y)) => {
                        apply_prim(*p, &[x, y]).map(Reduced::Const)
                    }
                    (a, b) => Ok(Reduced::Dyn(Expr::Prim(
                        *p,
                        vec![a.into_expr(), b.into_expr()],
                    ))),
                }
            }
        }
    }

    fn residual_label(&self, i: usize) -> Label {
        let label = &self.c.blocks[self.states[i].0].label;
        match label {
            Value::Sym(s) => Value::sym(&format!("{s}.{i}")),
            other => Value::list([other.clone(), Value::int(i as i64)]),
        }
    }

    /// Emits the residual block for state `i`.
    fn specialize_state(&mut self, i: usize) -> Result<Block, SpecializeError> {
        let c = self.c;
        let (start, vals) = self.states[i].clone();
        let mut vs: Vec<Option<Value>> = vec![None; c.vars.len()];
        for (&s, v) in self.live_static[start].iter().zip(vals) {
            vs[s] = v;
        }
        let mut block = start;
        let mut code = Vec::new();
        let mut steps = 0u64;
        let budget = self.opts.step_budget_static;
        let fold_error = |this: &Self, block: usize, vs: &[Option<Value>], error: RunError| {
            SpecializeError::Fold {
                error,
                state: this.describe(block, vs),
            }
        };
        let jump = loop {
            let b = &c.blocks[block];
            for (t, e) in &b.assigns {
                steps += 1;
                if steps > budget {
                    return Err(SpecializeError::StaticStepBudgetExceeded {
                        budget,
                        state: self.describe_key(&self.states[i]),
                    });
                }
                if self.is_static[*t] {
                    let v = c
                        .eval(e, &vs)
                        .map_err(|err| fold_error(self, block, &vs, err))?;
                    vs[*t] = Some(v);
                } else {
                    let r = self
                        .reduce(e, &vs)
                        .map_err(|err| fold_error(self, block, &vs, err))?;
                    code.push(Assign {
                        target: c.vars[*t].clone(),
                        expr: r.into_expr(),
                    });
                }
            }
            steps += 1;
            if steps > budget {
                return Err(SpecializeError::StaticStepBudgetExceeded {
                    budget,
                    state: self.describe_key(&self.states[i]),
                });
            }
            match &b.jump {
                CJump::Goto(t) => {
                    if self.opts.compress_gotos {
                        block = *t;
                    } else {
                        let s = self.state(*t, &vs)?;
                        break Jump::Goto(self.residual_label(s));
                    }
                }
                CJump::If(cond, t, e) => {
                    match self
                        .reduce(cond, &vs)
                        .map_err(|err| fold_error(self, block, &vs, err))?
                    {
                        Reduced::Const(v) => block = if v.is_truthy() { *t } else { *e },
                        Reduced::Dyn(r) => {
                            let (t, e) = (*t, *e);
                            let st = self.state(t, &vs)?;
                            let se = self.state(e, &vs)?;
                            break Jump::If(r, self.residual_label(st), self.residual_label(se));
                        }
                    }
                }
                CJump::Return(e) => {
                    let r = self
                        .reduce(e, &vs)
                        .map_err(|err| fold_error(self, block, &vs, err))?;
                    break Jump::Return(r.into_expr());
                }
            }
        };
        Ok(Block {
            label: self.residual_label(i),
            assigns: code,
            jump,
        })
    }
}

/// Specializes `p` under division `d` to the static store `vs0`. The result
/// is canonical and takes `p`'s dynamic parameters in their original order.
pub fn specialize(
    p: &Program,
    d: &Division,
    vs0: &StaticStore,
    opts: &SpecializeOptions,
) -> Result<Program, SpecializeError> {
    specialize_uncanonical(p, d, vs0, opts).map(|r| canonicalize(&r))
}

/// As [`specialize`], but keeps the interim labels `label.n`, where `n` is
/// the state's discovery index, and the discovery order of blocks.
pub fn specialize_uncanonical(
    p: &Program,
    d: &Division,
    vs0: &StaticStore,
    opts: &SpecializeOptions,
) -> Result<Program, SpecializeError> {
    let c = Compiled::new(p).map_err(|e| SpecializeError::InvalidInput(e.detail))?;
    if opts.block_budget == 0 || opts.step_budget_static == 0 {
        return Err(SpecializeError::InvalidInput(
            "budgets must be positive".into(),
        ));
    }
    let seed_state = || SpecState {
        label: p.entry.clone(),
        vs: vs0.clone(),
    };
    if let Some(diag) = check_congruence(p, d).into_iter().next() {
        return Err(SpecializeError::CongruenceBreach {
            detail: diag.to_string(),
            state: seed_state(),
        });
    }
    for x in vs0.keys() {
        if !d.is_static(x) {
            return Err(SpecializeError::InvalidInput(format!(
                "`{x}` has a static value but is not static"
            )));
        }
    }
    for x in &p.params {
        if d.is_static(x) && vs0.get(x).is_none() {
            return Err(SpecializeError::InvalidInput(format!(
                "static parameter `{x}` has no value"
            )));
        }
    }
    let is_static: Vec<bool> = c.vars.iter().map(|x| d.is_static(x)).collect();
    let live = liveness(&c);
    let live_static = live
        .iter()
        .map(|set| {
            let mut slots: Vec<usize> = (0..c.vars.len())
                .filter(|&s| set[s] && is_static[s])
                .collect();
            slots.sort_by(|&a, &b| c.vars[a].cmp(&c.vars[b]));
            slots
        })
        .collect();
    let mut spec = Specializer {
        c: &c,
        is_static,
        live_static,
        opts: *opts,
        states: Vec::new(),
        index: HashMap::new(),
        queue: VecDeque::new(),
    };
    let mut vs: Vec<Option<Value>> = vec![None; c.vars.len()];
    for (x, v) in vs0.iter() {
        if let Some(&s) = c.slots.get(x) {
            vs[s] = Some(v.clone());
        }
    }
    let seed = spec.state(c.entry, &vs)?;
    let mut blocks = Vec::new();
    while let Some(i) = spec.queue.pop_front() {
        blocks.push(spec.specialize_state(i)?);
    }
    let residual = Program {
        params: p
            .params
            .iter()
            .filter(|x| !d.is_static(x))
            .cloned()
            .collect(),
        entry: spec.residual_label(seed),
        blocks,
    };
    Ok(residual)
}

/// Reduces `e` under the division and static store.
pub fn reduce_expr(e: &Expr, d: &Division, vs: &StaticStore) -> Result<Expr, SpecializeError> {
    fn go(e: &Expr, d: &Division, vs: &StaticStore) -> Result<Reduced, RunError> {
        match e {
            Expr::Const(v) => Ok(Reduced::Const(v.clone())),
            Expr::Var(x) if d.is_static(x) => {
                vs.get(x).cloned().map(Reduced::Const).ok_or_else(|| {
                    RunError::new(
                        RunErrorKind::Uninitialized,
                        format!("static `{x}` has no value"),
                    )
                })
            }
            Expr::Var(x) => Ok(Reduced::Dyn(Expr::Var(x.clone()))),
            Expr::Prim(p, args) => {
                let args = args
                    .iter()
                    .map(|a| go(a, d, vs))
                    .collect::<Result<Vec<_>, _>>()?;
                if args.iter().all(|a| matches!(a, Reduced::Const(_))) {
                    let vals: Vec<Value> = args
                        .into_iter()
                        .map(|a| match a {
                            Reduced::Const(v) => v,
                            Reduced::Dyn(_) => unreachable!(),
                        })
                        .collect();
                    apply_prim(*p, &vals).map(Reduced::Const)
                } else {
                    Ok(Reduced::Dyn(Expr::Prim(
                        *p,
                        args.into_iter().map(Reduced::into_expr).collect(),
                    )))
                }
            }
        }
    }
    go(e, d, vs)
        .map(Reduced::into_expr)
        .map_err(|error| SpecializeError::Fold {
            error,
            state: SpecState {
                label: Value::nil(),
                vs: vs.clone(),
            },
        })
}

/// Specializes `p` to the given parameter values; supplied parameters are
/// static, the rest dynamic, and the division comes from [`analyze`].
pub fn mix(
    p: &Program,
    static_inputs: &StaticStore,
    opts: &SpecializeOptions,
) -> Result<Program, SpecializeError> {
    for x in static_inputs.keys() {
        if !p.params.contains(x) {
            return Err(SpecializeError::InvalidInput(format!(
                "`{x}` is not a parameter"
            )));
        }
    }
    let param_classes = p
        .params
        .iter()
        .map(|x| {
            let bt = if static_inputs.get(x).is_some() {
                BindingTime::Static
            } else {
                BindingTime::Dynamic
            };
            (x.clone(), bt)
        })
        .collect();
    let d = analyze(p, &param_classes);
    specialize(p, &d, static_inputs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bta::classes;
    use crate::interp::{run, DEFAULT_STEP_BUDGET};
    use crate::lang::{parse_program, print_program};
    use crate::value::parse_datum;
    use BindingTime::{Dynamic as D, Static as S};

    fn pow() -> Program {
        parse_program(include_str!("../../../assets/pow.fcl")).unwrap()
    }

    fn store(text: &str) -> StaticStore {
        StaticStore::from_value(&parse_datum(text).unwrap()).unwrap()
    }

    fn expr(text: &str) -> Expr {
        // Wrap in a one-block program to reuse the expression parser.
        let p = parse_program(&format!("(program (read b e) a ((a () (return {text}))))")).unwrap();
        match &p.blocks[0].jump {
            Jump::Return(e) => e.clone(),
            _ => unreachable!(),
        }
    }

    fn pow_division() -> Division {
        analyze(&pow(), &classes([("b", D), ("e", S)]))
    }

    #[test]
    fn reduce_static_var() {
        let r = reduce_expr(&expr("(var e)"), &pow_division(), &store("((e 2))")).unwrap();
        assert_eq!(r, Expr::Const(Value::int(2)));
    }

    #[test]
    fn reduce_dynamic_untouched() {
        let e = expr("(op * (var b) (var b))");
        assert_eq!(
            reduce_expr(&e, &pow_division(), &StaticStore::new()).unwrap(),
            e
        );
    }

    #[test]
    fn reduce_folds_static_arithmetic() {
        // 2 - 1 by the interpreter's primitive.
        let r = reduce_expr(
            &expr("(op - (var e) (quote 1))"),
            &pow_division(),
            &store("((e 2))"),
        )
        .unwrap();
        assert_eq!(r, Expr::Const(Value::int(1)));
        let r = reduce_expr(
            &expr("(op * (var b) (op - (var e) (quote 1)))"),
            &pow_division(),
            &store("((e 2))"),
        )
        .unwrap();
        assert_eq!(r, expr("(op * (var b) (quote 1))"));
    }

    #[test]
    fn reduce_fold_error() {
        let err = reduce_expr(
            &expr("(op car (var e))"),
            &pow_division(),
            &store("((e 2))"),
        )
        .unwrap_err();
        assert!(
            matches!(err, SpecializeError::Fold { error, .. } if error.kind == RunErrorKind::TypeError)
        );
    }

    #[test]
    fn pow_to_square() {
        let square = specialize(
            &pow(),
            &pow_division(),
            &store("((e 2))"),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(square.params, vec![Symbol::new("b")]);
        assert_eq!(
            print_program(&square),
            "(program (read b) l0\n (\
             (l0 ((:= result (quote 1)) (:= result (op * (var result) (var b))) \
             (:= result (op * (var result) (var b)))) (return (var result)))))\n"
        );
        assert_eq!(run(&square, &[Value::int(3)], 100).unwrap(), Value::int(9));
    }

    #[test]
    fn all_dynamic_division_preserves_pow() {
        let p = pow();
        let d = analyze(&p, &classes([("b", D), ("e", D)]));
        let r = specialize(&p, &d, &StaticStore::new(), &Default::default()).unwrap();
        for b in 0..=10 {
            for e in 0..=6 {
                let args = [Value::int(b), Value::int(e)];
                assert_eq!(
                    run(&r, &args, DEFAULT_STEP_BUDGET),
                    run(&p, &args, DEFAULT_STEP_BUDGET)
                );
            }
        }
    }

    #[test]
    fn static_base_accumulates_without_bound() {
        // With b static, result stays static while e drives the loop
        // dynamically, so every iteration yields a fresh state.
        let p = pow();
        let d = analyze(&p, &classes([("b", S), ("e", D)]));
        assert_eq!(d.get(&Symbol::new("result")), Some(S));
        let opts = SpecializeOptions {
            block_budget: 100,
            ..Default::default()
        };
        assert!(matches!(
            specialize(&p, &d, &store("((b 3))"), &opts),
            Err(SpecializeError::BlockBudgetExceeded { budget: 100, .. })
        ));
    }

    #[test]
    fn mix_wrappers() {
        let square = mix(&pow(), &store("((e 2))"), &Default::default()).unwrap();
        assert_eq!(run(&square, &[Value::int(3)], 100).unwrap(), Value::int(9));

        let id = parse_program("(program (read x) init ((init (return (var x)))))").unwrap();
        let r = mix(&id, &store("((x 7))"), &Default::default()).unwrap();
        assert!(r.params.is_empty());
        assert_eq!(run(&r, &[], 10).unwrap(), Value::int(7));

        let r = mix(&pow(), &StaticStore::new(), &Default::default()).unwrap();
        assert_eq!(r.params.len(), 2);
        assert_eq!(
            run(&r, &[Value::int(2), Value::int(5)], 1000).unwrap(),
            Value::int(32)
        );
    }

    #[test]
    fn no_compression_emits_goto_blocks() {
        let opts = SpecializeOptions {
            compress_gotos: false,
            ..Default::default()
        };
        let r = specialize(&pow(), &pow_division(), &store("((e 2))"), &opts).unwrap();
        assert!(r.blocks.len() > 1);
        assert_eq!(run(&r, &[Value::int(3)], 100).unwrap(), Value::int(9));
    }

    #[test]
    fn budgets_and_breaches() {
        // A static counter bumped under dynamic control never converges.
        let p = parse_program(
            "(program (read d) a ((a ((:= n (quote 0))) (goto h)) \
             (h ((:= n (op + (var n) (quote 1)))) (if (var d) h x)) \
             (x () (return (var n)))))",
        )
        .unwrap();
        let d = analyze(&p, &classes([("d", D)]));
        let opts = SpecializeOptions {
            block_budget: 50,
            ..Default::default()
        };
        assert!(matches!(
            specialize(&p, &d, &StaticStore::new(), &opts),
            Err(SpecializeError::BlockBudgetExceeded { budget: 50, .. })
        ));

        // A purely static infinite loop is cut off by the static step budget.
        let p = parse_program("(program (read d) a ((a () (goto a))))").unwrap();
        let d = analyze(&p, &classes([("d", D)]));
        let opts = SpecializeOptions {
            step_budget_static: 1000,
            ..Default::default()
        };
        assert!(matches!(
            specialize(&p, &d, &StaticStore::new(), &opts),
            Err(SpecializeError::StaticStepBudgetExceeded { budget: 1000, .. })
        ));

        let bad = Division::from_value(&parse_datum("((b D) (e S) (result S))").unwrap()).unwrap();
        assert!(matches!(
            specialize(&pow(), &bad, &store("((e 2))"), &Default::default()),
            Err(SpecializeError::CongruenceBreach { .. })
        ));
        assert!(matches!(
            specialize(
                &pow(),
                &pow_division(),
                &StaticStore::new(),
                &Default::default()
            ),
            Err(SpecializeError::InvalidInput(_))
        ));
    }

    #[test]
    fn liveness_drops_dead_statics() {
        // `k` is dead after `a`, so both dynamic branches share one state.
        let p = parse_program(
            "(program (read d s) a ((a ((:= k (op + (var s) (quote 1)))) (if (var d) b c)) \
             (b ((:= d (op cdr (var d)))) (goto a)) (c () (return (var d)))))",
        )
        .unwrap();
        let live = live_variables(&p).unwrap();
        let names = |l: &str| -> Vec<String> {
            live[&Value::sym(l)].iter().map(|x| x.to_string()).collect()
        };
        assert_eq!(names("a"), ["d", "s"]);
        assert_eq!(names("c"), ["d"]);
        let d = analyze(&p, &classes([("d", D), ("s", S)]));
        let r = specialize(&p, &d, &store("((s 1))"), &Default::default()).unwrap();
        assert_eq!(r.blocks.len(), 3);
    }
}
