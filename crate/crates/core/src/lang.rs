//! The flowchart language L: programs are a list of read parameters, an
//! entry label and labeled blocks of assignments ending in a jump.
//!
//! Concrete syntax and the program-as-data encoding share one shape. A
//! source file is `(program (read v*) entry (block+))`; the encoding drops
//! the two keywords and is `(params entry blocks)`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::value::{parse_datum, print_datum, ParseError, Symbol, Value};

/// Block labels are arbitrary data. Source programs use symbols; the
/// specializer written in L names residual blocks by their (label, store)
/// state, which is a sequence.
pub type Label = Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prim {
    Cons,
    Car,
    Cdr,
    Atom,
    Eq,
    Add,
    Sub,
    Mul,
    Quotient,
    Remainder,
    Lt,
    NumEq,
    Not,
}

impl Prim {
    pub const ALL: [Prim; 13] = [
        Prim::Cons,
        Prim::Car,
        Prim::Cdr,
        Prim::Atom,
        Prim::Eq,
        Prim::Add,
        Prim::Sub,
        Prim::Mul,
        Prim::Quotient,
        Prim::Remainder,
        Prim::Lt,
        Prim::NumEq,
        Prim::Not,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Prim::Cons => "cons",
            Prim::Car => "car",
            Prim::Cdr => "cdr",
            Prim::Atom => "atom?",
            Prim::Eq => "eq?",
            Prim::Add => "+",
            Prim::Sub => "-",
            Prim::Mul => "*",
            Prim::Quotient => "quotient",
            Prim::Remainder => "remainder",
            Prim::Lt => "<",
            Prim::NumEq => "=",
            Prim::Not => "not",
        }
    }

    pub fn from_name(name: &str) -> Option<Prim> {
        Prim::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Prim::Car | Prim::Cdr | Prim::Atom | Prim::Not => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(Value),
    Var(Symbol),
    Prim(Prim, Vec<Expr>),
}

impl Expr {
    /// Calls `f` on every variable read by the expression, left to right.
    pub fn for_each_var(&self, f: &mut impl FnMut(&Symbol)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(x) => f(x),
            Expr::Prim(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    pub fn vars(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.for_each_var(&mut |x| out.push(x.clone()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assign {
    pub target: Symbol,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Jump {
    Goto(Label),
    If(Expr, Label, Label),
    Return(Expr),
}

impl Jump {
    pub fn targets(&self) -> Vec<&Label> {
        match self {
            Jump::Goto(l) => vec![l],
            Jump::If(_, t, e) => vec![t, e],
            Jump::Return(_) => vec![],
        }
    }

    pub fn expr(&self) -> Option<&Expr> {
        match self {
            Jump::Goto(_) => None,
            Jump::If(e, _, _) | Jump::Return(e) => Some(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: Label,
    pub assigns: Vec<Assign>,
    pub jump: Jump,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub params: Vec<Symbol>,
    pub entry: Label,
    pub blocks: Vec<Block>,
}

impl Program {
    pub fn block(&self, label: &Label) -> Option<&Block> {
        self.blocks.iter().find(|b| &b.label == label)
    }

    /// Every variable mentioned anywhere, in first-occurrence order.
    pub fn variables(&self) -> Vec<Symbol> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut add = |x: &Symbol| {
            if seen.insert(x.clone()) {
                out.push(x.clone());
            }
        };
        self.params.iter().for_each(&mut add);
        for b in &self.blocks {
            for a in &b.assigns {
                a.expr.for_each_var(&mut add);
                add(&a.target);
            }
            if let Some(e) = b.jump.expr() {
                e.for_each_var(&mut add);
            }
        }
        out
    }

    /// Variables that are assigned somewhere in the program.
    pub fn assigned(&self) -> HashSet<Symbol> {
        self.blocks
            .iter()
            .flat_map(|b| b.assigns.iter().map(|a| a.target.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("syntax error: {0}")]
    Parse(#[from] ParseError),
    #[error("malformed program: {message} at `{at}`")]
    Syntax { message: String, at: String },
    #[error("primitive `{prim}` takes {expected} argument(s), got {got}")]
    Arity {
        prim: Prim,
        expected: usize,
        got: usize,
    },
}

/// Failure to read a Value as an encoded program.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot decode program: {message} at `{offending}`")]
pub struct DecodeError {
    pub message: String,
    pub offending: Value,
}

fn malformed(message: &str, at: &Value) -> ProgramError {
    ProgramError::Syntax {
        message: message.to_string(),
        at: print_datum(at),
    }
}

fn symbol_of(v: &Value, what: &str) -> Result<Symbol, ProgramError> {
    v.as_symbol()
        .cloned()
        .ok_or_else(|| malformed(&format!("expected {what}"), v))
}

fn items_of<'a>(v: &'a Value, what: &str) -> Result<Vec<&'a Value>, ProgramError> {
    v.items()
        .ok_or_else(|| malformed(&format!("expected {what}"), v))
}

fn expr_from_value(v: &Value) -> Result<Expr, ProgramError> {
    let items = items_of(v, "expression")?;
    let head = items
        .first()
        .ok_or_else(|| malformed("empty expression", v))?;
    match head.as_symbol().map(Symbol::as_str) {
        Some("quote") if items.len() == 2 => Ok(Expr::Const(items[1].clone())),
        Some("var") if items.len() == 2 => Ok(Expr::Var(symbol_of(items[1], "variable")?)),
        Some("op") if items.len() >= 2 => {
            let name = symbol_of(items[1], "primitive name")?;
            let prim = Prim::from_name(name.as_str())
                .ok_or_else(|| malformed("unknown primitive", items[1]))?;
            let args = items[2..]
                .iter()
                .map(|a| expr_from_value(a))
                .collect::<Result<Vec<_>, _>>()?;
            if args.len() != prim.arity() {
                return Err(ProgramError::Arity {
                    prim,
                    expected: prim.arity(),
                    got: args.len(),
                });
            }
            Ok(Expr::Prim(prim, args))
        }
        _ => Err(malformed("expected (quote d), (var x) or (op name e*)", v)),
    }
}

fn jump_from_value(v: &Value) -> Result<Jump, ProgramError> {
    let items = items_of(v, "jump")?;
    match (
        items
            .first()
            .and_then(|h| h.as_symbol())
            .map(Symbol::as_str),
        items.len(),
    ) {
        (Some("goto"), 2) => Ok(Jump::Goto(items[1].clone())),
        (Some("if"), 4) => Ok(Jump::If(
            expr_from_value(items[1])?,
            items[2].clone(),
            items[3].clone(),
        )),
        (Some("return"), 2) => Ok(Jump::Return(expr_from_value(items[1])?)),
        _ => Err(malformed("expected (goto l), (if e l l) or (return e)", v)),
    }
}

fn block_from_value(v: &Value) -> Result<Block, ProgramError> {
    let items = items_of(v, "block")?;
    // `(label jump)` is accepted as shorthand for a block without assignments.
    let (label, assigns, jump) = match items.as_slice() {
        [label, jump] => (*label, Vec::new(), *jump),
        [label, assigns, jump] => (*label, items_of(assigns, "assignment list")?, *jump),
        _ => return Err(malformed("expected (label (assign*) jump)", v)),
    };
    let assigns = assigns
        .into_iter()
        .map(|a| {
            let parts = items_of(a, "assignment")?;
            match parts.as_slice() {
                [op, target, expr] if op.is_symbol(":=") => Ok(Assign {
                    target: symbol_of(target, "variable")?,
                    expr: expr_from_value(expr)?,
                }),
                _ => Err(malformed("expected (:= v expr)", a)),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Block {
        label: label.clone(),
        assigns,
        jump: jump_from_value(jump)?,
    })
}

fn program_from_parts(
    params: &Value,
    entry: &Value,
    blocks: &Value,
) -> Result<Program, ProgramError> {
    let params = items_of(params, "parameter list")?
        .into_iter()
        .map(|p| symbol_of(p, "parameter name"))
        .collect::<Result<Vec<_>, _>>()?;
    let blocks = items_of(blocks, "block list")?
        .into_iter()
        .map(block_from_value)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Program {
        params,
        entry: entry.clone(),
        blocks,
    })
}

/// Parses `.fcl` source text. Label integrity is checked by [`validate`].
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let v = parse_datum(text)?;
    program_from_datum(&v)
}

/// Reads the `(program (read v*) entry (block*))` form from a datum.
pub fn program_from_datum(v: &Value) -> Result<Program, ProgramError> {
    let items = items_of(v, "(program ...)")?;
    match items.as_slice() {
        [kw, read, entry, blocks] if kw.is_symbol("program") => {
            let read_items = items_of(read, "(read v*)")?;
            match read_items.split_first() {
                Some((head, params)) if head.is_symbol("read") => {
                    let params = Value::list(params.iter().map(|p| (*p).clone()));
                    program_from_parts(&params, entry, blocks)
                }
                _ => Err(malformed("expected (read v*)", read)),
            }
        }
        _ => Err(malformed("expected (program (read v*) entry (block*))", v)),
    }
}

fn expr_to_value(e: &Expr) -> Value {
    match e {
        Expr::Const(v) => Value::list([Value::sym("quote"), v.clone()]),
        Expr::Var(x) => Value::list([Value::sym("var"), Value::Sym(x.clone())]),
        Expr::Prim(p, args) => Value::list(
            [Value::sym("op"), Value::sym(p.name())]
                .into_iter()
                .chain(args.iter().map(expr_to_value)),
        ),
    }
}

fn jump_to_value(j: &Jump) -> Value {
    match j {
        Jump::Goto(l) => Value::list([Value::sym("goto"), l.clone()]),
        Jump::If(c, t, e) => {
            Value::list([Value::sym("if"), expr_to_value(c), t.clone(), e.clone()])
        }
        Jump::Return(e) => Value::list([Value::sym("return"), expr_to_value(e)]),
    }
}

fn block_to_value(b: &Block) -> Value {
    let assigns = b.assigns.iter().map(|a| {
        Value::list([
            Value::sym(":="),
            Value::Sym(a.target.clone()),
            expr_to_value(&a.expr),
        ])
    });
    Value::list([
        b.label.clone(),
        Value::list(assigns),
        jump_to_value(&b.jump),
    ])
}

/// Encodes a program as data: `(params entry blocks)`.
pub fn encode_program(p: &Program) -> Value {
    Value::list([
        Value::list(p.params.iter().cloned().map(Value::Sym)),
        p.entry.clone(),
        Value::list(p.blocks.iter().map(block_to_value)),
    ])
}

pub fn decode_program(v: &Value) -> Result<Program, DecodeError> {
    let to_decode_error = |e: ProgramError| match e {
        ProgramError::Syntax { message, at } => DecodeError {
            offending: parse_datum(&at).unwrap_or_else(|_| v.clone()),
            message,
        },
        other => DecodeError {
            message: other.to_string(),
            offending: v.clone(),
        },
    };
    match v.items().as_deref() {
        Some([params, entry, blocks]) => {
            program_from_parts(params, entry, blocks).map_err(to_decode_error)
        }
        _ => Err(DecodeError {
            message: "expected (params entry blocks)".into(),
            offending: v.clone(),
        }),
    }
}

/// Canonical source text: one block per line.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    out.push_str("(program (read");
    for param in &p.params {
        out.push(' ');
        out.push_str(param.as_str());
    }
    out.push_str(") ");
    out.push_str(&print_datum(&p.entry));
    out.push_str("\n (");
    for (i, b) in p.blocks.iter().enumerate() {
        if i > 0 {
            out.push_str("\n  ");
        }
        out.push_str(&print_datum(&block_to_value(b)));
    }
    out.push_str("))\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticCode {
    UnboundLabel,
    DuplicateLabel,
    DuplicateParam,
    CongruenceViolation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    /// Block label the finding is attached to, if any.
    pub label: Option<Label>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{:?} in block {}: {}", self.code, l, self.message),
            None => write!(f, "{:?}: {}", self.code, self.message),
        }
    }
}

/// Checks label integrity and name distinctness.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut params = HashSet::new();
    for x in &p.params {
        if !params.insert(x) {
            out.push(Diagnostic {
                code: DiagnosticCode::DuplicateParam,
                label: None,
                message: format!("parameter `{x}` appears more than once"),
            });
        }
    }
    let mut labels = HashSet::new();
    for b in &p.blocks {
        if !labels.insert(&b.label) {
            out.push(Diagnostic {
                code: DiagnosticCode::DuplicateLabel,
                label: Some(b.label.clone()),
                message: format!("label `{}` is defined more than once", b.label),
            });
        }
    }
    if !labels.contains(&p.entry) {
        out.push(Diagnostic {
            code: DiagnosticCode::UnboundLabel,
            label: None,
            message: format!("entry label `{}` has no block", p.entry),
        });
    }
    for b in &p.blocks {
        for t in b.jump.targets() {
            if !labels.contains(t) {
                out.push(Diagnostic {
                    code: DiagnosticCode::UnboundLabel,
                    label: Some(b.label.clone()),
                    message: format!("jump to undefined label `{t}`"),
                });
            }
        }
    }
    out
}

/// Reorders blocks into depth-first discovery order from the entry, drops
/// unreachable blocks and renames labels `l0, l1, ...` in that order.
///
/// Expects a program that passes [`validate`]; jumps to missing labels are
/// left untouched.
pub fn canonicalize(p: &Program) -> Program {
    let index: HashMap<&Label, usize> = p
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (&b.label, i))
        .collect();
    let mut order = Vec::new();
    let mut visited = vec![false; p.blocks.len()];
    let mut stack: Vec<&Label> = vec![&p.entry];
    while let Some(l) = stack.pop() {
        let Some(&i) = index.get(l) else { continue };
        if visited[i] {
            continue;
        }
        visited[i] = true;
        order.push(i);
        for t in p.blocks[i].jump.targets().into_iter().rev() {
            stack.push(t);
        }
    }
    let names: HashMap<&Label, Label> = order
        .iter()
        .enumerate()
        .map(|(n, &i)| (&p.blocks[i].label, Value::sym(&format!("l{n}"))))
        .collect();
    let rename = |l: &Label| names.get(l).cloned().unwrap_or_else(|| l.clone());
    let blocks = order
        .iter()
        .map(|&i| {
            let b = &p.blocks[i];
            Block {
                label: rename(&b.label),
                assigns: b.assigns.clone(),
                jump: match &b.jump {
                    Jump::Goto(l) => Jump::Goto(rename(l)),
                    Jump::If(c, t, e) => Jump::If(c.clone(), rename(t), rename(e)),
                    Jump::Return(e) => Jump::Return(e.clone()),
                },
            }
        })
        .collect();
    Program {
        params: p.params.clone(),
        entry: rename(&p.entry),
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: &str = "(program (read x) init ((init (return (var x)))))";

    pub(crate) const POW: &str = include_str!("../../../assets/pow.fcl");

    #[test]
    fn parses_identity() {
        let p = parse_program(IDENTITY).unwrap();
        assert_eq!(p.params, vec![Symbol::new("x")]);
        assert_eq!(p.entry, Value::sym("init"));
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.blocks[0].jump, Jump::Return(Expr::Var(Symbol::new("x"))));
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn parses_pow() {
        let p = parse_program(POW).unwrap();
        assert_eq!(p.params, vec![Symbol::new("b"), Symbol::new("e")]);
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn missing_label_parses_then_fails_validation() {
        let p = parse_program("(program (read x) a ((a () (goto b))))").unwrap();
        let diags = validate(&p);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagnosticCode::UnboundLabel);
    }

    #[test]
    fn duplicate_label_and_param() {
        let p = parse_program(
            "(program (read x x) a ((a () (return (var x))) (a () (return (var x)))))",
        )
        .unwrap();
        let codes: Vec<_> = validate(&p).into_iter().map(|d| d.code).collect();
        assert_eq!(
            codes,
            vec![
                DiagnosticCode::DuplicateParam,
                DiagnosticCode::DuplicateLabel
            ]
        );
    }

    #[test]
    fn arity_is_checked_at_parse_time() {
        let err = parse_program("(program (read x) a ((a () (return (op car (var x) (var x))))))")
            .unwrap_err();
        assert!(matches!(
            err,
            ProgramError::Arity {
                prim: Prim::Car,
                expected: 1,
                got: 2
            }
        ));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse_program("(program (read x) a ((a () (jump b))))"),
            Err(ProgramError::Syntax { .. })
        ));
        assert!(matches!(
            parse_program("(program (read x) a ((a () (return (op frob (var x))))))"),
            Err(ProgramError::Syntax { .. })
        ));
        assert!(matches!(
            parse_program("(program"),
            Err(ProgramError::Parse(_))
        ));
    }

    #[test]
    fn print_round_trips() {
        for src in [IDENTITY, POW] {
            let p = parse_program(src).unwrap();
            let text = print_program(&p);
            assert_eq!(parse_program(&text).unwrap(), p);
            assert_eq!(print_program(&parse_program(&text).unwrap()), text);
        }
    }

    #[test]
    fn identity_encoding() {
        let p = parse_program(IDENTITY).unwrap();
        let v = encode_program(&p);
        assert_eq!(print_datum(&v), "((x) init ((init () (return (var x)))))");
        assert_eq!(decode_program(&v).unwrap(), p);
    }

    #[test]
    fn decode_error_names_offending_value() {
        let v = parse_datum("((x) a ((a () (return (bogus x)))))").unwrap();
        let err = decode_program(&v).unwrap_err();
        assert_eq!(print_datum(&err.offending), "(bogus x)");
        let err = decode_program(&Value::int(3)).unwrap_err();
        assert_eq!(err.offending, Value::int(3));
    }

    #[test]
    fn canonicalize_identity_is_fixpoint_after_one_step() {
        let p = parse_program(IDENTITY).unwrap();
        let c = canonicalize(&p);
        assert_eq!(canonicalize(&c), c);
        assert_eq!(c.entry, Value::sym("l0"));
    }

    #[test]
    fn canonicalize_ignores_block_order() {
        let p = parse_program(POW).unwrap();
        let mut shuffled = p.clone();
        shuffled.blocks.reverse();
        assert_ne!(p, shuffled);
        assert_eq!(canonicalize(&p), canonicalize(&shuffled));
    }

    #[test]
    fn canonicalize_drops_unreachable() {
        let p = parse_program(
            "(program (read x) a ((a () (goto c)) (b () (goto a)) (c () (return (var x)))))",
        )
        .unwrap();
        let c = canonicalize(&p);
        assert_eq!(c.blocks.len(), 2);
        assert_eq!(
            print_program(&c),
            "(program (read x) l0\n ((l0 () (goto l1))\n  (l1 () (return (var x)))))\n"
        );
    }

    #[test]
    fn canonical_order_is_depth_first_then_branch_first() {
        let p = parse_program(
            "(program (read x) a ((a () (if (var x) b c)) (c () (return (quote 2))) \
             (b () (goto d)) (d () (return (quote 1)))))",
        )
        .unwrap();
        let c = canonicalize(&p);
        let order: Vec<String> = c
            .blocks
            .iter()
            .map(|b| print_datum(&block_to_value(b)))
            .collect();
        assert_eq!(
            order,
            vec![
                "(l0 () (if (var x) l1 l3))",
                "(l1 () (goto l2))",
                "(l2 () (return (quote 1)))",
                "(l3 () (return (quote 2)))",
            ]
        );
    }
}
