//! The guest language W and its interpreter written in L.
//!
//! A W program is the datum `(wprogram (params...) (stmts...))` with
//! statements `(set x e)`, `(while e (stmts...))`, `(if e (stmts...)
//! (stmts...))`, `(return e)` and expressions `(const d)`, `(ref x)`,
//! `(prim name e...)` over the primitives of L. Falling off the end of the
//! program returns `()`.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::interp::{Machine, RunError, DEFAULT_STEP_BUDGET};
use crate::lang::{parse_program, Prim, Program};
use crate::value::{is_symbol_name, parse_datum, print_datum, ParseError, Value};

pub const INTERP_W_SOURCE: &str = include_str!("../../../assets/interp_w.fcl");
pub const INTERP_W_ALT_SOURCE: &str = include_str!("../../../assets/interp_w_alt.fcl");
pub const TOY_INTERP_SOURCE: &str = include_str!("../../../assets/toy_interp.fcl");
pub const POW_W_SOURCE: &str = include_str!("../../../assets/pow.w");
pub const IDENTITY_W_SOURCE: &str = include_str!("../../../assets/identity.w");

/// A well-formed W program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WProgram(Value);

impl WProgram {
    pub fn value(&self) -> &Value {
        &self.0
    }

    pub fn params(&self) -> Vec<&Value> {
        let items = self.0.items().expect("validated");
        items[1].items().expect("validated")
    }

    pub fn from_value(v: &Value) -> Result<WProgram, WSyntaxError> {
        check_program(v)?;
        Ok(WProgram(v.clone()))
    }
}

impl fmt::Display for WProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WSyntaxError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    /// `path` lists child indices from the root datum down to the
    /// offending sub-datum.
    #[error("W syntax error at [{}]: {message} in {offending}", path_text(.path))]
    Syntax {
        path: Vec<usize>,
        message: String,
        offending: String,
    },
}

fn path_text(path: &[usize]) -> String {
    path.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_w(text: &str) -> Result<WProgram, WSyntaxError> {
    WProgram::from_value(&parse_datum(text)?)
}

fn err(path: &[usize], message: impl Into<String>, v: &Value) -> WSyntaxError {
    WSyntaxError::Syntax {
        path: path.to_vec(),
        message: message.into(),
        offending: print_datum(v),
    }
}

fn items<'a>(v: &'a Value, path: &[usize], what: &str) -> Result<Vec<&'a Value>, WSyntaxError> {
    v.items()
        .ok_or_else(|| err(path, format!("expected {what}"), v))
}

fn check_var(v: &Value, path: &[usize]) -> Result<(), WSyntaxError> {
    match v.as_symbol() {
        Some(s) if is_symbol_name(s.as_str()) => Ok(()),
        _ => Err(err(path, "expected a variable name", v)),
    }
}

fn check_program(v: &Value) -> Result<(), WSyntaxError> {
    let top = items(v, &[], "(wprogram (params...) (stmts...))")?;
    if top.len() != 3 || !top[0].is_symbol("wprogram") {
        return Err(err(&[], "expected (wprogram (params...) (stmts...))", v));
    }
    let mut seen = HashSet::new();
    for (i, p) in items(top[1], &[1], "a parameter list")?
        .into_iter()
        .enumerate()
    {
        check_var(p, &[1, i])?;
        if !seen.insert(p.clone()) {
            return Err(err(&[1, i], "duplicate parameter", p));
        }
    }
    let mut path = vec![2];
    check_stmts(top[2], &mut path)
}

fn check_stmts(v: &Value, path: &mut Vec<usize>) -> Result<(), WSyntaxError> {
    for (i, s) in items(v, path, "a statement list")?.into_iter().enumerate() {
        path.push(i);
        check_stmt(s, path)?;
        path.pop();
    }
    Ok(())
}

fn check_stmt(v: &Value, path: &mut Vec<usize>) -> Result<(), WSyntaxError> {
    let parts = items(v, path, "a statement")?;
    let head = parts
        .first()
        .and_then(|h| h.as_symbol())
        .map(|s| s.as_str());
    let shape_ok = match (head, parts.len()) {
        (Some("set"), 3) => {
            path.push(1);
            check_var(parts[1], path)?;
            path.pop();
            path.push(2);
            check_expr(parts[2], path)?;
            path.pop();
            true
        }
        (Some("return"), 2) => {
            path.push(1);
            check_expr(parts[1], path)?;
            path.pop();
            true
        }
        (Some("while"), 3) | (Some("if"), 4) => {
            path.push(1);
            check_expr(parts[1], path)?;
            path.pop();
            for (i, body) in parts.iter().enumerate().skip(2) {
                path.push(i);
                check_stmts(body, path)?;
                path.pop();
            }
            true
        }
        _ => false,
    };
    if shape_ok {
        Ok(())
    } else {
        Err(err(
            path,
            "expected (set x e), (while e (...)), (if e (...) (...)) or (return e)",
            v,
        ))
    }
}

fn check_expr(v: &Value, path: &mut Vec<usize>) -> Result<(), WSyntaxError> {
    let parts = items(v, path, "an expression")?;
    let head = parts
        .first()
        .and_then(|h| h.as_symbol())
        .map(|s| s.as_str());
    match (head, parts.len()) {
        (Some("const"), 2) => Ok(()),
        (Some("ref"), 2) => {
            path.push(1);
            check_var(parts[1], path)?;
            path.pop();
            Ok(())
        }
        (Some("prim"), n) if n >= 2 => {
            let prim = parts[1]
                .as_symbol()
                .and_then(|s| Prim::from_name(s.as_str()))
                .ok_or_else(|| err(path, "unknown primitive", parts[1]))?;
            if prim.arity() != n - 2 {
                return Err(err(
                    path,
                    format!("{} takes {} argument(s)", prim.name(), prim.arity()),
                    v,
                ));
            }
            for (i, arg) in parts.iter().enumerate().skip(2) {
                path.push(i);
                check_expr(arg, path)?;
                path.pop();
            }
            Ok(())
        }
        _ => Err(err(
            path,
            "expected (const d), (ref x) or (prim name e...)",
            v,
        )),
    }
}

/// The shipped W interpreter, params (wprog input).
pub fn interp_w() -> &'static Program {
    static P: OnceLock<Program> = OnceLock::new();
    P.get_or_init(|| parse_program(INTERP_W_SOURCE).expect("shipped interpreter parses"))
}

/// The shipped interpreter with every variable and label renamed by a
/// `z_` prefix.
pub fn interp_w_alt() -> &'static Program {
    static P: OnceLock<Program> = OnceLock::new();
    P.get_or_init(|| parse_program(INTERP_W_ALT_SOURCE).expect("shipped interpreter parses"))
}

/// A three-block interpreter: `prog` is a list of integers added in turn
/// to the accumulator `acc`.
pub fn toy_interp() -> &'static Program {
    static P: OnceLock<Program> = OnceLock::new();
    P.get_or_init(|| parse_program(TOY_INTERP_SOURCE).expect("shipped interpreter parses"))
}

pub fn pow_w() -> WProgram {
    parse_w(POW_W_SOURCE).expect("shipped W program parses")
}

pub fn identity_w() -> WProgram {
    parse_w(IDENTITY_W_SOURCE).expect("shipped W program parses")
}

fn interp_machine() -> &'static Machine {
    static M: OnceLock<Machine> = OnceLock::new();
    M.get_or_init(|| Machine::new(interp_w()).expect("shipped interpreter is valid"))
}

/// Runs a W program through the L interpreter.
pub fn run_w(wp: &WProgram, inputs: &[Value]) -> Result<Value, RunError> {
    run_w_with_budget(wp, inputs, DEFAULT_STEP_BUDGET)
}

pub fn run_w_with_budget(
    wp: &WProgram,
    inputs: &[Value],
    step_budget: u64,
) -> Result<Value, RunError> {
    interp_machine().run(
        &[wp.value().clone(), Value::list(inputs.iter().cloned())],
        step_budget,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bta::{analyze, classes, BindingTime};
    use crate::lang::validate;

    #[test]
    fn shipped_assets_are_valid() {
        for p in [interp_w(), interp_w_alt(), toy_interp()] {
            assert!(validate(p).is_empty());
        }
        assert_eq!(pow_w().params().len(), 2);
        assert_eq!(identity_w().params().len(), 1);
    }

    #[test]
    fn pow_runs() {
        let run = |b, e| run_w(&pow_w(), &[Value::int(b), Value::int(e)]).unwrap();
        assert_eq!(run(3, 2), Value::int(9));
        assert_eq!(run(2, 10), Value::int(1024));
        assert_eq!(run(5, 0), Value::int(1));
        assert_eq!(
            run_w(&identity_w(), &[Value::int(42)]).unwrap(),
            Value::int(42)
        );
    }

    #[test]
    fn syntax_errors_have_paths() {
        let e = parse_w("(wprogram (x) ((set x (const 1)) (sett x (const 2))))").unwrap_err();
        match e {
            WSyntaxError::Syntax { path, .. } => assert_eq!(path, vec![2, 1]),
            other => panic!("{other:?}"),
        }
        let e = parse_w("(wprogram (x) ((return (prim car (ref x) (ref x)))))").unwrap_err();
        assert!(e.to_string().contains("car takes 1"));
        assert!(parse_w("(wprogram (x x) ())").is_err());
        assert!(parse_w("(wprogram (x) ((while (ref x) ((return (ref 3))))))").is_err());
        assert!(matches!(parse_w("(wprogram"), Err(WSyntaxError::Parse(_))));
    }

    #[test]
    fn control_flow() {
        let p = parse_w(
            "(wprogram (n) ((set s (const 0)) \
             (while (prim < (const 0) (ref n)) \
               ((if (prim = (prim remainder (ref n) (const 2)) (const 0)) \
                  ((set s (prim + (ref s) (ref n)))) ()) \
                (set n (prim - (ref n) (const 1))))) \
             (return (ref s))))",
        )
        .unwrap();
        // Sum of even numbers up to 10.
        assert_eq!(run_w(&p, &[Value::int(10)]).unwrap(), Value::int(30));
        let empty = parse_w("(wprogram (n) ())").unwrap();
        assert_eq!(run_w(&empty, &[Value::int(1)]).unwrap(), Value::nil());
        let falls = parse_w("(wprogram (n) ((set n (const 2))))").unwrap();
        assert_eq!(run_w(&falls, &[Value::int(1)]).unwrap(), Value::nil());
    }

    #[test]
    fn runtime_errors() {
        let p = parse_w("(wprogram (x) ((return (ref y))))").unwrap();
        assert!(run_w(&p, &[Value::int(1)]).is_err());
        assert!(run_w(&pow_w(), &[Value::int(1)]).is_err());
    }

    #[test]
    fn pc_is_static() {
        let d = analyze(
            interp_w(),
            &classes([
                ("wprog", BindingTime::Static),
                ("input", BindingTime::Dynamic),
            ]),
        );
        for x in ["pc", "table", "ins"] {
            assert!(d.is_static(&crate::value::Symbol::new(x)), "{x}");
        }
        for x in ["env", "wvals"] {
            assert!(!d.is_static(&crate::value::Symbol::new(x)), "{x}");
        }
    }
}
