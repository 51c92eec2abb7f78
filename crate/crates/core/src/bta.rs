//! Monovariant binding-time analysis.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::lang::{Diagnostic, DiagnosticCode, Program};
use crate::value::{print_datum, Symbol, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BindingTime {
    Static,
    Dynamic,
}

impl BindingTime {
    pub fn symbol(self) -> &'static str {
        match self {
            BindingTime::Static => "S",
            BindingTime::Dynamic => "D",
        }
    }

    pub fn is_static(self) -> bool {
        self == BindingTime::Static
    }
}

impl fmt::Display for BindingTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Binding time of every variable of a program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Division(BTreeMap<Symbol, BindingTime>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed division: {0}")]
pub struct DivisionFormatError(pub String);

impl Division {
    pub fn new() -> Division {
        Division::default()
    }

    pub fn get(&self, x: &Symbol) -> Option<BindingTime> {
        self.0.get(x).copied()
    }

    /// Unknown variables count as dynamic.
    pub fn is_static(&self, x: &Symbol) -> bool {
        self.get(x) == Some(BindingTime::Static)
    }

    pub fn set(&mut self, x: Symbol, bt: BindingTime) {
        self.0.insert(x, bt);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, BindingTime)> {
        self.0.iter().map(|(x, bt)| (x, *bt))
    }

    pub fn static_vars(&self) -> impl Iterator<Item = &Symbol> {
        self.iter().filter(|(_, bt)| bt.is_static()).map(|(x, _)| x)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `((var S|D) ...)` sorted by variable name.
    pub fn to_value(&self) -> Value {
        Value::list(
            self.iter()
                .map(|(x, bt)| Value::list([Value::Sym(x.clone()), Value::sym(bt.symbol())])),
        )
    }

    pub fn from_value(v: &Value) -> Result<Division, DivisionFormatError> {
        let bad = |v: &Value| DivisionFormatError(print_datum(v));
        let mut d = Division::new();
        for entry in v.as_list().ok_or_else(|| bad(v))?.iter() {
            match entry.items().as_deref() {
                Some([Value::Sym(x), bt]) => {
                    let bt = match bt.as_symbol().map(Symbol::as_str) {
                        Some("S") => BindingTime::Static,
                        Some("D") => BindingTime::Dynamic,
                        _ => return Err(bad(entry)),
                    };
                    d.set(x.clone(), bt);
                }
                _ => return Err(bad(entry)),
            }
        }
        Ok(d)
    }
}

impl FromIterator<(Symbol, BindingTime)> for Division {
    fn from_iter<I: IntoIterator<Item = (Symbol, BindingTime)>>(iter: I) -> Division {
        Division(iter.into_iter().collect())
    }
}

/// Least-dynamic congruent division given the binding times of the
/// parameters. Parameters missing from `param_classes` are dynamic.
pub fn analyze(p: &Program, param_classes: &BTreeMap<Symbol, BindingTime>) -> Division {
    analyze_with(p, param_classes, &[])
}

/// As [`analyze`], additionally forcing `forced_dynamic` to be dynamic.
pub fn analyze_with(
    p: &Program,
    param_classes: &BTreeMap<Symbol, BindingTime>,
    forced_dynamic: &[Symbol],
) -> Division {
    let mut d: Division = p
        .variables()
        .into_iter()
        .map(|x| (x, BindingTime::Static))
        .collect();
    for x in &p.params {
        let bt = param_classes
            .get(x)
            .copied()
            .unwrap_or(BindingTime::Dynamic);
        d.set(x.clone(), bt);
    }
    for x in forced_dynamic {
        d.set(x.clone(), BindingTime::Dynamic);
    }
    let mut changed = true;
    while changed {
        changed = false;
        for b in &p.blocks {
            for a in &b.assigns {
                if d.is_static(&a.target) && a.expr.vars().iter().any(|x| !d.is_static(x)) {
                    d.set(a.target.clone(), BindingTime::Dynamic);
                    changed = true;
                }
            }
        }
    }
    d
}

/// Reports every assignment whose static target depends on a dynamic
/// variable, and every variable the division does not cover.
pub fn check_congruence(p: &Program, d: &Division) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for x in p.variables() {
        if d.get(&x).is_none() {
            out.push(Diagnostic {
                code: DiagnosticCode::CongruenceViolation,
                label: None,
                message: format!("variable `{x}` has no binding time"),
            });
        }
    }
    for b in &p.blocks {
        for (i, a) in b.assigns.iter().enumerate() {
            if !d.is_static(&a.target) {
                continue;
            }
            if let Some(dyn_var) = a.expr.vars().into_iter().find(|x| !d.is_static(x)) {
                out.push(Diagnostic {
                    code: DiagnosticCode::CongruenceViolation,
                    label: Some(b.label.clone()),
                    message: format!(
                        "assignment {i}: static `{}` depends on dynamic `{dyn_var}`",
                        a.target
                    ),
                });
            }
        }
    }
    out
}

/// Parameter classes from a list of `(name, static?)` pairs.
pub fn classes<'a>(
    pairs: impl IntoIterator<Item = (&'a str, BindingTime)>,
) -> BTreeMap<Symbol, BindingTime> {
    pairs
        .into_iter()
        .map(|(x, bt)| (Symbol::new(x), bt))
        .collect()
}
