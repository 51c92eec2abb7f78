//! The three projections, the self-generation check, and the comparison
//! helpers they are verified with.
//!
//! Compilers and compiler generators are residuals of `mix_l`, so they take
//! `mix_l`'s single dynamic parameter `vs0`. The `apply_*` functions wrap
//! their argument into that static-store encoding and decode the result.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::bta::{analyze, BindingTime, Division};
use crate::interp::{run, Machine, RunError, RunErrorKind};
use crate::lang::{
    canonicalize, decode_program, encode_program, print_program, DecodeError, Program,
};
use crate::mix::{specialize, SpecializeError, SpecializeOptions, StaticStore};
use crate::mix_object::MixObjectBundle;
use crate::report::{EquivalenceReport, Mode, PointVerdict, Verdict};
use crate::value::{print_datum, Symbol, Value};

/// Step budget for running compilers and compiler generators.
pub const DEFAULT_APPLY_STEP_BUDGET: u64 = 4_000_000_000;

/// Seed for random programs and sampled grids.
pub const DEFAULT_SEED: u64 = 0xF47A;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error(transparent)]
    Specialize(#[from] SpecializeError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("residual is not a program encoding: {0}")]
    Decode(#[from] DecodeError),
    #[error("{0}")]
    Input(String),
}

impl ProjectionError {
    pub fn is_budget(&self) -> bool {
        match self {
            ProjectionError::Specialize(
                SpecializeError::BlockBudgetExceeded { .. }
                | SpecializeError::StaticStepBudgetExceeded { .. },
            ) => true,
            ProjectionError::Run(e) => e.kind == RunErrorKind::StepBudgetExceeded,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionOptions {
    pub specialize: SpecializeOptions,
    /// Step budget for running residual compilers and generators.
    pub step_budget: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            specialize: SpecializeOptions::default(),
            step_budget: DEFAULT_APPLY_STEP_BUDGET,
        }
    }
}

/// The division an interpreter is specialized under: its first parameter
/// (the guest program) static, the others dynamic.
pub fn interp_division(interp: &Program) -> Result<Division, ProjectionError> {
    let first = interp
        .params
        .first()
        .ok_or_else(|| ProjectionError::Input("interpreter has no parameters".into()))?;
    let classes = interp
        .params
        .iter()
        .map(|x| {
            let bt = if x == first {
                BindingTime::Static
            } else {
                BindingTime::Dynamic
            };
            (x.clone(), bt)
        })
        .collect();
    Ok(analyze(interp, &classes))
}

fn guest_store(interp: &Program, guest: &Value) -> Result<StaticStore, ProjectionError> {
    let first = interp
        .params
        .first()
        .ok_or_else(|| ProjectionError::Input("interpreter has no parameters".into()))?;
    Ok([(first.clone(), guest.clone())].into_iter().collect())
}

/// The static store `mix_l` is specialized to when its target is `p`.
pub fn mix_inputs(p: &Program, d: &Division) -> StaticStore {
    [
        (Symbol::new("program"), encode_program(p)),
        (Symbol::new("division"), d.to_value()),
    ]
    .into_iter()
    .collect()
}

pub fn project1(interp: &Program, guest: &Value) -> Result<Program, ProjectionError> {
    project1_with(interp, guest, &SpecializeOptions::default())
}

pub fn project1_with(
    interp: &Program,
    guest: &Value,
    opts: &SpecializeOptions,
) -> Result<Program, ProjectionError> {
    let d = interp_division(interp)?;
    Ok(specialize(interp, &d, &guest_store(interp, guest)?, opts)?)
}

pub fn project2(bundle: &MixObjectBundle, interp: &Program) -> Result<Program, ProjectionError> {
    project2_with(bundle, interp, &SpecializeOptions::default())
}

pub fn project2_with(
    bundle: &MixObjectBundle,
    interp: &Program,
    opts: &SpecializeOptions,
) -> Result<Program, ProjectionError> {
    let d = interp_division(interp)?;
    Ok(specialize(
        &bundle.mix_l,
        &bundle.div_mix,
        &mix_inputs(interp, &d),
        opts,
    )?)
}

pub fn project3(bundle: &MixObjectBundle) -> Result<Program, ProjectionError> {
    project3_with(bundle, &SpecializeOptions::default())
}

pub fn project3_with(
    bundle: &MixObjectBundle,
    opts: &SpecializeOptions,
) -> Result<Program, ProjectionError> {
    Ok(specialize(
        &bundle.mix_l,
        &bundle.div_mix,
        &mix_inputs(&bundle.mix_l, &bundle.div_mix),
        opts,
    )?)
}

/// Runs a residual of `mix_l` on the static store `vs0` and returns the
/// canonical program it produces, with the number of steps taken.
pub fn apply_residual(
    residual: &Program,
    vs0: &StaticStore,
    step_budget: u64,
) -> Result<(Program, u64), ProjectionError> {
    if residual.params.len() != 1 {
        return Err(ProjectionError::Input(format!(
            "expected a one-parameter residual, found {} parameters",
            residual.params.len()
        )));
    }
    let machine = Machine::new(residual)?;
    let (out, steps) = machine.run_counted(&[vs0.to_value()], step_budget)?;
    Ok((canonicalize(&decode_program(&out)?), steps))
}

/// Compiles a guest program with a compiler from [`project2`]. The guest is
/// bound to `wprog`, the guest parameter of the shipped interpreter.
pub fn apply_compiler(compiler: &Program, guest: &Value) -> Result<Program, ProjectionError> {
    let vs0 = [(Symbol::new("wprog"), guest.clone())]
        .into_iter()
        .collect();
    apply_compiler_store(compiler, &vs0, DEFAULT_APPLY_STEP_BUDGET)
}

pub fn apply_compiler_store(
    compiler: &Program,
    vs0: &StaticStore,
    step_budget: u64,
) -> Result<Program, ProjectionError> {
    apply_residual(compiler, vs0, step_budget).map(|(p, _)| p)
}

/// Builds the generating extension of `interp` (a compiler) with a
/// compiler generator from [`project3`].
pub fn apply_cogen(cogen: &Program, interp: &Program) -> Result<Program, ProjectionError> {
    let d = interp_division(interp)?;
    apply_cogen_with(cogen, interp, &d, DEFAULT_APPLY_STEP_BUDGET)
}

pub fn apply_cogen_with(
    cogen: &Program,
    program: &Program,
    division: &Division,
    step_budget: u64,
) -> Result<Program, ProjectionError> {
    apply_residual(cogen, &mix_inputs(program, division), step_budget).map(|(p, _)| p)
}

/// Checks that `cogen` regenerates itself from `mix_l`. The report has a
/// structural point (the regenerated cogen equals `cogen` canonically) and
/// a functional point (both produce the same compiler from the shipped W
/// interpreter).
pub fn cogen_fixpoint_check(cogen: &Program, bundle: &MixObjectBundle) -> EquivalenceReport {
    cogen_fixpoint_check_with(
        cogen,
        bundle,
        crate::guest::interp_w(),
        None,
        DEFAULT_APPLY_STEP_BUDGET,
    )
}

/// As [`cogen_fixpoint_check`] for any interpreter. `compiler`, when given,
/// is taken as `cogen`'s own output on `interp` instead of recomputing it.
pub fn cogen_fixpoint_check_with(
    cogen: &Program,
    bundle: &MixObjectBundle,
    interp: &Program,
    compiler: Option<&Program>,
    step_budget: u64,
) -> EquivalenceReport {
    let point = |name: &str, mode, verdict| PointVerdict {
        point: name.to_string(),
        mode,
        verdict,
    };
    let grid = vec![
        "cogen(mix_l) = cogen".to_string(),
        "compilers from interp".to_string(),
    ];
    let cogen2 = match apply_cogen_with(cogen, &bundle.mix_l, &bundle.div_mix, step_budget) {
        Ok(p) => p,
        Err(e) => {
            let message = format!("applying cogen to mix_l: {e}");
            let verdicts = vec![
                point(
                    &grid[0],
                    Mode::Structural,
                    Verdict::Error {
                        message: message.clone(),
                    },
                ),
                point(&grid[1], Mode::Functional, Verdict::Error { message }),
            ];
            return EquivalenceReport::new(Mode::Functional, grid, verdicts);
        }
    };
    let structural = match first_difference(&canonicalize(cogen), &cogen2) {
        None => Verdict::Equal,
        Some((left, right)) => Verdict::Unequal { left, right },
    };
    let compilers = || -> Result<(Program, Program), ProjectionError> {
        let d = interp_division(interp)?;
        let a = match compiler {
            Some(c) => canonicalize(c),
            None => apply_cogen_with(cogen, interp, &d, step_budget)?,
        };
        let b = apply_cogen_with(&cogen2, interp, &d, step_budget)?;
        Ok((a, b))
    };
    let functional = match compilers() {
        Ok((a, b)) => match first_difference(&a, &b) {
            None => Verdict::Equal,
            Some((left, right)) => Verdict::Unequal { left, right },
        },
        Err(e) => Verdict::Error {
            message: e.to_string(),
        },
    };
    let verdicts = vec![
        point(&grid[0], Mode::Structural, structural),
        point(&grid[1], Mode::Functional, functional),
    ];
    EquivalenceReport::new(Mode::Functional, grid, verdicts)
}

/// The first block where two canonical programs differ, printed, or `None`
/// if they are equal.
pub fn first_difference(a: &Program, b: &Program) -> Option<(String, String)> {
    if a == b {
        return None;
    }
    if a.params != b.params {
        let show =
            |p: &Program| print_datum(&Value::list(p.params.iter().cloned().map(Value::Sym)));
        return Some((format!("params {}", show(a)), format!("params {}", show(b))));
    }
    let show = |p: &Program, i: usize| {
        p.blocks.get(i).map_or_else(
            || format!("no block {i} ({} blocks)", p.blocks.len()),
            |blk| {
                let one = Program {
                    params: vec![],
                    entry: blk.label.clone(),
                    blocks: vec![blk.clone()],
                };
                format!("block {i}: {}", print_program(&one).trim())
            },
        )
    };
    let n = a.blocks.len().max(b.blocks.len());
    for i in 0..n {
        if a.blocks.get(i) != b.blocks.get(i) {
            return Some((show(a, i), show(b, i)));
        }
    }
    Some((format!("entry {}", a.entry), format!("entry {}", b.entry)))
}

/// Structural comparison of canonical forms, else pointwise comparison of
/// runs on `grid`. Two runs that fail with the same error kind agree.
pub fn check_equivalence(
    a: &Program,
    b: &Program,
    grid: &[Vec<Value>],
    step_budget: u64,
) -> EquivalenceReport {
    let names: Vec<String> = grid
        .iter()
        .map(|t| print_datum(&Value::list(t.clone())))
        .collect();
    if canonicalize(a) == canonicalize(b) {
        let verdicts = names
            .iter()
            .map(|n| PointVerdict {
                point: n.clone(),
                mode: Mode::Structural,
                verdict: Verdict::Equal,
            })
            .collect();
        return EquivalenceReport::new(Mode::Structural, names, verdicts);
    }
    let verdicts = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .iter()
            .map(|t| s.spawn(move || compare_point(a, b, t, step_budget)))
            .collect();
        handles
            .into_iter()
            .zip(&names)
            .map(|(h, n)| PointVerdict {
                point: n.clone(),
                mode: Mode::Functional,
                verdict: h.join().unwrap_or_else(|_| Verdict::Error {
                    message: "evaluation panicked".into(),
                }),
            })
            .collect()
    });
    EquivalenceReport::new(Mode::Functional, names, verdicts)
}

fn compare_point(a: &Program, b: &Program, inputs: &[Value], step_budget: u64) -> Verdict {
    let show = |r: &Result<Value, RunError>| match r {
        Ok(v) => print_datum(v),
        Err(e) => format!("error {:?}", e.kind),
    };
    let x = run(a, inputs, step_budget);
    let y = run(b, inputs, step_budget);
    match (&x, &y) {
        (Ok(u), Ok(v)) if u == v => Verdict::Equal,
        (Err(e), Err(f)) if e.kind == f.kind => Verdict::Equal,
        _ => Verdict::Unequal {
            left: show(&x),
            right: show(&y),
        },
    }
}

/// The grid b in 0..=10, e in 0..=6 as `(b e)` tuples.
pub fn pow_grid() -> Vec<Vec<Value>> {
    (0..=10)
        .flat_map(|b| (0..=6).map(move |e| vec![Value::int(b), Value::int(e)]))
        .collect()
}

/// Wraps each tuple into a single sequence argument, the input convention
/// of the interpreter and its residuals.
pub fn as_guest_inputs(grid: &[Vec<Value>]) -> Vec<Vec<Value>> {
    grid.iter().map(|t| vec![Value::list(t.clone())]).collect()
}

/// Inputs, sizes and costs of one pipeline run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Provenance {
    pub guest: String,
    pub block_budget: usize,
    pub step_budget: u64,
    pub target_blocks: usize,
    pub compiler_blocks: usize,
    pub cogen_blocks: usize,
    #[serde(skip)]
    pub timings: Vec<(String, Duration)>,
}

#[derive(Debug, Clone)]
pub struct ProjectionArtifacts {
    pub target_l: Program,
    pub compiler_l: Program,
    pub cogen_l: Program,
    pub provenance: Provenance,
}

/// Runs all three projections for `interp` and `guest`.
pub fn project_all(
    bundle: &MixObjectBundle,
    interp: &Program,
    guest_name: &str,
    guest: &Value,
    opts: &ProjectionOptions,
) -> Result<ProjectionArtifacts, ProjectionError> {
    let mut timings = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Result<Program, ProjectionError>| {
        let t = Instant::now();
        let r = f();
        timings.push((name.to_string(), t.elapsed()));
        r
    };
    let target_l = timed("project1", &mut || {
        project1_with(interp, guest, &opts.specialize)
    })?;
    let compiler_l = timed("project2", &mut || {
        project2_with(bundle, interp, &opts.specialize)
    })?;
    let cogen_l = timed("project3", &mut || project3_with(bundle, &opts.specialize))?;
    let provenance = Provenance {
        guest: guest_name.to_string(),
        block_budget: opts.specialize.block_budget,
        step_budget: opts.step_budget,
        target_blocks: target_l.blocks.len(),
        compiler_blocks: compiler_l.blocks.len(),
        cogen_blocks: cogen_l.blocks.len(),
        timings,
    };
    Ok(ProjectionArtifacts {
        target_l,
        compiler_l,
        cogen_l,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guest::{identity_w, interp_w, pow_w, run_w};
    use crate::lang::parse_program;

    #[test]
    fn p1_pow() {
        let target = project1(interp_w(), pow_w().value()).unwrap();
        assert_eq!(target.params, vec![Symbol::new("input")]);
        let r = run(
            &target,
            &[Value::list([Value::int(3), Value::int(2)])],
            1_000_000,
        )
        .unwrap();
        assert_eq!(r, Value::int(9));
    }

    #[test]
    fn p1_identity() {
        let target = project1(interp_w(), identity_w().value()).unwrap();
        for v in [Value::int(42), Value::sym("a"), Value::nil()] {
            let out = run(&target, &[Value::list([v.clone()])], 1_000).unwrap();
            assert_eq!(out, run_w(&identity_w(), std::slice::from_ref(&v)).unwrap());
            assert_eq!(out, v);
        }
    }

    #[test]
    fn equivalence_checks() {
        let pow = parse_program(include_str!("../../../assets/pow.fcl")).unwrap();
        let r = check_equivalence(&pow, &pow, &pow_grid(), 100_000);
        assert!(r.overall);
        assert_eq!(r.mode, Mode::Structural);
        assert_eq!(r.verdicts.len(), 77);

        let mut e2 = StaticStore::new();
        e2.insert(Symbol::new("e"), Value::int(2));
        let square = crate::mix::mix(&pow, &e2, &SpecializeOptions::default()).unwrap();
        // Lift square back to two parameters so the grids line up.
        let square2 = Program {
            params: vec![Symbol::new("b"), Symbol::new("e")],
            ..square
        };
        let r = check_equivalence(&pow, &square2, &pow_grid(), 100_000);
        assert!(!r.overall);
        assert_eq!(r.mode, Mode::Functional);
        for (t, v) in pow_grid().iter().zip(&r.verdicts) {
            let (b, e) = (
                t[0].as_int().unwrap().as_i64().unwrap(),
                t[1].as_int().unwrap().as_i64().unwrap(),
            );
            assert_eq!(
                v.verdict.is_equal(),
                b.pow(e as u32) == b * b,
                "{}",
                v.point
            );
        }
        assert!(r.failures().any(|v| v.point == "(3 3)"));
    }

    #[test]
    fn first_difference_names_the_block() {
        let a = parse_program(
            "(program (read x) l0 ((l0 ((:= y (op + (var x) (quote 1)))) (return (var y)))))",
        )
        .unwrap();
        let b = parse_program(
            "(program (read x) l0 ((l0 ((:= y (op + (var x) (quote 2)))) (return (var y)))))",
        )
        .unwrap();
        let (l, r) = first_difference(&a, &b).unwrap();
        assert!(l.contains("block 0") && l.contains("1"), "{l}");
        assert!(r.contains("2"), "{r}");
        assert!(first_difference(&a, &a).is_none());
    }

    #[test]
    fn interp_division_is_positional() {
        let d = interp_division(interp_w()).unwrap();
        assert!(d.is_static(&Symbol::new("wprog")));
        assert!(!d.is_static(&Symbol::new("input")));
        let empty = parse_program("(program (read) a ((a () (return (quote 1)))))").unwrap();
        assert!(interp_division(&empty).is_err());
    }
}
