//! The specializer written in L, and checks that it agrees with the host
//! specializer.

use std::sync::OnceLock;

use thiserror::Error;

use crate::bta::{analyze, check_congruence, classes, BindingTime, Division};
use crate::interp::{Machine, RunError};
use crate::lang::{
    canonicalize, decode_program, encode_program, parse_program, print_program, validate,
    DecodeError, Diagnostic, Program, ProgramError,
};
use crate::mix::{specialize, SpecializeOptions, StaticStore};
use crate::report::{EquivalenceReport, Mode, PointVerdict, Verdict};
use crate::value::{parse_datum, print_datum, Symbol, Value};

pub const MIX_SOURCE: &str = include_str!("../../../assets/mix.fcl");

/// Step budget for runs of the L specializer.
pub const DEFAULT_MIX_STEP_BUDGET: u64 = 2_000_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssetError {
    #[error("mix asset does not parse: {0}")]
    Parse(#[from] ProgramError),
    #[error("mix asset is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("mix asset must read (program division vs0), found ({0})")]
    Params(String),
    #[error("mix asset is not congruent under its own division: {0}")]
    Incongruent(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixObjectError {
    #[error("running the L specializer: {0}")]
    Run(#[from] RunError),
    #[error("L specializer produced a malformed program: {0}")]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone)]
pub struct MixObjectBundle {
    pub mix_l: Program,
    pub mix_l_encoded: Value,
    /// program S, division S, vs0 D.
    pub div_mix: Division,
    machine: Machine,
}

impl MixObjectBundle {
    pub fn machine(&self) -> &Machine {
        &self.machine
    }
}

/// Loads the shipped specializer asset.
pub fn load_mix_object() -> Result<MixObjectBundle, AssetError> {
    load_mix_object_from_str(MIX_SOURCE)
}

/// The shipped bundle, loaded once per process.
pub fn mix_object() -> &'static MixObjectBundle {
    static BUNDLE: OnceLock<MixObjectBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| load_mix_object().expect("shipped mix asset is well formed"))
}

pub fn load_mix_object_from_str(text: &str) -> Result<MixObjectBundle, AssetError> {
    let mix_l = parse_program(text)?;
    let diags = validate(&mix_l);
    if !diags.is_empty() {
        return Err(AssetError::Invalid(diags));
    }
    let names: Vec<&str> = mix_l.params.iter().map(Symbol::as_str).collect();
    if names != ["program", "division", "vs0"] {
        return Err(AssetError::Params(names.join(" ")));
    }
    let div_mix = analyze(
        &mix_l,
        &classes([
            ("program", BindingTime::Static),
            ("division", BindingTime::Static),
            ("vs0", BindingTime::Dynamic),
        ]),
    );
    if let Some(d) = check_congruence(&mix_l, &div_mix).into_iter().next() {
        return Err(AssetError::Incongruent(d.to_string()));
    }
    let mix_l_encoded = encode_program(&mix_l);
    if decode_program(&mix_l_encoded).as_ref() != Ok(&mix_l) {
        return Err(AssetError::Incongruent(
            "encoding does not round-trip".into(),
        ));
    }
    let machine = Machine::new(&mix_l).map_err(|e| AssetError::Incongruent(e.to_string()))?;
    Ok(MixObjectBundle {
        mix_l,
        mix_l_encoded,
        div_mix,
        machine,
    })
}

/// Runs the L specializer on `target` and decodes its output. The result
/// is not canonicalized; its labels are the specializer's states.
pub fn run_mix_object(
    bundle: &MixObjectBundle,
    target: &Program,
    d: &Division,
    vs0: &StaticStore,
    step_budget: u64,
) -> Result<Program, MixObjectError> {
    let out = bundle.machine.run(
        &[encode_program(target), d.to_value(), vs0.to_value()],
        step_budget,
    )?;
    Ok(decode_program(&out)?)
}

/// One conformance case: a program, its division and static store, and
/// dynamic inputs to compare on when the residuals differ structurally.
#[derive(Debug, Clone)]
pub struct ConformanceCase {
    pub name: String,
    pub program: Program,
    pub division: Division,
    pub vs0: StaticStore,
    pub grid: Vec<Vec<Value>>,
    /// When set, replaces the host residual as the expected program.
    pub expected: Option<Program>,
}

/// Compares the L specializer with the host specializer on each case:
/// canonical structural equality first, then equality of runs on the grid.
pub fn conformance_check(
    bundle: &MixObjectBundle,
    corpus: &[ConformanceCase],
) -> EquivalenceReport {
    let opts = SpecializeOptions::default();
    let mut verdicts = Vec::new();
    for case in corpus {
        let expected = match &case.expected {
            Some(p) => Ok(canonicalize(p)),
            None => specialize(&case.program, &case.division, &case.vs0, &opts)
                .map_err(|e| e.to_string()),
        };
        let actual = run_mix_object(
            bundle,
            &case.program,
            &case.division,
            &case.vs0,
            DEFAULT_MIX_STEP_BUDGET,
        )
        .map(|p| canonicalize(&p))
        .map_err(|e| e.to_string());
        let (mode, verdict) = match (expected, actual) {
            (Ok(e), Ok(a)) if e == a => (Mode::Structural, Verdict::Equal),
            (Ok(e), Ok(a)) => (Mode::Functional, compare_runs(&e, &a, &case.grid)),
            // Both refusing to specialize counts as agreement.
            (Err(_), Err(_)) => (Mode::Structural, Verdict::Equal),
            (Ok(_), Err(message)) => (Mode::Structural, Verdict::Error { message }),
            (Err(message), Ok(_)) => (
                Mode::Structural,
                Verdict::Error {
                    message: format!("host failed but L specializer succeeded: {message}"),
                },
            ),
        };
        verdicts.push(PointVerdict {
            point: case.name.clone(),
            mode,
            verdict,
        });
    }
    let mode = if verdicts.iter().all(|v| v.mode == Mode::Structural) {
        Mode::Structural
    } else {
        Mode::Functional
    };
    EquivalenceReport::new(
        mode,
        corpus.iter().map(|c| c.name.clone()).collect(),
        verdicts,
    )
}

fn compare_runs(expected: &Program, actual: &Program, grid: &[Vec<Value>]) -> Verdict {
    use crate::interp::run;
    const BUDGET: u64 = 1_000_000;
    for point in grid {
        let e = run(expected, point, BUDGET);
        let a = run(actual, point, BUDGET);
        match (&e, &a) {
            (Ok(x), Ok(y)) if x == y => {}
            (Err(_), Err(_)) => {}
            _ => {
                let show = |r: &Result<Value, RunError>| match r {
                    Ok(v) => print_datum(v),
                    Err(e) => format!("error: {e}"),
                };
                return Verdict::Unequal {
                    left: format!(
                        "{} at {}",
                        show(&e),
                        print_datum(&Value::list(point.clone()))
                    ),
                    right: show(&a),
                };
            }
        }
    }
    Verdict::Equal
}

/// Sources of the shipped conformance corpus, by file name.
pub const CORPUS_SOURCES: [(&str, &str); 8] = [
    (
        "length.fcl",
        include_str!("../../../assets/corpus/length.fcl"),
    ),
    (
        "member.fcl",
        include_str!("../../../assets/corpus/member.fcl"),
    ),
    (
        "repeat.fcl",
        include_str!("../../../assets/corpus/repeat.fcl"),
    ),
    (
        "branch.fcl",
        include_str!("../../../assets/corpus/branch.fcl"),
    ),
    (
        "bad_static.fcl",
        include_str!("../../../assets/corpus/bad_static.fcl"),
    ),
    (
        "lookup.fcl",
        include_str!("../../../assets/corpus/lookup.fcl"),
    ),
    (
        "scale.fcl",
        include_str!("../../../assets/corpus/scale.fcl"),
    ),
    ("evens.w", include_str!("../../../assets/corpus/evens.w")),
];

fn corpus_source(name: &str) -> &'static str {
    CORPUS_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .expect("corpus file is shipped")
}

/// Builds a case whose static parameters are those bound in `statics`;
/// each grid entry is the datum text of one tuple of dynamic inputs.
fn case(
    name: &str,
    program: &Program,
    statics: &[(&str, Value)],
    grid: &[&str],
) -> ConformanceCase {
    let vs0: StaticStore = statics
        .iter()
        .map(|(x, v)| (Symbol::new(x), v.clone()))
        .collect();
    let param_classes = program
        .params
        .iter()
        .map(|x| {
            let bt = if vs0.get(x).is_some() {
                BindingTime::Static
            } else {
                BindingTime::Dynamic
            };
            (x.clone(), bt)
        })
        .collect();
    let grid = grid
        .iter()
        .map(|t| {
            parse_datum(t)
                .expect("corpus grid parses")
                .items()
                .expect("corpus grid tuples are sequences")
                .into_iter()
                .cloned()
                .collect()
        })
        .collect();
    ConformanceCase {
        name: name.to_string(),
        division: analyze(program, &param_classes),
        program: program.clone(),
        vs0,
        grid,
        expected: None,
    }
}

/// The shipped 20-case corpus comparing the L specializer with the host.
pub fn conformance_corpus() -> Vec<ConformanceCase> {
    use crate::guest::{identity_w, interp_w, interp_w_alt, parse_w, pow_w, toy_interp};
    let load = |name: &str| parse_program(corpus_source(name)).expect("corpus program parses");
    let pow = parse_program(include_str!("../../../assets/pow.fcl")).expect("pow parses");
    let identity =
        parse_program(include_str!("../../../assets/identity.fcl")).expect("identity parses");
    let evens = parse_w(corpus_source("evens.w")).expect("evens parses");
    let d = |t: &str| parse_datum(t).expect("corpus datum parses");
    let int = Value::int;
    let wgrid = ["((0))", "((1))", "((4))", "((7))"];
    let pow_wgrid = ["((0 0))", "((3 2))", "((2 5))", "((7 1))"];
    vec![
        case(
            "pow e=2",
            &pow,
            &[("e", int(2))],
            &["(0)", "(3)", "(-4)", "(10)"],
        ),
        case("pow e=0", &pow, &[("e", int(0))], &["(0)", "(5)"]),
        case("pow e=5", &pow, &[("e", int(5))], &["(1)", "(2)", "(-3)"]),
        case("pow dynamic", &pow, &[], &["(3 2)", "(2 0)", "(5 3)"]),
        case("pow static", &pow, &[("b", int(3)), ("e", int(4))], &["()"]),
        case("identity static", &identity, &[("x", int(7))], &["()"]),
        case(
            "length",
            &load("length.fcl"),
            &[("xs", d("(a b c)"))],
            &["(())", "((z))"],
        ),
        case(
            "member",
            &load("member.fcl"),
            &[("ys", d("(1 2 3)"))],
            &["(1)", "(3)", "(4)", "(a)"],
        ),
        case(
            "repeat",
            &load("repeat.fcl"),
            &[("n", int(3))],
            &["(1)", "(5)", "(-2)"],
        ),
        case(
            "branch add",
            &load("branch.fcl"),
            &[("flag", d("true"))],
            &["(1)", "(-20)"],
        ),
        case(
            "branch mul",
            &load("branch.fcl"),
            &[("flag", d("false"))],
            &["(1)", "(-2)"],
        ),
        case(
            "bad static",
            &load("bad_static.fcl"),
            &[("k", int(3))],
            &["(())"],
        ),
        case(
            "lookup",
            &load("lookup.fcl"),
            &[("name", d("b")), ("names", d("(a b c)"))],
            &["((1 2 3))", "((x y z))"],
        ),
        case(
            "scale",
            &load("scale.fcl"),
            &[("k", int(4))],
            &["(0)", "(99)", "(150)"],
        ),
        case(
            "toy (1 2 3)",
            toy_interp(),
            &[("prog", d("(1 2 3)"))],
            &["(0)", "(10)"],
        ),
        case(
            "toy ()",
            toy_interp(),
            &[("prog", d("()"))],
            &["(0)", "(10)"],
        ),
        case(
            "interp pow",
            interp_w(),
            &[("wprog", pow_w().value().clone())],
            &pow_wgrid,
        ),
        case(
            "interp identity",
            interp_w(),
            &[("wprog", identity_w().value().clone())],
            &wgrid,
        ),
        case(
            "interp evens",
            interp_w(),
            &[("wprog", evens.value().clone())],
            &wgrid,
        ),
        case(
            "interp_alt pow",
            interp_w_alt(),
            &[("z_wprog", pow_w().value().clone())],
            &pow_wgrid,
        ),
    ]
}

/// Canonical text of a program, for diagnostics.
pub fn canonical_text(p: &Program) -> String {
    print_program(&canonicalize(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::run;

    #[test]
    fn shipped_bundle_is_consistent() {
        let b = load_mix_object().unwrap();
        assert!(validate(&b.mix_l).is_empty());
        assert!(check_congruence(&b.mix_l, &b.div_mix).is_empty());
        assert_eq!(decode_program(&b.mix_l_encoded).unwrap(), b.mix_l);
        assert!(b.div_mix.is_static(&Symbol::new("program")));
        assert!(!b.div_mix.is_static(&Symbol::new("vs0")));
    }

    #[test]
    fn tampered_params_are_rejected() {
        let text =
            MIX_SOURCE.replacen("(read program division vs0)", "(read prog division vs0)", 1);
        assert_ne!(text, MIX_SOURCE);
        assert!(matches!(
            load_mix_object_from_str(&text),
            Err(AssetError::Params(_)) | Err(AssetError::Invalid(_))
        ));
        assert!(matches!(
            load_mix_object_from_str("(program"),
            Err(AssetError::Parse(_))
        ));
    }

    #[test]
    fn identity_specializes_to_constant() {
        let identity = parse_program(include_str!("../../../assets/identity.fcl")).unwrap();
        let d = analyze(&identity, &classes([("x", BindingTime::Static)]));
        let vs0 = [(Symbol::new("x"), Value::int(7))].into_iter().collect();
        let r = run_mix_object(mix_object(), &identity, &d, &vs0, DEFAULT_MIX_STEP_BUDGET).unwrap();
        assert!(r.params.is_empty());
        assert_eq!(run(&r, &[], 100).unwrap(), Value::int(7));
    }

    #[test]
    fn corpus_grids_match_arity() {
        let corpus = conformance_corpus();
        assert_eq!(corpus.len(), 20);
        for c in &corpus {
            let dynamic = c
                .program
                .params
                .iter()
                .filter(|x| !c.division.is_static(x))
                .count();
            for t in &c.grid {
                assert_eq!(t.len(), dynamic, "{}", c.name);
            }
        }
    }

    #[test]
    fn empty_corpus_passes() {
        let r = conformance_check(mix_object(), &[]);
        assert!(r.overall);
        assert!(r.verdicts.is_empty());
    }

    #[test]
    fn broken_golden_fails_alone() {
        let mut corpus: Vec<ConformanceCase> = conformance_corpus().into_iter().take(3).collect();
        corpus[1].expected =
            Some(parse_program("(program (read b) l0 ((l0 () (return (quote 42)))))").unwrap());
        let r = conformance_check(mix_object(), &corpus);
        assert!(!r.overall);
        let failed: Vec<&str> = r.failures().map(|v| v.point.as_str()).collect();
        assert_eq!(failed, vec![corpus[1].name.as_str()]);
        assert_eq!(r.verdicts[1].mode, Mode::Functional);
    }
}
