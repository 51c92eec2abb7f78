//! The end-to-end verification pipeline behind `futamix verify`.
//!
//! Suites run in a fixed order and each stops at its first failure, but a
//! failing suite does not stop the ones after it. Written artifacts are
//! deterministic: `report.json` records interpreter steps and residual
//! sizes rather than wall-clock time, which is returned separately.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::bta::{check_congruence, Division};
use crate::gen::{random_division, random_program, random_static_store, random_tuple, seeded};
use crate::guest::{identity_w, interp_w, interp_w_alt, pow_w, run_w, toy_interp, WProgram};
use crate::interp::{run, RunErrorKind};
use crate::lang::{decode_program, encode_program, parse_program, print_program, Program};
use crate::mix::{specialize, SpecializeOptions};
use crate::mix_object::{conformance_check, conformance_corpus, MixObjectBundle};
use crate::projections::{
    apply_residual, as_guest_inputs, cogen_fixpoint_check_with, first_difference, interp_division,
    mix_inputs, pow_grid, project1_with, project2_with, project3_with, ProjectionOptions, DEFAULT_SEED,
};
use crate::report::{EquivalenceReport, Mode, PointVerdict, Verdict};
use crate::value::{parse_datum, print_datum, Symbol, Value};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub soundness_programs: usize,
    pub soundness_tuples: usize,
    pub projection: ProjectionOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: DEFAULT_SEED,
            soundness_programs: 200,
            soundness_tuples: 8,
            projection: ProjectionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SuiteResult {
    fn new(name: &str) -> SuiteResult {
        SuiteResult {
            name: name.to_string(),
            passed: true,
            checked: 0,
            failure: None,
            elapsed: Duration::ZERO,
        }
    }

    /// Records one check; returns false once the suite has failed.
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) -> bool {
        if !self.passed {
            return false;
        }
        self.checked += 1;
        if !ok {
            self.passed = false;
            self.failure = Some(what());
        }
        self.passed
    }
}

/// Deterministic cost of each stage.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Costs {
    pub p1_blocks: usize,
    pub p2_blocks: usize,
    pub p3_blocks: usize,
    pub compile_steps: u64,
    pub cogen_steps: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Budgets {
    pub block_budget: usize,
    pub static_step_budget: u64,
    pub apply_step_budget: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
    pub conformance: Option<EquivalenceReport>,
    pub projection1: Option<EquivalenceReport>,
    pub projection2: Option<EquivalenceReport>,
    pub projection3: Option<EquivalenceReport>,
    pub fixpoint: Option<EquivalenceReport>,
    pub budgets: Budgets,
    /// Interpreter steps and residual sizes per stage.
    pub timings: Costs,
    #[serde(skip)]
    pub artifacts: Vec<(String, String)>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Writes `p1_pow.fcl`, `p2_compiler.fcl`, `p3_cogen.fcl` and
    /// `report.json` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, text) in self.artifacts.iter().chain([&("report.json".to_string(), self.to_json())]) {
            let path = dir.join(name);
            fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }

    /// One line per suite: status, name, checks, seconds.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<6} {:<22} {:>8} {:>9}\n", "status", "suite", "checks", "seconds");
        for s in &self.suites {
            out.push_str(&format!(
                "{:<6} {:<22} {:>8} {:>9.2}\n",
                if s.passed { "ok" } else { "FAIL" },
                s.name,
                s.checked,
                s.elapsed.as_secs_f64()
            ));
            if let Some(f) = &s.failure {
                out.push_str(&format!("       {f}\n"));
            }
        }
        out
    }
}

fn timed(name: &str, f: impl FnOnce(&mut SuiteResult)) -> SuiteResult {
    let start = Instant::now();
    let mut s = SuiteResult::new(name);
    f(&mut s);
    s.elapsed = start.elapsed();
    s
}

fn shipped_programs(bundle: &MixObjectBundle) -> Vec<(&'static str, Program)> {
    vec![
        ("pow", parse_program(include_str!("../../../assets/pow.fcl")).expect("pow parses")),
        ("identity", parse_program(include_str!("../../../assets/identity.fcl")).expect("identity parses")),
        ("interp_w", interp_w().clone()),
        ("interp_w_alt", interp_w_alt().clone()),
        ("toy_interp", toy_interp().clone()),
        ("mix", bundle.mix_l.clone()),
    ]
}

fn round_trip_suite(bundle: &MixObjectBundle, seed: u64) -> SuiteResult {
    timed("round-trip", |s| {
        let mut programs = shipped_programs(bundle);
        let mut rng = seeded(seed);
        for _ in 0..50 {
            programs.push(("random", random_program(&mut rng)));
        }
        for (name, p) in &programs {
            let text = print_program(p);
            if !s.check(parse_program(&text).as_ref() == Ok(p), || format!("{name}: print/parse")) {
                return;
            }
            let enc = encode_program(p);
            if !s.check(decode_program(&enc).as_ref() == Ok(p), || format!("{name}: encode/decode")) {
                return;
            }
            let datum = print_datum(&enc);
            if !s.check(parse_datum(&datum).as_ref() == Ok(&enc), || format!("{name}: datum print/parse")) {
                return;
            }
        }
    })
}

fn congruence_suite(bundle: &MixObjectBundle, seed: u64) -> SuiteResult {
    timed("congruence", |s| {
        let mut cases: Vec<(String, Program, Division)> = vec![("mix".into(), bundle.mix_l.clone(), bundle.div_mix.clone())];
        for p in [interp_w(), interp_w_alt(), toy_interp()] {
            let d = interp_division(p).expect("interpreters have parameters");
            cases.push((format!("interpreter ({})", p.params[0]), p.clone(), d));
        }
        let mut rng = seeded(seed ^ 1);
        for i in 0..100 {
            let p = random_program(&mut rng);
            let d = random_division(&mut rng, &p);
            cases.push((format!("random #{i}"), p, d));
        }
        for (name, p, d) in &cases {
            let diags = check_congruence(p, d);
            if !s.check(diags.is_empty(), || format!("{name}: {}", diags[0])) {
                return;
            }
        }
        let pc = Symbol::new("pc");
        s.check(
            interp_division(interp_w()).map(|d| d.is_static(&pc)).unwrap_or(false),
            || "interpreter program counter is not static".into(),
        );
    })
}

/// Outcome of the specialization soundness property.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SoundnessOutcome {
    pub programs_checked: usize,
    /// Programs the specializer refused within its budgets.
    pub programs_skipped: usize,
    pub tuples_checked: usize,
    pub mismatches: Vec<String>,
}

/// Specializes seeded random programs under random congruent divisions and
/// compares each residual with its source on `tuples` dynamic inputs.
/// Keeps drawing programs until `programs` have been specialized.
pub fn soundness_suite(seed: u64, programs: usize, tuples: usize) -> SoundnessOutcome {
    let mut rng = seeded(seed);
    let opts = SpecializeOptions {
        block_budget: 2_000,
        step_budget_static: 100_000,
        compress_gotos: true,
    };
    let mut out = SoundnessOutcome::default();
    const RUN_BUDGET: u64 = 1_000_000;
    while out.programs_checked < programs && out.programs_skipped < 20 * programs {
        let p = random_program(&mut rng);
        let d = random_division(&mut rng, &p);
        let vs0 = random_static_store(&mut rng, &p, &d);
        let residual = match specialize(&p, &d, &vs0, &opts) {
            Ok(r) => r,
            Err(_) => {
                out.programs_skipped += 1;
                continue;
            }
        };
        out.programs_checked += 1;
        for _ in 0..tuples {
            let dynamic = random_tuple(&mut rng, residual.params.len());
            let mut next = dynamic.iter();
            let full: Vec<Value> = p
                .params
                .iter()
                .map(|x| vs0.get(x).cloned().unwrap_or_else(|| next.next().expect("dynamic input").clone()))
                .collect();
            let want = run(&p, &full, RUN_BUDGET);
            let got = run(&residual, &dynamic, RUN_BUDGET);
            out.tuples_checked += 1;
            let agree = match (&want, &got) {
                (Ok(a), Ok(b)) => a == b,
                (Err(e), Err(f)) => e.kind == f.kind,
                (Err(e), Ok(_)) => e.kind == RunErrorKind::StepBudgetExceeded,
                (Ok(_), Err(_)) => false,
            };
            if !agree {
                out.mismatches.push(format!(
                    "{} with {} at {}: {:?} vs {:?}",
                    print_program(&p).trim(),
                    vs0,
                    print_datum(&Value::list(dynamic.clone())),
                    want,
                    got
                ));
            }
        }
    }
    out
}

fn soundness(opts: &VerifyOptions) -> SuiteResult {
    timed("soundness", |s| {
        let o = soundness_suite(opts.seed, opts.soundness_programs, opts.soundness_tuples);
        s.checked = o.tuples_checked;
        if let Some(m) = o.mismatches.first() {
            s.passed = false;
            s.failure = Some(format!("{} mismatches; first: {m}", o.mismatches.len()));
        } else if o.programs_checked < opts.soundness_programs {
            s.passed = false;
            s.failure = Some(format!(
                "only {} programs specialized ({} refused)",
                o.programs_checked, o.programs_skipped
            ));
        }
    })
}

fn report_suite(name: &str, r: &EquivalenceReport, elapsed: Duration) -> SuiteResult {
    SuiteResult {
        name: name.to_string(),
        passed: r.overall,
        checked: r.verdicts.len(),
        failure: (!r.overall).then(|| r.to_string()),
        elapsed,
    }
}

fn single(point: &str, mode: Mode, verdict: Verdict) -> EquivalenceReport {
    EquivalenceReport::new(
        mode,
        vec![point.to_string()],
        vec![PointVerdict {
            point: point.to_string(),
            mode,
            verdict,
        }],
    )
}

fn structural(point: &str, a: &Program, b: &Program) -> EquivalenceReport {
    let verdict = match first_difference(a, b) {
        None => Verdict::Equal,
        Some((left, right)) => Verdict::Unequal { left, right },
    };
    single(point, Mode::Structural, verdict)
}

fn error_report(point: &str, e: impl ToString) -> EquivalenceReport {
    single(point, Mode::Structural, Verdict::Error { message: e.to_string() })
}

/// P1 residual against the W interpreter on the pow grid.
fn target_report(target: &Program, guest: &WProgram) -> EquivalenceReport {
    let grid = pow_grid();
    let names: Vec<String> = grid.iter().map(|t| print_datum(&Value::list(t.clone()))).collect();
    let verdicts = as_guest_inputs(&grid)
        .iter()
        .zip(&grid)
        .zip(&names)
        .map(|((wrapped, tuple), name)| {
            let got = run(target, wrapped, 10_000_000);
            let want = run_w(guest, tuple);
            let verdict = match (&want, &got) {
                (Ok(a), Ok(b)) if a == b => Verdict::Equal,
                _ => Verdict::Unequal {
                    left: format!("{want:?}"),
                    right: format!("{got:?}"),
                },
            };
            PointVerdict {
                point: name.clone(),
                mode: Mode::Functional,
                verdict,
            }
        })
        .collect();
    EquivalenceReport::new(Mode::Functional, names, verdicts)
}

/// Runs every suite. `bundle` is the specializer written in L.
pub fn verify(bundle: &MixObjectBundle, opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport {
        passed: false,
        suites: Vec::new(),
        conformance: None,
        projection1: None,
        projection2: None,
        projection3: None,
        fixpoint: None,
        budgets: Budgets {
            block_budget: opts.projection.specialize.block_budget,
            static_step_budget: opts.projection.specialize.step_budget_static,
            apply_step_budget: opts.projection.step_budget,
            seed: opts.seed,
        },
        timings: Costs::default(),
        artifacts: Vec::new(),
    };
    report.suites.push(round_trip_suite(bundle, opts.seed));
    report.suites.push(congruence_suite(bundle, opts.seed));
    report.suites.push(soundness(opts));

    let start = Instant::now();
    let conformance = conformance_check(bundle, &conformance_corpus());
    report.suites.push(report_suite("conformance", &conformance, start.elapsed()));
    report.conformance = Some(conformance);

    projection_suites(bundle, opts, &mut report);
    report.passed = report.suites.iter().all(|s| s.passed);
    report
}

fn projection_suites(bundle: &MixObjectBundle, opts: &VerifyOptions, report: &mut VerifyReport) {
    let interp = interp_w();
    let pow = pow_w();
    let spec = &opts.projection.specialize;
    let budget = opts.projection.step_budget;

    let start = Instant::now();
    let target = project1_with(interp, pow.value(), spec);
    let p1 = match &target {
        Ok(t) => {
            report.timings.p1_blocks = t.blocks.len();
            report.artifacts.push(("p1_pow.fcl".into(), print_program(t)));
            let mut r = target_report(t, &pow);
            let nine = run(t, &[Value::list([Value::int(3), Value::int(2)])], 1_000_000);
            if nine != Ok(Value::int(9)) {
                r.overall = false;
                r.note = Some(format!("(3 2) gave {nine:?}"));
            }
            r
        }
        Err(e) => error_report("project1", e),
    };
    report.suites.push(report_suite("projection 1", &p1, start.elapsed()));
    report.projection1 = Some(p1);

    let start = Instant::now();
    let compiler = project2_with(bundle, interp, spec);
    let p2 = match (&compiler, &target) {
        (Ok(c), Ok(t)) => {
            report.timings.p2_blocks = c.blocks.len();
            report.artifacts.push(("p2_compiler.fcl".into(), print_program(c)));
            let vs0 = [(Symbol::new("wprog"), pow.value().clone())].into_iter().collect();
            match apply_residual(c, &vs0, budget) {
                Ok((compiled, steps)) => {
                    report.timings.compile_steps = steps;
                    let mut r = structural("compiler(pow.w) = project1(pow.w)", &compiled, t);
                    identity_point(c, budget, &mut r);
                    r
                }
                Err(e) => error_report("apply compiler", e),
            }
        }
        (Err(e), _) => error_report("project2", e),
        (_, Err(e)) => error_report("project1", e),
    };
    report.suites.push(report_suite("projection 2", &p2, start.elapsed()));
    report.projection2 = Some(p2);

    let start = Instant::now();
    let cogen = project3_with(bundle, spec);
    let mut generated = None;
    let p3 = match (&cogen, &compiler) {
        (Ok(g), Ok(c)) => {
            report.timings.p3_blocks = g.blocks.len();
            report.artifacts.push(("p3_cogen.fcl".into(), print_program(g)));
            let d = interp_division(interp).expect("interpreter has parameters");
            match apply_residual(g, &mix_inputs(interp, &d), budget) {
                Ok((gc, steps)) => {
                    report.timings.cogen_steps = steps;
                    let r = structural("cogen(interp) = project2(interp)", &gc, c);
                    generated = Some(gc);
                    r
                }
                Err(e) => error_report("apply cogen", e),
            }
        }
        (Err(e), _) => error_report("project3", e),
        (_, Err(e)) => error_report("project2", e),
    };
    report.suites.push(report_suite("projection 3", &p3, start.elapsed()));
    report.projection3 = Some(p3);

    let start = Instant::now();
    let fix = match &cogen {
        Ok(g) => cogen_fixpoint_check_with(g, bundle, interp, generated.as_ref(), budget),
        Err(e) => error_report("project3", e),
    };
    report.suites.push(report_suite("cogen fixpoint", &fix, start.elapsed()));
    report.fixpoint = Some(fix);
}

/// Adds a point checking that the compiler's output for identity.w
/// behaves like the interpreter on it.
fn identity_point(compiler: &Program, budget: u64, r: &mut EquivalenceReport) {
    let guest = identity_w();
    let vs0 = [(Symbol::new("wprog"), guest.value().clone())].into_iter().collect();
    let verdict = match apply_residual(compiler, &vs0, budget) {
        Ok((t, _)) => {
            let inputs = [Value::int(42), Value::sym("a"), Value::nil()];
            match inputs.iter().find(|v| run(&t, &[Value::list([(*v).clone()])], 10_000).ok() != run_w(&guest, &[(*v).clone()]).ok()) {
                None => Verdict::Equal,
                Some(v) => Verdict::Unequal {
                    left: format!("interpreter on {v}"),
                    right: "compiled identity.w".into(),
                },
            }
        }
        Err(e) => Verdict::Error { message: e.to_string() },
    };
    r.grid.push("compiler(identity.w) runs like identity.w".into());
    r.verdicts.push(PointVerdict {
        point: "compiler(identity.w) runs like identity.w".into(),
        mode: Mode::Functional,
        verdict,
    });
    r.overall = r.verdicts.iter().all(|v| v.verdict.is_equal());
    r.mode = Mode::Functional;
}
