//! Acceptance criteria, one line each. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use futamix_core::guest::{interp_w, pow_w, run_w};
use futamix_core::interp::run;
use futamix_core::lang::{parse_program, Program};
use futamix_core::mix::{mix, SpecializeOptions, StaticStore, DEFAULT_BLOCK_BUDGET};
use futamix_core::mix_object::{conformance_check, conformance_corpus, mix_object};
use futamix_core::projections::{
    apply_cogen, apply_compiler, cogen_fixpoint_check_with, first_difference, project1, project2, project3,
    DEFAULT_APPLY_STEP_BUDGET, DEFAULT_SEED,
};
use futamix_core::report::{Mode, Verdict};
use futamix_core::value::{Symbol, Value};
use futamix_core::verify::soundness_suite;

type Outcome = Result<String, String>;

struct Harness {
    failed: usize,
}

impl Harness {
    fn criterion(&mut self, id: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {:.0} s limit", limit.as_secs_f64())),
            Err(e) => (false, e),
        };
        if !ok {
            self.failed += 1;
        }
        println!(
            "{id} {} ({:.2} s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn same(what: &str, a: &Program, b: &Program) -> Result<(), String> {
    match first_difference(a, b) {
        None => Ok(()),
        Some((l, r)) => Err(format!("{what} differ: {l} vs {r}")),
    }
}

fn int(i: i64) -> Value {
    Value::int(i)
}

fn pow_oracle(b: i64, e: u32) -> Value {
    Value::int(b.pow(e))
}

fn ac1() -> Outcome {
    let pow = parse_program(&fs::read_to_string(root().join("assets/pow.fcl")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let nine = run(&pow, &[int(3), int(2)], 1_000).map_err(|e| e.to_string())?;
    ensure(nine == int(9), || format!("run(pow, [3, 2]) = {nine}"))?;
    let statics: StaticStore = [(Symbol::new("e"), int(2))].into_iter().collect();
    let r = mix(&pow, &statics, &SpecializeOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.params.len() == 1, || format!("residual takes {} params", r.params.len()))?;
    let nine = run(&r, &[int(3)], 1_000).map_err(|e| e.to_string())?;
    ensure(nine == int(9), || format!("run(r, [3]) = {nine}"))?;
    for b in 0..=10 {
        let want = run(&pow, &[int(b), int(2)], 1_000).map_err(|e| e.to_string())?;
        ensure(want == int(b * b), || format!("pow({b}, 2) = {want}"))?;
        let got = run(&r, &[int(b)], 1_000).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("r({b}) = {got}, pow gives {want}"))?;
    }
    Ok("pow(3,2)=9; square residual agrees on b in 0..10".into())
}

fn ac2() -> Outcome {
    let target = project1(interp_w(), pow_w().value()).map_err(|e| e.to_string())?;
    let nine = run(&target, &[Value::list([int(3), int(2)])], 100_000).map_err(|e| e.to_string())?;
    ensure(nine == int(9), || format!("target on (3 2) gives {nine}"))?;
    let mut points = 0;
    for b in 0..=10 {
        for e in 0..=6 {
            let want = run_w(&pow_w(), &[int(b), int(e)]).map_err(|e| e.to_string())?;
            ensure(want == pow_oracle(b, e as u32), || format!("run_w pow({b},{e}) = {want}"))?;
            let got = run(&target, &[Value::list([int(b), int(e)])], 1_000_000).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("target({b},{e}) = {got}, want {want}"))?;
            points += 1;
        }
    }
    Ok(format!("target gives 9; equal to run_w on {points} grid points"))
}

struct Generated {
    compiler: Option<Program>,
    cogen: Option<Program>,
    compiler_from_cogen: Option<Program>,
}

fn ac3(g: &mut Generated) -> Outcome {
    ensure(SpecializeOptions::default().block_budget <= 200_000, || "default block budget above 200000".into())?;
    let compiler = project2(mix_object(), interp_w()).map_err(|e| e.to_string())?;
    let blocks = compiler.blocks.len();
    g.compiler = Some(compiler.clone());
    let compiled = apply_compiler(&compiler, pow_w().value()).map_err(|e| e.to_string())?;
    let target = project1(interp_w(), pow_w().value()).map_err(|e| e.to_string())?;
    same("compiled pow and project1 pow", &compiled, &target)?;
    Ok(format!(
        "structurally equal; compiler has {blocks} blocks (budget {DEFAULT_BLOCK_BUDGET})"
    ))
}

fn ac4(g: &mut Generated) -> Outcome {
    let cogen = project3(mix_object()).map_err(|e| e.to_string())?;
    let blocks = cogen.blocks.len();
    g.cogen = Some(cogen.clone());
    let generated = apply_cogen(&cogen, interp_w()).map_err(|e| e.to_string())?;
    g.compiler_from_cogen = Some(generated.clone());
    let compiler = match &g.compiler {
        Some(c) => c.clone(),
        None => project2(mix_object(), interp_w()).map_err(|e| e.to_string())?,
    };
    same("cogen(interpW) and project2(interpW)", &generated, &compiler)?;
    Ok(format!("structurally equal; cogen has {blocks} blocks"))
}

fn ac5(g: &Generated) -> Outcome {
    let cogen = match &g.cogen {
        Some(c) => c.clone(),
        None => project3(mix_object()).map_err(|e| e.to_string())?,
    };
    let report = cogen_fixpoint_check_with(
        &cogen,
        mix_object(),
        interp_w(),
        g.compiler_from_cogen.as_ref(),
        DEFAULT_APPLY_STEP_BUDGET,
    );
    let verdict = |mode: Mode| {
        report
            .verdicts
            .iter()
            .find(|v| v.mode == mode)
            .map(|v| v.verdict.clone())
            .ok_or_else(|| format!("no {mode} verdict in report"))
    };
    let functional = verdict(Mode::Functional)?;
    let structural = verdict(Mode::Structural)?;
    ensure(functional.is_equal(), || format!("functional verdict: {functional:?}"))?;
    let structural = match structural {
        Verdict::Equal => "pass".to_string(),
        other => format!("fail ({other:?})"),
    };
    Ok(format!("functional pass; structural {structural}"))
}

fn ac6() -> Outcome {
    let o = soundness_suite(DEFAULT_SEED, 200, 8);
    ensure(o.programs_checked >= 200, || format!("only {} programs specialized", o.programs_checked))?;
    ensure(o.tuples_checked >= 200 * 8, || format!("only {} tuples", o.tuples_checked))?;
    ensure(o.mismatches.is_empty(), || {
        format!("{} mismatches; first: {}", o.mismatches.len(), o.mismatches[0])
    })?;
    Ok(format!(
        "{} programs, {} tuples, 0 mismatches ({} refused by budgets)",
        o.programs_checked, o.tuples_checked, o.programs_skipped
    ))
}

fn ac7() -> Outcome {
    let corpus = conformance_corpus();
    ensure(corpus.len() == 20, || format!("corpus has {} cases", corpus.len()))?;
    let report = conformance_check(mix_object(), &corpus);
    let mut tiers: BTreeMap<String, usize> = BTreeMap::new();
    for v in &report.verdicts {
        ensure(v.verdict.is_equal(), || format!("{}: {:?}", v.point, v.verdict))?;
        *tiers.entry(v.mode.to_string()).or_default() += 1;
    }
    ensure(report.overall, || "report not passing".into())?;
    let tiers: Vec<String> = tiers.iter().map(|(m, n)| format!("{n} {m}")).collect();
    Ok(format!("{} cases agree ({})", report.verdicts.len(), tiers.join(", ")))
}

fn root() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read_dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = fs::read(entry.path()).map_err(|e| e.to_string())?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn ac8() -> Outcome {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let status = Command::new(env!("CARGO_BIN_EXE_futamix"))
            .arg("verify")
            .current_dir(dir.path())
            .env_remove("FUTAMIX_BUDGET_BLOCKS")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("futamix verify exited with {:?}", status.status.code())
        })?;
        outputs.push(read_dir_bytes(&dir.path().join("out"))?);
    }
    let names: Vec<&String> = outputs[0].keys().collect();
    ensure(!names.is_empty(), || "out/ is empty".into())?;
    ensure(outputs[0].keys().eq(outputs[1].keys()), || "runs wrote different file sets".into())?;
    for (name, bytes) in &outputs[0] {
        ensure(outputs[1][name] == *bytes, || format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "{} files identical: {}",
        names.len(),
        names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    ))
}

fn main() -> ExitCode {
    let mut h = Harness { failed: 0 };
    let mut g = Generated {
        compiler: None,
        cogen: None,
        compiler_from_cogen: None,
    };
    let secs = Duration::from_secs;
    h.criterion("AC1", secs(1), ac1);
    h.criterion("AC2", secs(10), ac2);
    h.criterion("AC3", secs(120), || ac3(&mut g));
    h.criterion("AC4", secs(300), || ac4(&mut g));
    h.criterion("AC5", secs(300), || ac5(&g));
    h.criterion("AC6", secs(60), ac6);
    h.criterion("AC7", secs(60), ac7);
    h.criterion("AC8", Duration::MAX, ac8);
    if h.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
