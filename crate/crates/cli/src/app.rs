//! Argument parsing and dispatch for the `futamix` binary.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use futamix_core::bta::{analyze, BindingTime, Division};
use futamix_core::guest::{interp_w, parse_w, run_w_with_budget, WProgram};
use futamix_core::interp::{run, RunError, RunErrorKind, DEFAULT_STEP_BUDGET};
use futamix_core::lang::{parse_program, print_program, validate, Program};
use futamix_core::mix::{mix, specialize, SpecializeError, SpecializeOptions, StaticStore};
use futamix_core::mix_object::{load_mix_object, mix_object, MixObjectBundle};
use futamix_core::projections::{
    cogen_fixpoint_check_with, project1_with, project2_with, project3_with, ProjectionError,
    DEFAULT_APPLY_STEP_BUDGET, DEFAULT_SEED,
};
use futamix_core::value::{parse_datum, print_datum, Symbol, Value};
use futamix_core::verify::{verify, VerifyOptions};

use crate::diagram::{emit_diagram, DiagramError, DiagramKind, DiagramSpec};

#[derive(Debug, Parser)]
#[command(name = "futamix", version, about = "Partial evaluation and the Futamura projections for a flowchart language")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Maximum residual blocks per specialization.
    #[arg(long, global = true, env = "FUTAMIX_BUDGET_BLOCKS")]
    pub budget_blocks: Option<usize>,
    /// Step budget for running programs and generated compilers.
    #[arg(long, global = true)]
    pub budget_steps: Option<u64>,
    /// Keep every transition instead of compressing jump chains.
    #[arg(long, global = true)]
    pub no_compress: bool,
    /// Output file, or output directory for `verify`.
    #[arg(short = 'o', long = "output", global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an L program (`.fcl`) or a W program (`.w`).
    Run {
        program: PathBuf,
        /// Input tuple, e.g. "(3 2)".
        #[arg(long)]
        input: String,
    },
    /// Print the division for the given static parameters.
    Bta {
        program: PathBuf,
        /// Static parameters as "var=datum,...". Only the names matter.
        #[arg(long = "static", default_value = "")]
        statics: String,
    },
    /// Specialize an L program to static parameter values.
    Mix {
        program: PathBuf,
        #[arg(long = "static", default_value = "")]
        statics: String,
        /// Division file `((var S|D) ...)`; computed from the statics if absent.
        #[arg(long)]
        division: Option<PathBuf>,
    },
    /// Run one of the three projections.
    Project {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        /// Guest W program, required for the first projection.
        guest: Option<PathBuf>,
        /// Interpreter in L; the shipped W interpreter by default.
        #[arg(long)]
        interp: Option<PathBuf>,
        /// Specializer in L; the shipped one by default.
        #[arg(long)]
        mix: Option<PathBuf>,
    },
    /// Check that the compiler generator reproduces itself.
    CogenFix {
        /// Compiler generator to check; generated afresh if absent.
        #[arg(long)]
        cogen: Option<PathBuf>,
    },
    /// Run every suite and write artifacts to `out/` (or `-o`).
    Verify {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Emit a machine diagram in DOT.
    Diagram {
        /// execution, compile, interpret, mix, projection1, projection2 or projection3.
        kind: String,
        /// Slot display names as "slot=name,...".
        #[arg(long, default_value = "")]
        labels: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Runtime(String),
    #[error("verification failed")]
    VerifyFailed,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Invalid(_) | CliError::Io { .. } => 2,
            CliError::Budget(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> CliError {
        match e.kind {
            RunErrorKind::ArityMismatch | RunErrorKind::InvalidProgram => CliError::Invalid(e.to_string()),
            RunErrorKind::StepBudgetExceeded => CliError::Budget(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SpecializeError> for CliError {
    fn from(e: SpecializeError) -> CliError {
        match e {
            SpecializeError::BlockBudgetExceeded { .. } | SpecializeError::StaticStepBudgetExceeded { .. } => {
                CliError::Budget(e.to_string())
            }
            SpecializeError::InvalidInput(_) | SpecializeError::CongruenceBreach { .. } => {
                CliError::Invalid(e.to_string())
            }
            SpecializeError::Fold { error, .. } if error.kind == RunErrorKind::StepBudgetExceeded => {
                CliError::Budget(error.to_string())
            }
            SpecializeError::Fold { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> CliError {
        match e {
            ProjectionError::Specialize(e) => e.into(),
            ProjectionError::Run(e) => e.into(),
            ProjectionError::Decode(e) => CliError::Runtime(e.to_string()),
            ProjectionError::Input(m) => CliError::Invalid(m),
        }
    }
}

impl From<DiagramError> for CliError {
    fn from(e: DiagramError) -> CliError {
        CliError::Invalid(e.to_string())
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_program(path: &Path) -> Result<Program, CliError> {
    let p = parse_program(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if let Some(d) = validate(&p).first() {
        return Err(invalid(format!("{}: {d}", path.display())));
    }
    Ok(p)
}

fn load_w(path: &Path) -> Result<WProgram, CliError> {
    parse_w(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Parses "x=datum,y=datum". Commas inside parentheses belong to the datum.
pub fn parse_statics(text: &str) -> Result<StaticStore, CliError> {
    let mut store = StaticStore::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut parts = Vec::new();
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    for part in parts.into_iter().map(str::trim).filter(|p| !p.is_empty()) {
        let (name, datum) = part
            .split_once('=')
            .ok_or_else(|| invalid(format!("expected var=datum, got `{part}`")))?;
        let v = parse_datum(datum.trim()).map_err(|e| invalid(format!("static value for `{name}`: {e}")))?;
        store.insert(Symbol::new(name.trim()), v);
    }
    Ok(store)
}

fn param_classes(p: &Program, statics: &StaticStore) -> Result<std::collections::BTreeMap<Symbol, BindingTime>, CliError> {
    for x in statics.keys() {
        if !p.params.contains(x) {
            return Err(invalid(format!("`{x}` is not a parameter of the program")));
        }
    }
    Ok(p.params
        .iter()
        .map(|x| {
            let bt = if statics.get(x).is_some() { BindingTime::Static } else { BindingTime::Dynamic };
            (x.clone(), bt)
        })
        .collect())
}

fn parse_labels(text: &str) -> Result<Vec<(String, String)>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| invalid(format!("expected slot=name, got `{p}`")))
        })
        .collect()
}

struct Context {
    specialize: SpecializeOptions,
    step_budget: Option<u64>,
    output: Option<PathBuf>,
}

impl Context {
    fn emit(&self, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
        match &self.output {
            Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            }),
            None => out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
        }
    }
}

fn bundle_from(path: Option<&PathBuf>) -> Result<MixObjectBundle, CliError> {
    match path {
        Some(p) => futamix_core::mix_object::load_mix_object_from_str(&read(p)?).map_err(invalid),
        None => load_mix_object().map_err(invalid),
    }
}

/// Runs a parsed command line, writing results to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut specialize_opts = SpecializeOptions::default();
    if let Some(b) = cli.budget_blocks {
        specialize_opts.block_budget = b;
    }
    specialize_opts.compress_gotos = !cli.no_compress;
    let ctx = Context {
        specialize: specialize_opts,
        step_budget: cli.budget_steps,
        output: cli.output,
    };
    let io_err = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    match cli.command {
        Command::Run { program, input } => {
            let inputs = parse_datum(&input).map_err(|e| invalid(format!("--input: {e}")))?;
            let inputs: Vec<Value> = inputs
                .items()
                .ok_or_else(|| invalid("--input must be a list of arguments, e.g. \"(3 2)\""))?
                .into_iter()
                .cloned()
                .collect();
            let budget = ctx.step_budget.unwrap_or(DEFAULT_STEP_BUDGET);
            let result = if program.extension().is_some_and(|e| e == "w") {
                let wp = load_w(&program)?;
                if wp.params().len() != inputs.len() {
                    return Err(invalid(format!(
                        "{} takes {} argument(s), got {}",
                        program.display(),
                        wp.params().len(),
                        inputs.len()
                    )));
                }
                run_w_with_budget(&wp, &inputs, budget)?
            } else {
                run(&load_program(&program)?, &inputs, budget)?
            };
            ctx.emit(&format!("{}\n", print_datum(&result)), out)
        }
        Command::Bta { program, statics } => {
            let p = load_program(&program)?;
            let d = analyze(&p, &param_classes(&p, &parse_statics(&statics)?)?);
            ctx.emit(&format!("{}\n", print_datum(&d.to_value())), out)
        }
        Command::Mix {
            program,
            statics,
            division,
        } => {
            let p = load_program(&program)?;
            let vs0 = parse_statics(&statics)?;
            let r = match division {
                Some(path) => {
                    let text = read(&path)?;
                    let d = parse_datum(&text)
                        .map_err(invalid)
                        .and_then(|v| Division::from_value(&v).map_err(invalid))?;
                    specialize(&p, &d, &vs0, &ctx.specialize)?
                }
                None => mix(&p, &vs0, &ctx.specialize)?,
            };
            ctx.emit(&print_program(&r), out)
        }
        Command::Project {
            which,
            guest,
            interp,
            mix,
        } => {
            let interp_p = match &interp {
                Some(path) => load_program(path)?,
                None => interp_w().clone(),
            };
            let r = match which {
                1 => {
                    let path = guest.ok_or_else(|| invalid("the first projection needs a guest program"))?;
                    let g = if path.extension().is_some_and(|e| e == "w") {
                        load_w(&path)?.value().clone()
                    } else {
                        parse_datum(&read(&path)?).map_err(invalid)?
                    };
                    project1_with(&interp_p, &g, &ctx.specialize)?
                }
                2 => project2_with(&bundle_from(mix.as_ref())?, &interp_p, &ctx.specialize)?,
                _ => project3_with(&bundle_from(mix.as_ref())?, &ctx.specialize)?,
            };
            ctx.emit(&print_program(&r), out)
        }
        Command::CogenFix { cogen } => {
            let bundle = mix_object();
            let cogen = match cogen {
                Some(path) => load_program(&path)?,
                None => project3_with(bundle, &ctx.specialize)?,
            };
            let budget = ctx.step_budget.unwrap_or(DEFAULT_APPLY_STEP_BUDGET);
            let report = cogen_fixpoint_check_with(&cogen, bundle, interp_w(), None, budget);
            ctx.emit(&format!("{report}\n"), out)?;
            if report.overall {
                Ok(())
            } else {
                Err(CliError::VerifyFailed)
            }
        }
        Command::Verify { seed } => {
            let mut opts = VerifyOptions {
                seed,
                ..VerifyOptions::default()
            };
            opts.projection.specialize = ctx.specialize;
            if let Some(s) = ctx.step_budget {
                opts.projection.step_budget = s;
            }
            let report = verify(mix_object(), &opts);
            let dir = ctx.output.clone().unwrap_or_else(|| PathBuf::from("out"));
            report.write_artifacts(&dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
            out.write_all(report.summary_table().as_bytes()).map_err(io_err)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::VerifyFailed)
            }
        }
        Command::Diagram { kind, labels } => {
            let mut spec = DiagramSpec::new(kind.parse::<DiagramKind>()?);
            for (slot, name) in parse_labels(&labels)? {
                spec = spec.label(&slot, &name);
            }
            ctx.emit(&emit_diagram(&spec)?, out)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "futamix: {e}");
            e.exit_code()
        }
    }
}
