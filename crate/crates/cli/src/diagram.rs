//! Machine diagrams as Graphviz DOT.
//!
//! A program that runs is a record node whose fields are its input slots.
//! Inputs are gray boxes wired into their slots, and results are rounded
//! product nodes. A static input that has been fused into the program it
//! specializes gets an extra dashed edge into that program.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagramKind {
    Execution,
    Compile,
    Interpret,
    Mix,
    Projection1,
    Projection2,
    Projection3,
}

impl DiagramKind {
    pub const ALL: [DiagramKind; 7] = [
        DiagramKind::Execution,
        DiagramKind::Compile,
        DiagramKind::Interpret,
        DiagramKind::Mix,
        DiagramKind::Projection1,
        DiagramKind::Projection2,
        DiagramKind::Projection3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiagramKind::Execution => "execution",
            DiagramKind::Compile => "compile",
            DiagramKind::Interpret => "interpret",
            DiagramKind::Mix => "mix",
            DiagramKind::Projection1 => "projection1",
            DiagramKind::Projection2 => "projection2",
            DiagramKind::Projection3 => "projection3",
        }
    }

    /// The slots of this kind with their default display names.
    pub fn slots(self) -> &'static [(&'static str, &'static str)] {
        match self {
            DiagramKind::Execution => &[("program", "program"), ("inputs", "a1, a2"), ("output", "output")],
            DiagramKind::Compile => &[
                ("compiler", "compiler^S→T_T"),
                ("program", "program_S"),
                ("output", "program_T"),
            ],
            DiagramKind::Interpret => &[
                ("interpreter", "interpreter^S_T"),
                ("program", "program_S"),
                ("inputs", "input"),
                ("output", "output"),
            ],
            DiagramKind::Mix => &[
                ("mix", "mix_T"),
                ("program", "program_T"),
                ("static", "static input"),
                ("output", "program'_T"),
            ],
            DiagramKind::Projection1 => &[
                ("mix", "mix_T"),
                ("interpreter", "interpreter^S_T"),
                ("program", "program_S"),
                ("output", "program_T"),
            ],
            DiagramKind::Projection2 => &[
                ("mix", "mix_T"),
                ("interpreter", "interpreter^S_T"),
                ("output", "compiler^S→T_T"),
            ],
            DiagramKind::Projection3 => &[("mix", "mix_T"), ("output", "compiler generator_T")],
        }
    }

    /// The slot fused into the specialized program by default.
    pub fn default_fused(self) -> Option<&'static str> {
        match self {
            DiagramKind::Mix => Some("static"),
            DiagramKind::Projection1 => Some("program"),
            DiagramKind::Projection2 => Some("interpreter"),
            DiagramKind::Projection3 => Some("mix"),
            _ => None,
        }
    }
}

impl FromStr for DiagramKind {
    type Err = DiagramError;

    fn from_str(s: &str) -> Result<DiagramKind, DiagramError> {
        DiagramKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DiagramError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagramError {
    #[error("unknown diagram kind `{0}` (expected one of execution, compile, interpret, mix, projection1, projection2, projection3)")]
    UnknownKind(String),
    #[error("diagram kind {kind} has no slot `{slot}` (slots: {known})")]
    UnknownSlot {
        kind: &'static str,
        slot: String,
        known: String,
    },
    #[error("slot `{0}` cannot be fused in this diagram")]
    BadFusion(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramSpec {
    pub kind: DiagramKind,
    /// Display names by slot; missing slots use the kind's defaults.
    pub labels: BTreeMap<String, String>,
    pub fused: Option<String>,
}

impl DiagramSpec {
    pub fn new(kind: DiagramKind) -> DiagramSpec {
        DiagramSpec {
            kind,
            labels: BTreeMap::new(),
            fused: kind.default_fused().map(str::to_string),
        }
    }

    pub fn label(mut self, slot: &str, name: &str) -> DiagramSpec {
        self.labels.insert(slot.to_string(), name.to_string());
        self
    }

    pub fn validate(&self) -> Result<(), DiagramError> {
        let slots = self.kind.slots();
        for slot in self.labels.keys() {
            if !slots.iter().any(|(s, _)| s == slot) {
                return Err(DiagramError::UnknownSlot {
                    kind: self.kind.name(),
                    slot: slot.clone(),
                    known: slots.iter().map(|(s, _)| *s).collect::<Vec<_>>().join(", "),
                });
            }
        }
        if let Some(f) = &self.fused {
            if self.kind.default_fused() != Some(f.as_str()) {
                return Err(DiagramError::BadFusion(f.clone()));
            }
        }
        Ok(())
    }

    fn name(&self, slot: &str) -> String {
        self.labels.get(slot).cloned().unwrap_or_else(|| {
            self.kind
                .slots()
                .iter()
                .find(|(s, _)| *s == slot)
                .map(|(_, d)| d.to_string())
                .unwrap_or_default()
        })
    }

    fn is_fused(&self, slot: &str) -> bool {
        self.fused.as_deref() == Some(slot)
    }
}

/// Node id for a display name: the part before any language tag, with
/// characters outside `[A-Za-z0-9_]` replaced.
pub fn node_id(display: &str) -> String {
    let base = display.split(['_', '^']).next().unwrap_or(display).trim();
    let id: String = base
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if id.is_empty() {
        "node".to_string()
    } else {
        id
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn record_text(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if "{}|<>\"\\ ".contains(c) && c != ' ' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

struct Dot {
    body: String,
    ids: BTreeMap<String, usize>,
}

impl Dot {
    fn unique(&mut self, id: String) -> String {
        let n = self.ids.entry(id.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            id
        } else {
            format!("{id}_{n}")
        }
    }

    fn machine(&mut self, id: &str, label: &str, slots: &[(&str, &str)]) {
        let fields: Vec<String> = slots
            .iter()
            .map(|(port, text)| format!("<{port}> {}", record_text(text)))
            .collect();
        let _ = writeln!(
            self.body,
            "  {} [shape=record, label={}];",
            quote(id),
            quote(&format!("{{{}|{{{}}}}}", record_text(label), fields.join("|")))
        );
    }

    fn program(&mut self, id: &str, label: &str, gray: bool) {
        let style = if gray { ", style=filled, fillcolor=gray85" } else { "" };
        let _ = writeln!(self.body, "  {} [shape=box, label={}{style}];", quote(id), quote(label));
    }

    fn data(&mut self, id: &str, label: &str) {
        let _ = writeln!(
            self.body,
            "  {} [shape=box, style=filled, fillcolor=gray85, label={}];",
            quote(id),
            quote(label)
        );
    }

    fn product(&mut self, id: &str, label: &str) {
        let _ = writeln!(self.body, "  {} [shape=box, style=\"rounded,bold\", label={}];", quote(id), quote(label));
    }

    fn edge(&mut self, from: &str, to: &str, port: Option<&str>, dashed: bool) {
        let to = match port {
            Some(p) => format!("{}:{}", quote(to), p),
            None => quote(to),
        };
        let attrs = if dashed { " [style=dashed]" } else { "" };
        let _ = writeln!(self.body, "  {} -> {to}{attrs};", quote(from));
    }
}

/// Renders a diagram. Equal specs give byte-identical text.
pub fn emit_diagram(spec: &DiagramSpec) -> Result<String, DiagramError> {
    spec.validate()?;
    let mut d = Dot {
        body: String::new(),
        ids: BTreeMap::new(),
    };
    let name = |slot: &str| spec.name(slot);
    match spec.kind {
        DiagramKind::Execution => {
            let inputs: Vec<String> = name("inputs").split(',').map(|s| s.trim().to_string()).collect();
            let prog = d.unique(node_id(&name("program")));
            let ports: Vec<(String, String)> = inputs.iter().enumerate().map(|(i, s)| (format!("in{i}"), s.clone())).collect();
            let slots: Vec<(&str, &str)> = ports.iter().map(|(p, s)| (p.as_str(), s.as_str())).collect();
            d.machine(&prog, &name("program"), &slots);
            for (port, text) in &ports {
                let id = d.unique(format!("input_{port}"));
                d.data(&id, text);
                d.edge(&id, &prog, Some(port), false);
            }
            let out = d.unique(node_id(&name("output")));
            d.product(&out, &name("output"));
            d.edge(&prog, &out, None, false);
        }
        DiagramKind::Compile => {
            let comp = d.unique(node_id(&name("compiler")));
            d.machine(&comp, &name("compiler"), &[("program", "program")]);
            let src = d.unique(node_id(&name("program")));
            d.program(&src, &name("program"), false);
            d.edge(&src, &comp, Some("program"), false);
            let out = d.unique(format!("{}_out", node_id(&name("output"))));
            d.product(&out, &name("output"));
            d.edge(&comp, &out, None, false);
        }
        DiagramKind::Interpret => {
            let interp = d.unique(node_id(&name("interpreter")));
            d.machine(&interp, &name("interpreter"), &[("program", "program"), ("inputs", "input")]);
            let src = d.unique(node_id(&name("program")));
            d.program(&src, &name("program"), false);
            d.edge(&src, &interp, Some("program"), false);
            let input = d.unique("input".into());
            d.data(&input, &name("inputs"));
            d.edge(&input, &interp, Some("inputs"), false);
            let out = d.unique(node_id(&name("output")));
            d.product(&out, &name("output"));
            d.edge(&interp, &out, None, false);
        }
        DiagramKind::Mix | DiagramKind::Projection1 | DiagramKind::Projection2 | DiagramKind::Projection3 => {
            let (program_slot, static_slot) = match spec.kind {
                DiagramKind::Mix => ("program", "static"),
                DiagramKind::Projection1 => ("interpreter", "program"),
                DiagramKind::Projection2 => ("mix", "interpreter"),
                _ => ("mix", "mix"),
            };
            let outer = d.unique(match spec.kind {
                DiagramKind::Mix | DiagramKind::Projection1 => node_id(&name("mix")),
                _ => format!("{}_outer", node_id(&name("mix"))),
            });
            d.machine(&outer, &name("mix"), &[("program", "program"), ("static", "static")]);
            let prog = d.unique(match spec.kind {
                DiagramKind::Projection2 => format!("{}_inner", node_id(&name("mix"))),
                DiagramKind::Projection3 => format!("{}_middle", node_id(&name("mix"))),
                _ => node_id(&name(program_slot)),
            });
            d.program(&prog, &name(program_slot), spec.is_fused(static_slot));
            d.edge(&prog, &outer, Some("program"), false);
            let stat = d.unique(match spec.kind {
                DiagramKind::Projection3 => format!("{}_inner", node_id(&name("mix"))),
                DiagramKind::Mix => "static".to_string(),
                _ => node_id(&name(static_slot)),
            });
            if matches!(spec.kind, DiagramKind::Mix) {
                d.data(&stat, &name(static_slot));
            } else {
                d.program(&stat, &name(static_slot), true);
            }
            d.edge(&stat, &outer, Some("static"), false);
            if spec.is_fused(static_slot) {
                d.edge(&stat, &prog, None, true);
            }
            let out = d.unique(node_id(&name("output")));
            d.product(&out, &name("output"));
            d.edge(&outer, &out, None, false);
        }
    }
    Ok(format!(
        "digraph {} {{\n  rankdir=TB;\n  node [fontname=\"Helvetica\"];\n{}}}\n",
        spec.kind.name(),
        d.body
    ))
}
