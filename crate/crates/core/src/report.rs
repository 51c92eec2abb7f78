//! Outcomes of comparing programs, shared by the conformance and
//! projection checks.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Canonical forms are identical.
    Structural,
    /// Runs agree on every grid point.
    Functional,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Structural => "structural",
            Mode::Functional => "functional",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Equal,
    Unequal { left: String, right: String },
    Error { message: String },
}

impl Verdict {
    pub fn is_equal(&self) -> bool {
        matches!(self, Verdict::Equal)
    }
}

/// One checked point: an input tuple, or a named case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PointVerdict {
    pub point: String,
    /// The tier the point was decided at.
    pub mode: Mode,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub mode: Mode,
    pub grid: Vec<String>,
    pub verdicts: Vec<PointVerdict>,
    pub overall: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl EquivalenceReport {
    /// Builds a report whose overall verdict is the conjunction of the
    /// point verdicts.
    pub fn new(mode: Mode, grid: Vec<String>, verdicts: Vec<PointVerdict>) -> EquivalenceReport {
        let overall = verdicts.iter().all(|v| v.verdict.is_equal());
        EquivalenceReport {
            mode,
            grid,
            verdicts,
            overall,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> EquivalenceReport {
        self.note = Some(note.into());
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &PointVerdict> {
        self.verdicts.iter().filter(|v| !v.verdict.is_equal())
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let passed = self
            .verdicts
            .iter()
            .filter(|v| v.verdict.is_equal())
            .count();
        write!(
            f,
            "{} ({}): {}/{} points equal",
            if self.overall { "pass" } else { "FAIL" },
            self.mode,
            passed,
            self.verdicts.len()
        )?;
        if let Some(note) = &self.note {
            write!(f, "; {note}")?;
        }
        for v in self.failures().take(5) {
            match &v.verdict {
                Verdict::Unequal { left, right } => {
                    write!(f, "\n  {}: {} vs {}", v.point, left, right)?
                }
                Verdict::Error { message } => write!(f, "\n  {}: {}", v.point, message)?,
                Verdict::Equal => {}
            }
        }
        Ok(())
    }
}
