//! Verdicts, witnesses, and suite reports.
//!
//! Every randomized checker returns a [`Verdict`]: pass, a concrete
//! counterexample with the data that broke the property, or not-applicable
//! with a reason. Suites collect verdicts into a [`SuiteReport`] whose JSON
//! serialization is deterministic byte for byte.

use serde::{Deserialize, Serialize};

/// Concrete data refuting a property: a label plus named vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub data: Vec<(String, Vec<f64>)>,
}

impl Witness {
    pub fn new(label: impl Into<String>) -> Witness {
        Witness {
            label: label.into(),
            data: Vec::new(),
        }
    }

    pub fn with_vector(
        mut self,
        name: impl Into<String>,
        v: impl IntoIterator<Item = f64>,
    ) -> Self {
        self.data.push((name.into(), v.into_iter().collect()));
        self
    }

    pub fn with_scalar(self, name: impl Into<String>, v: f64) -> Self {
        self.with_vector(name, [v])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Counterexample { witness: Witness },
    NotApplicable { reason: String },
}

impl Outcome {
    pub fn summary(&self) -> ExpectedOutcome {
        match self {
            Outcome::Pass => ExpectedOutcome::Pass,
            Outcome::Counterexample { .. } => ExpectedOutcome::Counterexample,
            Outcome::NotApplicable { .. } => ExpectedOutcome::NotApplicable,
        }
    }
}

/// The result of one property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub trials: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn pass(trials: usize, seed: u64) -> Verdict {
        Verdict {
            outcome: Outcome::Pass,
            trials,
            seed,
            notes: Vec::new(),
        }
    }

    pub fn counterexample(witness: Witness, trials: usize, seed: u64) -> Verdict {
        Verdict {
            outcome: Outcome::Counterexample { witness },
            trials,
            seed,
            notes: Vec::new(),
        }
    }

    pub fn not_applicable(reason: impl Into<String>, seed: u64) -> Verdict {
        Verdict {
            outcome: Outcome::NotApplicable {
                reason: reason.into(),
            },
            trials: 0,
            seed,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Verdict {
        self.notes.push(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.outcome, Outcome::Pass)
    }

    pub fn found_counterexample(&self) -> bool {
        matches!(self.outcome, Outcome::Counterexample { .. })
    }
}

/// What a suite entry is supposed to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOutcome {
    Pass,
    Counterexample,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub id: String,
    pub description: String,
    pub expected: ExpectedOutcome,
    pub matches_expected: bool,
    pub verdict: Verdict,
}

/// A named collection of checked properties under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, seed: u64) -> SuiteReport {
        SuiteReport {
            suite: suite.into(),
            seed,
            entries: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        id: impl Into<String>,
        description: impl Into<String>,
        expected: ExpectedOutcome,
        verdict: Verdict,
    ) {
        let matches_expected = verdict.outcome.summary() == expected;
        self.entries.push(SuiteEntry {
            id: id.into(),
            description: description.into(),
            expected,
            matches_expected,
            verdict,
        });
    }

    /// True when every entry produced its expected outcome.
    pub fn all_match(&self) -> bool {
        self.entries.iter().all(|e| e.matches_expected)
    }

    pub fn mismatches(&self) -> Vec<&SuiteEntry> {
        self.entries
            .iter()
            .filter(|e| !e.matches_expected)
            .collect()
    }

    /// Deterministic pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<SuiteReport, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Merges another report's entries under this report's name.
    pub fn absorb(&mut self, other: SuiteReport) {
        self.entries.extend(other.entries);
    }
}
