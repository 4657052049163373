use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Details kept per report; further violations are only counted.
const MAX_DETAILS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// The checked statement's hypotheses do not hold for the input.
    NotApplicable,
    /// Informational only; never counts as a failure.
    Diagnostic,
}

/// Result of one checker.
///
/// `worst_margin` is the smallest observed (right side - left side); the
/// check passes iff it is at least `-tolerance`. Checkers that combine
/// criteria with different slacks fold each slack into its margin and
/// report a tolerance of zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub outcome: Outcome,
    pub passed: bool,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Cases skipped because a hypothesis did not hold.
    pub skipped: usize,
    pub violations: usize,
    /// Checker-specific headline number (fitted constant, partial sum, ...).
    pub value: Option<f64>,
    pub details: Vec<String>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn not_applicable(name: impl Into<String>, reason: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            outcome: Outcome::NotApplicable,
            passed: true,
            worst_margin: 0.0,
            tolerance: 0.0,
            samples: 0,
            skipped: 0,
            violations: 0,
            value: None,
            details: Vec::new(),
            notes: vec![reason.into()],
        }
    }

    pub fn diagnostic(
        name: impl Into<String>,
        value: Option<f64>,
        note: impl Into<String>,
    ) -> Self {
        let mut r = CheckReport::not_applicable(name, note);
        r.outcome = Outcome::Diagnostic;
        r.value = value;
        r
    }

    pub fn is_failure(&self) -> bool {
        self.outcome == Outcome::Fail
    }

    /// Folds per-step reports of one checker into a single report.
    pub fn merge(name: impl Into<String>, parts: Vec<CheckReport>) -> CheckReport {
        let mut acc = Acc::new(name, parts.first().map_or(0.0, |p| p.tolerance));
        let mut any_applicable = parts.is_empty();
        for part in parts {
            if part.outcome == Outcome::NotApplicable {
                acc.skipped += part.samples.max(1);
                continue;
            }
            any_applicable = true;
            acc.samples += part.samples;
            acc.skipped += part.skipped;
            acc.violations += part.violations;
            if part.samples > 0 {
                acc.worst = Some(
                    acc.worst
                        .map_or(part.worst_margin, |w: f64| w.min(part.worst_margin)),
                );
            }
            for d in part.details {
                if acc.details.len() < MAX_DETAILS {
                    acc.details.push(d);
                }
            }
            acc.notes.extend(part.notes);
        }
        let mut report = acc.finish();
        if !any_applicable {
            report.outcome = Outcome::NotApplicable;
        }
        report
    }
}

/// Accumulates margins for a report.
#[derive(Debug, Clone)]
pub(crate) struct Acc {
    name: String,
    tol: f64,
    worst: Option<f64>,
    samples: usize,
    pub(crate) skipped: usize,
    violations: usize,
    details: Vec<String>,
    pub(crate) notes: Vec<String>,
    pub(crate) value: Option<f64>,
}

impl Acc {
    pub(crate) fn new(name: impl Into<String>, tol: f64) -> Self {
        Acc {
            name: name.into(),
            tol,
            worst: None,
            samples: 0,
            skipped: 0,
            violations: 0,
            details: Vec::new(),
            notes: Vec::new(),
            value: None,
        }
    }

    pub(crate) fn record(&mut self, margin: f64, context: impl FnOnce() -> String) {
        self.samples += 1;
        // NaN margins count as violations
        let bad = !(margin >= -self.tol);
        let m = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        self.worst = Some(self.worst.map_or(m, |w| w.min(m)));
        if bad {
            self.violations += 1;
            if self.details.len() < MAX_DETAILS {
                self.details
                    .push(format!("{}: margin {margin:.3e}", context()));
            }
        }
    }

    pub(crate) fn finish(self) -> CheckReport {
        let worst_margin = match self.worst {
            Some(w) if w.is_finite() => w,
            Some(_) => -f64::MAX,
            None => 0.0,
        };
        let passed = self.violations == 0;
        CheckReport {
            name: self.name,
            outcome: if passed { Outcome::Pass } else { Outcome::Fail },
            passed,
            worst_margin,
            tolerance: self.tol,
            samples: self.samples,
            skipped: self.skipped,
            violations: self.violations,
            value: self.value,
            details: self.details,
            notes: self.notes,
        }
    }
}

/// Orders reports by name (stable for equal names).
pub fn sort_reports(reports: &mut [CheckReport]) {
    reports.sort_by(|a, b| a.name.cmp(&b.name));
}

pub fn reports_to_json(reports: &[CheckReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn reports_from_json(text: &str) -> Result<Vec<CheckReport>> {
    Ok(serde_json::from_str(text)?)
}

/// `name,outcome,passed,worst_margin,samples` per report.
pub fn summary_csv(reports: &[CheckReport]) -> String {
    let mut out = String::from("name,outcome,passed,worst_margin,samples\n");
    for r in reports {
        let outcome = match r.outcome {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::NotApplicable => "not_applicable",
            Outcome::Diagnostic => "diagnostic",
        };
        let _ = writeln!(
            out,
            "{},{},{},{:e},{}",
            r.name, outcome, r.passed, r.worst_margin, r.samples
        );
    }
    out
}
