//! Per-iteration traces and their CSV / JSON encodings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dictionary::SelectPolicy;
use crate::error::{Error, Result};
use crate::space::{CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Wgafr,
    Gawr,
    Iac,
    Iacc,
}

impl AlgorithmId {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmId::Wgafr => "wgafr",
            AlgorithmId::Gawr => "gawr",
            AlgorithmId::Iac => "iac",
            AlgorithmId::Iacc => "iacc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wgafr" => Some(AlgorithmId::Wgafr),
            "gawr" => Some(AlgorithmId::Gawr),
            "iac" => Some(AlgorithmId::Iac),
            "iacc" => Some(AlgorithmId::Iacc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// All requested iterations ran.
    Completed,
    /// Residual norm fell to the early-stop threshold.
    ResidualVanished,
    /// The residual's norming functional annihilates the dictionary.
    Stagnated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub m: usize,
    pub selected_index: usize,
    pub phase: C64,
    pub lambda: C64,
    /// w_m (free relaxation), r_m (relaxation schedule) or 1/m (incremental).
    pub w_or_r: C64,
    pub residual_norm: f64,
    /// ||F_{f_{m-1}}||_D at selection time.
    pub dual_norm: f64,
    pub eps_m: Option<f64>,
    pub solver_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub algorithm: AlgorithmId,
    pub policy: SelectPolicy,
    pub config_hash: Option<String>,
    /// ||f_0|| = ||f||.
    pub initial_residual_norm: f64,
    pub stop_reason: StopReason,
    pub records: Vec<TraceRecord>,
    /// G_m after each recorded step; kept in memory only.
    #[serde(skip)]
    pub approximants: Vec<CVec>,
    /// Largest gap between G_m and its barycentric rebuild (incremental runs).
    #[serde(skip)]
    pub max_reconstruction_error: f64,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "m",
    "algo",
    "selected_index",
    "phase_re",
    "phase_im",
    "lambda_re",
    "lambda_im",
    "w_or_r_re",
    "w_or_r_im",
    "residual_norm",
    "dual_norm",
    "eps_m",
    "solver_converged",
];

const HASH_PREFIX: &str = "# config_hash=";

impl GreedyTrace {
    /// ||f_0||, ||f_1||, ..., ||f_M||.
    pub fn residual_norms(&self) -> Vec<f64> {
        std::iter::once(self.initial_residual_norm)
            .chain(self.records.iter().map(|r| r.residual_norm))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_residual(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_residual_norm, |r| r.residual_norm)
    }

    /// CSV with a leading `# config_hash=` comment and the fixed column order.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let hash = self.config_hash.as_deref().unwrap_or("none");
        let _ = writeln!(out, "{HASH_PREFIX}{hash}");
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        let algo = self.algorithm.as_str();
        for r in &self.records {
            let eps = r.eps_m.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.m,
                algo,
                r.selected_index,
                r.phase.re,
                r.phase.im,
                r.lambda.re,
                r.lambda.im,
                r.w_or_r.re,
                r.w_or_r.im,
                r.residual_norm,
                r.dual_norm,
                eps,
                r.solver_converged
            );
        }
        out
    }
}

/// A trace read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrace {
    pub config_hash: Option<String>,
    pub algorithm: Option<AlgorithmId>,
    pub records: Vec<TraceRecord>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses the CSV emitted by [`GreedyTrace::to_csv`]. Errors carry 1-based
/// line numbers.
pub fn parse_trace_csv(text: &str) -> Result<CsvTrace> {
    let mut config_hash = None;
    let mut algorithm = None;
    let mut records = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(h) = raw.strip_prefix(HASH_PREFIX) {
            let h = h.trim();
            config_hash = (h != "none").then(|| h.to_string());
            continue;
        }
        if raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if !header_seen {
            if fields != CSV_COLUMNS {
                return Err(parse_err(line, format!("unexpected header `{raw}`")));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != CSV_COLUMNS.len() {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields, found {}",
                    CSV_COLUMNS.len(),
                    fields.len()
                ),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("column `{}`: {e}", CSV_COLUMNS[i])))
        };
        let int = |i: usize| -> Result<usize> {
            fields[i]
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(line, format!("column `{}`: {e}", CSV_COLUMNS[i])))
        };
        let algo = AlgorithmId::parse(fields[1].trim())
            .ok_or_else(|| parse_err(line, format!("unknown algorithm `{}`", fields[1])))?;
        match algorithm {
            None => algorithm = Some(algo),
            Some(a) if a != algo => return Err(parse_err(line, "mixed algorithms in one trace")),
            _ => {}
        }
        let eps_m = if fields[11].trim().is_empty() {
            None
        } else {
            Some(num(11)?)
        };
        let solver_converged = match fields[12].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(parse_err(
                    line,
                    format!("column `solver_converged`: `{other}`"),
                ))
            }
        };
        let m = int(0)?;
        if let Some(prev) = records.last().map(|r: &TraceRecord| r.m) {
            if m <= prev {
                return Err(parse_err(line, format!("iteration {m} does not increase")));
            }
        }
        let residual_norm = num(9)?;
        if !(residual_norm >= 0.0) {
            return Err(parse_err(line, "negative residual norm"));
        }
        records.push(TraceRecord {
            m,
            selected_index: int(2)?,
            phase: C64::new(num(3)?, num(4)?),
            lambda: C64::new(num(5)?, num(6)?),
            w_or_r: C64::new(num(7)?, num(8)?),
            residual_norm,
            dual_norm: num(10)?,
            eps_m,
            solver_converged,
        });
    }
    if !header_seen {
        return Err(parse_err(text.lines().count().max(1), "missing header row"));
    }
    Ok(CsvTrace {
        config_hash,
        algorithm,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(m: usize) -> TraceRecord {
        TraceRecord {
            m,
            selected_index: m * 3,
            phase: C64::new(0.6, -0.8),
            lambda: C64::new(0.1 / m as f64, 1e-17),
            w_or_r: C64::new(1.0 / m as f64, 0.0),
            residual_norm: 1.0 / (m as f64).sqrt(),
            dual_norm: 0.3,
            eps_m: m.is_multiple_of(2).then_some(0.25),
            solver_converged: m != 2,
        }
    }

    fn trace(n: usize) -> GreedyTrace {
        GreedyTrace {
            algorithm: AlgorithmId::Iac,
            policy: SelectPolicy::Argmax,
            config_hash: Some("abc123".into()),
            initial_residual_norm: 1.0,
            stop_reason: StopReason::Completed,
            records: (1..=n).map(record).collect(),
            approximants: Vec::new(),
            max_reconstruction_error: 0.0,
        }
    }

    #[test]
    fn csv_header_is_fixed() {
        let csv = trace(1).to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# config_hash=abc123"));
        assert_eq!(
            lines.next(),
            Some("m,algo,selected_index,phase_re,phase_im,lambda_re,lambda_im,w_or_r_re,w_or_r_im,residual_norm,dual_norm,eps_m,solver_converged")
        );
    }

    #[test]
    fn corrupted_rows_report_line_numbers() {
        let csv = trace(3).to_csv();
        let mut lines: Vec<String> = csv.lines().map(String::from).collect();
        lines[3] = lines[3].replace("0.6", "zero-point-six");
        let err = parse_trace_csv(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");

        let mut lines: Vec<String> = csv.lines().map(String::from).collect();
        lines[4].push_str(",extra");
        assert!(matches!(
            parse_trace_csv(&lines.join("\n")),
            Err(Error::Parse { line: 5, .. })
        ));

        assert!(matches!(
            parse_trace_csv("m,algo\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_trace_csv(""), Err(Error::Parse { .. })));
    }

    proptest! {
        #[test]
        fn csv_round_trips(n in 0usize..20) {
            let t = trace(n);
            let back = parse_trace_csv(&t.to_csv()).unwrap();
            prop_assert_eq!(back.config_hash.as_deref(), Some("abc123"));
            prop_assert_eq!(back.records, t.records);
        }
    }
}
