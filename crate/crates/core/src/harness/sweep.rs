use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ExperimentConfig;
use super::run::{run_experiment, write_outputs};
use crate::error::{Error, Result};
use crate::par::{self, derive_seed, Exec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted path into the config, e.g. `space.p`.
    pub field: String,
    pub values: Vec<Value>,
}

fn one() -> usize {
    1
}

/// A grid of experiments: the Cartesian product of `axes`, each point run
/// `replicate_seeds` times with fresh dictionary and target seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default = "one")]
    pub replicate_seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
}

/// One sweep cell, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub replicate: usize,
    pub point: Vec<Value>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub replicate: usize,
    pub point: Vec<Value>,
    pub dictionary_seed: u64,
    pub target_seed: u64,
    pub ok: bool,
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub slope: Option<f64>,
    pub checks_passed: usize,
    pub checks_total: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| !r.ok || r.checks_passed < r.checks_total)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,replicate");
        for a in &self.axes {
            out.push(',');
            out.push_str(a);
        }
        out.push_str(",dictionary_seed,target_seed,status,iterations,final_residual,slope,checks_passed,checks_total,error\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.cell, r.replicate);
            for v in &r.point {
                let _ = write!(out, ",{}", csv_field(&value_text(v)));
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{},{},{},{}",
                r.dictionary_seed,
                r.target_seed,
                if r.ok { "ok" } else { "error" },
                r.iterations,
                opt(r.final_residual),
                opt(r.slope),
                r.checks_passed,
                r.checks_total,
                csv_field(r.error.as_deref().unwrap_or(""))
            );
        }
        out
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> std::result::Result<(), String> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| format!("`{}` is not a table", parts[..i].join(".")))?;
        let slot = obj
            .get_mut(*key)
            .ok_or_else(|| format!("no field `{path}` in the config schema"))?;
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    Err("empty field path".into())
}

/// Fills every optional section so that all schema fields exist as keys.
fn full_value(config: &ExperimentConfig) -> Result<Value> {
    let mut v = serde_json::to_value(config)?;
    if let Some(checks) = v.get_mut("checks").and_then(Value::as_object_mut) {
        checks.entry("slope_window").or_insert(Value::Null);
    }
    Ok(v)
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec =
            toml::from_str(text).map_err(|e| Error::config("sweep", e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec =
            serde_json::from_str(text).map_err(|e| Error::config("sweep", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.replicate_seeds == 0 {
            return Err(Error::config("replicate_seeds", "must be at least 1"));
        }
        let probe = full_value(&self.base)?;
        for (i, axis) in self.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(Error::config(
                    format!("axes[{i}].values"),
                    "must be nonempty",
                ));
            }
            let mut v = probe.clone();
            set_path(&mut v, &axis.field, Value::Null)
                .map_err(|m| Error::config(format!("axes[{i}].field"), m))?;
        }
        Ok(())
    }

    /// Expands the grid in row-major order (last axis fastest, replicates
    /// innermost). Cell `k` gets seeds derived from (master_seed, k).
    pub fn cells(&self) -> Result<Vec<SweepCell>> {
        self.validate()?;
        let base = full_value(&self.base)?;
        let sizes: Vec<usize> = self.axes.iter().map(|a| a.values.len()).collect();
        let points: usize = sizes.iter().product();
        let mut cells = Vec::with_capacity(points * self.replicate_seeds);
        for flat in 0..points {
            let mut rem = flat;
            let mut idx = vec![0; sizes.len()];
            for (k, &n) in sizes.iter().enumerate().rev() {
                idx[k] = rem % n;
                rem /= n;
            }
            let point: Vec<Value> = idx
                .iter()
                .zip(&self.axes)
                .map(|(&i, a)| a.values[i].clone())
                .collect();
            for replicate in 0..self.replicate_seeds {
                let index = cells.len();
                let mut v = base.clone();
                for (axis, value) in self.axes.iter().zip(&point) {
                    set_path(&mut v, &axis.field, value.clone())
                        .map_err(|m| Error::config(&axis.field, m))?;
                }
                let mut config: ExperimentConfig = serde_json::from_value(v)
                    .map_err(|e| Error::config(format!("cell {index}"), e.to_string()))?;
                let cell_seed = derive_seed(self.master_seed, index as u64);
                config.dictionary.seed = derive_seed(cell_seed, 0);
                config.target.seed = derive_seed(cell_seed, 1);
                cells.push(SweepCell {
                    index,
                    replicate,
                    point: point.clone(),
                    config,
                });
            }
        }
        Ok(cells)
    }
}

fn run_cell(cell: &SweepCell, out: Option<&Path>) -> SweepRow {
    let mut row = SweepRow {
        cell: cell.index,
        replicate: cell.replicate,
        point: cell.point.clone(),
        dictionary_seed: cell.config.dictionary.seed,
        target_seed: cell.config.target.seed,
        ok: false,
        iterations: 0,
        final_residual: None,
        slope: None,
        checks_passed: 0,
        checks_total: 0,
        error: None,
    };
    let result = run_experiment(&cell.config).and_then(|o| {
        if let Some(dir) = out {
            write_outputs(&o, &dir.join(format!("cell_{:05}", cell.index)))?;
        }
        Ok(o)
    });
    match result {
        Ok(o) => {
            let r = &o.report;
            row.ok = true;
            row.iterations = r.iterations;
            row.final_residual = Some(r.final_residual);
            row.slope = r.rate_fit.as_ref().map(|f| f.slope);
            let gated: Vec<_> = r
                .checks
                .iter()
                .filter(|c| {
                    matches!(
                        c.outcome,
                        crate::analysis::Outcome::Pass | crate::analysis::Outcome::Fail
                    )
                })
                .collect();
            row.checks_total = gated.len();
            row.checks_passed = gated.iter().filter(|c| c.passed).count();
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every cell (in parallel where enabled), writing per-cell artifacts
/// under `out/cell_NNNNN/` when `out` is given. Cell errors are recorded in
/// their row; the sweep carries on.
pub fn run_sweep(spec: &SweepSpec, out: Option<&Path>) -> Result<SweepSummary> {
    run_sweep_with(Exec::default(), spec, out)
}

pub fn run_sweep_with(exec: Exec, spec: &SweepSpec, out: Option<&Path>) -> Result<SweepSummary> {
    let cells = spec.cells()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let rows = par::map_indexed(exec, cells.len(), |i| run_cell(&cells[i], out));
    Ok(SweepSummary {
        axes: spec.axes.iter().map(|a| a.field.clone()).collect(),
        rows,
    })
}
