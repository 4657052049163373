use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::algorithms::{
    parse_trace_csv, run_gawr, run_iac, run_iacc, run_wgafr, AlgorithmId, CsvTrace, GreedyTrace,
    StopReason, WeaknessSequence,
};
use crate::analysis::{
    check_barycentric, check_ml1_trace, check_ml3_trace, check_ml4, check_monotonicity,
    check_mt2_bound, check_trivial_step, empirical_rate_constant, fit_ml4_constant,
    fit_trace_slope, sort_reports, summary_csv, CheckReport, RateFit, MONOTONE_SLACK,
};
use crate::dictionary::{generate_dictionary, make_target, Dictionary, TargetSpec};
use crate::error::{Error, Result};
use crate::space::LpSpace;

/// Contraction exponent used when fitting the averaging algorithms'
/// residuals to the growth/contraction sequence bound.
pub const AVERAGING_CONTRACTION: f64 = 0.75;

pub const TRACE_CSV: &str = "trace.csv";
pub const TRACE_JSON: &str = "trace.json";
pub const REPORT_JSON: &str = "report.json";
pub const CHECKS_CSV: &str = "checks.csv";
pub const CONFIG_TOML: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub algorithm: AlgorithmId,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub rate_fit: Option<RateFit>,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub trace: GreedyTrace,
    pub report: RunReport,
}

/// Builds the space, dictionary and target a config describes.
pub fn build_instance(config: &ExperimentConfig) -> Result<(Dictionary, TargetSpec)> {
    let space = LpSpace::new(config.space.p, config.space.dim)?;
    let d = &config.dictionary;
    let dict = generate_dictionary(&space, d.count, d.kind, d.seed)?;
    let t = &config.target;
    let target = make_target(&dict, t.membership, t.sparsity, t.eps, t.seed)?;
    Ok((dict, target))
}

pub fn run_algorithm(
    config: &ExperimentConfig,
    dict: &Dictionary,
    target: &TargetSpec,
) -> Result<GreedyTrace> {
    let a = &config.algorithm;
    let mut trace = match a.id {
        AlgorithmId::Wgafr => {
            run_wgafr(dict, target, &a.weakness, a.iters, a.policy, &config.solver)?
        }
        AlgorithmId::Gawr => run_gawr(
            dict,
            target,
            &a.weakness,
            &a.relaxation,
            a.iters,
            a.policy,
            &config.solver,
        )?,
        AlgorithmId::Iac => run_iac(dict, target, a.k1, a.iters, a.policy)?,
        AlgorithmId::Iacc => run_iacc(dict, target, a.k1, a.iters, a.policy)?,
    };
    trace.config_hash = Some(config.hash());
    Ok(trace)
}

/// The checker suite for the trace's algorithm plus the rate fit, if a
/// window applies. Reports come back sorted by name.
pub fn check_trace(
    config: &ExperimentConfig,
    dict: &Dictionary,
    target: &TargetSpec,
    trace: &GreedyTrace,
) -> Result<(Vec<CheckReport>, Option<RateFit>)> {
    let space = dict.space();
    let params = space.smoothness();
    let a = &config.algorithm;
    let (a_eps, eps) = (target.a_eps, target.eps);
    let mut reports = Vec::new();
    match a.id {
        AlgorithmId::Wgafr => {
            reports.push(check_ml1_trace(space, trace, a_eps, eps, &a.weakness)?);
            reports.push(check_mt2_bound(trace, &params, a_eps, eps, &a.weakness));
            reports.push(check_monotonicity(trace, MONOTONE_SLACK));
        }
        AlgorithmId::Gawr => match a.weakness {
            WeaknessSequence::Constant(t) => {
                reports.push(check_ml3_trace(space, trace, a_eps, eps, t, &a.relaxation)?);
            }
            WeaknessSequence::General(_) => {
                reports.push(CheckReport::not_applicable(
                    "ml3_step",
                    "needs a constant weakness",
                ));
            }
        },
        AlgorithmId::Iac | AlgorithmId::Iacc => {
            reports.push(check_trivial_step(trace));
            reports.push(check_barycentric(trace, dict)?);
            let seq: Vec<f64> = trace.records.iter().map(|r| r.residual_norm).collect();
            let alpha = 1.0 / params.p_dual;
            let mut ml4 = match fit_ml4_constant(&seq, alpha, AVERAGING_CONTRACTION) {
                Some(big_a) => {
                    let mut r = check_ml4(&seq, alpha, AVERAGING_CONTRACTION, big_a);
                    r.notes.push(format!("fitted A = {big_a:.6e}"));
                    r
                }
                None => CheckReport::not_applicable("ml4", "no admissible A for this sequence"),
            };
            ml4.notes.push(format!(
                "max ||f_m|| m^(1/p') / gamma^(1/q) = {:.6e}",
                empirical_rate_constant(trace, &params)
            ));
            reports.push(ml4);
        }
    }
    let fit = match config.slope_window() {
        Some(w) => match fit_trace_slope(trace, w) {
            Ok(fit) => {
                reports.push(CheckReport::diagnostic(
                    "rate_slope",
                    Some(fit.slope),
                    format!("window {:?}, r^2 = {:.6}", fit.window, fit.r_squared),
                ));
                Some(fit)
            }
            Err(e) => {
                reports.push(CheckReport::diagnostic("rate_slope", None, e.to_string()));
                None
            }
        },
        None => None,
    };
    sort_reports(&mut reports);
    Ok((reports, fit))
}

/// Builds, runs and checks one experiment. Pure in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let (dict, target) = build_instance(config)?;
    let trace = run_algorithm(config, &dict, &target)?;
    let (checks, rate_fit) = check_trace(config, &dict, &target, &trace)?;
    let report = RunReport {
        config_hash: config.hash(),
        algorithm: trace.algorithm,
        stop_reason: trace.stop_reason,
        iterations: trace.len(),
        initial_residual: trace.initial_residual_norm,
        final_residual: trace.final_residual(),
        rate_fit,
        passed: !checks.iter().any(CheckReport::is_failure),
        checks,
    };
    Ok(ExperimentOutput {
        config: config.clone(),
        trace,
        report,
    })
}

/// Writes the enabled artifacts into `dir` and returns their paths.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let hash = &out.report.config_hash;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put(
        CONFIG_TOML,
        format!("# config_hash={hash}\n{}", out.config.to_toml()?),
    )?;
    if out.config.output.trace_csv {
        put(TRACE_CSV, out.trace.to_csv())?;
    }
    if out.config.output.trace_json {
        put(TRACE_JSON, serde_json::to_string_pretty(&out.trace)? + "\n")?;
    }
    put(
        REPORT_JSON,
        serde_json::to_string_pretty(&out.report)? + "\n",
    )?;
    if out.config.output.summary_csv {
        put(
            CHECKS_CSV,
            format!("# config_hash={hash}\n{}", summary_csv(&out.report.checks)),
        )?;
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Reads a trace CSV and report JSON pair, refusing pairs whose config
/// hashes differ.
pub fn read_run_pair(trace_path: &Path, report_path: &Path) -> Result<(CsvTrace, RunReport)> {
    let trace = parse_trace_csv(&std::fs::read_to_string(trace_path)?)?;
    let report = read_report(report_path)?;
    let trace_hash = trace.config_hash.clone().unwrap_or_else(|| "none".into());
    if trace_hash != report.config_hash {
        return Err(Error::HashMismatch {
            trace: trace_hash,
            report: report.config_hash,
        });
    }
    Ok((trace, report))
}

pub fn read_run(dir: &Path) -> Result<(CsvTrace, RunReport)> {
    read_run_pair(&dir.join(TRACE_CSV), &dir.join(REPORT_JSON))
}
