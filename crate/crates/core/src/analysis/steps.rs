//! Per-step inequalities checked against recorded traces.

use super::report::{Acc, CheckReport};
use crate::algorithms::{AlgorithmId, GreedyTrace, RelaxationSchedule, WeaknessSequence};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::space::{CVec, LpSpace, SmoothnessParams, C64};

/// Allowance for the inexact inner minimization.
pub const SOLVER_SLACK: f64 = 1e-8;
pub const MONOTONE_SLACK: f64 = 1e-8;
pub const TRIVIAL_STEP_SLACK: f64 = 1e-10;
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Points on the default lambda grid over [0, 1].
pub const GRID_POINTS: usize = 101;

fn step_norms(trace: &GreedyTrace, m: usize) -> Result<(f64, f64)> {
    if m == 0 || m > trace.len() {
        return Err(Error::param(
            "m",
            format!("step {m} outside 1..={}", trace.len()),
        ));
    }
    let prev = if m == 1 {
        trace.initial_residual_norm
    } else {
        trace.records[m - 2].residual_norm
    };
    Ok((prev, trace.records[m - 1].residual_norm))
}

/// A_q = 4 (8 gamma)^(1/(q-1)) 5^(q/(q-1))
pub fn mt2_constant(params: &SmoothnessParams) -> f64 {
    let e = 1.0 / (params.q - 1.0);
    4.0 * (8.0 * params.gamma).powf(e) * 5f64.powf(params.q * e)
}

/// The lambda at which the rate proof balances the two terms:
/// ||f_{k-1}||^(q/(q-1)) 5^(-q/(q-1)) (8 gamma A)^(-1/(q-1)) t^(1/(q-1)).
pub fn ml1_optimal_lambda(params: &SmoothnessParams, f_prev: f64, a_eps: f64, t: f64) -> f64 {
    let e = 1.0 / (params.q - 1.0);
    f_prev.powf(params.q * e)
        * 5f64.powf(-params.q * e)
        * (8.0 * params.gamma * a_eps).powf(-e)
        * t.powf(e)
}

/// 101 points on [0, 1] plus the optimal lambda.
pub fn default_lambda_grid(params: &SmoothnessParams, f_prev: f64, a_eps: f64, t: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    grid.push(ml1_optimal_lambda(params, f_prev, a_eps, t));
    grid
}

/// ||f_{m-1}|| (1 - lambda t A^-1 (1 - eps/||f_{m-1}||) + 2 rho(5 lambda/||f_{m-1}||))
pub fn ml1_rhs(space: &LpSpace, f_prev: f64, a_eps: f64, eps: f64, t: f64, lambda: f64) -> f64 {
    f_prev
        * (1.0 - lambda * t / a_eps * (1.0 - eps / f_prev)
            + 2.0 * space.rho_bound(5.0 * lambda / f_prev))
}

/// One free-relaxation step against every lambda in `grid`.
pub fn check_ml1_step(
    space: &LpSpace,
    trace: &GreedyTrace,
    m: usize,
    a_eps: f64,
    eps: f64,
    t_m: f64,
    grid: &[f64],
) -> Result<CheckReport> {
    let (prev, cur) = step_norms(trace, m)?;
    let mut acc = Acc::new("ml1_step", SOLVER_SLACK);
    for &lambda in grid {
        let rhs = ml1_rhs(space, prev, a_eps, eps, t_m, lambda);
        acc.record(rhs - cur, || {
            format!("step {m}, lambda {lambda:.4e}: {cur:.12e} > {rhs:.12e}")
        });
    }
    Ok(acc.finish())
}

/// Every step of a free-relaxation trace on the default grid.
pub fn check_ml1_trace(
    space: &LpSpace,
    trace: &GreedyTrace,
    a_eps: f64,
    eps: f64,
    tau: &WeaknessSequence,
) -> Result<CheckReport> {
    let params = space.smoothness();
    let mut parts = Vec::with_capacity(trace.len());
    for m in 1..=trace.len() {
        let (prev, _) = step_norms(trace, m)?;
        let t = tau.get(m);
        let grid = default_lambda_grid(&params, prev, a_eps, t);
        parts.push(check_ml1_step(space, trace, m, a_eps, eps, t, &grid)?);
    }
    Ok(CheckReport::merge("ml1_step", parts))
}

/// One relaxation step; skipped when r_m = 0 or ||f_{m-1}|| <= eps.
#[allow(clippy::too_many_arguments)]
pub fn check_ml3_step(
    space: &LpSpace,
    trace: &GreedyTrace,
    m: usize,
    a_eps: f64,
    eps: f64,
    t: f64,
    r_m: f64,
    f_norm: f64,
) -> Result<CheckReport> {
    let (prev, cur) = step_norms(trace, m)?;
    if r_m == 0.0 {
        return Ok(CheckReport::not_applicable(
            "ml3_step",
            format!("step {m}: r_m = 0"),
        ));
    }
    if prev <= eps {
        return Ok(CheckReport::not_applicable(
            "ml3_step",
            format!("step {m}: ||f_(m-1)|| <= eps"),
        ));
    }
    let u = r_m * (f_norm + a_eps / t) / ((1.0 - r_m) * prev);
    let rhs = prev * (1.0 - r_m * (1.0 - eps / prev) + 2.0 * space.rho_bound(u));
    let mut acc = Acc::new("ml3_step", SOLVER_SLACK);
    acc.record(rhs - cur, || format!("step {m}: {cur:.12e} > {rhs:.12e}"));
    Ok(acc.finish())
}

pub fn check_ml3_trace(
    space: &LpSpace,
    trace: &GreedyTrace,
    a_eps: f64,
    eps: f64,
    t: f64,
    relax: &RelaxationSchedule,
) -> Result<CheckReport> {
    let f_norm = trace.initial_residual_norm;
    let parts = (1..=trace.len())
        .map(|m| check_ml3_step(space, trace, m, a_eps, eps, t, relax.get(m), f_norm))
        .collect::<Result<Vec<_>>>()?;
    let mut report = CheckReport::merge("ml3_step", parts);
    // keep the report readable on long traces
    report.notes.truncate(5);
    Ok(report)
}

/// max(2 eps, A_q^(1/p') (A + eps) (1 + sum_{k<=m} t_k^p')^(-1/p'))
pub fn mt2_bound(
    params: &SmoothnessParams,
    a_eps: f64,
    eps: f64,
    tau: &WeaknessSequence,
    m: usize,
) -> f64 {
    let pd = params.p_dual;
    let core = mt2_constant(params).powf(1.0 / pd)
        * (a_eps + eps)
        * (1.0 + tau.power_sum(m, pd)).powf(-1.0 / pd);
    core.max(2.0 * eps)
}

/// The explicit rate bound at every m, including m = 0.
pub fn check_mt2_bound(
    trace: &GreedyTrace,
    params: &SmoothnessParams,
    a_eps: f64,
    eps: f64,
    tau: &WeaknessSequence,
) -> CheckReport {
    let mut acc = Acc::new("mt2_bound", SOLVER_SLACK);
    let pd = params.p_dual;
    let mut power_sum = 0.0;
    let scale = mt2_constant(params).powf(1.0 / pd) * (a_eps + eps);
    for (m, norm) in trace.residual_norms().into_iter().enumerate() {
        if m > 0 {
            power_sum += tau.get(m).powf(pd);
        }
        let bound = (scale * (1.0 + power_sum).powf(-1.0 / pd)).max(2.0 * eps);
        acc.record(bound - norm, || {
            format!("m = {m}: {norm:.6e} > {bound:.6e}")
        });
    }
    acc.value = Some(mt2_constant(params));
    acc.finish()
}

/// ||f_m|| <= ||f_{m-1}|| + slack.
pub fn check_monotonicity(trace: &GreedyTrace, slack: f64) -> CheckReport {
    let mut acc = Acc::new("monotonicity", slack);
    let norms = trace.residual_norms();
    for (m, w) in norms.windows(2).enumerate() {
        acc.record(w[0] - w[1], || {
            format!("step {}: {:.12e} -> {:.12e}", m + 1, w[0], w[1])
        });
    }
    acc.finish()
}

/// ||f_m|| <= ||f_{m-1}|| + 2/m for the averaging algorithms.
pub fn check_trivial_step(trace: &GreedyTrace) -> CheckReport {
    let mut acc = Acc::new("trivial_step", TRIVIAL_STEP_SLACK);
    let norms = trace.residual_norms();
    for (k, w) in norms.windows(2).enumerate() {
        let m = (k + 1) as f64;
        acc.record(w[0] + 2.0 / m - w[1], || {
            format!("step {}: {:.12e} -> {:.12e}", k + 1, w[0], w[1])
        });
    }
    acc.finish()
}

/// Rebuilds G_m = (1/m) sum_j nu_j phi_j from the recorded selections and
/// compares with the stored approximants; for convex runs also checks the
/// weights count_i/m. Slacks are folded into margins.
pub fn check_barycentric(trace: &GreedyTrace, dict: &Dictionary) -> Result<CheckReport> {
    if !matches!(trace.algorithm, AlgorithmId::Iac | AlgorithmId::Iacc) {
        return Ok(CheckReport::not_applicable(
            "barycentric",
            "not an averaging trace",
        ));
    }
    let convex = trace.algorithm == AlgorithmId::Iacc;
    let mut acc = Acc::new("barycentric", 0.0);
    let mut sum = CVec::zeros(dict.space().dim());
    let mut counts = vec![0usize; dict.len()];
    let mut worst_err: f64 = 0.0;
    for (k, r) in trace.records.iter().enumerate() {
        let m = k + 1;
        if r.selected_index >= dict.len() {
            return Err(Error::param(
                "selected_index",
                format!("{} out of range", r.selected_index),
            ));
        }
        sum.add_scaled_in_place(r.phase, dict.get(r.selected_index));
        counts[r.selected_index] += 1;
        let inv = 1.0 / m as f64;
        if convex {
            let is_one = r.phase == C64::new(1.0, 0.0);
            acc.record(if is_one { 0.0 } else { -1.0 }, || {
                format!("step {m}: phase {} in a convex run", r.phase)
            });
            let total: f64 = counts.iter().map(|&c| c as f64 * inv).sum();
            acc.record(WEIGHT_SUM_TOL - (total - 1.0).abs(), || {
                format!("step {m}: weights sum to {total}")
            });
        }
        if let Some(g) = trace.approximants.get(k) {
            let rebuilt = if convex {
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .fold(CVec::zeros(g.len()), |acc, (i, &c)| {
                        acc.add_scaled(C64::new(c as f64 * inv, 0.0), dict.get(i))
                    })
            } else {
                sum.scale(C64::new(inv, 0.0))
            };
            let err = rebuilt.max_abs_diff(g);
            worst_err = worst_err.max(err);
            acc.record(RECONSTRUCTION_TOL - err, || {
                format!("step {m}: rebuild differs by {err:.3e}")
            });
        }
    }
    if trace.approximants.is_empty() && !trace.is_empty() {
        acc.notes
            .push("no stored approximants; weights only".into());
    }
    acc.value = Some(worst_err);
    Ok(acc.finish())
}
