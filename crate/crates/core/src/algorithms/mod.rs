//! The four greedy loops, each recording a full per-iteration trace.
//!
//! All loops start from f_0 = f, G_0 = 0 and stop early once the residual
//! norm drops to [`RESIDUAL_STOP`], since the norming functional is
//! undefined at zero.

mod schedule;
mod trace;

pub use schedule::{epsilon_schedule, EpsilonSchedule, RelaxationSchedule, WeaknessSequence};
pub use trace::{
    parse_trace_csv, AlgorithmId, CsvTrace, GreedyTrace, StopReason, TraceRecord, CSV_COLUMNS,
};

use crate::dictionary::{
    eps_select_values, weak_select_values, Dictionary, EpsMode, Membership, SelectPolicy,
    TargetSpec,
};
use crate::error::{Error, Result};
use crate::solver::{minimize_free_relax, minimize_over_line, SolverConfig};
use crate::space::{norming_functional, CVec, C64};

pub const RESIDUAL_STOP: f64 = 1e-12;

/// Tolerance on the barycentric rebuild of incremental approximants.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

fn start(dict: &Dictionary, target: &TargetSpec, iters: usize) -> Result<f64> {
    if iters == 0 {
        return Err(Error::param("iters", "must be at least 1"));
    }
    let norm = dict.space().norm(&target.f)?;
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(norm)
}

fn empty_trace(
    algorithm: AlgorithmId,
    policy: SelectPolicy,
    f_norm: f64,
    iters: usize,
) -> GreedyTrace {
    GreedyTrace {
        algorithm,
        policy,
        config_hash: None,
        initial_residual_norm: f_norm,
        stop_reason: StopReason::Completed,
        records: Vec::with_capacity(iters),
        approximants: Vec::with_capacity(iters),
        max_reconstruction_error: 0.0,
    }
}

/// Weak greedy algorithm with free relaxation.
///
/// Step m picks phi_m with |F_{f_{m-1}}(phi_m)| >= t_m ||F_{f_{m-1}}||_D,
/// then re-optimizes both the shrinkage of G_{m-1} and the new coefficient:
/// G_m = (1 - w_m) G_{m-1} + lambda_m phi_m.
pub fn run_wgafr(
    dict: &Dictionary,
    target: &TargetSpec,
    tau: &WeaknessSequence,
    iters: usize,
    policy: SelectPolicy,
    cfg: &SolverConfig,
) -> Result<GreedyTrace> {
    let f_norm = start(dict, target, iters)?;
    tau.validate(iters)?;
    let space = dict.space();
    let f = &target.f;
    let mut trace = empty_trace(AlgorithmId::Wgafr, policy, f_norm, iters);
    let mut g = CVec::zeros(space.dim());
    let mut residual = f.clone();

    for m in 1..=iters {
        let func = norming_functional(space, &residual)?;
        let vals = dict.evaluate(&func)?;
        let sel = weak_select_values(&vals, tau.get(m), policy);
        let dual_norm = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if dual_norm == 0.0 {
            trace.stop_reason = StopReason::Stagnated;
            break;
        }
        let phi = dict.get(sel.index);
        let sol = minimize_free_relax(space, f, &g, phi, cfg)?;
        let (w, lambda) = (sol.minimizer[0], sol.minimizer[1]);
        g = g.scale(C64::new(1.0, 0.0) - w).add_scaled(lambda, phi);
        residual = f - &g;
        let residual_norm = space.norm(&residual)?;
        trace.records.push(TraceRecord {
            m,
            selected_index: sel.index,
            phase: sel.phase,
            lambda,
            w_or_r: w,
            residual_norm,
            dual_norm,
            eps_m: None,
            solver_converged: sol.converged,
        });
        trace.approximants.push(g.clone());
        if residual_norm <= RESIDUAL_STOP {
            trace.stop_reason = StopReason::ResidualVanished;
            break;
        }
    }
    Ok(trace)
}

/// Greedy algorithm with weakness and relaxation.
///
/// Selection as in [`run_wgafr`]; the previous approximant is shrunk by the
/// fixed factor 1 - r_m and only lambda_m is optimized.
pub fn run_gawr(
    dict: &Dictionary,
    target: &TargetSpec,
    tau: &WeaknessSequence,
    relax: &RelaxationSchedule,
    iters: usize,
    policy: SelectPolicy,
    cfg: &SolverConfig,
) -> Result<GreedyTrace> {
    let f_norm = start(dict, target, iters)?;
    tau.validate(iters)?;
    relax.validate(iters)?;
    let space = dict.space();
    let f = &target.f;
    let mut trace = empty_trace(AlgorithmId::Gawr, policy, f_norm, iters);
    let mut g = CVec::zeros(space.dim());
    let mut residual = f.clone();

    for m in 1..=iters {
        let func = norming_functional(space, &residual)?;
        let vals = dict.evaluate(&func)?;
        let sel = weak_select_values(&vals, tau.get(m), policy);
        let dual_norm = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if dual_norm == 0.0 {
            trace.stop_reason = StopReason::Stagnated;
            break;
        }
        let r_m = relax.get(m);
        let phi = dict.get(sel.index);
        let shrunk = g.scale(C64::new(1.0 - r_m, 0.0));
        let base = f - &shrunk;
        let sol = minimize_over_line(space, &base, phi, cfg)?;
        let lambda = sol.minimizer[0];
        g = shrunk.add_scaled(lambda, phi);
        residual = f - &g;
        let residual_norm = space.norm(&residual)?;
        trace.records.push(TraceRecord {
            m,
            selected_index: sel.index,
            phase: sel.phase,
            lambda,
            w_or_r: C64::new(r_m, 0.0),
            residual_norm,
            dual_norm,
            eps_m: None,
            solver_converged: sol.converged,
        });
        trace.approximants.push(g.clone());
        if residual_norm <= RESIDUAL_STOP {
            trace.stop_reason = StopReason::ResidualVanished;
            break;
        }
    }
    Ok(trace)
}

fn run_incremental(
    dict: &Dictionary,
    target: &TargetSpec,
    k1: f64,
    iters: usize,
    policy: SelectPolicy,
    mode: EpsMode,
) -> Result<GreedyTrace> {
    let f_norm = start(dict, target, iters)?;
    if target.eps != 0.0 {
        return Err(Error::param(
            "target.eps",
            "incremental algorithms need an exact target (eps = 0)",
        ));
    }
    let space = dict.space();
    let schedule = EpsilonSchedule::new(k1, space.smoothness())?;
    let (algorithm, phased) = match mode {
        EpsMode::Circle => (AlgorithmId::Iac, true),
        EpsMode::Plain => (AlgorithmId::Iacc, false),
    };
    let f = &target.f;
    let mut trace = empty_trace(algorithm, policy, f_norm, iters);
    let mut g = CVec::zeros(space.dim());
    let mut residual = f.clone();
    // Independent accumulation of sum_j nu_j phi_j and per-element weights,
    // used to certify the barycentric form of G_m every step.
    let mut sum = CVec::zeros(space.dim());
    let mut counts = vec![0usize; dict.len()];

    for m in 1..=iters {
        let eps_m = schedule.eps(m);
        let func = norming_functional(space, &residual)?;
        let vals = dict.evaluate(&func)?;
        let dual_norm = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let reference = func.apply(f)?.re;
        let sel = eps_select_values(&vals, reference, eps_m, mode, policy)?;
        let nu = sel.phase;
        let inv_m = 1.0 / m as f64;
        let phi = dict.get(sel.index);
        g = g
            .scale(C64::new(1.0 - inv_m, 0.0))
            .add_scaled(nu * inv_m, phi);
        residual = f - &g;
        let residual_norm = space.norm(&residual)?;

        sum.add_scaled_in_place(nu, phi);
        counts[sel.index] += 1;
        let mut err = sum.scale(C64::new(inv_m, 0.0)).max_abs_diff(&g);
        if !phased {
            let mut convex = CVec::zeros(space.dim());
            let mut total = 0.0;
            for (i, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                let w = c as f64 * inv_m;
                total += w;
                convex.add_scaled_in_place(C64::new(w, 0.0), dict.get(i));
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Invariant {
                    step: m,
                    what: format!("convex weights sum to {total}"),
                });
            }
            err = err.max(convex.max_abs_diff(&g));
        }
        if err > RECONSTRUCTION_TOL {
            return Err(Error::Invariant {
                step: m,
                what: format!("barycentric rebuild differs by {err:.3e}"),
            });
        }
        trace.max_reconstruction_error = trace.max_reconstruction_error.max(err);

        trace.records.push(TraceRecord {
            m,
            selected_index: sel.index,
            phase: nu,
            lambda: nu * inv_m,
            w_or_r: C64::new(inv_m, 0.0),
            residual_norm,
            dual_norm,
            eps_m: Some(eps_m),
            solver_converged: true,
        });
        trace.approximants.push(g.clone());
        if residual_norm <= RESIDUAL_STOP {
            trace.stop_reason = StopReason::ResidualVanished;
            break;
        }
    }
    Ok(trace)
}

/// Complex incremental algorithm with schedule eps_n = K1 gamma^(1/q) n^(-1/p).
///
/// Requires f in A_1(D). Each step picks phi in the phase circle of D with
/// Re F_{f_{m-1}}(phi - f) >= -eps_m and averages:
/// G_m = (1 - 1/m) G_{m-1} + nu_m phi_m / m.
pub fn run_iac(
    dict: &Dictionary,
    target: &TargetSpec,
    k1: f64,
    iters: usize,
    policy: SelectPolicy,
) -> Result<GreedyTrace> {
    if target.a_eps > 1.0 + 1e-12 {
        return Err(Error::param(
            "target.a_eps",
            "f must lie in A_1(D) (A_eps <= 1)",
        ));
    }
    run_incremental(dict, target, k1, iters, policy, EpsMode::Circle)
}

/// Complex convex incremental algorithm: as [`run_iac`] but over D itself
/// with no phase factor, so G_m stays a convex combination. Requires
/// f in conv(D).
pub fn run_iacc(
    dict: &Dictionary,
    target: &TargetSpec,
    k1: f64,
    iters: usize,
    policy: SelectPolicy,
) -> Result<GreedyTrace> {
    if target.membership != Membership::Conv {
        return Err(Error::param(
            "target.membership",
            "IAcc needs a convex-hull target",
        ));
    }
    run_incremental(dict, target, k1, iters, policy, EpsMode::Plain)
}
