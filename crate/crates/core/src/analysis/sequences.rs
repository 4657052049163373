//! Scalar-sequence bounds, the divergence diagnostic and rate fits.

use serde::{Deserialize, Serialize};

use super::report::{Acc, CheckReport};
use crate::algorithms::{GreedyTrace, WeaknessSequence};
use crate::error::{Error, Result};
use crate::space::SmoothnessParams;

/// Relative slack on the hypotheses of the sequence bounds.
pub const HYPOTHESIS_TOL: f64 = 1e-12;
pub const SEQUENCE_TOL: f64 = 1e-12;

/// Checks x_m <= (1/C1 + sum_{k<=m} a_k)^-1 given x_0 <= C1 and
/// x_{m+1} <= x_m (1 - x_m a_{m+1}) for m >= 0.
///
/// `x_seq` holds x_0..x_M and `a_seq` holds a_1..a_M (at least M values).
/// Reports NotApplicable when a hypothesis fails.
pub fn check_hl1(x_seq: &[f64], c1: f64, a_seq: &[f64]) -> CheckReport {
    let name = "hl1";
    if x_seq.is_empty() {
        return CheckReport::not_applicable(name, "empty sequence");
    }
    let steps = x_seq.len() - 1;
    if !(c1 > 0.0) || a_seq.len() < steps {
        return CheckReport::not_applicable(name, "need C1 > 0 and one a_k per step");
    }
    if let Some(k) = a_seq[..steps].iter().position(|a| !(*a >= 0.0)) {
        return CheckReport::not_applicable(name, format!("a_{} is negative", k + 1));
    }
    if let Some(m) = x_seq.iter().position(|x| !(*x >= 0.0)) {
        return CheckReport::not_applicable(name, format!("x_{m} is negative"));
    }
    if x_seq[0] > c1 * (1.0 + HYPOTHESIS_TOL) {
        return CheckReport::not_applicable(name, format!("x_0 = {} exceeds C1 = {c1}", x_seq[0]));
    }
    for m in 0..steps {
        let (x, next) = (x_seq[m], x_seq[m + 1]);
        let cap = x * (1.0 - x * a_seq[m]);
        if next > cap + HYPOTHESIS_TOL * x.max(1e-300) {
            return CheckReport::not_applicable(
                name,
                format!("recursion fails at m = {m}: {next:e} > {cap:e}"),
            );
        }
    }
    let mut acc = Acc::new(name, SEQUENCE_TOL);
    let mut inv = 1.0 / c1;
    for (m, &x) in x_seq.iter().enumerate() {
        if m > 0 {
            inv += a_seq[m - 1];
        }
        let bound = 1.0 / inv;
        acc.record((bound - x) / bound, || {
            format!("m = {m}: {x:e} > {bound:e}")
        });
    }
    acc.finish()
}

/// The constant the excursion argument gives: a_n n^alpha <= 2^(1+alpha) A.
pub fn ml4_constant(alpha: f64) -> f64 {
    2f64.powf(1.0 + alpha)
}

/// Whether (a_1..a_N) meets the hypotheses with constant `a_const`;
/// returns the first failure.
fn ml4_hypotheses(
    a_seq: &[f64],
    alpha: f64,
    gamma_param: f64,
    a_const: f64,
) -> std::result::Result<(), String> {
    if !(0.0 < alpha && alpha < gamma_param && gamma_param <= 1.0) {
        return Err(format!(
            "need 0 < alpha < gamma <= 1 (alpha = {alpha}, gamma = {gamma_param})"
        ));
    }
    if a_seq.is_empty() || !(a_const > a_seq[0]) {
        return Err("need A > a_1".into());
    }
    let slack = |x: f64| HYPOTHESIS_TOL * x.abs().max(a_const);
    for n in 2..=a_seq.len() {
        let (prev, cur) = (a_seq[n - 2], a_seq[n - 1]);
        let cap = prev + a_const * ((n - 1) as f64).powf(-alpha);
        if cur > cap + slack(cap) {
            return Err(format!("growth hypothesis fails at n = {n}"));
        }
    }
    for v in 2..a_seq.len() {
        let av = a_seq[v - 1];
        if av >= a_const * (v as f64).powf(-alpha) {
            let cap = av * (1.0 - gamma_param / v as f64);
            if a_seq[v] > cap + slack(cap) {
                return Err(format!("contraction hypothesis fails at v = {v}"));
            }
        }
    }
    Ok(())
}

/// Verifies the hypotheses, then that max_n a_n n^alpha / A stays below
/// [`ml4_constant`]. The observed ratio is reported as `value`, with the
/// ratio over the first half of the sequence in the notes.
pub fn check_ml4(a_seq: &[f64], alpha: f64, gamma_param: f64, a_const: f64) -> CheckReport {
    if let Err(reason) = ml4_hypotheses(a_seq, alpha, gamma_param, a_const) {
        return CheckReport::not_applicable("ml4", reason);
    }
    let bound = ml4_constant(alpha);
    let mut acc = Acc::new("ml4", SEQUENCE_TOL * bound);
    let mut max_ratio: f64 = 0.0;
    let mut half_ratio: f64 = 0.0;
    for (k, &a) in a_seq.iter().enumerate() {
        let n = (k + 1) as f64;
        let ratio = a * n.powf(alpha) / a_const;
        max_ratio = max_ratio.max(ratio);
        if 2 * (k + 1) <= a_seq.len() {
            half_ratio = max_ratio;
        }
        acc.record(bound - ratio, || {
            format!("n = {}: ratio {ratio:.6} > {bound:.6}", k + 1)
        });
    }
    acc.value = Some(max_ratio);
    acc.notes.push(format!(
        "ratio over first half {half_ratio:.6}, full {max_ratio:.6}"
    ));
    acc.finish()
}

/// Smallest A for which (a_1..a_N) meets the hypotheses, if the
/// contraction exponent and alpha are admissible.
pub fn fit_ml4_constant(a_seq: &[f64], alpha: f64, gamma_param: f64) -> Option<f64> {
    if a_seq.is_empty() || !(0.0 < alpha && alpha < gamma_param && gamma_param <= 1.0) {
        return None;
    }
    let mut need = a_seq[0].max(0.0);
    for n in 2..=a_seq.len() {
        need = need.max((a_seq[n - 1] - a_seq[n - 2]) * ((n - 1) as f64).powf(alpha));
    }
    // contraction failures must not trigger: A > a_v v^alpha there
    for v in 2..a_seq.len() {
        let av = a_seq[v - 1];
        if a_seq[v] > av * (1.0 - gamma_param / v as f64) {
            need = need.max(av * (v as f64).powf(alpha));
        }
    }
    let a = need * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    ml4_hypotheses(a_seq, alpha, gamma_param, a).ok().map(|_| a)
}

/// Partial sums of t_m s^-1(theta t_m) with s(u) = rho_bound(u) / u, so
/// s^-1(v) = (v / gamma)^(1/(q-1)). Diagnostic only: the final partial sum
/// is `value`, checkpoints and the late growth exponent go to `notes`.
pub fn check_condition_43(
    tau: &WeaknessSequence,
    theta: f64,
    n_terms: usize,
    params: &SmoothnessParams,
) -> Result<CheckReport> {
    if !(theta > 0.0) {
        return Err(Error::param("theta", "must be positive"));
    }
    tau.validate(n_terms)?;
    let e = 1.0 / (params.q - 1.0);
    let mut sums = Vec::with_capacity(n_terms);
    let mut s = 0.0;
    for m in 1..=n_terms {
        let t = tau.get(m);
        s += t * (theta * t / params.gamma).powf(e);
        sums.push(s);
    }
    let mut report = CheckReport::diagnostic("condition_43", Some(s), format!("theta = {theta}"));
    report.samples = n_terms;
    let mut n = 1;
    while n <= n_terms {
        report.notes.push(format!("S_{n} = {:.6e}", sums[n - 1]));
        n *= 2;
    }
    if n_terms >= 4 {
        let lo = n_terms / 2;
        let (a, b) = (sums[lo - 1], sums[n_terms - 1]);
        if a > 0.0 && b > 0.0 {
            let growth = (b / a).ln() / (n_terms as f64 / lo as f64).ln();
            report.notes.push(format!(
                "growth exponent over [{lo}, {n_terms}]: {growth:.4}"
            ));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Window actually fitted.
    pub window: (usize, usize),
    pub r_squared: f64,
    /// Window asked for, when it had to be shrunk.
    pub requested: Option<(usize, usize)>,
}

/// Least-squares fit of log ||f_m|| against log m for m in `window`
/// (inclusive), where `norms[m]` = ||f_m||.
///
/// The window is cut at the end of the data and before the first zero
/// residual; the requested window is then kept in `requested`.
pub fn fit_log_slope(norms: &[f64], window: (usize, usize)) -> Result<RateFit> {
    let (lo, hi) = window;
    if lo < 2 || hi <= lo {
        return Err(Error::param(
            "window",
            format!("need 2 <= m_lo < m_hi, got ({lo}, {hi})"),
        ));
    }
    let mut end = hi.min(norms.len().saturating_sub(1));
    if let Some(z) = (lo..=end.max(lo)).find(|&m| m < norms.len() && !(norms[m] > 0.0)) {
        end = z.saturating_sub(1);
    }
    if end < lo + 1 {
        return Err(Error::param(
            "window",
            format!(
                "fewer than two positive residuals in [{lo}, {hi}] (data ends at {})",
                norms.len().saturating_sub(1)
            ),
        ));
    }
    let pts: Vec<(f64, f64)> = (lo..=end)
        .map(|m| ((m as f64).ln(), norms[m].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept,
        window: (lo, end),
        r_squared,
        requested: (end != hi).then_some(window),
    })
}

pub fn fit_trace_slope(trace: &GreedyTrace, window: (usize, usize)) -> Result<RateFit> {
    fit_log_slope(&trace.residual_norms(), window)
}

/// max_m ||f_m|| m^(1/p') / gamma^(1/q): the constant in the averaging
/// algorithms' rate, as observed.
pub fn empirical_rate_constant(trace: &GreedyTrace, params: &SmoothnessParams) -> f64 {
    trace
        .records
        .iter()
        .map(|r| r.residual_norm * (r.m as f64).powf(1.0 / params.p_dual))
        .fold(0.0, f64::max)
        / params.gamma.powf(1.0 / params.q)
}
