//! Numerical checkers for the inequalities behind the greedy algorithms,
//! plus empirical rate fits.
//!
//! Every checker substitutes the closed-form upper bound for the modulus of
//! smoothness, which keeps each inequality in the safe direction.

mod geometry;
mod report;
mod sequences;
mod steps;

pub use geometry::{
    check_dual_norm_supremum, check_duality_map, check_duality_map_with, check_ll0, check_ll0_with,
    check_orthogonality, ll0_terms, ATTAINMENT_TOL, CERTIFICATE_TOL, COMPETITOR_SLACK, DUALITY_TOL,
    HULL_SLACK, LL0_TOL,
};
pub use report::{
    reports_from_json, reports_to_json, sort_reports, summary_csv, CheckReport, Outcome,
};
pub use sequences::{
    check_condition_43, check_hl1, check_ml4, empirical_rate_constant, fit_log_slope,
    fit_ml4_constant, fit_trace_slope, ml4_constant, RateFit, HYPOTHESIS_TOL, SEQUENCE_TOL,
};
pub use steps::{
    check_barycentric, check_ml1_step, check_ml1_trace, check_ml3_step, check_ml3_trace,
    check_monotonicity, check_mt2_bound, check_trivial_step, default_lambda_grid,
    ml1_optimal_lambda, ml1_rhs, mt2_bound, mt2_constant, GRID_POINTS, MONOTONE_SLACK,
    RECONSTRUCTION_TOL, SOLVER_SLACK, TRIVIAL_STEP_SLACK, WEIGHT_SUM_TOL,
};
