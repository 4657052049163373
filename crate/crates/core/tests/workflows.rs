//! End-to-end behaviour through the public API.

use approx::assert_abs_diff_eq;
use greedy_banach::algorithms::{
    epsilon_schedule, parse_trace_csv, run_gawr, run_iac, run_iacc, run_wgafr, RelaxationSchedule,
    WeaknessSequence,
};
use greedy_banach::analysis::{
    check_hl1, check_ll0_with, check_ml1_trace, fit_log_slope, mt2_constant, Outcome, LL0_TOL,
};
use greedy_banach::dictionary::{
    dict_dual_norm, eps_select, generate_dictionary, weak_select, DictKind, EpsMode, Membership,
    SelectPolicy, TargetSpec,
};
use greedy_banach::harness::{
    read_run, run_experiment, run_sweep_with, verify_suite, write_outputs, ExperimentConfig,
    Profile, SweepSpec, TRACE_CSV,
};
use greedy_banach::par::Exec;
use greedy_banach::solver::SolverConfig;
use greedy_banach::space::{complex_sign, norming_functional, rho_bound};
use greedy_banach::{CVec, Error, LpSpace, C64};

fn canonical(p: f64, n: usize) -> greedy_banach::dictionary::Dictionary {
    generate_dictionary(&LpSpace::new(p, n).unwrap(), n, DictKind::Canonical, 0).unwrap()
}

fn half_half(membership: Membership) -> (greedy_banach::dictionary::Dictionary, TargetSpec) {
    let d = canonical(2.0, 2);
    let h = C64::new(0.5, 0.0);
    let t = TargetSpec::from_terms(&d, membership, vec![(0, h), (1, h)]).unwrap();
    (d, t)
}

#[test]
fn documented_geometry_values() {
    let s2 = LpSpace::new(2.0, 2).unwrap();
    let v = CVec::new(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)]).unwrap();
    assert_abs_diff_eq!(s2.norm(&v).unwrap(), 5.0, epsilon = 1e-15);
    let ones = CVec::from_real(&[1.0, 1.0]);
    assert_abs_diff_eq!(
        LpSpace::new(1.5, 2).unwrap().norm(&ones).unwrap(),
        1.587401051968199,
        epsilon = 1e-12
    );
    assert_eq!(complex_sign(C64::new(0.0, 0.0)), C64::new(1.0, 0.0));
    assert_abs_diff_eq!(complex_sign(C64::new(3.0, 4.0)).im, 0.8, epsilon = 1e-15);

    let f = norming_functional(&s2, &v).unwrap();
    assert_abs_diff_eq!(f.apply(&CVec::unit(2, 0)).unwrap().re, 0.6, epsilon = 1e-15);
    let s3 = LpSpace::new(3.0, 2).unwrap();
    let g = norming_functional(&s3, &ones).unwrap();
    assert_abs_diff_eq!(
        g.apply(&ones).unwrap().re,
        2f64.powf(1.0 / 3.0),
        epsilon = 1e-12
    );

    assert_abs_diff_eq!(rho_bound(&s2, 0.1), 0.005, epsilon = 1e-15);
    assert_abs_diff_eq!(
        rho_bound(&LpSpace::new(4.0, 1).unwrap(), 0.5),
        0.375,
        epsilon = 1e-15
    );
    let sp = LpSpace::new(1.5, 1).unwrap().smoothness();
    assert_eq!((sp.q, sp.p_dual), (1.5, 3.0));
    assert_abs_diff_eq!(sp.gamma, 2.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn documented_selection_values() {
    let d = canonical(2.0, 3);
    let s = d.space();
    let h = norming_functional(s, &CVec::from_real(&[1.0, 0.5, 0.0])).unwrap();
    let (sup, idx) = dict_dual_norm(&h, &d).unwrap();
    assert_abs_diff_eq!(sup, 1.0 / 1.25f64.sqrt(), epsilon = 1e-12);
    assert_eq!(idx, 0);
    let sel = weak_select(&h, &d, 0.4, SelectPolicy::FirstQualifying).unwrap();
    assert_eq!(sel.index, 0);

    // f = 2 e_1 lies outside conv(D): nothing qualifies at eps = 0
    let d2 = canonical(2.0, 2);
    let f = CVec::from_real(&[2.0, 0.0]);
    let func = norming_functional(d2.space(), &f).unwrap();
    let err = eps_select(&func, &d2, &f, 0.0, EpsMode::Plain, SelectPolicy::Argmax).unwrap_err();
    assert!(matches!(err, Error::InfeasibleSelection { .. }));
}

#[test]
fn documented_algorithm_traces() {
    let cfg = SolverConfig::default();
    let one = WeaknessSequence::Constant(1.0);
    let (d, t) = half_half(Membership::A1);
    let w = run_wgafr(&d, &t, &one, 10, SelectPolicy::Argmax, &cfg).unwrap();
    assert_abs_diff_eq!(w.records[0].residual_norm, 0.5, epsilon = 1e-12);
    assert!(w.records[1].residual_norm <= 1e-10);
    let ml1 = check_ml1_trace(d.space(), &w, 1.0, 0.0, &one).unwrap();
    assert_eq!(ml1.outcome, Outcome::Pass);

    let i = run_iac(&d, &t, 1.0, 10, SelectPolicy::Argmax).unwrap();
    assert_abs_diff_eq!(i.records[0].residual_norm, 0.5f64.sqrt(), epsilon = 1e-12);
    assert!(i.records[1].residual_norm <= 1e-12);

    let (dc, tc) = half_half(Membership::Conv);
    let c = run_iacc(&dc, &tc, 1.0, 10, SelectPolicy::Argmax).unwrap();
    assert!(c.records[1].residual_norm <= 1e-12);

    let d2 = canonical(2.0, 2);
    let t2 = TargetSpec::from_terms(
        &d2,
        Membership::A1,
        vec![(0, C64::new(0.6, 0.0)), (1, C64::new(0.8, 0.0))],
    )
    .unwrap();
    let zero = RelaxationSchedule::Constant(0.0);
    let g = run_gawr(&d2, &t2, &one, &zero, 10, SelectPolicy::Argmax, &cfg).unwrap();
    assert!(g.len() == 2 && g.final_residual() <= 1e-10);

    let params = d2.space().smoothness();
    assert_abs_diff_eq!(
        epsilon_schedule(1.0, &params, 1),
        0.5f64.sqrt(),
        epsilon = 1e-12
    );
    assert_abs_diff_eq!(
        epsilon_schedule(1.0, &params, 4),
        0.5f64.sqrt() / 2.0,
        epsilon = 1e-12
    );
    assert_abs_diff_eq!(mt2_constant(&params), 400.0, epsilon = 1e-9);
}

#[test]
fn documented_sequence_values() {
    let x = [1.0, 0.9, 0.819];
    let r = check_hl1(&x, 1.0, &[0.1, 0.1]);
    assert_eq!(r.outcome, Outcome::Pass);
    let norms: Vec<f64> = (0..=50)
        .map(|m| {
            if m == 0 {
                1.0
            } else {
                3.0 * (m as f64).powf(-1.0 / 3.0)
            }
        })
        .collect();
    let fit = fit_log_slope(&norms, (2, 50)).unwrap();
    assert_abs_diff_eq!(fit.slope, -1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-12);
}

const MINIMAL: &str = r#"
[space]
p = 2.0
dim = 4

[dictionary]
kind = "canonical"
count = 4

[target]
membership = "a1"
sparsity = 2

[algorithm]
id = "wgafr"
iters = 10
"#;

#[test]
fn artifacts_round_trip_and_corruption_is_located() {
    let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
    let out = run_experiment(&cfg).unwrap();
    assert!(out.report.passed && out.report.final_residual <= 1e-8);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&out, dir.path()).unwrap();
    let (trace, report) = read_run(dir.path()).unwrap();
    assert_eq!(trace.records, out.trace.records);
    assert_eq!(report, out.report);

    let path = dir.path().join(TRACE_CSV);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[3] = lines[3].replacen(',', ",oops,", 1);
    let err = parse_trace_csv(&lines.join("\n")).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");

    match ExperimentConfig::from_toml(&MINIMAL.replace("p = 2.0", "p = 1.0")).unwrap_err() {
        Error::Config { field, .. } => assert_eq!(field, "space.p"),
        e => panic!("{e}"),
    }
}

#[test]
fn sweep_grid_rows_and_sequential_equivalence() {
    let spec = SweepSpec::from_toml(
        r#"
replicate_seeds = 5
axes = [
  { field = "algorithm.iters", values = [50, 100, 200] },
  { field = "space.p", values = [1.5, 2.0, 3.0] },
]

[base.space]
p = 2.0
dim = 8

[base.dictionary]
kind = "gaussian"
count = 24

[base.target]
membership = "a1"
sparsity = 3

[base.algorithm]
id = "iac"
iters = 50
"#,
    )
    .unwrap();
    let seq = run_sweep_with(Exec::Sequential, &spec, None).unwrap();
    assert_eq!(seq.rows.len(), 45);
    assert_eq!(seq.failures(), 0, "{}", seq.to_csv());
    assert_eq!(run_sweep_with(Exec::default(), &spec, None).unwrap(), seq);
}

#[test]
fn parallel_batches_match_sequential() {
    let space = LpSpace::new(3.0, 8).unwrap();
    let a = check_ll0_with(Exec::Sequential, &space, 500, 4, LL0_TOL).unwrap();
    let b = check_ll0_with(Exec::default(), &space, 500, 4, LL0_TOL).unwrap();
    assert_eq!(a, b);
}

#[test]
fn quick_battery_passes_across_seeds() {
    for seed in 0..10 {
        let outcome = verify_suite(seed, Profile::Quick).unwrap();
        let failing: Vec<String> = outcome
            .criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.line())
            .collect();
        assert!(failing.is_empty(), "seed {seed}: {failing:?}");
        assert_eq!(outcome.criteria.len(), 14);
    }
}
