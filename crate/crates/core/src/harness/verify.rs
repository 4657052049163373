//! The property battery behind `verify`: one entry per acceptance
//! criterion, each built from the analysis checkers on fresh seeded data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::run_experiment;
use crate::algorithms::{
    run_gawr, run_iac, run_iacc, run_wgafr, GreedyTrace, RelaxationSchedule, WeaknessSequence,
};
use crate::analysis::{
    check_barycentric, check_condition_43, check_dual_norm_supremum, check_duality_map, check_hl1,
    check_ll0, check_ml1_trace, check_ml3_trace, check_ml4, check_monotonicity, check_mt2_bound,
    check_orthogonality, check_trivial_step, fit_trace_slope, CheckReport, Outcome, LL0_TOL,
    MONOTONE_SLACK,
};
use crate::dictionary::{
    generate_dictionary, make_target, DictKind, Dictionary, Membership, SelectPolicy, TargetSpec,
};
use crate::error::Result;
use crate::par::{self, derive_seed, Exec};
use crate::solver::SolverConfig;
use crate::space::{gaussian_vector, norming_functional, LpSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Quick,
    Full,
}

/// Batch sizes per profile.
#[derive(Debug, Clone, Copy)]
pub struct Sizes {
    pub duality_samples: usize,
    pub ll0_samples: usize,
    pub ll1_instances: usize,
    pub hull_functionals: usize,
    pub hull_samples: usize,
    pub runs: usize,
    pub mt2_iters: usize,
    pub sequences: usize,
    pub exact_repeats: usize,
}

impl Profile {
    pub fn sizes(self) -> Sizes {
        match self {
            Profile::Quick => Sizes {
                duality_samples: 200,
                ll0_samples: 2000,
                ll1_instances: 20,
                hull_functionals: 3,
                hull_samples: 200,
                runs: 10,
                mt2_iters: 200,
                sequences: 20,
                exact_repeats: 1,
            },
            Profile::Full => Sizes {
                duality_samples: 1000,
                ll0_samples: 10_000,
                ll1_instances: 200,
                hull_functionals: 10,
                hull_samples: 500,
                runs: 50,
                mt2_iters: 500,
                sequences: 100,
                exact_repeats: 3,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub number: u8,
    pub title: String,
    pub passed: bool,
    pub summary: String,
    pub reports: Vec<CheckReport>,
}

impl Criterion {
    fn from_reports(number: u8, title: &str, reports: Vec<CheckReport>) -> Self {
        let failing: Vec<&str> = reports
            .iter()
            .filter(|r| r.is_failure())
            .map(|r| r.name.as_str())
            .collect();
        let worst = reports
            .iter()
            .filter(|r| r.outcome != Outcome::Diagnostic)
            .map(|r| r.worst_margin + r.tolerance)
            .fold(f64::INFINITY, f64::min);
        let samples: usize = reports.iter().map(|r| r.samples).sum();
        let summary = if failing.is_empty() {
            format!("{samples} samples, min slack over tolerance {worst:.3e}")
        } else {
            format!("failing: {}", failing.join(", "))
        };
        Criterion {
            number,
            title: title.into(),
            passed: failing.is_empty(),
            summary,
            reports,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.number,
            self.title,
            self.summary
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub seed: u64,
    pub profile: Profile,
    pub criteria: Vec<Criterion>,
    pub diagnostics: Vec<CheckReport>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// A failing report for a run that errored outright.
fn errored(name: &str, what: String) -> CheckReport {
    let mut r = CheckReport::not_applicable(name, "");
    r.outcome = Outcome::Fail;
    r.passed = false;
    r.violations = 1;
    r.worst_margin = -f64::MAX;
    r.notes.clear();
    r.details.push(what);
    r
}

fn collect(name: &str, rows: Vec<Result<CheckReport>>) -> CheckReport {
    let parts = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.unwrap_or_else(|e| errored(name, format!("instance {i}: {e}"))))
        .collect();
    CheckReport::merge(name, parts)
}

/// Dictionary and target from one seed.
pub fn seeded_instance(
    p: f64,
    dim: usize,
    count: usize,
    membership: Membership,
    sparsity: usize,
    seed: u64,
) -> Result<(Dictionary, TargetSpec)> {
    let space = LpSpace::new(p, dim)?;
    let dict = generate_dictionary(&space, count, DictKind::Gaussian, derive_seed(seed, 0))?;
    let target = make_target(&dict, membership, sparsity, 0.0, derive_seed(seed, 1))?;
    Ok((dict, target))
}

const SPREAD_P: [f64; 3] = [1.5, 2.0, 3.0];
const ALL_P: [f64; 4] = [1.5, 2.0, 3.0, 4.0];

pub fn criterion_duality(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let reports = ALL_P
        .iter()
        .enumerate()
        .map(|(k, &p)| check_duality_map(p, 64, sizes.duality_samples, derive_seed(seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Criterion::from_reports(
        1,
        "norming functional identities",
        reports,
    ))
}

pub fn criterion_ll0(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let reports = ALL_P
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            check_ll0(
                &LpSpace::new(p, 8)?,
                sizes.ll0_samples,
                derive_seed(seed, 10 + k as u64),
                LL0_TOL,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Criterion::from_reports(2, "smoothness sandwich", reports))
}

pub fn criterion_ll1(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let cfg = SolverConfig::default();
    let mut reports = Vec::new();
    for (k, &p) in ALL_P.iter().enumerate() {
        let base = derive_seed(seed, 20 + k as u64);
        let rows = par::map_indexed(Exec::default(), sizes.ll1_instances, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, i as u64));
            let dim = rng.random_range(3..=8);
            let n_basis = rng.random_range(1..=3.min(dim - 1));
            let space = LpSpace::new(p, dim)?;
            let f = gaussian_vector(&mut rng, dim);
            let basis: Vec<_> = (0..n_basis)
                .map(|_| gaussian_vector(&mut rng, dim))
                .collect();
            check_orthogonality(&space, &f, &basis, &cfg, 100, rng.random())
        });
        reports.push(collect(&format!("ll1_orthogonality_p{p}"), rows));
    }
    Ok(Criterion::from_reports(
        3,
        "best-approximation certificate",
        reports,
    ))
}

pub fn criterion_hull(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let rows = par::map_indexed(Exec::default(), sizes.hull_functionals, |j| {
        let s = derive_seed(seed, 30 + j as u64);
        let space = LpSpace::new(SPREAD_P[j % 3], 8)?;
        let dict = generate_dictionary(&space, 40, DictKind::Gaussian, s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let func = norming_functional(&space, &gaussian_vector(&mut rng, 8))?;
        check_dual_norm_supremum(&func, &dict, sizes.hull_samples, derive_seed(s, 1))
    });
    Ok(Criterion::from_reports(
        4,
        "dual norm over hulls",
        vec![collect("ll2_ll3_hull_sup", rows)],
    ))
}

struct WgafrRun {
    space: LpSpace,
    tau: WeaknessSequence,
    trace: GreedyTrace,
}

fn wgafr_runs(seed: u64, sizes: &Sizes) -> Vec<Result<WgafrRun>> {
    par::map_indexed(Exec::default(), sizes.runs, |r| {
        let p = SPREAD_P[r % 3];
        let (dict, target) = seeded_instance(
            p,
            12,
            36,
            Membership::A1,
            5,
            derive_seed(seed, 100 + r as u64),
        )?;
        let t = if r % 2 == 0 { 1.0 } else { 0.5 };
        let tau = WeaknessSequence::Constant(t);
        let policy = if t < 1.0 {
            SelectPolicy::FirstQualifying
        } else {
            SelectPolicy::Argmax
        };
        let trace = run_wgafr(&dict, &target, &tau, 60, policy, &SolverConfig::default())?;
        Ok(WgafrRun {
            space: *dict.space(),
            tau,
            trace,
        })
    })
}

/// Monotonicity and the per-step free-relaxation inequality, which share
/// their runs.
pub fn criteria_wgafr_steps(seed: u64, sizes: &Sizes) -> Result<(Criterion, Criterion)> {
    let runs = wgafr_runs(seed, sizes);
    let mono = runs.iter().map(|r| match r {
        Ok(run) => Ok(check_monotonicity(&run.trace, MONOTONE_SLACK)),
        Err(e) => Err(crate::error::Error::param("run", e.to_string())),
    });
    let ml1 = runs.iter().map(|r| match r {
        Ok(run) => check_ml1_trace(&run.space, &run.trace, 1.0, 0.0, &run.tau),
        Err(e) => Err(crate::error::Error::param("run", e.to_string())),
    });
    Ok((
        Criterion::from_reports(
            5,
            "free-relaxation monotonicity",
            vec![collect("monotonicity", mono.collect())],
        ),
        Criterion::from_reports(
            6,
            "free-relaxation per-step bound",
            vec![collect("ml1_step", ml1.collect())],
        ),
    ))
}

pub fn criterion_ml3(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let relax = RelaxationSchedule::PaperDefault;
    let rows = par::map_indexed(Exec::default(), sizes.runs, |r| {
        let (dict, target) = seeded_instance(
            SPREAD_P[r % 3],
            12,
            36,
            Membership::A1,
            5,
            derive_seed(seed, 200 + r as u64),
        )?;
        let tau = WeaknessSequence::Constant(1.0);
        let trace = run_gawr(
            &dict,
            &target,
            &tau,
            &relax,
            60,
            SelectPolicy::Argmax,
            &SolverConfig::default(),
        )?;
        check_ml3_trace(dict.space(), &trace, 1.0, 0.0, 1.0, &relax)
    });
    Ok(Criterion::from_reports(
        7,
        "relaxation per-step bound",
        vec![collect("ml3_step", rows)],
    ))
}

pub fn criterion_mt2(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let tau = WeaknessSequence::Constant(1.0);
    let rows = par::map_indexed(Exec::default(), sizes.runs, |r| {
        let (dict, target) = seeded_instance(
            2.0,
            32,
            128,
            Membership::A1,
            16,
            derive_seed(seed, 300 + r as u64),
        )?;
        let trace = run_wgafr(
            &dict,
            &target,
            &tau,
            sizes.mt2_iters,
            SelectPolicy::Argmax,
            &SolverConfig::default(),
        )?;
        Ok(check_mt2_bound(
            &trace,
            &dict.space().smoothness(),
            1.0,
            0.0,
            &tau,
        ))
    });
    Ok(Criterion::from_reports(
        8,
        "explicit rate bound (A_q = 400)",
        vec![collect("mt2_bound", rows)],
    ))
}

pub fn criterion_orthonormal(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let space = LpSpace::new(2.0, 8)?;
    let dict = generate_dictionary(&space, 8, DictKind::Canonical, 0)?;
    let tau = WeaknessSequence::Constant(1.0);
    let mut parts = Vec::new();
    for k in 1..=8 {
        for rep in 0..sizes.exact_repeats {
            let s = derive_seed(seed, 400 + (k * 10 + rep) as u64);
            let row = make_target(&dict, Membership::A1, k, 0.0, s).and_then(|target| {
                let tr = run_wgafr(
                    &dict,
                    &target,
                    &tau,
                    20,
                    SelectPolicy::Argmax,
                    &SolverConfig::default(),
                )?;
                let norms = tr.residual_norms();
                let mut acc =
                    crate::analysis::CheckReport::not_applicable("orthonormal_exactness", "");
                acc.notes.clear();
                acc.outcome = Outcome::Pass;
                acc.samples = 1;
                // exact at step k and not before
                let exact = tr.len() == k && norms[k] <= 1e-8 && norms[k - 1] > 1e-8;
                acc.worst_margin = if exact { 1e-8 - norms[k] } else { -1.0 };
                if !exact {
                    acc.outcome = Outcome::Fail;
                    acc.passed = false;
                    acc.violations = 1;
                    acc.details.push(format!(
                        "k = {k}: {} steps, final {:.3e}",
                        tr.len(),
                        tr.final_residual()
                    ));
                }
                Ok(acc)
            });
            parts.push(row);
        }
    }
    Ok(Criterion::from_reports(
        9,
        "orthonormal exactness",
        vec![collect("orthonormal_exactness", parts)],
    ))
}

/// Count-based rate criterion: slope <= `threshold` on at least `need` of
/// the runs. The margin is (passing runs - needed runs).
fn slope_tally(name: &str, slopes: &[Result<f64>], threshold: f64, need: usize) -> CheckReport {
    let good = slopes
        .iter()
        .filter(|s| matches!(s, Ok(v) if *v <= threshold))
        .count();
    let mut r = CheckReport::not_applicable(name, "");
    r.notes.clear();
    r.samples = slopes.len();
    r.worst_margin = good as f64 - need as f64;
    r.passed = good >= need;
    r.outcome = if r.passed {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    r.violations = slopes.len() - good;
    let finite: Vec<f64> = slopes
        .iter()
        .filter_map(|s| s.as_ref().ok().copied())
        .collect();
    let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let worst = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    r.value = Some(mean);
    r.notes.push(format!(
        "{good}/{} runs with slope <= {threshold}; mean {mean:.4}, worst {worst:.4}",
        slopes.len()
    ));
    for (i, s) in slopes.iter().enumerate() {
        match s {
            Ok(v) if *v > threshold => r.details.push(format!("run {i}: slope {v:.4}")),
            Err(e) => r.details.push(format!("run {i}: {e}")),
            _ => {}
        }
    }
    r.details.truncate(20);
    r
}

/// Runs needed out of `runs` for the 45-of-50 rate criteria.
fn needed(runs: usize) -> usize {
    (runs * 45).div_ceil(50)
}

pub fn criterion_iac_rate(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let rows = par::map_indexed(Exec::default(), sizes.runs, |r| {
        let (dict, target) = seeded_instance(
            2.0,
            16,
            64,
            Membership::A1,
            8,
            derive_seed(seed, 500 + r as u64),
        )?;
        let trace = run_iac(&dict, &target, 1.0, 200, SelectPolicy::Argmax)?;
        let slope = fit_trace_slope(&trace, (10, 200)).map(|f| f.slope);
        Ok::<_, crate::error::Error>((slope, check_trivial_step(&trace)))
    });
    let mut slopes = Vec::new();
    let mut trivial = Vec::new();
    for row in rows {
        match row {
            Ok((s, t)) => {
                slopes.push(s);
                trivial.push(Ok(t));
            }
            Err(e) => {
                slopes.push(Err(crate::error::Error::param("run", e.to_string())));
                trivial.push(Err(e));
            }
        }
    }
    let reports = vec![
        slope_tally("iac_rate_slope", &slopes, -0.4, needed(sizes.runs)),
        collect("trivial_step", trivial),
    ];
    Ok(Criterion::from_reports(
        10,
        "complex incremental rate",
        reports,
    ))
}

pub fn criterion_barycentric(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let rows = par::map_indexed(Exec::default(), sizes.runs, |r| {
        let (dict, target) = seeded_instance(
            SPREAD_P[r % 3],
            10,
            30,
            Membership::Conv,
            6,
            derive_seed(seed, 600 + r as u64),
        )?;
        let policy = if r % 2 == 0 {
            SelectPolicy::Argmax
        } else {
            SelectPolicy::FirstQualifying
        };
        let trace = run_iacc(&dict, &target, 1.0, 100, policy)?;
        check_barycentric(&trace, &dict)
    });
    Ok(Criterion::from_reports(
        11,
        "convex incremental barycentric form",
        vec![collect("barycentric", rows)],
    ))
}

pub fn criterion_gawr_rate(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let relax = RelaxationSchedule::PaperDefault;
    let tau = WeaknessSequence::Constant(1.0);
    let slopes = par::map_indexed(Exec::default(), sizes.runs, |r| {
        let (dict, target) = seeded_instance(
            2.0,
            16,
            64,
            Membership::A1,
            8,
            derive_seed(seed, 700 + r as u64),
        )?;
        let trace = run_gawr(
            &dict,
            &target,
            &tau,
            &relax,
            300,
            SelectPolicy::Argmax,
            &SolverConfig::default(),
        )?;
        fit_trace_slope(&trace, (10, 300)).map(|f| f.slope)
    });
    let report = slope_tally("gawr_rate_slope", &slopes, -0.35, needed(sizes.runs));
    Ok(Criterion::from_reports(
        12,
        "relaxed greedy rate proxy",
        vec![report],
    ))
}

/// A sequence meeting the recursion hypotheses, tight when `tight`.
pub fn synthetic_hl1(rng: &mut ChaCha8Rng, len: usize, tight: bool) -> (Vec<f64>, f64, Vec<f64>) {
    let c1 = rng.random_range(0.5..5.0);
    let mut a: Vec<f64> = Vec::with_capacity(len);
    let mut x: Vec<f64> = vec![if tight {
        c1
    } else {
        c1 * rng.random_range(0.5..1.0)
    }];
    for m in 0..len {
        let xm = x[m];
        // keep x_m a_{m+1} <= 1 so the sequence stays nonnegative
        a.push(rng.random_range(0.01..1.0) * xm.max(1.0).recip());
        let cap = xm * (1.0 - xm * a[m]);
        x.push(if tight {
            cap
        } else {
            cap * rng.random_range(0.5..1.0)
        });
    }
    (x, c1, a)
}

/// A sequence meeting the growth/contraction hypotheses for
/// (alpha, gamma, A), tight when `tight`.
pub fn synthetic_ml4(rng: &mut ChaCha8Rng, len: usize, tight: bool) -> (Vec<f64>, f64, f64, f64) {
    let alpha = rng.random_range(0.2..0.7);
    let gamma = rng.random_range(alpha + 0.05..=1.0);
    let big_a = rng.random_range(1.0..3.0);
    let mut seq = vec![big_a * rng.random_range(0.0..1.0)];
    for v in 1..len {
        let av = seq[v - 1];
        let s = if tight {
            1.0
        } else {
            rng.random_range(0.0..1.0)
        };
        let next = if v >= 2 && av >= big_a * (v as f64).powf(-alpha) {
            av * (1.0 - gamma / v as f64) * s
        } else {
            av + big_a * (v as f64).powf(-alpha) * s
        };
        seq.push(next);
    }
    (seq, alpha, gamma, big_a)
}

pub fn criterion_sequences(seed: u64, sizes: &Sizes) -> Result<Criterion> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 800));
    let mut hl1 = Vec::new();
    let mut ml4 = Vec::new();
    for i in 0..sizes.sequences {
        let tight = i % 2 == 0;
        let (x, c1, a) = synthetic_hl1(&mut rng, 200, tight);
        hl1.push(Ok(require_applicable(check_hl1(&x, c1, &a))));
        let (seq, alpha, gamma, big_a) = synthetic_ml4(&mut rng, 400, tight);
        ml4.push(Ok(require_applicable(check_ml4(&seq, alpha, gamma, big_a))));
    }
    Ok(Criterion::from_reports(
        13,
        "scalar sequence bounds",
        vec![collect("hl1", hl1), collect("ml4", ml4)],
    ))
}

/// Synthetic inputs are built to meet the hypotheses, so NotApplicable
/// counts against them.
fn require_applicable(r: CheckReport) -> CheckReport {
    if r.outcome == Outcome::NotApplicable {
        let note = r.notes.first().cloned().unwrap_or_default();
        errored(&r.name, format!("hypotheses rejected: {note}"))
    } else {
        r
    }
}

pub fn determinism_configs() -> Vec<ExperimentConfig> {
    let text = |id: &str, membership: &str, p: f64| {
        format!(
            "[space]\np = {p}\ndim = 10\n[dictionary]\nkind = \"gaussian\"\ncount = 30\nseed = 5\n\
             [target]\nmembership = \"{membership}\"\nsparsity = 4\nseed = 6\n\
             [algorithm]\nid = \"{id}\"\niters = 40\npolicy = \"first_qualifying\"\nweakness = {{ constant = 0.8 }}\n"
        )
    };
    [
        ("wgafr", "a1", 1.5),
        ("gawr", "a1", 3.0),
        ("iac", "a1", 2.0),
        ("iacc", "conv", 4.0),
    ]
    .iter()
    .map(|(id, m, p)| ExperimentConfig::from_toml(&text(id, m, *p)).expect("valid config"))
    .collect()
}

pub fn criterion_determinism() -> Result<Criterion> {
    let mut parts = Vec::new();
    for cfg in determinism_configs() {
        let a = run_experiment(&cfg)?;
        let b = run_experiment(&cfg)?;
        let same = a.trace.to_csv() == b.trace.to_csv()
            && serde_json::to_string(&a.report)? == serde_json::to_string(&b.report)?;
        let mut r =
            CheckReport::not_applicable(format!("determinism_{}", cfg.algorithm.id.as_str()), "");
        r.notes.clear();
        r.samples = 1;
        r.outcome = if same { Outcome::Pass } else { Outcome::Fail };
        r.passed = same;
        if !same {
            r.violations = 1;
            r.worst_margin = -1.0;
            r.details
                .push("outputs differ between identical runs".into());
        }
        parts.push(r);
    }
    Ok(Criterion::from_reports(14, "determinism", parts))
}

fn diagnostics() -> Result<Vec<CheckReport>> {
    let params = LpSpace::new(2.0, 1)?.smoothness();
    let mut out = Vec::new();
    for (label, tau) in [
        ("constant", WeaknessSequence::Constant(1.0)),
        (
            "harmonic",
            WeaknessSequence::General((1..=4096).map(|m| 1.0 / m as f64).collect()),
        ),
        (
            "inverse_sqrt",
            WeaknessSequence::General((1..=4096).map(|m| (m as f64).powf(-0.5)).collect()),
        ),
    ] {
        let mut r = check_condition_43(&tau, 0.5, 4096, &params)?;
        r.name = format!("condition_43_{label}");
        out.push(r);
    }
    Ok(out)
}

/// Runs every criterion at the profile's sizes.
pub fn verify_suite(seed: u64, profile: Profile) -> Result<VerifyOutcome> {
    let sizes = profile.sizes();
    let (c5, c6) = criteria_wgafr_steps(seed, &sizes)?;
    let criteria = vec![
        criterion_duality(seed, &sizes)?,
        criterion_ll0(seed, &sizes)?,
        criterion_ll1(seed, &sizes)?,
        criterion_hull(seed, &sizes)?,
        c5,
        c6,
        criterion_ml3(seed, &sizes)?,
        criterion_mt2(seed, &sizes)?,
        criterion_orthonormal(seed, &sizes)?,
        criterion_iac_rate(seed, &sizes)?,
        criterion_barycentric(seed, &sizes)?,
        criterion_gawr_rate(seed, &sizes)?,
        criterion_sequences(seed, &sizes)?,
        criterion_determinism()?,
    ];
    Ok(VerifyOutcome {
        seed,
        profile,
        criteria,
        diagnostics: diagnostics()?,
    })
}
