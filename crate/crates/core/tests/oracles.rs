//! Library results against independent reference computations.

use greedy_banach::algorithms::{
    run_gawr, run_iac, run_wgafr, RelaxationSchedule, WeaknessSequence,
};
use greedy_banach::dictionary::{
    generate_dictionary, make_target, DictKind, Membership, SelectPolicy,
};
use greedy_banach::par::derive_seed;
use greedy_banach::solver::{best_approx_subspace, minimize_over_line, SolverConfig};
use greedy_banach::space::{estimate_rho, gaussian_vector, norming_functional};
use greedy_banach::{CVec, LpSpace, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn naive_norm(x: &[C64], p: f64) -> f64 {
    x.iter()
        .map(|z| z.norm().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    // <a, b> = sum a_i conj(b_i)
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Orthogonal projection onto span(vectors) by modified Gram-Schmidt.
fn project(f: &[C64], vectors: &[Vec<C64>]) -> Vec<C64> {
    let mut q: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for e in &q {
            let c = inner(&w, e);
            w = w.iter().zip(e).map(|(x, y)| x - c * y).collect();
        }
        let n = naive_norm(&w, 2.0);
        if n > 1e-12 {
            q.push(w.iter().map(|x| x / n).collect());
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); f.len()];
    for e in &q {
        let c = inner(f, e);
        for (o, y) in out.iter_mut().zip(e) {
            *o += c * y;
        }
    }
    out
}

fn seeded(seed: u64, n: usize) -> CVec {
    gaussian_vector(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// Minimum of a convex function of one real variable on [lo, hi].
fn ternary(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_matches_naive_sum(seed in any::<u64>(), p in 1.1f64..8.0, n in 1usize..40) {
        let x = seeded(seed, n);
        let space = LpSpace::new(p, n).unwrap();
        let ours = space.norm(&x).unwrap();
        let reference = naive_norm(x.as_slice(), p);
        prop_assert!((ours - reference).abs() <= 1e-12 * reference);
    }

    #[test]
    fn norming_functional_has_unit_dual_norm(seed in any::<u64>(), p in 1.1f64..8.0, n in 1usize..40) {
        let h = seeded(seed, n);
        let space = LpSpace::new(p, n).unwrap();
        let f = norming_functional(&space, &h).unwrap();
        let norm = naive_norm(h.as_slice(), p);
        let value = f.apply(&h).unwrap();
        prop_assert!((value.re - norm).abs() <= 1e-12 * norm && value.im.abs() <= 1e-12 * norm);
        let p_dual = p / (p - 1.0);
        prop_assert!((naive_norm(f.coeffs.as_slice(), p_dual) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hilbert_best_approximation_is_the_projection(seed in any::<u64>(), n in 3usize..12, k in 1usize..3) {
        let space = LpSpace::new(2.0, n).unwrap();
        let f = seeded(seed, n);
        let basis: Vec<CVec> = (0..k).map(|j| seeded(derive_seed(seed, j as u64), n)).collect();
        let best = best_approx_subspace(&space, &f, &basis, &SolverConfig::default()).unwrap();
        let vs: Vec<Vec<C64>> = basis.iter().map(|b| b.as_slice().to_vec()).collect();
        let reference = sub(f.as_slice(), &project(f.as_slice(), &vs));
        let gap = best.residual.as_slice().iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-8, "gap {gap}");
    }

    #[test]
    fn line_minimum_matches_brute_force(seed in any::<u64>(), p in 1.2f64..6.0, n in 2usize..8) {
        let space = LpSpace::new(p, n).unwrap();
        let base = seeded(seed, n);
        let dir = seeded(derive_seed(seed, 1), n);
        let ours = minimize_over_line(&space, &base, &dir, &SolverConfig::default()).unwrap();
        let value = |re: f64, im: f64| {
            let r: Vec<C64> = base.iter().zip(dir.iter()).map(|(b, d)| b - C64::new(re, im) * d).collect();
            naive_norm(&r, p)
        };
        // |lambda| <= 2 ||base|| / ||dir|| at any minimizer
        let bound = 2.0 * naive_norm(base.as_slice(), p) / naive_norm(dir.as_slice(), p);
        let reference = ternary(-bound, bound, |re| ternary(-bound, bound, |im| value(re, im)));
        prop_assert!((ours.value - reference).abs() <= 1e-9 * (1.0 + reference));
    }
}

#[test]
fn free_relaxation_in_hilbert_space_projects_onto_the_last_pair() {
    for seed in 0..10u64 {
        let space = LpSpace::new(2.0, 10).unwrap();
        let dict = generate_dictionary(&space, 30, DictKind::Gaussian, seed).unwrap();
        let target = make_target(&dict, Membership::A1, 5, 0.0, derive_seed(seed, 9)).unwrap();
        let tau = WeaknessSequence::Constant(1.0);
        let trace = run_wgafr(
            &dict,
            &target,
            &tau,
            25,
            SelectPolicy::Argmax,
            &SolverConfig::default(),
        )
        .unwrap();
        let f = target.f.as_slice();
        let mut g = vec![C64::new(0.0, 0.0); f.len()];
        for rec in &trace.records {
            let phi = dict.get(rec.selected_index).as_slice().to_vec();
            let span = if g.iter().all(|z| z.norm() == 0.0) {
                vec![phi]
            } else {
                vec![g.clone(), phi]
            };
            g = project(f, &span);
            let expected = naive_norm(&sub(f, &g), 2.0);
            assert!(
                (rec.residual_norm - expected).abs() <= 1e-9,
                "seed {seed} m {}",
                rec.m
            );
        }
    }
}

#[test]
fn relaxed_greedy_in_hilbert_space_uses_the_closed_form_step() {
    let relax = RelaxationSchedule::PaperDefault;
    for seed in 0..10u64 {
        let space = LpSpace::new(2.0, 10).unwrap();
        let dict = generate_dictionary(&space, 30, DictKind::Gaussian, seed).unwrap();
        let target = make_target(&dict, Membership::A1, 5, 0.0, derive_seed(seed, 9)).unwrap();
        let tau = WeaknessSequence::Constant(1.0);
        let trace = run_gawr(
            &dict,
            &target,
            &tau,
            &relax,
            25,
            SelectPolicy::Argmax,
            &SolverConfig::default(),
        )
        .unwrap();
        let f = target.f.as_slice();
        let mut g = vec![C64::new(0.0, 0.0); f.len()];
        for rec in &trace.records {
            let r = relax.get(rec.m);
            let phi = dict.get(rec.selected_index).as_slice();
            let shrunk: Vec<C64> = g.iter().map(|z| z * (1.0 - r)).collect();
            let lambda = inner(&sub(f, &shrunk), phi) / inner(phi, phi);
            g = shrunk
                .iter()
                .zip(phi)
                .map(|(a, b)| a + lambda * b)
                .collect();
            let expected = naive_norm(&sub(f, &g), 2.0);
            assert!(
                (rec.residual_norm - expected).abs() <= 1e-9,
                "seed {seed} m {}",
                rec.m
            );
        }
    }
}

#[test]
fn incremental_selections_meet_their_threshold() {
    // in l_2 the norming functional of r is <., r> / ||r||
    for seed in 0..10u64 {
        let space = LpSpace::new(2.0, 8).unwrap();
        let dict = generate_dictionary(&space, 24, DictKind::Gaussian, seed).unwrap();
        let target = make_target(&dict, Membership::A1, 4, 0.0, derive_seed(seed, 9)).unwrap();
        let trace = run_iac(&dict, &target, 1.0, 60, SelectPolicy::FirstQualifying).unwrap();
        let f = target.f.as_slice();
        let mut g = vec![C64::new(0.0, 0.0); f.len()];
        for rec in &trace.records {
            let r = sub(f, &g);
            let rn = naive_norm(&r, 2.0);
            let chosen: Vec<C64> = dict
                .get(rec.selected_index)
                .iter()
                .map(|z| rec.phase * z)
                .collect();
            let score = inner(&sub(&chosen, f), &r).re / rn;
            assert!(
                score >= -rec.eps_m.unwrap() - 1e-12,
                "seed {seed} m {}",
                rec.m
            );
            let w = 1.0 / rec.m as f64;
            g = g
                .iter()
                .zip(&chosen)
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect();
            assert!((rec.residual_norm - naive_norm(&sub(f, &g), 2.0)).abs() <= 1e-12);
        }
    }
}

#[test]
fn hilbert_modulus_estimate_approaches_closed_form() {
    let space = LpSpace::new(2.0, 6).unwrap();
    let closed = 2f64.sqrt() - 1.0;
    let est = estimate_rho(&space, 1.0, 4000, 3);
    assert!(est <= closed + 1e-12 && est >= closed - 1e-2, "{est}");
}
