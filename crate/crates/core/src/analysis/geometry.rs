//! Checkers for the norm-level identities: the norming functional, the
//! smoothness sandwich, best-approximation certificates and the dictionary
//! dual norm over hulls.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{Acc, CheckReport};
use crate::dictionary::{dict_dual_norm, Dictionary};
use crate::error::{Error, Result};
use crate::par::{self, derive_seed, Exec};
use crate::solver::{best_approx_subspace, SolverConfig, ZERO_RESIDUAL};
use crate::space::{gaussian_vector, norming_functional, CVec, DualFunctional, LpSpace, C64};

pub const LL0_TOL: f64 = 1e-9;
pub const DUALITY_TOL: f64 = 1e-9;
pub const CERTIFICATE_TOL: f64 = 1e-7;
pub const COMPETITOR_SLACK: f64 = 1e-9;
pub const HULL_SLACK: f64 = 1e-9;
pub const ATTAINMENT_TOL: f64 = 1e-6;

/// Random vector with scale spread over several decades; odd draws are
/// supported on at most two coordinates.
fn random_vector(rng: &mut ChaCha8Rng, dim: usize, sparse: bool) -> CVec {
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let v = if sparse && dim > 2 {
        let mut coords = vec![C64::new(0.0, 0.0); dim];
        let g = gaussian_vector(rng, 2);
        coords[rng.random_range(0..dim)] += g[0];
        coords[rng.random_range(0..dim)] += g[1];
        CVec::new(coords).expect("finite")
    } else {
        gaussian_vector(rng, dim)
    };
    v.scale(C64::new(scale, 0.0))
}

/// F_h(h) = ||h|| (relative) and ||F_h||_* = 1 on random h of random
/// dimension up to `max_dim`.
pub fn check_duality_map(
    p: f64,
    max_dim: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_duality_map_with(Exec::default(), p, max_dim, n_samples, seed)
}

pub fn check_duality_map_with(
    exec: Exec,
    p: f64,
    max_dim: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    LpSpace::new(p, max_dim.max(1))?;
    let rows = par::map_indexed(exec, n_samples, |i| -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let dim = rng.random_range(1..=max_dim.max(1));
        let space = LpSpace::new(p, dim)?;
        let h = loop {
            let h = random_vector(&mut rng, dim, i % 2 == 1);
            if !h.is_zero() {
                break h;
            }
        };
        let norm = space.norm(&h)?;
        let func = norming_functional(&space, &h)?;
        let value = func.apply(&h)?;
        let rel = (value - C64::new(norm, 0.0)).norm() / norm;
        let dual = (space.dual_norm(&func)? - 1.0).abs();
        Ok((rel, dual))
    });
    let mut acc = Acc::new(format!("duality_map_p{p}"), 0.0);
    for (i, row) in rows.into_iter().enumerate() {
        let (rel, dual) = row?;
        acc.record(DUALITY_TOL - rel, || {
            format!("sample {i}: |F_h(h) - ||h|||/||h|| = {rel:.3e}")
        });
        acc.record(DUALITY_TOL - dual, || {
            format!("sample {i}: | ||F_h|| - 1 | = {dual:.3e}")
        });
    }
    Ok(acc.finish())
}

/// The two sides of the smoothness sandwich at (x, y, u):
/// middle = ||x + u y|| - ||x|| - u Re F_x(y) and
/// upper = 2 ||x|| rho_bound(|u| ||y|| / ||x||).
pub fn ll0_terms(space: &LpSpace, x: &CVec, y: &CVec, u: f64) -> Result<(f64, f64)> {
    let nx = space.norm(x)?;
    if nx == 0.0 {
        return Err(Error::ZeroVector);
    }
    let ny = space.norm(y)?;
    let func = norming_functional(space, x)?;
    let fy = func.apply(y)?.re;
    let moved = space.norm(&x.add_scaled(C64::new(u, 0.0), y))?;
    let middle = moved - nx - u * fy;
    let upper = 2.0 * nx * space.rho_bound(u.abs() * ny / nx);
    Ok((middle, upper))
}

/// 0 <= middle <= upper on `n_samples` seeded (x, y, u) triples, absolute
/// slack `tol`.
pub fn check_ll0(space: &LpSpace, n_samples: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    check_ll0_with(Exec::default(), space, n_samples, seed, tol)
}

pub fn check_ll0_with(
    exec: Exec,
    space: &LpSpace,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    let dim = space.dim();
    let rows = par::map_indexed(exec, n_samples, |i| -> Result<(f64, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let sparse = i % 2 == 1;
        let x = loop {
            let x = random_vector(&mut rng, dim, sparse);
            if !x.is_zero() {
                break x;
            }
        };
        let y = random_vector(&mut rng, dim, sparse);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let u = sign * 10f64.powf(rng.random_range(-3.0..1.0));
        let (middle, upper) = ll0_terms(space, &x, &y, u)?;
        Ok((u, middle, upper))
    });
    let mut acc = Acc::new(format!("ll0_p{}", space.p()), tol);
    for (i, row) in rows.into_iter().enumerate() {
        let (u, middle, upper) = row?;
        acc.record(middle, || {
            format!("sample {i} (u = {u:.3e}): lower side {middle:.3e}")
        });
        acc.record(upper - middle, || {
            format!("sample {i} (u = {u:.3e}): {middle:.3e} > {upper:.3e}")
        });
    }
    Ok(acc.finish())
}

/// Best-approximation certificate and its converse.
///
/// Computes f_L from span(basis) and records
/// `CERTIFICATE_TOL - max_i |F_{f - f_L}(b_i)|`, then for `n_competitors`
/// seeded g in the span records `||f - g|| + COMPETITOR_SLACK - ||f - f_L||`.
/// Slacks are folded into the margins, so the tolerance is zero.
pub fn check_orthogonality(
    space: &LpSpace,
    f: &CVec,
    basis: &[CVec],
    cfg: &SolverConfig,
    n_competitors: usize,
    seed: u64,
) -> Result<CheckReport> {
    let best = best_approx_subspace(space, f, basis, cfg)?;
    let dist = space.norm(&best.residual)?;
    if dist <= ZERO_RESIDUAL {
        return Err(Error::param("f", "lies in the span of the basis"));
    }
    let func = norming_functional(space, &best.residual)?;
    let mut acc = Acc::new("ll1_orthogonality", 0.0);
    let worst = basis
        .iter()
        .map(|b| func.apply(b).map(|v| v.norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    acc.record(CERTIFICATE_TOL - worst, || {
        format!("max |F(b_i)| = {worst:.3e}")
    });

    let f_l = f - &best.residual;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n_competitors {
        // competitors at distances from 1e-4 to 10 times ||f|| around f_L
        let scale = 10f64.powf(rng.random_range(-4.0..1.0)) * space.norm(f)?;
        let mut g = f_l.clone();
        let dirs = gaussian_vector(&mut rng, basis.len());
        let spread = space.norm(
            &basis
                .iter()
                .zip(dirs.iter())
                .fold(CVec::zeros(space.dim()), |acc, (b, c)| {
                    acc.add_scaled(*c, b)
                }),
        )?;
        if spread == 0.0 {
            continue;
        }
        for (b, c) in basis.iter().zip(dirs.iter()) {
            g.add_scaled_in_place(*c * (scale / spread), b);
        }
        let other = space.norm(&(f - &g))?;
        acc.record(other + COMPETITOR_SLACK - dist, || {
            format!("competitor {k}: ||f - g|| = {other:.12e} < {dist:.12e}")
        });
    }
    acc.value = Some(worst);
    Ok(acc.finish())
}

/// Random coefficients with sum |a_j| <= 1 on a random support.
fn random_a1_terms(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, C64)> {
    let k = rng.random_range(1..=n.min(8));
    let idx = sample(rng, n, k).into_vec();
    let raw = gaussian_vector(rng, k);
    let l1: f64 = raw
        .iter()
        .map(|a| a.norm())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let total = if rng.random_bool(0.5) {
        1.0
    } else {
        rng.random_range(0.0..1.0)
    };
    idx.into_iter()
        .zip(raw.iter())
        .map(|(i, a)| (i, *a * (total / l1)))
        .collect()
}

fn random_convex_terms(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, C64)> {
    let k = rng.random_range(1..=n.min(8));
    let idx = sample(rng, n, k).into_vec();
    let w: Vec<f64> = (0..k)
        .map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0).ln())
        .collect();
    let total: f64 = w.iter().sum();
    idx.into_iter()
        .zip(w)
        .map(|(i, w)| (i, C64::new(w / total, 0.0)))
        .collect()
}

/// Sampled hull elements never beat the dictionary sup.
///
/// `n_samples` absolutely convex and `n_samples` convex combinations are
/// drawn; the extreme elements (phase-rotated argmax of |F|, argmax of
/// Re F) are always among them, so attainment is checked too. Margins
/// include their slacks; tolerance is zero.
pub fn check_dual_norm_supremum(
    f: &DualFunctional,
    dict: &Dictionary,
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let (sup_abs, arg_abs) = dict_dual_norm(f, dict)?;
    let vals = dict.evaluate(f)?;
    let (arg_re, sup_re) = vals.iter().enumerate().map(|(i, v)| (i, v.re)).fold(
        (0, f64::NEG_INFINITY),
        |best, cur| if cur.1 > best.1 { cur } else { best },
    );

    let mut acc = Acc::new("ll2_ll3_hull_sup", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = crate::space::complex_sign(vals[arg_abs]).conj();
    let mut best_abs = f64::NEG_INFINITY;
    let mut best_re = f64::NEG_INFINITY;
    for k in 0..n_samples.max(1) {
        let a1 = if k == 0 {
            vec![(arg_abs, phase)]
        } else {
            random_a1_terms(&mut rng, dict.len())
        };
        let v = f.apply(&dict.combine(&a1)?)?.norm();
        best_abs = best_abs.max(v);
        acc.record(sup_abs + HULL_SLACK - v, || {
            format!("A1 sample {k}: |F| = {v:.12e} > {sup_abs:.12e}")
        });

        let conv = if k == 0 {
            vec![(arg_re, C64::new(1.0, 0.0))]
        } else {
            random_convex_terms(&mut rng, dict.len())
        };
        let v = f.apply(&dict.combine(&conv)?)?.re;
        best_re = best_re.max(v);
        acc.record(sup_re + HULL_SLACK - v, || {
            format!("conv sample {k}: Re F = {v:.12e} > {sup_re:.12e}")
        });
    }
    acc.record(ATTAINMENT_TOL - (sup_abs - best_abs), || {
        format!("A1 sup not attained ({best_abs:.12e})")
    });
    acc.record(ATTAINMENT_TOL - (sup_re - best_re), || {
        format!("conv sup not attained ({best_re:.12e})")
    });
    acc.value = Some(sup_abs);
    Ok(acc.finish())
}
