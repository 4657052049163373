//! Inner convex minimizations: the free-relaxation step, the single
//! coefficient line step, and best approximation from a subspace.
//!
//! Every problem here has the form `min_z || base - sum_j z_j d_j ||_p` over
//! complex z. The solver works on the real parametrization (Re z_j, Im z_j)
//! and minimizes the squared norm, whose gradient comes from the norming
//! functional of the residual. Steps are damped Newton with Armijo
//! backtracking; the squared norm is 2-homogeneous, so when the residual can
//! be driven to zero a single full step lands there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{CVec, LpSpace, C64};

/// Residuals below this norm are treated as exact zeros.
pub const ZERO_RESIDUAL: f64 = 1e-13;

/// Relative floor on |r_i| / ||r|| when forming curvature weights for p < 2.
const CURVATURE_FLOOR: f64 = 1e-6;

/// Relative change in the norm treated as round-off when Armijo can no
/// longer see a decrease.
const FLAT_RTOL: f64 = 1e-13;

/// Rank threshold for basis independence.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            max_iters: 500,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::config("solver.grad_tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("solver.max_iters", "must be at least 1"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::config("solver.armijo_c", "must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::config(
                "solver.backtrack_factor",
                "must lie in (0, 1)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub minimizer: Vec<C64>,
    /// Norm of the residual at the minimizer.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest partial derivative of the norm at the minimizer.
    pub grad_norm: f64,
}

/// Local model of the squared residual norm at one point.
struct Model {
    norm: f64,
    /// Gradient of the (unsquared) norm.
    grad: Vec<f64>,
    /// Hessian of the squared norm.
    hess: Vec<f64>,
}

struct Problem<'a> {
    space: &'a LpSpace,
    base: &'a CVec,
    dirs: Vec<&'a CVec>,
}

impl Problem<'_> {
    fn nvars(&self) -> usize {
        2 * self.dirs.len()
    }

    fn residual(&self, x: &[f64]) -> CVec {
        let mut r = self.base.clone();
        for (j, d) in self.dirs.iter().enumerate() {
            r.add_scaled_in_place(-C64::new(x[2 * j], x[2 * j + 1]), d);
        }
        r
    }

    fn norm_at(&self, x: &[f64]) -> f64 {
        self.space.norm_unchecked(self.residual(x).as_slice())
    }

    fn model(&self, x: &[f64]) -> Model {
        let r = self.residual(x);
        let norm = self.space.norm_unchecked(r.as_slice());
        let nv = self.nvars();
        let mut grad = vec![0.0; nv];
        let mut hess = vec![0.0; nv * nv];
        if norm == 0.0 {
            return Model { norm, grad, hess };
        }
        let p = self.space.p();
        // Column l of the real Jacobian of coordinate i, as a 2-vector.
        let mut cols = vec![[0.0f64; 2]; nv];
        for i in 0..r.len() {
            let u = r[i] / norm;
            let s = u.norm();
            if s == 0.0 && p > 2.0 {
                continue;
            }
            // Exact gradient weight; the curvature weight is floored for p < 2.
            let wg = if s == 0.0 { 0.0 } else { s.powf(p - 2.0) };
            let w = if p < 2.0 {
                s.max(CURVATURE_FLOOR).powf(p - 2.0)
            } else if s == 0.0 {
                1.0
            } else {
                wg
            };
            for (j, d) in self.dirs.iter().enumerate() {
                let dj = d[i];
                cols[2 * j] = [-dj.re, -dj.im];
                cols[2 * j + 1] = [dj.im, -dj.re];
            }
            let uv = [u.re, u.im];
            let (hx, hy) = if s > 0.0 {
                (u.re / s, u.im / s)
            } else {
                (0.0, 0.0)
            };
            let k = p - 2.0;
            let m = [
                w * (1.0 + k * hx * hx),
                w * k * hx * hy,
                w * (1.0 + k * hy * hy),
            ];
            for l in 0..nv {
                let a = cols[l];
                grad[l] += wg * (a[0] * uv[0] + a[1] * uv[1]);
                let ma = [m[0] * a[0] + m[1] * a[1], m[1] * a[0] + m[2] * a[1]];
                for (mm, b) in cols.iter().enumerate().skip(l) {
                    hess[l * nv + mm] += ma[0] * b[0] + ma[1] * b[1];
                }
            }
        }
        // Hessian of N^2 is 2 Hs + 2 (2 - p) g g^T.
        for l in 0..nv {
            for mm in l..nv {
                let v = 2.0 * hess[l * nv + mm] + 2.0 * (2.0 - p) * grad[l] * grad[mm];
                hess[l * nv + mm] = v;
                hess[mm * nv + l] = v;
            }
        }
        Model { norm, grad, hess }
    }
}

/// Cholesky solve of (H + mu I) d = rhs, raising mu until the factorization
/// succeeds.
fn regularized_solve(h: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = (0..n)
        .map(|i| h[i * n + i].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut mu = 0.0;
    for _ in 0..30 {
        if let Some(d) = cholesky_solve(h, rhs, mu) {
            return Some(d);
        }
        mu = if mu == 0.0 { 1e-12 * scale } else { mu * 100.0 };
    }
    None
}

fn cholesky_solve(h: &[f64], rhs: &[f64], mu: f64) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = h[i * n + j] + if i == j { mu } else { 0.0 };
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s = rhs[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>();
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s = y[i] - (i + 1..n).map(|k| l[k * n + i] * x[k]).sum::<f64>();
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn to_complex(x: &[f64]) -> Vec<C64> {
    x.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
}

/// Minimizes `|| base - sum_j z_j dirs[j] ||` from the starting point `init`.
pub fn minimize_affine(
    space: &LpSpace,
    base: &CVec,
    dirs: &[&CVec],
    init: &[C64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    space.check_dim(base)?;
    for d in dirs {
        space.check_dim(d)?;
    }
    if init.len() != dirs.len() {
        return Err(Error::DimensionMismatch {
            expected: dirs.len(),
            found: init.len(),
        });
    }
    let prob = Problem {
        space,
        base,
        dirs: dirs.to_vec(),
    };
    let nv = prob.nvars();
    let mut x: Vec<f64> = init.iter().flat_map(|z| [z.re, z.im]).collect();
    let mut model = prob.model(&x);
    let mut iterations = 0;
    loop {
        if model.norm < ZERO_RESIDUAL {
            return Ok(SolveResult {
                minimizer: to_complex(&x),
                value: model.norm,
                converged: true,
                iterations,
                grad_norm: 0.0,
            });
        }
        let gnorm = inf_norm(&model.grad);
        if gnorm <= cfg.grad_tol || iterations >= cfg.max_iters {
            return Ok(SolveResult {
                minimizer: to_complex(&x),
                value: model.norm,
                converged: gnorm <= cfg.grad_tol,
                iterations,
                grad_norm: gnorm,
            });
        }
        iterations += 1;

        let psi = model.norm * model.norm;
        let grad_psi: Vec<f64> = model.grad.iter().map(|g| 2.0 * model.norm * g).collect();
        let neg: Vec<f64> = grad_psi.iter().map(|g| -g).collect();
        let mut dir = regularized_solve(&model.hess, &neg).unwrap_or_else(|| neg.clone());
        let mut slope: f64 = dir.iter().zip(&grad_psi).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            dir = neg.clone();
            slope = dir.iter().zip(&grad_psi).map(|(d, g)| d * g).sum();
        }

        let trial = |alpha: f64| -> Vec<f64> {
            x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect()
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let wanted = psi + cfg.armijo_c * alpha * slope;
            if wanted >= psi {
                // the required decrease has rounded away
                break;
            }
            let xt = trial(alpha);
            let nt = prob.norm_at(&xt);
            if nt * nt <= wanted {
                accepted = Some(xt);
                break;
            }
            alpha *= cfg.backtrack_factor;
        }
        let next = match accepted {
            Some(xt) => xt,
            None => {
                // Sufficient decrease is below round-off. Take the full step
                // only if it leaves the objective flat and shrinks the gradient.
                let xt = trial(1.0);
                let nt = prob.norm_at(&xt);
                let mt = prob.model(&xt);
                if nt <= model.norm * (1.0 + FLAT_RTOL) && inf_norm(&mt.grad) < gnorm {
                    x = xt;
                    model = mt;
                    continue;
                }
                return Ok(SolveResult {
                    minimizer: to_complex(&x),
                    value: model.norm,
                    converged: false,
                    iterations,
                    grad_norm: gnorm,
                });
            }
        };
        debug_assert_eq!(next.len(), nv);
        x = next;
        model = prob.model(&x);
    }
}

/// min over complex lambda of || base - lambda * direction ||, from lambda = 0.
pub fn minimize_over_line(
    space: &LpSpace,
    base: &CVec,
    direction: &CVec,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if space.norm(direction)? == 0.0 {
        return Err(Error::ZeroVector);
    }
    minimize_affine(space, base, &[direction], &[C64::new(0.0, 0.0)], cfg)
}

/// min over complex (w, lambda) of || f - ((1 - w) G_prev + lambda phi) ||,
/// from (0, 0). The minimizer is reported as [w, lambda]; w stays 0 when
/// G_prev = 0.
pub fn minimize_free_relax(
    space: &LpSpace,
    f: &CVec,
    g_prev: &CVec,
    phi: &CVec,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let zero = C64::new(0.0, 0.0);
    minimize_free_relax_from(space, f, g_prev, phi, (zero, zero), cfg)
}

pub fn minimize_free_relax_from(
    space: &LpSpace,
    f: &CVec,
    g_prev: &CVec,
    phi: &CVec,
    init: (C64, C64),
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    space.check_dim(f)?;
    space.check_dim(g_prev)?;
    if space.norm(phi)? == 0.0 {
        return Err(Error::ZeroVector);
    }
    let base = f - g_prev;
    if g_prev.is_zero() {
        let mut res = minimize_affine(space, &base, &[phi], &[init.1], cfg)?;
        res.minimizer.insert(0, C64::new(0.0, 0.0));
        return Ok(res);
    }
    // f - (1 - w) G - lambda phi = (f - G) - (w (-G) + lambda phi)
    let neg_g = g_prev.scale(C64::new(-1.0, 0.0));
    minimize_affine(space, &base, &[&neg_g, phi], &[init.0, init.1], cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestApprox {
    pub coeffs: Vec<C64>,
    pub residual: CVec,
    pub solve: SolveResult,
}

/// Numerical rank of the vectors by Gaussian elimination with partial
/// pivoting, relative to the largest entry.
pub fn numerical_rank(vectors: &[CVec], tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let n = vectors[0].len();
    let k = vectors.len();
    // Row-major n x k matrix, columns are the vectors.
    let mut a: Vec<C64> = (0..n)
        .flat_map(|i| vectors.iter().map(move |v| v[i]))
        .collect();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    for col in 0..k {
        if rank == n {
            break;
        }
        let (piv, pv) = (rank..n)
            .map(|i| (i, a[i * k + col].norm()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv <= tol * scale {
            continue;
        }
        for j in 0..k {
            a.swap(rank * k + j, piv * k + j);
        }
        let pivot = a[rank * k + col];
        for i in rank + 1..n {
            let factor = a[i * k + col] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..k {
                let v = a[rank * k + j];
                a[i * k + j] -= factor * v;
            }
        }
        rank += 1;
    }
    rank
}

/// Best approximation of f from span(basis).
pub fn best_approx_subspace(
    space: &LpSpace,
    f: &CVec,
    basis: &[CVec],
    cfg: &SolverConfig,
) -> Result<BestApprox> {
    if basis.is_empty() {
        return Err(Error::param("basis", "must be nonempty"));
    }
    space.check_dim(f)?;
    for b in basis {
        space.check_dim(b)?;
    }
    let rank = numerical_rank(basis, RANK_TOL);
    if rank < basis.len() {
        return Err(Error::DependentBasis {
            rank,
            len: basis.len(),
        });
    }
    let dirs: Vec<&CVec> = basis.iter().collect();
    let init = vec![C64::new(0.0, 0.0); basis.len()];
    let solve = minimize_affine(space, f, &dirs, &init, cfg)?;
    if !solve.converged {
        return Err(Error::param(
            "solver",
            format!(
                "no convergence after {} iterations (gradient {:.3e})",
                solve.iterations, solve.grad_norm
            ),
        ));
    }
    let mut residual = f.clone();
    for (c, b) in solve.minimizer.iter().zip(basis) {
        residual.add_scaled_in_place(-*c, b);
    }
    Ok(BestApprox {
        coeffs: solve.minimizer.clone(),
        residual,
        solve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sp(p: f64, n: usize) -> LpSpace {
        LpSpace::new(p, n).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn hessian_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for p in [1.5, 3.0, 4.0] {
            let space = sp(p, 6);
            let base = crate::space::gaussian_vector(&mut rng, 6);
            let d1 = crate::space::gaussian_vector(&mut rng, 6);
            let d2 = crate::space::gaussian_vector(&mut rng, 6);
            let prob = Problem {
                space: &space,
                base: &base,
                dirs: vec![&d1, &d2],
            };
            let x = [0.1, -0.2, 0.3, 0.05];
            let m = prob.model(&x);
            let gpsi = |x: &[f64]| -> Vec<f64> {
                let m = prob.model(x);
                m.grad.iter().map(|g| 2.0 * m.norm * g).collect()
            };
            let h = 1e-6;
            for l in 0..4 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[l] += h;
                xm[l] -= h;
                let (gp, gm) = (gpsi(&xp), gpsi(&xm));
                for k in 0..4 {
                    let fd = (gp[k] - gm[k]) / (2.0 * h);
                    assert!(
                        (fd - m.hess[k * 4 + l]).abs() < 1e-5 * (1.0 + fd.abs()),
                        "p={p} ({k},{l}): {fd} vs {}",
                        m.hess[k * 4 + l]
                    );
                }
            }
        }
    }

    #[test]
    fn line_examples() {
        let s = sp(2.0, 2);
        let r = minimize_over_line(&s, &CVec::from_real(&[2.0, 0.0]), &CVec::unit(2, 0), &cfg())
            .unwrap();
        assert_abs_diff_eq!(r.minimizer[0].re, 2.0, epsilon = 1e-12);
        assert!(r.value <= 1e-12 && r.converged);

        let r = minimize_over_line(&s, &CVec::from_real(&[1.0, 1.0]), &CVec::unit(2, 0), &cfg())
            .unwrap();
        assert_abs_diff_eq!(r.minimizer[0].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);

        let s4 = sp(4.0, 2);
        let r = minimize_over_line(
            &s4,
            &CVec::from_real(&[1.0, 1.0]),
            &CVec::unit(2, 0),
            &cfg(),
        )
        .unwrap();
        assert!(r.converged);
        // Quartic flatness: a gradient of 1e-10 pins lambda only to ~5e-4.
        assert_abs_diff_eq!(r.minimizer[0].re, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.minimizer[0].im, 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);

        assert!(minimize_over_line(&s, &CVec::unit(2, 0), &CVec::zeros(2), &cfg()).is_err());
    }

    #[test]
    fn line_matches_grid_search_in_l4() {
        // Brute-force oracle over a complex grid around the symmetric point.
        let s = sp(4.0, 2);
        let base = CVec::from_real(&[1.0, 1.0]);
        let d = CVec::unit(2, 0);
        let mut best = f64::INFINITY;
        for i in -50..=50 {
            for j in -50..=50 {
                let lam = C64::new(1.0 + i as f64 * 0.01, j as f64 * 0.01);
                best = best.min(s.norm(&base.add_scaled(-lam, &d)).unwrap());
            }
        }
        let r = minimize_over_line(&s, &base, &d, &cfg()).unwrap();
        assert!(r.value <= best + 1e-12);
    }

    #[test]
    fn free_relax_examples() {
        let s = sp(2.0, 2);
        let f = CVec::from_real(&[1.0, 1.0]);
        let r = minimize_free_relax(&s, &f, &CVec::zeros(2), &CVec::unit(2, 0), &cfg()).unwrap();
        assert_eq!(r.minimizer[0], C64::new(0.0, 0.0));
        assert_abs_diff_eq!(r.minimizer[1].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);

        let g = CVec::from_real(&[1.0, 0.0]);
        let r = minimize_free_relax(&s, &f, &g, &CVec::unit(2, 1), &cfg()).unwrap();
        assert!(r.value <= 1e-12);
        assert_abs_diff_eq!(r.minimizer[0].norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.minimizer[1].re, 1.0, epsilon = 1e-10);

        let r = minimize_free_relax(&s, &f, &f, &CVec::unit(2, 0), &cfg()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.minimizer, vec![C64::new(0.0, 0.0); 2]);
    }

    #[test]
    fn free_relax_matches_grid_oracle() {
        // (w, lambda) grid over reals suffices: data is real and the minimizer
        // is unique.
        let s = sp(3.0, 3);
        let f = CVec::from_real(&[1.0, 0.4, -0.3]);
        let g = CVec::from_real(&[0.6, 0.1, 0.0]);
        let phi = CVec::from_real(&[0.0, 0.5, -0.8]);
        let mut best = f64::INFINITY;
        for i in -100..=100 {
            for j in -100..=100 {
                let w = C64::new(i as f64 * 0.02, 0.0);
                let lam = C64::new(j as f64 * 0.02, 0.0);
                let approx = g.scale(C64::new(1.0, 0.0) - w).add_scaled(lam, &phi);
                best = best.min(s.norm(&(&f - &approx)).unwrap());
            }
        }
        let r = minimize_free_relax(&s, &f, &g, &phi, &cfg()).unwrap();
        assert!(r.converged);
        assert!(r.value <= best + 1e-12);
        assert!(best - r.value < 1e-3);
    }

    #[test]
    fn subspace_examples() {
        let s = sp(2.0, 3);
        let f = CVec::from_real(&[1.0, 1.0, 1.0]);
        let basis = vec![CVec::unit(3, 0), CVec::unit(3, 1)];
        let ba = best_approx_subspace(&s, &f, &basis, &cfg()).unwrap();
        assert_abs_diff_eq!(ba.coeffs[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ba.coeffs[1].re, 1.0, epsilon = 1e-12);
        assert!(ba.residual.max_abs_diff(&CVec::unit(3, 2)) < 1e-12);

        let inside = CVec::from_real(&[0.3, -2.0, 0.0]);
        let ba = best_approx_subspace(&sp(3.0, 3), &inside, &basis, &cfg()).unwrap();
        assert!(sp(3.0, 3).norm(&ba.residual).unwrap() <= 1e-8);
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let s = sp(2.0, 3);
        let b = CVec::from_real(&[1.0, 2.0, 0.0]);
        let basis = vec![b.clone(), b.scale(C64::new(0.0, 3.0))];
        let err = best_approx_subspace(&s, &CVec::unit(3, 2), &basis, &cfg()).unwrap_err();
        assert!(matches!(err, Error::DependentBasis { rank: 1, len: 2 }));
        assert!(best_approx_subspace(&s, &CVec::unit(3, 2), &[], &cfg()).is_err());
    }

    #[test]
    fn rank_examples() {
        let e = |i| CVec::unit(3, i);
        assert_eq!(numerical_rank(&[e(0), e(1), e(2)], RANK_TOL), 3);
        let sum = &e(0) + &e(1);
        assert_eq!(numerical_rank(&[e(0), e(1), sum], RANK_TOL), 2);
        assert_eq!(numerical_rank(&[CVec::zeros(3)], RANK_TOL), 0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let bad = SolverConfig {
            armijo_c: 1.0,
            ..cfg()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iters: 0,
            ..cfg()
        };
        assert!(bad.validate().is_err());
    }
}
