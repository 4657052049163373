//! The complex sequence space l_p^n: norms, norming functionals, and
//! modulus-of-smoothness bounds.

use std::ops::{Add, Index, Mul, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

pub type C64 = Complex64;

/// Largest exponent accepted; |h_i|^(p-1) overflows soon after.
pub const MAX_EXPONENT: f64 = 64.0;

/// Dense complex coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVec(Vec<C64>);

impl CVec {
    /// Builds a vector, rejecting NaN and infinite components.
    pub fn new(coords: Vec<C64>) -> Result<Self> {
        if let Some(i) = coords
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite(i));
        }
        Ok(CVec(coords))
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<C64>) -> Self {
        CVec(coords)
    }

    pub fn zeros(n: usize) -> Self {
        CVec(vec![C64::new(0.0, 0.0); n])
    }

    /// The i-th standard basis vector of length n.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_real(xs: &[f64]) -> Self {
        CVec(xs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scale(&self, a: C64) -> CVec {
        CVec(self.0.iter().map(|&z| a * z).collect())
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: C64, other: &CVec) -> CVec {
        debug_assert_eq!(self.len(), other.len());
        CVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&x, &y)| x + a * y)
                .collect(),
        )
    }

    pub(crate) fn add_scaled_in_place(&mut self, a: C64, other: &CVec) {
        for (x, &y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
    }

    /// Largest coordinate modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest coordinatewise distance to `other`.
    pub fn max_abs_diff(&self, other: &CVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl Add for &CVec {
    type Output = CVec;
    fn add(self, rhs: &CVec) -> CVec {
        self.add_scaled(C64::new(1.0, 0.0), rhs)
    }
}

impl Sub for &CVec {
    type Output = CVec;
    fn sub(self, rhs: &CVec) -> CVec {
        self.add_scaled(C64::new(-1.0, 0.0), rhs)
    }
}

impl Mul<&CVec> for C64 {
    type Output = CVec;
    fn mul(self, rhs: &CVec) -> CVec {
        rhs.scale(self)
    }
}

// Entries travel as [re, im] pairs.
impl Serialize for CVec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.0.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        CVec::new(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// z/|z| for z != 0, and 1 at the origin.
pub fn complex_sign(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        z / r
    }
}

/// The space l_p^n over the complex field, 1 < p <= 64.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpSpace {
    p: f64,
    dim: usize,
}

impl LpSpace {
    pub fn new(p: f64, dim: usize) -> Result<Self> {
        if !(p.is_finite() && p > 1.0 && p <= MAX_EXPONENT) {
            return Err(Error::InvalidExponent(p));
        }
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        Ok(LpSpace { p, dim })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exponent of the dual space, p/(p-1).
    pub fn conjugate_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub(crate) fn check_dim(&self, v: &CVec) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn norm(&self, v: &CVec) -> Result<f64> {
        self.check_dim(v)?;
        Ok(scaled_p_norm(v.as_slice(), self.p))
    }

    /// Norm without the dimension check, for hot loops on validated data.
    pub(crate) fn norm_unchecked(&self, v: &[C64]) -> f64 {
        scaled_p_norm(v, self.p)
    }

    /// Norm of a functional's coefficients in the dual space l_{p/(p-1)}.
    pub fn dual_norm(&self, f: &DualFunctional) -> Result<f64> {
        self.check_dim(&f.coeffs)?;
        Ok(scaled_p_norm(
            f.coeffs.as_slice(),
            self.conjugate_exponent(),
        ))
    }

    pub fn smoothness(&self) -> SmoothnessParams {
        smoothness_params(self)
    }

    pub fn rho_bound(&self, u: f64) -> f64 {
        rho_bound(self, u)
    }
}

/// (sum |v_i|^p)^(1/p), computed relative to the largest modulus so that
/// neither large nor tiny entries over/underflow.
fn scaled_p_norm(v: &[C64], p: f64) -> f64 {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|z| (z.norm() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

pub fn lp_norm(space: &LpSpace, v: &CVec) -> Result<f64> {
    space.norm(v)
}

/// A linear functional F(x) = sum_i c_i x_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualFunctional {
    pub coeffs: CVec,
}

impl DualFunctional {
    pub fn new(coeffs: CVec) -> Self {
        DualFunctional { coeffs }
    }

    pub fn apply(&self, x: &CVec) -> Result<C64> {
        if x.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coeffs.len(),
                found: x.len(),
            });
        }
        Ok(self.apply_unchecked(x.as_slice()))
    }

    pub(crate) fn apply_unchecked(&self, x: &[C64]) -> C64 {
        self.coeffs
            .iter()
            .zip(x)
            .fold(C64::new(0.0, 0.0), |acc, (c, x)| acc + c * x)
    }
}

pub fn apply_functional(f: &DualFunctional, x: &CVec) -> Result<C64> {
    f.apply(x)
}

/// The norming functional of h: unit dual norm and F_h(h) = ||h||.
///
/// Closed form c_i = conj(sign h_i) (|h_i| / ||h||)^(p-1).
pub fn norming_functional(space: &LpSpace, h: &CVec) -> Result<DualFunctional> {
    let norm = space.norm(h)?;
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let e = space.p - 1.0;
    let coeffs = h
        .iter()
        .map(|&z| {
            let r = z.norm();
            if r == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                complex_sign(z).conj() * (r / norm).powf(e)
            }
        })
        .collect();
    Ok(DualFunctional::new(CVec::from_vec_unchecked(coeffs)))
}

/// Upper bound for the modulus of smoothness of l_p:
/// u^p/p for p <= 2 and (p-1)u^2/2 for p >= 2.
pub fn rho_bound(space: &LpSpace, u: f64) -> f64 {
    let u = u.abs();
    let p = space.p;
    if p <= 2.0 {
        u.powf(p) / p
    } else {
        (p - 1.0) * u * u / 2.0
    }
}

/// Power-type smoothness rho(u) <= gamma u^q and the dual exponent q/(q-1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessParams {
    pub q: f64,
    pub gamma: f64,
    pub p_dual: f64,
}

pub fn smoothness_params(space: &LpSpace) -> SmoothnessParams {
    let p = space.p;
    let (q, gamma) = if p <= 2.0 {
        (p, 1.0 / p)
    } else {
        (2.0, (p - 1.0) / 2.0)
    };
    SmoothnessParams {
        q,
        gamma,
        p_dual: q / (q - 1.0),
    }
}

/// i.i.d. standard complex Gaussian entries.
pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
    let coords = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    CVec(coords)
}

/// Random unit vector; every other draw is supported on at most two
/// coordinates, which is where l_p extremal pairs tend to live.
fn random_unit<R: Rng>(space: &LpSpace, rng: &mut R, sparse: bool) -> CVec {
    loop {
        let v = if sparse && space.dim > 1 {
            let mut v = CVec::zeros(space.dim);
            let i = rng.random_range(0..space.dim);
            let j = rng.random_range(0..space.dim);
            let g = gaussian_vector(rng, 2);
            v.0[i] = g[0];
            v.0[j] += g[1];
            v
        } else {
            gaussian_vector(rng, space.dim)
        };
        let n = space.norm_unchecked(v.as_slice());
        if n > 1e-12 {
            return v.scale(C64::new(1.0 / n, 0.0));
        }
    }
}

/// Monte-Carlo lower estimate of the modulus of smoothness at u.
///
/// The sampled pairs depend only on `seed` and `n_samples`, so the estimate
/// is nondecreasing in u for a fixed seed.
pub fn estimate_rho(space: &LpSpace, u: f64, n_samples: usize, seed: u64) -> f64 {
    estimate_rho_with(Exec::default(), space, u, n_samples, seed)
}

pub fn estimate_rho_with(exec: Exec, space: &LpSpace, u: f64, n_samples: usize, seed: u64) -> f64 {
    let u = u.abs();
    if u == 0.0 {
        return 0.0;
    }
    let vals = par::map_indexed(exec, n_samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, i as u64));
        let sparse = i % 2 == 1;
        let x = random_unit(space, &mut rng, sparse);
        let y = random_unit(space, &mut rng, sparse);
        let plus = space.norm_unchecked(x.add_scaled(C64::new(u, 0.0), &y).as_slice());
        let minus = space.norm_unchecked(x.add_scaled(C64::new(-u, 0.0), &y).as_slice());
        0.5 * (plus + minus) - 1.0
    });
    vals.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sp(p: f64, n: usize) -> LpSpace {
        LpSpace::new(p, n).unwrap()
    }

    #[test]
    fn norm_examples() {
        let v = CVec::new(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert_abs_diff_eq!(sp(2.0, 2).norm(&v).unwrap(), 5.0, epsilon = 1e-15);
        let ones = CVec::from_real(&[1.0, 1.0]);
        // 2^(1/1.5) = 2^(2/3)
        assert_abs_diff_eq!(
            sp(1.5, 2).norm(&ones).unwrap(),
            1.587_401_051_968_199_4,
            epsilon = 1e-14
        );
        assert_eq!(sp(3.0, 2).norm(&CVec::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn norm_rejects_wrong_dimension() {
        let err = sp(2.0, 3).norm(&CVec::zeros(2)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 3,
                found: 2
            }
        ));
    }

    #[test]
    fn norm_survives_extreme_scales() {
        let s = sp(8.0, 2);
        let big = CVec::from_real(&[1e300, 1e300]);
        let n = s.norm(&big).unwrap();
        assert!(n.is_finite());
        assert_abs_diff_eq!(n / 1e300, 2f64.powf(1.0 / 8.0), epsilon = 1e-14);
        let tiny = CVec::from_real(&[1e-300, 0.0]);
        assert_abs_diff_eq!(s.norm(&tiny).unwrap() / 1e-300, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn space_rejects_bad_exponents() {
        for p in [1.0, 0.5, f64::INFINITY, f64::NAN, 65.0] {
            assert!(matches!(LpSpace::new(p, 2), Err(Error::InvalidExponent(_))));
        }
        assert!(LpSpace::new(2.0, 0).is_err());
        assert!(LpSpace::new(64.0, 1).is_ok());
    }

    #[test]
    fn cvec_rejects_non_finite() {
        assert!(matches!(
            CVec::new(vec![c(0.0, 0.0), c(f64::NAN, 0.0)]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn sign_examples() {
        assert_eq!(complex_sign(c(3.0, 4.0)), c(0.6, 0.8));
        assert_eq!(complex_sign(c(-2.0, 0.0)), c(-1.0, 0.0));
        assert_eq!(complex_sign(c(0.0, 0.0)), c(1.0, 0.0));
    }

    #[test]
    fn norming_functional_examples() {
        let s = sp(2.0, 2);
        let h = CVec::new(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        let f = norming_functional(&s, &h).unwrap();
        assert_abs_diff_eq!(f.apply(&h).unwrap().re, 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.apply(&h).unwrap().im, 0.0, epsilon = 1e-14);
        // Hilbert case: <e_1, h>/||h|| = 3/5
        let e1 = CVec::unit(2, 0);
        assert_abs_diff_eq!(f.apply(&e1).unwrap().re, 0.6, epsilon = 1e-15);

        let s3 = sp(3.0, 2);
        let ones = CVec::from_real(&[1.0, 1.0]);
        let f3 = norming_functional(&s3, &ones).unwrap();
        assert_abs_diff_eq!(
            f3.apply(&ones).unwrap().re,
            2f64.powf(1.0 / 3.0),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(s3.dual_norm(&f3).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn norming_functional_of_zero_is_an_error() {
        assert!(matches!(
            norming_functional(&sp(2.0, 3), &CVec::zeros(3)),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn apply_examples() {
        let s = sp(2.0, 2);
        let f = norming_functional(&s, &CVec::unit(2, 0)).unwrap();
        assert_eq!(f.apply(&CVec::unit(2, 1)).unwrap(), c(0.0, 0.0));
        let x = CVec::new(vec![c(2.0, 1.0), c(7.0, 0.0)]).unwrap();
        assert_eq!(f.apply(&x).unwrap(), c(2.0, 1.0));
        let g = DualFunctional::new(CVec::new(vec![c(0.6, 0.0), c(0.0, -0.8)]).unwrap());
        let y = CVec::new(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        // 0.6*3 + (-0.8i)(4i) = 1.8 + 3.2
        assert_abs_diff_eq!(g.apply(&y).unwrap().re, 5.0, epsilon = 1e-15);
        assert!(g.apply(&CVec::zeros(3)).is_err());
    }

    #[test]
    fn rho_bound_examples() {
        assert_abs_diff_eq!(rho_bound(&sp(2.0, 1), 0.1), 0.005, epsilon = 1e-17);
        assert_abs_diff_eq!(
            rho_bound(&sp(1.5, 1), 0.1),
            0.021_081_851_067_789_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(rho_bound(&sp(4.0, 1), 0.5), 0.375, epsilon = 1e-16);
    }

    #[test]
    fn smoothness_examples() {
        let s = smoothness_params(&sp(2.0, 1));
        assert_eq!((s.q, s.gamma, s.p_dual), (2.0, 0.5, 2.0));
        let s = smoothness_params(&sp(1.5, 1));
        assert_abs_diff_eq!(s.q, 1.5);
        assert_abs_diff_eq!(s.gamma, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.p_dual, 3.0, epsilon = 1e-14);
        let s = smoothness_params(&sp(4.0, 1));
        assert_eq!((s.q, s.gamma, s.p_dual), (2.0, 1.5, 2.0));
    }

    #[test]
    fn estimate_rho_hilbert_closed_form() {
        let s = sp(2.0, 2);
        let est = estimate_rho(&s, 1.0, 20_000, 3);
        let exact = 2f64.sqrt() - 1.0;
        assert!(est <= exact + 1e-12);
        assert!(exact - est < 1e-4, "estimate {est} too far below {exact}");
        assert_eq!(estimate_rho(&s, 0.0, 100, 3), 0.0);
        assert!(estimate_rho(&s, 0.1, 2000, 3) <= 0.005 + 1e-9);
    }

    #[test]
    fn estimate_rho_respects_trivial_bounds() {
        // max(0, u-1) <= rho(u) <= u
        for p in [1.5, 3.0] {
            let s = sp(p, 3);
            for u in [0.5, 2.0, 4.0] {
                let est = estimate_rho(&s, u, 4000, 11);
                assert!(est <= u + 1e-12);
                assert!(est <= rho_bound(&s, u) + 1e-9);
                if u >= 2.0 {
                    assert!(est >= u - 1.0 - 1e-9, "p={p} u={u} est={est}");
                }
            }
        }
    }
}
