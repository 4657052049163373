//! Finite dictionaries, the dictionary dual norm, and the selection oracles
//! shared by the greedy algorithms.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::space::{complex_sign, gaussian_vector, CVec, DualFunctional, LpSpace, C64};

/// Slack on the unit-norm contract for dictionary elements.
pub const NORM_SLACK: f64 = 1e-12;

/// Absolute slack on the eps-selection threshold; absorbs round-off when
/// eps_m = 0 and the target sits exactly on the hull boundary.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    Gaussian,
    FourierFrame,
    Canonical,
}

/// An ordered, finite list of elements of norm at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    space: LpSpace,
    elements: Vec<CVec>,
}

impl Dictionary {
    pub fn new(space: LpSpace, elements: Vec<CVec>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::param("elements", "dictionary must be nonempty"));
        }
        for (i, g) in elements.iter().enumerate() {
            let n = space.norm(g)?;
            if n > 1.0 + NORM_SLACK {
                return Err(Error::param(
                    "elements",
                    format!("element {i} has norm {n} > 1"),
                ));
            }
        }
        Ok(Dictionary { space, elements })
    }

    pub fn space(&self) -> &LpSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, i: usize) -> &CVec {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[CVec] {
        &self.elements
    }

    /// F(g_i) for every element, in order.
    pub fn evaluate(&self, f: &DualFunctional) -> Result<Vec<C64>> {
        self.space.check_dim(&f.coeffs)?;
        let exec = par::for_scan(self.len() * self.space.dim());
        Ok(par::map_indexed(exec, self.len(), |i| {
            f.apply_unchecked(self.elements[i].as_slice())
        }))
    }

    /// sum_j a_j g_{i_j}
    pub fn combine(&self, terms: &[(usize, C64)]) -> Result<CVec> {
        let mut out = CVec::zeros(self.space.dim());
        for &(i, a) in terms {
            let g = self
                .elements
                .get(i)
                .ok_or_else(|| Error::param("index", format!("{i} out of range")))?;
            out.add_scaled_in_place(a, g);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates a dictionary snapshot.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Dictionary = serde_json::from_str(s)?;
        let space = LpSpace::new(raw.space.p(), raw.space.dim())?;
        Dictionary::new(space, raw.elements)
    }
}

pub fn generate_dictionary(
    space: &LpSpace,
    count: usize,
    kind: DictKind,
    seed: u64,
) -> Result<Dictionary> {
    let n = space.dim();
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let elements = match kind {
        DictKind::Canonical => {
            if count != n {
                return Err(Error::param(
                    "count",
                    format!("canonical dictionary needs count == dim ({n}), got {count}"),
                ));
            }
            (0..n).map(|i| CVec::unit(n, i)).collect()
        }
        DictKind::FourierFrame => {
            if count < n {
                return Err(Error::param(
                    "count",
                    format!("Fourier frame needs count >= dim ({n}), got {count}"),
                ));
            }
            // Row k: exp(2 pi i k j / count), j < dim, rescaled to unit norm.
            let scale = (n as f64).powf(-1.0 / space.p());
            (0..count)
                .map(|k| {
                    let coords = (0..n)
                        .map(|j| {
                            let theta = 2.0 * std::f64::consts::PI * ((k * j) % count) as f64
                                / count as f64;
                            C64::from_polar(scale, theta)
                        })
                        .collect();
                    CVec::from_vec_unchecked(coords)
                })
                .collect()
        }
        DictKind::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let v = gaussian_vector(&mut rng, n);
                let norm = space.norm(&v)?;
                if norm > 1e-12 {
                    out.push(v.scale(C64::new(1.0 / norm, 0.0)));
                }
            }
            out
        }
    };
    // Round-off can leave a norm a few ulps above one.
    let elements = elements
        .into_iter()
        .map(|g: CVec| {
            let norm = space.norm_unchecked(g.as_slice());
            if norm > 1.0 {
                g.scale(C64::new(1.0 / norm, 0.0))
            } else {
                g
            }
        })
        .collect();
    Dictionary::new(*space, elements)
}

/// max_i |F(g_i)| and the smallest index attaining it.
pub fn dict_dual_norm(f: &DualFunctional, dict: &Dictionary) -> Result<(f64, usize)> {
    let vals = dict.evaluate(f)?;
    Ok(argmax_abs(&vals))
}

fn argmax_abs(vals: &[C64]) -> (f64, usize) {
    let exec = par::for_scan(vals.len());
    let (i, v) = par::argmax_by(exec, vals.len(), |i| (vals[i].norm(), 0.0)).unwrap_or((0, 0.0));
    (v, i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectPolicy {
    Argmax,
    FirstQualifying,
}

/// How eps-selection searches: over the phase circle of each element, or
/// over the elements themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsMode {
    Circle,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub index: usize,
    /// Unit-modulus factor applied to the element.
    pub phase: C64,
    /// F(g_index) at selection time.
    pub value: C64,
}

/// Picks an element with |F(g)| >= t ||F||_D.
///
/// When every value is zero the result is index 0 with phase 1 and value 0;
/// callers treat that as stagnation.
pub fn weak_select(
    f: &DualFunctional,
    dict: &Dictionary,
    t: f64,
    policy: SelectPolicy,
) -> Result<Selection> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("weakness {t} outside [0, 1]")));
    }
    let vals = dict.evaluate(f)?;
    Ok(weak_select_values(&vals, t, policy))
}

pub(crate) fn weak_select_values(vals: &[C64], t: f64, policy: SelectPolicy) -> Selection {
    let (max, argmax) = argmax_abs(vals);
    let index = match policy {
        SelectPolicy::Argmax => argmax,
        SelectPolicy::FirstQualifying => {
            let threshold = t * max;
            let exec = par::for_scan(vals.len());
            par::first_index(exec, vals.len(), |i| vals[i].norm() >= threshold).unwrap_or(argmax)
        }
    };
    let value = vals[index];
    Selection {
        index,
        phase: complex_sign(value).conj(),
        value,
    }
}

/// Near-optimal selection for the incremental algorithms:
/// Re F(phi) - Re F(f) >= -eps_m, with phi over D (plain) or its phase
/// circle (circle).
///
/// In circle mode the phase is chosen analytically so that
/// Re F(phase * g) = |F(g)|; argmax ties go to the element already aligned
/// (larger Re F(g)), then to the smallest index.
pub fn eps_select(
    f_residual: &DualFunctional,
    dict: &Dictionary,
    target: &CVec,
    eps_m: f64,
    mode: EpsMode,
    policy: SelectPolicy,
) -> Result<Selection> {
    if !(eps_m >= 0.0) {
        return Err(Error::param(
            "eps_m",
            format!("{eps_m} must be nonnegative"),
        ));
    }
    let vals = dict.evaluate(f_residual)?;
    let reference = f_residual.apply(target)?.re;
    eps_select_values(&vals, reference, eps_m, mode, policy)
}

pub(crate) fn eps_select_values(
    vals: &[C64],
    reference: f64,
    eps_m: f64,
    mode: EpsMode,
    policy: SelectPolicy,
) -> Result<Selection> {
    let score = |i: usize| match mode {
        EpsMode::Circle => vals[i].norm(),
        EpsMode::Plain => vals[i].re,
    };
    let exec = par::for_scan(vals.len());
    let (best, best_score) = par::argmax_by(exec, vals.len(), |i| match mode {
        EpsMode::Circle => (vals[i].norm(), vals[i].re),
        EpsMode::Plain => (vals[i].re, 0.0),
    })
    .ok_or_else(|| Error::param("dictionary", "empty"))?;
    let threshold = reference - eps_m - FEASIBILITY_SLACK;
    if best_score < threshold {
        return Err(Error::InfeasibleSelection {
            best_margin: best_score - reference,
            eps: eps_m,
        });
    }
    let index = match policy {
        SelectPolicy::Argmax => best,
        SelectPolicy::FirstQualifying => {
            par::first_index(exec, vals.len(), |i| score(i) >= threshold).unwrap_or(best)
        }
    };
    let value = vals[index];
    let phase = match mode {
        EpsMode::Circle => complex_sign(value).conj(),
        EpsMode::Plain => C64::new(1.0, 0.0),
    };
    Ok(Selection {
        index,
        phase,
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// f_eps / A_eps lies in the absolutely convex hull A_1(D).
    A1,
    /// f lies in the convex hull conv(D).
    Conv,
}

/// A target f together with the certificate of its hull membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub f: CVec,
    pub f_eps: CVec,
    pub eps: f64,
    pub a_eps: f64,
    pub membership: Membership,
    pub true_coeffs: Vec<(usize, C64)>,
}

impl TargetSpec {
    /// Exact target f = sum a_j g_j; A_eps is taken as sum |a_j|.
    pub fn from_terms(
        dict: &Dictionary,
        membership: Membership,
        terms: Vec<(usize, C64)>,
    ) -> Result<Self> {
        let f = dict.combine(&terms)?;
        let l1: f64 = terms.iter().map(|(_, a)| a.norm()).sum();
        if membership == Membership::Conv {
            let sum: f64 = terms.iter().map(|(_, a)| a.re).sum();
            if terms.iter().any(|(_, a)| a.re < 0.0 || a.im != 0.0) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::param(
                    "true_coeffs",
                    "convex membership needs nonnegative real weights summing to 1",
                ));
            }
        }
        if l1 <= 0.0 {
            return Err(Error::param("true_coeffs", "all coefficients vanish"));
        }
        Ok(TargetSpec {
            f_eps: f.clone(),
            f,
            eps: 0.0,
            a_eps: l1,
            membership,
            true_coeffs: terms,
        })
    }

    /// Moves f off its representable part by `perturbation`, recording
    /// eps = ||perturbation||.
    pub fn perturbed(mut self, space: &LpSpace, perturbation: &CVec) -> Result<Self> {
        self.eps = space.norm(perturbation)?;
        self.f = &self.f_eps + perturbation;
        Ok(self)
    }

    /// Checks ||f - f_eps|| <= eps and the coefficient contract.
    pub fn validate(&self, dict: &Dictionary) -> Result<()> {
        let space = dict.space();
        let gap = space.norm(&(&self.f - &self.f_eps))?;
        if gap > self.eps + 1e-12 {
            return Err(Error::param(
                "f",
                format!("||f - f_eps|| = {gap} exceeds eps = {}", self.eps),
            ));
        }
        let rebuilt = dict.combine(&self.true_coeffs)?;
        if rebuilt.max_abs_diff(&self.f_eps) > 1e-10 {
            return Err(Error::param("true_coeffs", "do not reproduce f_eps"));
        }
        let l1: f64 = self.true_coeffs.iter().map(|(_, a)| a.norm()).sum();
        if l1 > self.a_eps * (1.0 + 1e-12) {
            return Err(Error::param(
                "a_eps",
                format!("sum |a_j| = {l1} exceeds A_eps = {}", self.a_eps),
            ));
        }
        Ok(())
    }
}

/// Draws a seeded target from the dictionary.
///
/// A1: `sparsity` distinct elements with complex coefficients, sum |a_j| = 1,
/// A_eps = 1, plus a perturbation of norm eps. Conv: nonnegative weights
/// summing to one, same perturbation rule.
pub fn make_target(
    dict: &Dictionary,
    membership: Membership,
    sparsity: usize,
    eps: f64,
    seed: u64,
) -> Result<TargetSpec> {
    if sparsity == 0 || sparsity > dict.len() {
        return Err(Error::param(
            "sparsity",
            format!("{sparsity} outside 1..={}", dict.len()),
        ));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::param(
            "eps",
            format!("{eps} must be finite and nonnegative"),
        ));
    }
    let space = *dict.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = sample(&mut rng, dict.len(), sparsity).into_vec();
    indices.sort_unstable();
    let weights: Vec<f64> = (0..sparsity).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let terms: Vec<(usize, C64)> = indices
        .iter()
        .zip(&weights)
        .map(|(&i, &w)| {
            let w = w / total;
            let a = match membership {
                Membership::A1 => {
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    C64::from_polar(w, theta)
                }
                Membership::Conv => C64::new(w, 0.0),
            };
            (i, a)
        })
        .collect();
    let f_eps = dict.combine(&terms)?;
    let mut f = f_eps.clone();
    if eps > 0.0 {
        let dir = gaussian_vector(&mut rng, space.dim());
        let n = space.norm(&dir)?;
        if n > 0.0 {
            f = f.add_scaled(C64::new(eps / n, 0.0), &dir);
        }
    }
    if space.norm(&f)? == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(TargetSpec {
        f,
        f_eps,
        eps,
        a_eps: 1.0,
        membership,
        true_coeffs: terms,
    })
}
