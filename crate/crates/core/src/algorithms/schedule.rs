use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::SmoothnessParams;

/// Per-step weakness factors t_m in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeaknessSequence {
    Constant(f64),
    General(Vec<f64>),
}

impl WeaknessSequence {
    /// t_m for m >= 1.
    pub fn get(&self, m: usize) -> f64 {
        match self {
            WeaknessSequence::Constant(t) => *t,
            WeaknessSequence::General(ts) => ts[m - 1],
        }
    }

    /// Checks ranges and that at least `iters` values exist.
    pub fn validate(&self, iters: usize) -> Result<()> {
        match self {
            WeaknessSequence::Constant(t) => {
                if !(*t > 0.0 && *t <= 1.0) {
                    return Err(Error::config(
                        "algorithm.weakness",
                        format!("constant t = {t} outside (0, 1]"),
                    ));
                }
            }
            WeaknessSequence::General(ts) => {
                if ts.len() < iters {
                    return Err(Error::config(
                        "algorithm.weakness",
                        format!("{} values for {iters} iterations", ts.len()),
                    ));
                }
                if let Some(t) = ts.iter().find(|t| !(**t >= 0.0 && **t <= 1.0)) {
                    return Err(Error::config(
                        "algorithm.weakness",
                        format!("t = {t} outside [0, 1]"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// sum_{k <= m} t_k^e
    pub fn power_sum(&self, m: usize, e: f64) -> f64 {
        (1..=m).map(|k| self.get(k).powf(e)).sum()
    }
}

/// Shrinkage factors r_m in [0, 1) applied to the previous approximant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationSchedule {
    /// r_k = 2 / (k + 2)
    #[serde(rename = "standard")]
    PaperDefault,
    Constant(f64),
    Custom(Vec<f64>),
}

impl RelaxationSchedule {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            RelaxationSchedule::PaperDefault => 2.0 / (k as f64 + 2.0),
            RelaxationSchedule::Constant(r) => *r,
            RelaxationSchedule::Custom(rs) => rs[k - 1],
        }
    }

    pub fn validate(&self, iters: usize) -> Result<()> {
        let ok = |r: f64| (0.0..1.0).contains(&r);
        match self {
            RelaxationSchedule::PaperDefault => Ok(()),
            RelaxationSchedule::Constant(r) if ok(*r) => Ok(()),
            RelaxationSchedule::Constant(r) => Err(Error::config(
                "algorithm.relaxation",
                format!("r = {r} outside [0, 1)"),
            )),
            RelaxationSchedule::Custom(rs) => {
                if rs.len() < iters {
                    return Err(Error::config(
                        "algorithm.relaxation",
                        format!("{} values for {iters} iterations", rs.len()),
                    ));
                }
                match rs.iter().find(|r| !ok(**r)) {
                    Some(r) => Err(Error::config(
                        "algorithm.relaxation",
                        format!("r = {r} outside [0, 1)"),
                    )),
                    None => Ok(()),
                }
            }
        }
    }
}

/// eps_n = K1 * gamma^(1/q) * n^(-1/p_dual)
pub fn epsilon_schedule(k1: f64, params: &SmoothnessParams, n: usize) -> f64 {
    k1 * params.gamma.powf(1.0 / params.q) * (n as f64).powf(-1.0 / params.p_dual)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    k1: f64,
    params: SmoothnessParams,
}

impl EpsilonSchedule {
    pub fn new(k1: f64, params: SmoothnessParams) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Error::config(
                "algorithm.k1",
                format!("K1 = {k1} must be positive"),
            ));
        }
        Ok(EpsilonSchedule { k1, params })
    }

    pub fn eps(&self, n: usize) -> f64 {
        epsilon_schedule(self.k1, &self.params, n)
    }
}
