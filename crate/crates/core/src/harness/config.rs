use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{AlgorithmId, RelaxationSchedule, WeaknessSequence};
use crate::dictionary::{DictKind, Membership, SelectPolicy};
use crate::error::{Error, Result};
use crate::solver::SolverConfig;
use crate::space::MAX_EXPONENT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub p: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    pub kind: DictKind,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub membership: Membership,
    pub sparsity: usize,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_weakness() -> WeaknessSequence {
    WeaknessSequence::Constant(1.0)
}

fn default_relaxation() -> RelaxationSchedule {
    RelaxationSchedule::PaperDefault
}

fn default_k1() -> f64 {
    1.0
}

fn default_policy() -> SelectPolicy {
    SelectPolicy::Argmax
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub id: AlgorithmId,
    pub iters: usize,
    #[serde(default = "default_weakness")]
    pub weakness: WeaknessSequence,
    #[serde(default = "default_relaxation")]
    pub relaxation: RelaxationSchedule,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_policy")]
    pub policy: SelectPolicy,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Inclusive m-window for the log-log rate fit; defaults to
    /// [10, iters] when the run is long enough.
    #[serde(default)]
    pub slope_window: Option<(usize, usize)>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "yes")]
    pub trace_csv: bool,
    #[serde(default = "yes")]
    pub trace_json: bool,
    #[serde(default = "yes")]
    pub summary_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trace_csv: true,
            trace_json: true,
            summary_csv: true,
        }
    }
}

/// One seeded experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub dictionary: DictionaryConfig,
    pub target: TargetConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::config(field, message)
}

/// Maps a parse failure onto a config error, naming the offending key when
/// the parser reports one.
fn toml_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let field = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.contains("field"))
        .unwrap_or("config")
        .to_string();
    Error::config(field, msg)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(toml_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.space.p;
        if !(p > 1.0 && p <= MAX_EXPONENT) {
            return Err(cfg_err(
                "space.p",
                format!("p = {p} outside (1, {MAX_EXPONENT}]"),
            ));
        }
        if self.space.dim == 0 {
            return Err(cfg_err("space.dim", "must be at least 1"));
        }
        let (dim, count) = (self.space.dim, self.dictionary.count);
        match self.dictionary.kind {
            DictKind::Canonical if count != dim => {
                return Err(cfg_err(
                    "dictionary.count",
                    format!("canonical dictionary needs count = dim = {dim}"),
                ))
            }
            DictKind::FourierFrame if count < dim => {
                return Err(cfg_err(
                    "dictionary.count",
                    format!("Fourier frame needs count >= dim = {dim}"),
                ))
            }
            _ if count == 0 => return Err(cfg_err("dictionary.count", "must be at least 1")),
            _ => {}
        }
        if self.target.sparsity == 0 || self.target.sparsity > count {
            return Err(cfg_err(
                "target.sparsity",
                format!("must lie in 1..={count}"),
            ));
        }
        let eps = self.target.eps;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(cfg_err("target.eps", "must be finite and nonnegative"));
        }
        let alg = &self.algorithm;
        if alg.iters == 0 {
            return Err(cfg_err("algorithm.iters", "must be at least 1"));
        }
        match alg.id {
            AlgorithmId::Wgafr => alg.weakness.validate(alg.iters)?,
            AlgorithmId::Gawr => {
                alg.weakness.validate(alg.iters)?;
                alg.relaxation.validate(alg.iters)?;
            }
            AlgorithmId::Iac | AlgorithmId::Iacc => {
                if !(alg.k1 > 0.0 && alg.k1.is_finite()) {
                    return Err(cfg_err("algorithm.k1", "must be positive"));
                }
                if eps != 0.0 {
                    return Err(cfg_err("target.eps", "averaging algorithms need eps = 0"));
                }
                if alg.id == AlgorithmId::Iacc && self.target.membership != Membership::Conv {
                    return Err(cfg_err("target.membership", "iacc needs a conv target"));
                }
            }
        }
        self.solver.validate()?;
        if let Some((lo, hi)) = self.checks.slope_window {
            if lo < 2 || hi <= lo {
                return Err(cfg_err("checks.slope_window", "need 2 <= lo < hi"));
            }
        }
        Ok(())
    }

    /// The fit window in effect, if any.
    pub fn slope_window(&self) -> Option<(usize, usize)> {
        self.checks
            .slope_window
            .or_else(|| (self.algorithm.iters >= 20).then_some((10, self.algorithm.iters)))
    }
}
