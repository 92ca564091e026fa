//! The experiment file: protocol parameters, sweep axes and output settings.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use turbo_aggregate::engine::Mode;
use turbo_aggregate::ff::MODULUS;
use turbo_aggregate::net::{DropoutModel, NetParams};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid spec: {0}")]
    Invalid(String),
}

/// A protocol variant, or the pairwise-mask baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RunMode {
    Turbo(Mode),
    Pairwise,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Turbo(m) => m.as_str(),
            RunMode::Pairwise => "pairwise",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "pairwise" {
            Ok(RunMode::Pairwise)
        } else {
            s.parse::<Mode>()
                .map(RunMode::Turbo)
                .map_err(|_| format!("unknown mode `{s}` (sequential, tree, generalized, pairwise)"))
        }
    }
}

impl TryFrom<String> for RunMode {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RunMode> for String {
    fn from(m: RunMode) -> String {
        m.as_str().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub p: Vec<f64>,
    pub mode: Vec<RunMode>,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
}

fn default_k() -> Vec<usize> {
    vec![1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsGrid {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    #[serde(rename = "N_g")]
    pub group_size: Vec<usize>,
    pub p: Vec<f64>,
    #[serde(rename = "T", default = "default_collusion")]
    pub collusion: Vec<usize>,
    #[serde(default)]
    pub trials: usize,
}

fn default_collusion() -> Vec<usize> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub seed: u64,
    /// Model dimension.
    pub d: usize,
    /// Target group size; `ceil(ln N)` when absent.
    #[serde(rename = "N_g", default)]
    pub group_size: Option<usize>,
    #[serde(rename = "N_final", default)]
    pub final_size: Option<usize>,
    #[serde(rename = "T", default)]
    pub collusion: usize,
    /// Only `2^32 - 5` is supported; accepted so that parameter tables can be
    /// pasted in unchanged.
    #[serde(default)]
    pub field_modulus: Option<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub dropout_model: DropoutModel,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub net: NetParams,
    pub sweep: Sweep,
    #[serde(default)]
    pub bounds: Option<BoundsGrid>,
}

fn default_trials() -> usize {
    1
}

impl RunSpec {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, SpecError> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| SpecError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunSpec::from_toml(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let invalid = |m: String| Err(SpecError::Invalid(m));
        for (axis, empty) in [
            ("sweep.N", self.sweep.n.is_empty()),
            ("sweep.p", self.sweep.p.is_empty()),
            ("sweep.mode", self.sweep.mode.is_empty()),
            ("sweep.k", self.sweep.k.is_empty()),
        ] {
            if empty {
                return invalid(format!("axis `{axis}` is empty"));
            }
        }
        if let Some(q) = self.field_modulus {
            if q != MODULUS as u64 {
                return invalid(format!("field_modulus {q} is not supported; only {MODULUS}"));
            }
        }
        if self.d == 0 {
            return invalid("`d` must be positive".into());
        }
        if self.trials == 0 {
            return invalid("`trials` must be positive".into());
        }
        if let Some(&n) = self.sweep.n.iter().find(|&&n| n < 4) {
            return invalid(format!("sweep.N contains {n}; at least 4 users are needed"));
        }
        if let Some(&p) = self.sweep.p.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return invalid(format!("sweep.p contains {p}, outside [0, 1)"));
        }
        if let Some(b) = &self.bounds {
            for (axis, empty) in [
                ("bounds.N", b.n.is_empty()),
                ("bounds.N_g", b.group_size.is_empty()),
                ("bounds.p", b.p.is_empty()),
                ("bounds.T", b.collusion.is_empty()),
            ] {
                if empty {
                    return invalid(format!("axis `{axis}` is empty"));
                }
            }
        }
        Ok(())
    }
}
