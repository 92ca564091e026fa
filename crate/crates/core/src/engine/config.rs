use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::ff::Seed;
use crate::net::NetParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Sequential,
    Tree,
    Generalized,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Sequential, Mode::Tree, Mode::Generalized];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sequential => "sequential",
            Mode::Tree => "tree",
            Mode::Generalized => "generalized",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Mode::Sequential),
            "tree" => Ok(Mode::Tree),
            "generalized" => Ok(Mode::Generalized),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Named seeds; every random draw in a round derives from one of these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub partition: Seed,
    pub masks: Seed,
    pub dropout: Seed,
}

impl Seeds {
    pub fn from_base(base: Seed) -> Self {
        Seeds {
            partition: base.derive(1),
            masks: base.derive(2),
            dropout: base.derive(3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_users: usize,
    /// Target group size; actual sizes may exceed it by one.
    pub group_size: usize,
    pub dim: usize,
    pub dropout_rate: f64,
    /// Collusion bound, used only by the analysis bounds.
    pub collusion: usize,
    /// Number of coded copies per value.
    pub redundancy: usize,
    pub mode: Mode,
    pub seeds: Seeds,
    /// Number of final-stage aggregators; defaults to `group_size`.
    pub final_size: Option<usize>,
    pub net: NetParams,
}

impl ProtocolConfig {
    pub fn new(n_users: usize, group_size: usize, dim: usize) -> Self {
        ProtocolConfig {
            n_users,
            group_size,
            dim,
            dropout_rate: 0.0,
            collusion: 0,
            redundancy: 1,
            mode: Mode::Sequential,
            seeds: Seeds::default(),
            final_size: None,
            net: NetParams::default(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_redundancy(mut self, k: usize) -> Self {
        self.redundancy = k;
        self
    }

    pub fn with_seeds(mut self, seeds: Seeds) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_dropout_rate(mut self, p: f64) -> Self {
        self.dropout_rate = p;
        self
    }

    pub fn final_size(&self) -> usize {
        self.final_size.unwrap_or(self.group_size)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let err = |msg: String| Err(EngineError::InvalidConfig(msg));
        if self.group_size < 2 {
            return err(format!("group size {} is below 2", self.group_size));
        }
        if self.n_users < 2 * self.group_size {
            return err(format!(
                "{} users cannot form two groups of {}",
                self.n_users, self.group_size
            ));
        }
        if self.dim == 0 {
            return err("model dimension must be positive".into());
        }
        if self.redundancy == 0 {
            return err("redundancy factor must be at least 1".into());
        }
        let k = self.redundancy as f64;
        let limit = k / (k + 1.0);
        if !(0.0..=limit).contains(&self.dropout_rate) {
            return err(format!(
                "dropout rate {} outside [0, {limit}] for redundancy {}",
                self.dropout_rate, self.redundancy
            ));
        }
        if self.final_size() == 0 {
            return err("final stage needs at least one aggregator".into());
        }
        if self.net.bandwidth_bps.is_nan() || self.net.bandwidth_bps <= 0.0 {
            return err("bandwidth must be positive".into());
        }
        Ok(())
    }
}
