//! Simulated transport: dropout injection, traffic and operation counters, and
//! a declared time-cost model.
//!
//! The cost model is a bookkeeping device for comparing schedules and
//! bandwidth settings. It is not calibrated against any real deployment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ff::{Prg, Seed};
use crate::grouping::GroupAssignment;

/// Bytes per field element on the wire.
pub const BYTES_PER_ELEM: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetParams {
    pub bandwidth_bps: f64,
    pub per_message_latency_ms: f64,
    /// Transfers that share a schedule round overlap in time.
    pub parallel_stages: bool,
    /// Cost of one field multiply-accumulate.
    pub op_cost_ns: f64,
    /// Cost of producing one PRG output element.
    pub prg_cost_ns: f64,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams {
            bandwidth_bps: 1e9,
            per_message_latency_ms: 1.0,
            parallel_stages: true,
            op_cost_ns: 1.0,
            prg_cost_ns: 5.0,
        }
    }
}

/// Load of one transfer step: the busiest sender and the busiest user.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCost {
    /// Schedule round; stages sharing a round may overlap.
    pub round: usize,
    pub messages: u64,
    pub max_sender_elems: u64,
    pub max_user_ops: u64,
    pub max_user_prg_elems: u64,
}

/// Per-sender / per-user accumulator for one stage.
#[derive(Debug, Default)]
pub struct StageTracker {
    round: usize,
    messages: u64,
    sent: BTreeMap<usize, u64>,
    ops: BTreeMap<usize, u64>,
    prg: BTreeMap<usize, u64>,
}

impl StageTracker {
    pub fn new(round: usize) -> Self {
        StageTracker {
            round,
            ..Default::default()
        }
    }

    pub fn message(&mut self, sender: usize, elems: u64) {
        self.messages += 1;
        *self.sent.entry(sender).or_default() += elems;
    }

    pub fn ops(&mut self, user: usize, ops: u64) {
        *self.ops.entry(user).or_default() += ops;
    }

    pub fn prg(&mut self, user: usize, elems: u64) {
        *self.prg.entry(user).or_default() += elems;
    }

    pub fn finish(self) -> StageCost {
        let max = |m: &BTreeMap<usize, u64>| m.values().copied().max().unwrap_or(0);
        StageCost {
            round: self.round,
            messages: self.messages,
            max_sender_elems: max(&self.sent),
            max_user_ops: max(&self.ops),
            max_user_prg_elems: max(&self.prg),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub field_elems_sent: u64,
    pub messages_sent: u64,
    pub prg_streams: u64,
    pub encode_ops: u64,
    pub decode_ops: u64,
    /// Pairwise seeds agreed (baseline protocol only).
    pub pairwise_seeds: u64,
    /// Shamir share bundles distributed (baseline protocol only).
    pub seed_shares: u64,
    pub simulated_time_ms: f64,
    pub stages: Vec<StageCost>,
}

impl RoundMetrics {
    pub fn account_message(&mut self, n_field_elems: u64) {
        self.messages_sent += 1;
        self.field_elems_sent += n_field_elems;
    }

    pub fn account_prg_streams(&mut self, n: u64) {
        self.prg_streams += n;
    }

    pub fn account_encode(&mut self, ops: u64) {
        self.encode_ops += ops;
    }

    pub fn account_decode(&mut self, ops: u64) {
        self.decode_ops += ops;
    }

    pub fn push_stage(&mut self, stage: StageCost) {
        self.stages.push(stage);
    }

    /// Recomputes `simulated_time_ms` from the recorded stages.
    pub fn apply_cost_model(&mut self, params: &NetParams) {
        self.simulated_time_ms = simulated_total_time(&self.stages, params);
    }

    /// Number of distinct schedule rounds on the critical path.
    pub fn critical_rounds(&self) -> usize {
        self.stages.iter().map(|s| s.round).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimeBreakdown {
    pub communication_ms: f64,
    pub computation_ms: f64,
}

impl TimeBreakdown {
    pub fn total_ms(&self) -> f64 {
        self.communication_ms + self.computation_ms
    }
}

fn stage_breakdown(stage: &StageCost, params: &NetParams) -> TimeBreakdown {
    let communication_ms = if stage.messages == 0 {
        0.0
    } else {
        let bits = (stage.max_sender_elems * BYTES_PER_ELEM * 8) as f64;
        bits / params.bandwidth_bps * 1e3 + params.per_message_latency_ms
    };
    let computation_ms = (stage.max_user_ops as f64 * params.op_cost_ns
        + stage.max_user_prg_elems as f64 * params.prg_cost_ns)
        / 1e6;
    TimeBreakdown {
        communication_ms,
        computation_ms,
    }
}

/// Critical-path time split into communication and computation. Stages in the
/// same round are charged their maximum when `parallel_stages` is set and
/// their sum otherwise; rounds add up.
pub fn time_breakdown(stages: &[StageCost], params: &NetParams) -> TimeBreakdown {
    let mut rounds: BTreeMap<usize, Vec<TimeBreakdown>> = BTreeMap::new();
    for s in stages {
        rounds.entry(s.round).or_default().push(stage_breakdown(s, params));
    }
    let mut total = TimeBreakdown::default();
    for parts in rounds.values() {
        if params.parallel_stages {
            // the slowest transfer in the round sets its duration
            let slowest = parts
                .iter()
                .copied()
                .max_by(|a, b| a.total_ms().total_cmp(&b.total_ms()))
                .unwrap_or_default();
            total.communication_ms += slowest.communication_ms;
            total.computation_ms += slowest.computation_ms;
        } else {
            for p in parts {
                total.communication_ms += p.communication_ms;
                total.computation_ms += p.computation_ms;
            }
        }
    }
    total
}

pub fn simulated_total_time(stages: &[StageCost], params: &NetParams) -> f64 {
    time_breakdown(stages, params).total_ms()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutModel {
    /// Exactly `floor(p * N_l)` users per group, chosen uniformly.
    #[default]
    PerGroup,
    /// Each user drops independently with probability `p`.
    Bernoulli,
}

/// Samples the set of users that drop in this round.
pub fn inject_dropouts(
    assignment: &GroupAssignment,
    p: f64,
    seed: Seed,
    model: DropoutModel,
) -> BTreeSet<usize> {
    assert!((0.0..1.0).contains(&p), "dropout rate must lie in [0, 1)");
    let mut dropped = BTreeSet::new();
    for (l, members) in assignment.groups().iter().enumerate() {
        let mut prg = Prg::new(seed.derive(l as u64));
        match model {
            DropoutModel::PerGroup => {
                let count = ((p * members.len() as f64) + 1e-9).floor() as usize;
                let mut pool = members.clone();
                for i in 0..count {
                    let j = i + prg.below((pool.len() - i) as u64) as usize;
                    pool.swap(i, j);
                    dropped.insert(pool[i]);
                }
            }
            DropoutModel::Bernoulli => {
                dropped.extend(members.iter().copied().filter(|_| prg.unit_f64() < p));
            }
        }
    }
    dropped
}

/// One row of the metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mode: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_g")]
    pub group_size: usize,
    pub p: f64,
    pub k: usize,
    pub field_elems_sent: u64,
    pub prg_streams: u64,
    pub decode_ops: u64,
    pub simulated_time_ms: f64,
    pub status: String,
}

impl MetricsRecord {
    pub const COLUMNS: [&'static str; 10] = [
        "mode",
        "N",
        "N_g",
        "p",
        "k",
        "field_elems_sent",
        "prg_streams",
        "decode_ops",
        "simulated_time_ms",
        "status",
    ];
}
