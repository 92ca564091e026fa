//! The multi-group circular aggregation protocol.
//!
//! Users are partitioned into groups. Each group secret-shares its masked
//! models to a successor group together with Lagrange-coded copies, and
//! forwards its running aggregate so that the successor can recover the
//! values of users that dropped. Three schedules are supported:
//!
//! * [`Mode::Sequential`]: group `l` feeds group `l + 1`, `L - 1` stages.
//! * [`Mode::Tree`]: recursive-doubling merges, `ceil(log2 L)` stages.
//! * [`Mode::Generalized`]: the sequential pipeline with user-chosen masks,
//!   whose sum reaches the server through a second, Shamir-shared partition.

mod config;
mod generalized;
mod round;
mod schedule;
mod stage;
mod trace;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ff::{FieldElem, FieldVec};
use crate::grouping::{GroupAssignment, GroupingError};
use crate::lagrange::LagrangeError;
use crate::net::RoundMetrics;
use crate::sharing::SharingError;

pub use config::{Mode, ProtocolConfig, Seeds};
pub use generalized::{run_generalized_mask_pipeline, MaskPipelineOutput};
pub use round::{round_masks, run_round, run_round_traced};
pub use schedule::{build_tree_schedule, Destination, Schedule};
pub use stage::{
    final_stage_aggregate, reconstruct_group_sums, server_finalize, tree_merge, user_emit_stage,
    Reconstruction,
};
pub use trace::{PartialSumRecord, TraceRecord, Transcript};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} models, got {got}")]
    ModelCount { expected: usize, got: usize },
    #[error("model of user {user} has dimension {got}, expected {expected}")]
    ModelDim { user: usize, expected: usize, got: usize },
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Lagrange(#[from] LagrangeError),
    #[error(transparent)]
    Sharing(#[from] SharingError),
}

/// Payload from member `src_member` of group `src_group` to member `recipient`
/// of the next group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMessage {
    pub sender: usize,
    pub src_group: usize,
    pub src_member: usize,
    pub src_group_size: usize,
    pub recipient: usize,
    /// Additive share of the sender's masked model.
    pub x_masked: FieldVec,
    /// Lagrange-coded shares, one per redundancy copy.
    pub x_coded: Vec<FieldVec>,
    /// Sender's running aggregate.
    pub s_plain: FieldVec,
    /// Coded running aggregates, one per copy.
    pub s_coded: Vec<FieldVec>,
}

impl StageMessage {
    pub fn field_elems(&self) -> u64 {
        let vectors = 2 + self.x_coded.len() + self.s_coded.len();
        (vectors * self.s_plain.len()) as u64
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        std::iter::once(&self.x_masked)
            .chain(&self.x_coded)
            .chain(std::iter::once(&self.s_plain))
            .chain(&self.s_coded)
            .flat_map(FieldVec::to_le_bytes)
            .collect()
    }
}

/// A protocol participant. Final-stage aggregators reuse this type with
/// `group` set one past the last group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserState {
    pub id: usize,
    pub group: usize,
    pub member: usize,
    pub group_size: usize,
    pub model: FieldVec,
    pub mask: FieldVec,
    pub s_plain: FieldVec,
    pub s_coded: Vec<FieldVec>,
    pub inbox: Vec<StageMessage>,
}

impl UserState {
    pub fn new(
        id: usize,
        group: usize,
        member: usize,
        group_size: usize,
        model: FieldVec,
        mask: FieldVec,
        copies: usize,
    ) -> Self {
        let dim = model.len();
        UserState {
            id,
            group,
            member,
            group_size,
            model,
            mask,
            s_plain: FieldVec::zeros(dim),
            s_coded: vec![FieldVec::zeros(dim); copies],
            inbox: Vec::new(),
        }
    }

    /// An aggregator that contributes no model of its own.
    pub fn aggregator(
        id: usize,
        group: usize,
        member: usize,
        group_size: usize,
        dim: usize,
        copies: usize,
    ) -> Self {
        UserState::new(id, group, member, group_size, FieldVec::zeros(dim), FieldVec::zeros(dim), copies)
    }

    pub fn dim(&self) -> usize {
        self.model.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortSite {
    /// A model-pipeline group whose dropped values could not be recovered.
    Group(usize),
    /// The final-stage values at the server.
    Final,
    /// A group of the mask partition in generalized mode.
    MaskGroup(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    InsufficientEvaluations { have: usize, need: usize },
    InsufficientShares { have: usize, need: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundStatus {
    Ok,
    Aborted { site: AbortSite, reason: AbortReason },
}

impl RoundStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RoundStatus::Ok)
    }

    /// Short label for CSV output.
    pub fn label(&self) -> String {
        match self {
            RoundStatus::Ok => "ok".to_string(),
            RoundStatus::Aborted { site, reason } => {
                let site = match site {
                    AbortSite::Group(g) => format!("group-{}", g + 1),
                    AbortSite::Final => "final".to_string(),
                    AbortSite::MaskGroup(g) => format!("mask-group-{}", g + 1),
                };
                let reason = match reason {
                    AbortReason::InsufficientEvaluations { .. } => "insufficient-evaluations",
                    AbortReason::InsufficientShares { .. } => "insufficient-shares",
                };
                format!("aborted:{site}:{reason}")
            }
        }
    }
}

/// One missing-value recovery performed by a receiver.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryEvent {
    pub round: usize,
    pub src_group: usize,
    /// Receiving user id.
    pub receiver: usize,
    pub known_points: Vec<FieldElem>,
    /// Member indices of the source group whose aggregates were recovered.
    pub recovered: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    /// The unmasked sum; `None` when the round aborted.
    pub aggregate: Option<FieldVec>,
    /// Users whose models entered the pipeline.
    pub survivors: BTreeSet<usize>,
    pub final_users: Vec<usize>,
    pub assignment: GroupAssignment,
    pub metrics: RoundMetrics,
    pub recoveries: Vec<RecoveryEvent>,
    pub status: RoundStatus,
}
