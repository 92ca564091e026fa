//! Mask recovery for the generalized mode.
//!
//! Users pick their own masks. A second random partition carries them: every
//! surviving user Shamir-shares its mask with the members of the next group
//! (the last group wraps around to the first), each surviving carrier adds up
//! the shares it holds and uploads the sum, and the server interpolates one
//! mask total per group.

use std::collections::BTreeSet;

use super::{AbortReason, AbortSite, EngineError, ProtocolConfig, RoundStatus, TraceRecord};
use crate::ff::FieldVec;
use crate::grouping::{partition, GroupAssignment};
use crate::net::{RoundMetrics, StageTracker};
use crate::sharing::{default_indices, shamir_reconstruct, shamir_share, ShamirShare, SharingError};

const PARTITION_TAG: u64 = 0x6d61_736b_7061_7274;
const SHARE_TAG: u64 = 0x6d61_736b_7368_6172;

#[derive(Clone, Debug, PartialEq)]
pub struct MaskPipelineOutput {
    /// Sum of the masks of all surviving users; `None` on abort.
    pub total: Option<FieldVec>,
    /// Reconstructed mask sum of each source group of the mask partition.
    pub group_totals: Vec<FieldVec>,
    pub assignment: GroupAssignment,
    pub metrics: RoundMetrics,
    pub status: RoundStatus,
    pub trace: Vec<TraceRecord>,
}

/// Shamir threshold for a carrier group of `n` members.
pub(crate) fn mask_threshold(n: usize) -> usize {
    n.div_ceil(2)
}

/// Sums the masks of surviving users through the mask partition.
pub fn run_generalized_mask_pipeline(
    config: &ProtocolConfig,
    user_masks: &[FieldVec],
    dropouts: &BTreeSet<usize>,
) -> Result<MaskPipelineOutput, EngineError> {
    run_pipeline(config, user_masks, dropouts, 0)
}

/// Stages are charged to rounds `first_round` and `first_round + 1`.
pub(crate) fn run_pipeline(
    config: &ProtocolConfig,
    user_masks: &[FieldVec],
    dropouts: &BTreeSet<usize>,
    first_round: usize,
) -> Result<MaskPipelineOutput, EngineError> {
    let n = config.n_users;
    let dim = config.dim;
    if user_masks.len() != n {
        return Err(EngineError::ModelCount {
            expected: n,
            got: user_masks.len(),
        });
    }
    if let Some((user, m)) = user_masks.iter().enumerate().find(|(_, m)| m.len() != dim) {
        return Err(EngineError::ModelDim {
            user,
            expected: dim,
            got: m.len(),
        });
    }

    let mut assignment = partition(n, config.group_size, config.seeds.partition.derive(PARTITION_TAG))?;
    assignment.apply_dropouts(dropouts);
    let groups = assignment.num_groups();
    let mut metrics = RoundMetrics::default();
    let mut trace = Vec::new();

    // carried[g][member] holds the shares received by member `member` of group g
    let mut carried: Vec<Vec<Vec<ShamirShare>>> = assignment
        .groups()
        .iter()
        .map(|members| vec![Vec::new(); members.len()])
        .collect();

    let mut share_stage = StageTracker::new(first_round);
    for src in 0..groups {
        let dst = (src + 1) % groups;
        let n_dst = assignment.group(dst).len();
        let t = mask_threshold(n_dst);
        let indices = default_indices(n_dst);
        for user in assignment.surviving(src) {
            let seed = config.seeds.masks.derive_path(&[SHARE_TAG, user as u64]);
            let shares = shamir_share(&user_masks[user], t, n_dst, &indices, seed)?;
            metrics.account_prg_streams(1);
            share_stage.prg(user, ((t - 1) * dim) as u64);
            let ops = (t * n_dst * dim) as u64;
            metrics.account_encode(ops);
            share_stage.ops(user, ops);
            for (member, share) in shares.into_iter().enumerate() {
                metrics.account_message(dim as u64);
                share_stage.message(user, dim as u64);
                let receiver = assignment.group(dst)[member];
                trace.push(TraceRecord::for_vectors(first_round, user, Some(receiver), &[&share.value]));
                carried[dst][member].push(share);
            }
        }
    }
    metrics.push_stage(share_stage.finish());

    let mut upload_stage = StageTracker::new(first_round + 1);
    let mut group_totals = Vec::with_capacity(groups);
    let mut status = RoundStatus::Ok;
    for src in 0..groups {
        let dst = (src + 1) % groups;
        let n_dst = assignment.group(dst).len();
        let t = mask_threshold(n_dst);
        let mut sums = Vec::new();
        for (member, &carrier) in assignment.group(dst).iter().enumerate() {
            if assignment.is_dropped(carrier) {
                continue;
            }
            let value = FieldVec::sum_of(dim, carried[dst][member].iter().map(|s| &s.value));
            metrics.account_message(dim as u64);
            upload_stage.message(carrier, dim as u64);
            trace.push(TraceRecord::for_upload(first_round + 1, carrier, &[&value]));
            sums.push(ShamirShare {
                index: default_indices(n_dst)[member],
                value,
            });
        }
        match shamir_reconstruct(&sums, t) {
            Ok(total) => {
                metrics.account_decode((sums.len() * dim) as u64);
                group_totals.push(total);
            }
            Err(SharingError::InsufficientShares { have, need }) => {
                status = RoundStatus::Aborted {
                    site: AbortSite::MaskGroup(dst),
                    reason: AbortReason::InsufficientShares { have, need },
                };
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    metrics.push_stage(upload_stage.finish());

    let total = status
        .is_ok()
        .then(|| FieldVec::sum_of(dim, &group_totals));
    Ok(MaskPipelineOutput {
        total,
        group_totals,
        assignment,
        metrics,
        status,
        trace,
    })
}
