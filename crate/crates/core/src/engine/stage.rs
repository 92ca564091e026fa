//! Per-user protocol steps: emission, recovery of dropped aggregates, merging,
//! the final stage and server-side unmasking.

use std::collections::BTreeMap;

use super::{StageMessage, UserState};
use crate::ff::{FieldElem, FieldVec, Seed};
use crate::lagrange::{encode_shares, recover_missing, EvalPoints, EvalSet, LagrangeError};
use crate::sharing::make_additive_shares;

/// The full list of a source group's running aggregates as seen by one
/// receiver, with the bookkeeping of what had to be recovered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reconstruction {
    pub sums: Vec<FieldVec>,
    pub known_points: Vec<FieldElem>,
    /// Members whose aggregate was interpolated rather than received.
    pub recovered: Vec<usize>,
}

impl Reconstruction {
    /// `(1 / N_src) * sum_j s_j`, the partial sum of everything upstream.
    pub fn mean(&self) -> FieldVec {
        let dim = self.sums.first().map_or(0, FieldVec::len);
        let inv = FieldElem::from_count(self.sums.len())
            .inv()
            .expect("group size is nonzero and below q");
        FieldVec::sum_of(dim, &self.sums).scaled(inv)
    }

    /// Field multiply-accumulates spent on interpolation.
    pub fn decode_ops(&self) -> u64 {
        let dim = self.sums.first().map_or(0, FieldVec::len);
        (self.recovered.len() * self.known_points.len() * dim) as u64
    }
}

/// Rebuilds every `s_j` of the source group from the plain and coded values
/// that arrived, interpolating those of silent members.
pub fn reconstruct_group_sums(
    received: &[StageMessage],
    group_size: usize,
    pts: &EvalPoints,
) -> Result<Reconstruction, LagrangeError> {
    let mut by_member: BTreeMap<usize, &StageMessage> = BTreeMap::new();
    for msg in received {
        if by_member.insert(msg.src_member, msg).is_some() {
            return Err(LagrangeError::DuplicatePoints(pts.alpha(msg.src_member)));
        }
    }
    let mut known = EvalSet::new();
    for (&member, msg) in &by_member {
        known.push(pts.alpha(member), msg.s_plain.clone());
        for (copy, coded) in msg.s_coded.iter().enumerate() {
            known.push(pts.beta(copy, member), coded.clone());
        }
    }
    let missing: Vec<usize> = (0..group_size).filter(|m| !by_member.contains_key(m)).collect();
    let known_points = known.points();
    let recovered_values = if missing.is_empty() {
        Vec::new()
    } else {
        let targets: Vec<FieldElem> = missing.iter().map(|&m| pts.alpha(m)).collect();
        recover_missing(&known, group_size, &targets)?
    };
    let mut recovered_iter = recovered_values.into_iter();
    let sums = (0..group_size)
        .map(|m| match by_member.get(&m) {
            Some(msg) => msg.s_plain.clone(),
            None => recovered_iter.next().expect("one value per missing member"),
        })
        .collect();
    Ok(Reconstruction {
        sums,
        known_points,
        recovered: missing,
    })
}

/// Folds one source group's messages into the receiver's running aggregates:
/// `s += mean(s_src) + sum_j x_masked_j` and likewise for every coded copy.
/// A receiver starting from zero performs exactly one sequential stage.
pub fn tree_merge(
    state: &mut UserState,
    received: &[StageMessage],
    src_group_size: usize,
    pts: &EvalPoints,
) -> Result<Reconstruction, LagrangeError> {
    let rec = reconstruct_group_sums(received, src_group_size, pts)?;
    let mean = rec.mean();
    state.s_plain += &mean;
    for (copy, s) in state.s_coded.iter_mut().enumerate() {
        *s += &mean;
        for msg in received {
            *s += &msg.x_coded[copy];
        }
    }
    for msg in received {
        state.s_plain += &msg.x_masked;
    }
    Ok(rec)
}

/// Absorbs anything left in the inbox, then produces one message per member of
/// the next group: an additive share of `x + u`, its coded copies at the next
/// group's betas, and the current running aggregates.
pub fn user_emit_stage(
    state: &mut UserState,
    next: &EvalPoints,
    rng: Seed,
) -> Result<Vec<StageMessage>, LagrangeError> {
    let inbox = std::mem::take(&mut state.inbox);
    let mut by_group: BTreeMap<usize, Vec<StageMessage>> = BTreeMap::new();
    for msg in inbox {
        by_group.entry(msg.src_group).or_default().push(msg);
    }
    for msgs in by_group.values() {
        let size = msgs[0].src_group_size;
        let pts = EvalPoints::for_group(size, state.s_coded.len());
        tree_merge(state, msgs, size, &pts)?;
    }

    let n_next = next.group_size();
    let copies = next.copies();
    assert_eq!(copies, state.s_coded.len(), "redundancy mismatch");
    let shares = make_additive_shares(&state.model, &state.mask, n_next, rng);
    let coded = encode_shares(&shares, next)?;
    Ok(shares
        .into_iter()
        .enumerate()
        .map(|(j, x_masked)| StageMessage {
            sender: state.id,
            src_group: state.group,
            src_member: state.member,
            src_group_size: state.group_size,
            recipient: j,
            x_masked,
            x_coded: (0..copies).map(|m| coded[m * n_next + j].clone()).collect(),
            s_plain: state.s_plain.clone(),
            s_coded: state.s_coded.clone(),
        })
        .collect())
}

/// What a final-stage aggregator sends to the server after hearing from the
/// last group.
pub fn final_stage_aggregate(
    received: &[StageMessage],
    last_group_size: usize,
    pts: &EvalPoints,
) -> Result<(FieldVec, Vec<FieldVec>), LagrangeError> {
    let first = received.first().ok_or(LagrangeError::InsufficientEvaluations {
        have: 0,
        need: last_group_size,
    })?;
    let mut acc = UserState::aggregator(usize::MAX, usize::MAX, 0, 1, first.s_plain.len(), first.x_coded.len());
    tree_merge(&mut acc, received, last_group_size, pts)?;
    Ok((acc.s_plain, acc.s_coded))
}

/// Server-side unmasking: recovers any missing final-stage values, averages
/// them and subtracts the total of the masks of contributing users.
pub fn server_finalize(
    finals: &[Option<(FieldVec, Vec<FieldVec>)>],
    n_final: usize,
    mask_total: &FieldVec,
    pts: &EvalPoints,
) -> Result<FieldVec, LagrangeError> {
    let mut known = EvalSet::new();
    for (j, entry) in finals.iter().enumerate().take(n_final) {
        if let Some((plain, coded)) = entry {
            known.push(pts.alpha(j), plain.clone());
            for (copy, c) in coded.iter().enumerate() {
                known.push(pts.beta(copy, j), c.clone());
            }
        }
    }
    let targets: Vec<FieldElem> = (0..n_final).map(|j| pts.alpha(j)).collect();
    let plains = recover_missing(&known, n_final, &targets)?;
    let inv = FieldElem::from_count(n_final).inv().expect("n_final is nonzero");
    let mut out = FieldVec::sum_of(mask_total.len(), &plains).scaled(inv);
    out -= mask_total;
    Ok(out)
}
