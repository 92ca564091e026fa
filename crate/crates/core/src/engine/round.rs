//! One aggregation round: partition, staged transfers, final stage and
//! server-side unmasking, with traffic and operation accounting.

use std::collections::BTreeSet;

use super::generalized::run_pipeline;
use super::{
    final_stage_aggregate, tree_merge, user_emit_stage, AbortReason, AbortSite, Destination,
    EngineError, Mode, PartialSumRecord, ProtocolConfig, RecoveryEvent, RoundResult, RoundStatus,
    Schedule, StageMessage, TraceRecord, Transcript, UserState,
};
use crate::engine::server_finalize;
use crate::ff::{prg, FieldVec};
use crate::grouping::partition;
use crate::lagrange::{EvalPoints, LagrangeError};
use crate::net::{RoundMetrics, StageTracker};

const SERVER_MASK_TAG: u64 = 0x7365_7276;
const USER_MASK_TAG: u64 = 0x7573_6572;
const SHARE_TAG: u64 = 0x7368_6172;

/// The mask `u` of every user for this round: issued by the server in the
/// sequential and tree modes, drawn by the user in generalized mode.
pub fn round_masks(config: &ProtocolConfig) -> Vec<FieldVec> {
    let tag = match config.mode {
        Mode::Generalized => USER_MASK_TAG,
        Mode::Sequential | Mode::Tree => SERVER_MASK_TAG,
    };
    (0..config.n_users)
        .map(|u| prg(config.seeds.masks.derive_path(&[tag, u as u64]), config.dim))
        .collect()
}

pub fn run_round(
    config: &ProtocolConfig,
    models: &[FieldVec],
    dropouts: &BTreeSet<usize>,
) -> Result<RoundResult, EngineError> {
    run(config, models, dropouts, None)
}

/// Like [`run_round`], also returning every delivered message and the partial
/// sums reconstructed at each merge.
pub fn run_round_traced(
    config: &ProtocolConfig,
    models: &[FieldVec],
    dropouts: &BTreeSet<usize>,
) -> Result<(RoundResult, Transcript), EngineError> {
    let mut transcript = Transcript::default();
    let result = run(config, models, dropouts, Some(&mut transcript))?;
    Ok((result, transcript))
}

fn abort_status(site: AbortSite, err: LagrangeError) -> Result<RoundStatus, EngineError> {
    match err {
        LagrangeError::InsufficientEvaluations { have, need } => Ok(RoundStatus::Aborted {
            site,
            reason: AbortReason::InsufficientEvaluations { have, need },
        }),
        other => Err(other.into()),
    }
}

fn check_inputs(
    config: &ProtocolConfig,
    models: &[FieldVec],
    dropouts: &BTreeSet<usize>,
) -> Result<(), EngineError> {
    config.validate()?;
    if models.len() != config.n_users {
        return Err(EngineError::ModelCount {
            expected: config.n_users,
            got: models.len(),
        });
    }
    if let Some((user, m)) = models.iter().enumerate().find(|(_, m)| m.len() != config.dim) {
        return Err(EngineError::ModelDim {
            user,
            expected: config.dim,
            got: m.len(),
        });
    }
    if let Some(&u) = dropouts.iter().find(|&&u| u >= config.n_users) {
        return Err(EngineError::InvalidConfig(format!(
            "dropped user {u} is not among the {} users",
            config.n_users
        )));
    }
    Ok(())
}

fn run(
    config: &ProtocolConfig,
    models: &[FieldVec],
    dropouts: &BTreeSet<usize>,
    mut trace: Option<&mut Transcript>,
) -> Result<RoundResult, EngineError> {
    check_inputs(config, models, dropouts)?;
    let dim = config.dim;
    let k = config.redundancy;

    let mut assignment = partition(config.n_users, config.group_size, config.seeds.partition)?;
    assignment.apply_dropouts(dropouts);
    let num_groups = assignment.num_groups();
    let masks = round_masks(config);

    let mut states: Vec<Vec<UserState>> = assignment
        .groups()
        .iter()
        .enumerate()
        .map(|(g, members)| {
            members
                .iter()
                .enumerate()
                .map(|(m, &id)| {
                    UserState::new(id, g, m, members.len(), models[id].clone(), masks[id].clone(), k)
                })
                .collect()
        })
        .collect();

    let survivors: BTreeSet<usize> = (0..config.n_users).filter(|u| !dropouts.contains(u)).collect();
    // any surviving users may serve; take them in group order
    let final_users: Vec<usize> = assignment
        .groups()
        .iter()
        .flatten()
        .copied()
        .filter(|u| survivors.contains(u))
        .take(config.final_size())
        .collect();
    let n_final = final_users.len();
    let final_pts = EvalPoints::for_group(n_final, k);

    let schedule = match config.mode {
        Mode::Tree => Schedule::tree(num_groups),
        Mode::Sequential | Mode::Generalized => Schedule::sequential(num_groups),
    };

    let mut metrics = RoundMetrics::default();
    let mut recoveries = Vec::new();
    let mut status = RoundStatus::Ok;
    let mut finals: Vec<Option<(FieldVec, Vec<FieldVec>)>> = Vec::new();
    // users whose x + u is folded into each group's running aggregates
    let mut upstream: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_groups];

    'rounds: for (round, transfers) in schedule.rounds().iter().enumerate() {
        for &(src, dst) in transfers {
            let n_src = assignment.group(src).len();
            let src_pts = EvalPoints::for_group(n_src, k);
            let n_dst = match dst {
                Destination::Group(g) => assignment.group(g).len(),
                Destination::Final => n_final,
            };
            let receiver_id = |member: usize| match dst {
                Destination::Group(g) => assignment.group(g)[member],
                Destination::Final => final_users[member],
            };
            let dst_pts = EvalPoints::for_group(n_dst, k);
            let mut tracker = StageTracker::new(round);

            let mut inboxes: Vec<Vec<StageMessage>> = vec![Vec::new(); n_dst];
            for state in states[src].iter_mut() {
                if assignment.is_dropped(state.id) {
                    continue;
                }
                let seed = config
                    .seeds
                    .masks
                    .derive_path(&[SHARE_TAG, round as u64, state.id as u64]);
                let msgs = user_emit_stage(state, &dst_pts, seed)?;
                metrics.account_prg_streams(1);
                tracker.prg(state.id, (n_dst.saturating_sub(1) * dim) as u64);
                let encode = (k * n_dst * n_dst * dim) as u64;
                metrics.account_encode(encode);
                tracker.ops(state.id, encode);
                for msg in msgs {
                    let elems = msg.field_elems();
                    metrics.account_message(elems);
                    tracker.message(msg.sender, elems);
                    if let Some(t) = trace.as_deref_mut() {
                        t.messages
                            .push(TraceRecord::for_message(round, receiver_id(msg.recipient), &msg));
                    }
                    inboxes[msg.recipient].push(msg);
                }
            }

            let mut outcome = Ok(());
            match dst {
                Destination::Group(g) => {
                    let mut partial = None;
                    for (member, received) in inboxes.iter().enumerate() {
                        let receiver = &mut states[g][member];
                        if assignment.is_dropped(receiver.id) {
                            continue;
                        }
                        let rec = match tree_merge(receiver, received, n_src, &src_pts) {
                            Ok(rec) => rec,
                            Err(e) => {
                                outcome = Err(abort_status(AbortSite::Group(src), e)?);
                                break;
                            }
                        };
                        metrics.account_decode(rec.decode_ops());
                        tracker.ops(
                            receiver.id,
                            rec.decode_ops() + (received.len() * (1 + k) * dim) as u64,
                        );
                        if !rec.recovered.is_empty() {
                            recoveries.push(RecoveryEvent {
                                round,
                                src_group: src,
                                receiver: receiver.id,
                                known_points: rec.known_points.clone(),
                                recovered: rec.recovered.clone(),
                            });
                        }
                        if trace.is_some() && partial.is_none() {
                            partial = Some(rec.mean());
                        }
                    }
                    if let (Some(t), Some(value)) = (trace.as_deref_mut(), partial) {
                        t.partial_sums.push(PartialSumRecord {
                            stage: round,
                            src_group: src,
                            dst_group: g,
                            contributors: upstream[src].iter().copied().collect(),
                            value,
                        });
                    }
                    let mut merged = upstream[src].clone();
                    merged.extend(assignment.surviving(src));
                    upstream[g].extend(merged);
                }
                Destination::Final => {
                    for (j, received) in inboxes.iter().enumerate() {
                        match final_stage_aggregate(received, n_src, &src_pts) {
                            Ok(pair) => {
                                tracker.ops(final_users[j], (received.len() * (1 + k) * dim) as u64);
                                finals.push(Some(pair));
                            }
                            Err(e) => {
                                outcome = Err(abort_status(AbortSite::Group(src), e)?);
                                break;
                            }
                        }
                    }
                }
            }
            metrics.push_stage(tracker.finish());
            if let Err(aborted) = outcome {
                status = aborted;
                break 'rounds;
            }
        }
    }

    let mut aggregate = None;
    if status.is_ok() {
        let upload_round = schedule.rounds().len();
        let mut upload = StageTracker::new(upload_round);
        for (j, (plain, coded)) in finals.iter().flatten().enumerate() {
            let elems = ((1 + k) * dim) as u64;
            metrics.account_message(elems);
            upload.message(final_users[j], elems);
            if let Some(t) = trace.as_deref_mut() {
                let parts: Vec<&FieldVec> = std::iter::once(plain).chain(coded).collect();
                t.messages.push(TraceRecord::for_upload(upload_round, final_users[j], &parts));
            }
        }
        metrics.push_stage(upload.finish());

        let mask_total = match config.mode {
            Mode::Sequential | Mode::Tree => {
                Some(FieldVec::sum_of(dim, survivors.iter().map(|&u| &masks[u])))
            }
            Mode::Generalized => {
                let out = run_pipeline(config, &masks, dropouts, 0)?;
                absorb(&mut metrics, &out.metrics);
                if let Some(t) = trace.as_mut() {
                    t.messages.extend(out.trace);
                }
                status = out.status;
                out.total
            }
        };
        if let Some(mask_total) = mask_total {
            match server_finalize(&finals, n_final, &mask_total, &final_pts) {
                Ok(z) => aggregate = Some(z),
                Err(e) => status = abort_status(AbortSite::Final, e)?,
            }
        }
    }

    metrics.apply_cost_model(&config.net);
    Ok(RoundResult {
        aggregate,
        survivors,
        final_users,
        assignment,
        metrics,
        recoveries,
        status,
    })
}

fn absorb(into: &mut RoundMetrics, other: &RoundMetrics) {
    into.field_elems_sent += other.field_elems_sent;
    into.messages_sent += other.messages_sent;
    into.prg_streams += other.prg_streams;
    into.encode_ops += other.encode_ops;
    into.decode_ops += other.decode_ops;
    into.stages.extend(other.stages.iter().cloned());
}
