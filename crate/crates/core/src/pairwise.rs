//! The pairwise-mask baseline: every pair of users shares a seed whose PRG
//! expansion cancels in the sum, every user adds a private self-mask, and all
//! seeds are Shamir-shared so that the server can clean up after dropouts.
//!
//! Key agreement is replaced by the orchestrator handing out seeds. Shares are
//! generated on demand from a per-seed stream, which is equivalent to having
//! distributed them at setup.

use std::collections::{BTreeMap, BTreeSet};

use crate::ff::{prg, FieldVec, Prg, Seed};
use crate::net::{NetParams, RoundMetrics, StageTracker};
use crate::sharing::{default_indices, shamir_reconstruct, shamir_share, ShamirShare, SharingError};

const SELF_TAG: u64 = 1;
const PAIR_TAG: u64 = 2;
const SHARE_TAG: u64 = 3;

/// Reconstruction threshold `floor(N / 2) + 1`.
pub fn default_threshold(n: usize) -> usize {
    n / 2 + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum SecretId {
    SelfSeed(usize),
    Pair(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairwiseState {
    n: usize,
    t: usize,
    share_seed: Seed,
    pair_seeds: BTreeMap<(usize, usize), Seed>,
    self_seeds: Vec<Seed>,
}

/// A 64-bit seed built from two halves that are both below `q`, so each half
/// is a single field element and sharing it is exact.
fn draw_seed(prg: &mut Prg) -> Seed {
    let hi = prg.next_elem().value() as u64;
    let lo = prg.next_elem().value() as u64;
    Seed((hi << 32) | lo)
}

fn seed_to_vec(seed: Seed) -> FieldVec {
    FieldVec::from_u64s(&[seed.0 >> 32, seed.0 & 0xffff_ffff])
}

fn vec_to_seed(v: &FieldVec) -> Seed {
    Seed(((v[0].value() as u64) << 32) | v[1].value() as u64)
}

/// Draws all `N (N - 1) / 2` pairwise seeds and `N` self seeds.
pub fn setup(n: usize, t: usize, rng: Seed) -> Result<PairwiseState, SharingError> {
    if t < 1 || t > n {
        return Err(SharingError::BadThreshold { t, n });
    }
    let mut self_prg = Prg::new(rng.derive(SELF_TAG));
    let self_seeds = (0..n).map(|_| draw_seed(&mut self_prg)).collect();
    let mut pair_prg = Prg::new(rng.derive(PAIR_TAG));
    let mut pair_seeds = BTreeMap::new();
    for u in 0..n {
        for v in u + 1..n {
            pair_seeds.insert((u, v), draw_seed(&mut pair_prg));
        }
    }
    Ok(PairwiseState {
        n,
        t,
        share_seed: rng.derive(SHARE_TAG),
        pair_seeds,
        self_seeds,
    })
}

impl PairwiseState {
    pub fn num_users(&self) -> usize {
        self.n
    }

    pub fn threshold(&self) -> usize {
        self.t
    }

    pub fn num_pair_seeds(&self) -> usize {
        self.pair_seeds.len()
    }

    pub fn num_self_seeds(&self) -> usize {
        self.self_seeds.len()
    }

    pub fn self_seed(&self, u: usize) -> Seed {
        self.self_seeds[u]
    }

    /// `s_{u,v}` for either order of `u` and `v`.
    pub fn pair_seed(&self, u: usize, v: usize) -> Seed {
        self.pair_seeds[&(u.min(v), u.max(v))]
    }

    fn secret(&self, id: SecretId) -> Seed {
        match id {
            SecretId::SelfSeed(u) => self.self_seed(u),
            SecretId::Pair(u, v) => self.pair_seed(u, v),
        }
    }

    fn shares(&self, id: SecretId) -> Vec<ShamirShare> {
        let tag = match id {
            SecretId::SelfSeed(u) => [0, u as u64, 0],
            SecretId::Pair(u, v) => [1, u as u64, v as u64],
        };
        shamir_share(
            &seed_to_vec(self.secret(id)),
            self.t,
            self.n,
            &default_indices(self.n),
            self.share_seed.derive_path(&tag),
        )
        .expect("threshold validated at setup")
    }

    /// The share of `u`'s self seed held by user `holder`.
    pub fn self_seed_share(&self, u: usize, holder: usize) -> ShamirShare {
        self.shares(SecretId::SelfSeed(u)).swap_remove(holder)
    }

    /// The share of `s_{u,v}` held by user `holder`.
    pub fn pair_seed_share(&self, u: usize, v: usize, holder: usize) -> ShamirShare {
        self.shares(SecretId::Pair(u.min(v), u.max(v))).swap_remove(holder)
    }

    fn reconstruct(&self, id: SecretId, holders: &[usize]) -> Result<Seed, SharingError> {
        let all = self.shares(id);
        let subset: Vec<ShamirShare> = holders.iter().map(|&h| all[h].clone()).collect();
        Ok(vec_to_seed(&shamir_reconstruct(&subset, self.t)?))
    }
}

/// `y_u = x_u + PRG(b_u) + sum_{v > u} PRG(s_{u,v}) - sum_{v < u} PRG(s_{v,u})`.
pub fn mask_model(u: usize, x: &FieldVec, state: &PairwiseState) -> FieldVec {
    let dim = x.len();
    let mut y = x + &prg(state.self_seed(u), dim);
    for v in 0..state.n {
        if v > u {
            y += &prg(state.pair_seed(u, v), dim);
        } else if v < u {
            y -= &prg(state.pair_seed(v, u), dim);
        }
    }
    y
}

/// Server-side unmasking. Surviving users contribute their shares; the first
/// `t` survivors (by id) are used for every reconstruction.
///
/// Returns the sum of the survivors' models and the counters of this step:
/// `prg_streams` is `(N - D) + D (N - D)`.
pub fn unmask_aggregate(
    ys: &BTreeMap<usize, FieldVec>,
    dropped: &BTreeSet<usize>,
    state: &PairwiseState,
    t: usize,
) -> Result<(FieldVec, RoundMetrics), SharingError> {
    assert!(
        ys.keys().all(|u| !dropped.contains(u)),
        "a user is both surviving and dropped"
    );
    if ys.len() < t {
        return Err(SharingError::InsufficientShares { have: ys.len(), need: t });
    }
    let dim = ys.values().next().map_or(0, FieldVec::len);
    let holders: Vec<usize> = ys.keys().copied().take(t).collect();
    let mut metrics = RoundMetrics::default();
    let mut revealed_self = BTreeSet::new();
    let mut revealed_pairs = BTreeSet::new();

    let mut z = FieldVec::zeros(dim);
    for (&u, y) in ys {
        let b = state.reconstruct(SecretId::SelfSeed(u), &holders)?;
        revealed_self.insert(u);
        metrics.account_decode((holders.len() * 2) as u64);
        z += y;
        z -= &prg(b, dim);
        metrics.account_prg_streams(1);
    }
    for &u in dropped {
        revealed_pairs.insert(u);
        for &v in ys.keys() {
            let s = state.reconstruct(SecretId::Pair(u.min(v), u.max(v)), &holders)?;
            metrics.account_decode((holders.len() * 2) as u64);
            if v > u {
                z += &prg(s, dim);
            } else {
                z -= &prg(s, dim);
            }
            metrics.account_prg_streams(1);
        }
    }
    // revealing both secrets of one user would expose its model
    assert!(
        revealed_self.is_disjoint(&revealed_pairs),
        "self seed and pairwise seeds of the same user were both reconstructed"
    );
    Ok((z, metrics))
}

/// One full baseline round over `models` with the users in `dropped` failing
/// after setup. Counters follow the key-bundle layout of the original
/// protocol: every user sends each peer a share of its self seed and of its
/// key (2 field elements each), then uploads its masked model.
pub fn run_pairwise_round(
    models: &[FieldVec],
    dropped: &BTreeSet<usize>,
    seed: Seed,
    net: &NetParams,
) -> Result<(FieldVec, RoundMetrics), SharingError> {
    let n = models.len();
    let dim = models.first().map_or(0, FieldVec::len);
    let t = default_threshold(n);
    let state = setup(n, t, seed)?;

    let mut metrics = RoundMetrics {
        pairwise_seeds: state.num_pair_seeds() as u64,
        seed_shares: (n * n) as u64,
        ..Default::default()
    };
    let bundle = 4u64;
    let mut share_stage = StageTracker::new(0);
    for u in 0..n {
        for _ in 0..n {
            metrics.account_message(bundle);
            share_stage.message(u, bundle);
        }
    }
    metrics.push_stage(share_stage.finish());

    let mut upload = StageTracker::new(1);
    let mut ys = BTreeMap::new();
    for (u, x) in models.iter().enumerate() {
        let y = mask_model(u, x, &state);
        upload.prg(u, (n * dim) as u64);
        if !dropped.contains(&u) {
            metrics.account_message(dim as u64);
            upload.message(u, dim as u64);
            ys.insert(u, y);
        }
    }
    metrics.push_stage(upload.finish());

    let (z, server) = unmask_aggregate(&ys, dropped, &state, t)?;
    let mut unmask = StageTracker::new(2);
    unmask.ops(usize::MAX, server.decode_ops);
    unmask.prg(usize::MAX, server.prg_streams * dim as u64);
    metrics.push_stage(unmask.finish());
    // only the server's expansions are counted; they are what grows with D
    metrics.account_decode(server.decode_ops);
    metrics.account_prg_streams(server.prg_streams);
    metrics.apply_cost_model(net);
    Ok((z, metrics))
}

/// The server's PRG stream count for `n` users of which `d` dropped.
pub fn expected_prg_streams(n: usize, d: usize) -> u64 {
    ((n - d) + d * (n - d)) as u64
}
