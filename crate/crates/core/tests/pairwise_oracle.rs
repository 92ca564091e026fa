mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{random_models, survivors_sum};
use turbo_aggregate::ff::Seed;
use turbo_aggregate::net::NetParams;
use turbo_aggregate::pairwise::{
    default_threshold, expected_prg_streams, mask_model, run_pairwise_round, setup, unmask_aggregate,
};
use turbo_aggregate::sharing::SharingError;

#[test]
fn exact_for_every_admissible_dropout_count() {
    for n in 2..=32usize {
        let t = default_threshold(n);
        let dim = 3;
        let models = random_models(n, dim, n as u64);
        let state = setup(n, t, Seed(n as u64 * 31)).unwrap();
        let ys_all: Vec<_> = (0..n).map(|u| mask_model(u, &models[u], &state)).collect();
        for d in 0..=n - t {
            // drop a spread-out set of d users
            let dropped: BTreeSet<usize> = (0..d).map(|i| (i * 7 + n / 3) % n).collect::<BTreeSet<_>>();
            let dropped = if dropped.len() == d {
                dropped
            } else {
                (n - d..n).collect()
            };
            let ys: BTreeMap<_, _> = (0..n).filter(|u| !dropped.contains(u)).map(|u| (u, ys_all[u].clone())).collect();
            let (z, m) = unmask_aggregate(&ys, &dropped, &state, t).unwrap();
            assert_eq!(z, survivors_sum(&models, &dropped), "N={n} D={d}");
            assert_eq!(m.prg_streams, expected_prg_streams(n, d));
            assert_eq!(m.prg_streams, ((n - d) + d * (n - d)) as u64);
        }
        // one more dropout leaves fewer than t survivors
        let dropped: BTreeSet<usize> = (0..n - t + 1).collect();
        let ys: BTreeMap<_, _> = (n - t + 1..n).map(|u| (u, ys_all[u].clone())).collect();
        assert!(matches!(
            unmask_aggregate(&ys, &dropped, &state, t),
            Err(SharingError::InsufficientShares { .. })
        ));
    }
}

#[test]
fn full_round_volume() {
    for n in [8usize, 16, 32] {
        let dim = 10;
        let models = random_models(n, dim, 1);
        let (z, m) = run_pairwise_round(&models, &BTreeSet::new(), Seed(5), &NetParams::default()).unwrap();
        assert_eq!(z, survivors_sum(&models, &BTreeSet::new()));
        assert_eq!(m.pairwise_seeds, (n * (n - 1) / 2) as u64);
        assert_eq!(m.seed_shares, (n * n) as u64);
        assert_eq!(m.field_elems_sent, (n * dim + 4 * n * n) as u64);
    }
}
