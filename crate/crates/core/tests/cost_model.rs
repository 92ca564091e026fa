mod common;

use std::collections::BTreeSet;

use common::random_models;
use turbo_aggregate::engine::{run_round, Mode, ProtocolConfig, Seeds};
use turbo_aggregate::ff::Seed;
use turbo_aggregate::grouping::group_size;
use turbo_aggregate::net::{simulated_total_time, time_breakdown, NetParams, StageCost};
use turbo_aggregate::pairwise::run_pairwise_round;

fn turbo_volume(n: usize, dim: usize) -> u64 {
    let g = group_size(n, 0.0, 0.0).unwrap();
    let cfg = ProtocolConfig::new(n, g, dim).with_seeds(Seeds::from_base(Seed(n as u64)));
    let models = random_models(n, dim, 0);
    run_round(&cfg, &models, &BTreeSet::new()).unwrap().metrics.field_elems_sent
}

#[test]
fn turbo_volume_grows_near_linearly() {
    for n in [64usize, 128, 256] {
        let ratio = turbo_volume(2 * n, 2) as f64 / turbo_volume(n, 2) as f64;
        assert!(ratio <= 2.6, "V({})/V({n}) = {ratio}", 2 * n);
    }
}

#[test]
fn pairwise_seed_count_is_quadratic() {
    for n in [64u64, 128, 256] {
        let seeds = |n: u64| n * (n - 1) / 2;
        assert!(seeds(2 * n) as f64 / seeds(n) as f64 >= 3.8);
    }
}

#[test]
fn tree_schedule_is_shorter_on_the_critical_path() {
    let n = 64;
    let models = random_models(n, 50, 1);
    let base = ProtocolConfig::new(n, 8, 50).with_seeds(Seeds::from_base(Seed(1)));
    let seq = run_round(&base, &models, &BTreeSet::new()).unwrap();
    let tree = run_round(&base.clone().with_mode(Mode::Tree), &models, &BTreeSet::new()).unwrap();
    // 7 vs 3 inter-group rounds, plus the final stage and the upload
    assert_eq!(seq.metrics.critical_rounds(), 7 + 2);
    assert_eq!(tree.metrics.critical_rounds(), 3 + 2);
    assert_eq!(seq.metrics.field_elems_sent, tree.metrics.field_elems_sent);
    assert!(tree.metrics.simulated_time_ms < seq.metrics.simulated_time_ms);
}

#[test]
fn bandwidth_scales_the_communication_term() {
    let stages = vec![StageCost {
        round: 0,
        messages: 3,
        max_sender_elems: 1_000_000,
        max_user_ops: 10,
        max_user_prg_elems: 0,
    }];
    let fast = NetParams::default();
    let slow = NetParams { bandwidth_bps: fast.bandwidth_bps / 2.0, ..fast };
    let a = time_breakdown(&stages, &fast);
    let b = time_breakdown(&stages, &slow);
    let lat = fast.per_message_latency_ms;
    assert!(((b.communication_ms - lat) - 2.0 * (a.communication_ms - lat)).abs() < 1e-9);
    assert_eq!(a.computation_ms, b.computation_ms);
    assert_eq!(time_breakdown(&[], &fast).total_ms(), 0.0);
}

#[test]
fn turbo_is_communication_bound_and_baseline_is_prg_bound() {
    let (n, dim) = (200, 1000);
    let models = random_models(n, dim, 9);
    let dropped: BTreeSet<usize> = (0..n).step_by(10).collect();
    let net = NetParams::default();

    let g = group_size(n, 0.0, 0.0).unwrap();
    let cfg = ProtocolConfig::new(n, g, dim).with_seeds(Seeds::from_base(Seed(2)));
    let turbo = run_round(&cfg, &models, &dropped).unwrap();
    assert!(turbo.status.is_ok());
    let tt = time_breakdown(&turbo.metrics.stages, &net);
    assert!(tt.communication_ms > tt.computation_ms, "{tt:?}");

    let (_, base) = run_pairwise_round(&models, &dropped, Seed(2), &net).unwrap();
    let unmask = base.stages.last().unwrap();
    let prg_ms = unmask.max_user_prg_elems as f64 * net.prg_cost_ns / 1e6;
    let bt = time_breakdown(&base.stages, &net);
    assert!(prg_ms > bt.communication_ms, "{prg_ms} vs {bt:?}");

    // slower links stretch both rounds, the communication-bound one more
    let times = |bw: f64| {
        let net = NetParams { bandwidth_bps: bw, ..net };
        (
            simulated_total_time(&turbo.metrics.stages, &net),
            simulated_total_time(&base.stages, &net),
        )
    };
    let mut prev = times(1e9);
    for bw in [5e8, 2e8, 1e8] {
        let cur = times(bw);
        assert!(cur.0 > prev.0 && cur.1 >= prev.1, "bandwidth {bw}");
        assert!(cur.0 / prev.0 > cur.1 / prev.1);
        prev = cur;
    }
}
