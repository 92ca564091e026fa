//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};
use turbo_aggregate::analysis::{failure_bound, monte_carlo_failure};
use turbo_aggregate::engine::{run_round, AbortReason, AbortSite, Mode, ProtocolConfig, RoundStatus, Seeds};
use turbo_aggregate::ff::{prg, FieldElem, FieldVec, Seed, MODULUS};
use turbo_aggregate::grouping::{group_size, partition};
use turbo_aggregate::lagrange::{interpolate_eval, EvalSet};
use turbo_aggregate::net::{inject_dropouts, DropoutModel};
use turbo_aggregate::pairwise::{default_threshold, mask_model, setup, unmask_aggregate};
use turbo_aggregate::sharing::{default_indices, make_additive_shares, shamir_reconstruct, shamir_share, ShamirShare};
use turbo_aggregate_cli::cmd_verify;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn models(n: usize, dim: usize, seed: u64) -> Vec<FieldVec> {
    (0..n).map(|i| prg(Seed(seed).derive(i as u64), dim)).collect()
}

/// Direct sum in u128 with a single final reduction.
fn oracle(models: &[FieldVec], dropped: &BTreeSet<usize>) -> FieldVec {
    let dim = models[0].len();
    let mut acc = vec![0u128; dim];
    for (u, m) in models.iter().enumerate() {
        if dropped.contains(&u) {
            continue;
        }
        for (a, e) in acc.iter_mut().zip(m.iter()) {
            *a += e.value() as u128;
        }
    }
    acc.into_iter().map(|a| FieldElem::new((a % MODULUS as u128) as u64)).collect()
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = subsets(&items[1..], k);
    for mut rest in subsets(&items[1..], k - 1) {
        rest.insert(0, items[0]);
        out.push(rest);
    }
    out
}

fn config(n: usize, g: usize, dim: usize, mode: Mode, k: usize, seed: u64) -> ProtocolConfig {
    ProtocolConfig::new(n, g, dim)
        .with_mode(mode)
        .with_redundancy(k)
        .with_seeds(Seeds::from_base(Seed(seed)))
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    if t < limit {
        Ok(())
    } else {
        Err(format!("took {t:.2?}, limit {limit:?}"))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden_example() -> Check {
    let start = Instant::now();
    let dim = 16;
    let cfg = config(9, 3, dim, Mode::Sequential, 1, 2024);
    let groups = partition(9, 3, cfg.seeds.partition).map_err(|e| e.to_string())?;
    ensure(groups.group_sizes() == [3, 3, 3], || format!("sizes {:?}", groups.group_sizes()))?;
    let dropped: BTreeSet<usize> = [groups.group(1)[2]].into();
    let m = models(9, dim, 1);
    let r = run_round(&cfg, &m, &dropped).map_err(|e| e.to_string())?;
    ensure(r.aggregate.as_ref() == Some(&oracle(&m, &dropped)), || format!("status {:?}", r.status))?;
    let points: Vec<FieldElem> = [1u64, 4, 2, 5].map(FieldElem::new).to_vec();
    ensure(
        r.recoveries.len() == 3 && r.recoveries.iter().all(|e| e.src_group == 1 && e.known_points == points),
        || format!("recoveries {:?}", r.recoveries),
    )?;
    ensure(r.metrics.decode_ops == (3 * 4 * dim) as u64, || format!("decode_ops {}", r.metrics.decode_ops))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("exact sum, 3 decodes from 4 points, {:.1?}", start.elapsed()))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let (mut checked, mut ok) = (0, 0);
    for i in 0..400usize {
        let n = 8 + (i * 13) % 57;
        let dim = [1, 8, 32][i % 3];
        let p = [0.0, 0.1, 0.3, 0.45][(i / 3) % 4];
        let k = 1 + (i / 12) % 2;
        let g = group_size(n, 0.0, 0.0).map_err(|e| e.to_string())?;
        let model = if i % 2 == 0 { DropoutModel::PerGroup } else { DropoutModel::Bernoulli };
        let m = models(n, dim, i as u64);
        for mode in Mode::ALL {
            let cfg = config(n, g, dim, mode, k, 5000 + i as u64);
            let assignment = partition(n, g, cfg.seeds.partition).map_err(|e| e.to_string())?;
            let dropped = inject_dropouts(&assignment, p, cfg.seeds.dropout, model);
            let r = run_round(&cfg, &m, &dropped).map_err(|e| e.to_string())?;
            checked += 1;
            if r.status.is_ok() {
                ok += 1;
                ensure(r.aggregate.as_ref() == Some(&oracle(&m, &dropped)), || {
                    format!("instance {i} N={n} d={dim} p={p} k={k} {mode}: wrong aggregate")
                })?;
            }
        }
    }
    ensure(checked >= 1000, || format!("only {checked} instances"))?;
    within(start, Duration::from_secs(120))?;
    Ok(format!("{checked} instances, {ok} completed, all exact, {:.1?}", start.elapsed()))
}

fn dropout_threshold() -> Check {
    let mut cases = 0;
    for (mode, groups) in [(Mode::Sequential, 3usize), (Mode::Tree, 4)] {
        for g in [2usize, 3, 4, 6] {
            for k in [1usize, 2] {
                let limit = g * k / (k + 1);
                let n = g * groups;
                let cfg = config(n, g, 2, mode, k, (g * 10 + k) as u64);
                let m = models(n, 2, g as u64);
                let assignment = partition(n, g, cfg.seeds.partition).map_err(|e| e.to_string())?;
                for l in 0..groups {
                    for (drop, succeed) in [(limit, true), (limit + 1, false)] {
                        for subset in subsets(assignment.group(l), drop) {
                            let dropped: BTreeSet<usize> = subset.into_iter().collect();
                            let r = run_round(&cfg, &m, &dropped).map_err(|e| e.to_string())?;
                            cases += 1;
                            let good = if succeed {
                                r.aggregate.as_ref() == Some(&oracle(&m, &dropped))
                            } else {
                                matches!(
                                    r.status,
                                    RoundStatus::Aborted {
                                        site: AbortSite::Group(s),
                                        reason: AbortReason::InsufficientEvaluations { .. },
                                    } if s == l
                                )
                            };
                            ensure(good, || format!("{mode} N_g={g} k={k} group {l} drop {drop}: {:?}", r.status))?;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{cases} exhaustive cases"))
}

fn pairwise_baseline() -> Check {
    let mut cases = 0;
    for n in 2..=32usize {
        let t = default_threshold(n);
        let m = models(n, 3, n as u64);
        let state = setup(n, t, Seed(n as u64 * 31)).map_err(|e| e.to_string())?;
        let ys_all: Vec<_> = (0..n).map(|u| mask_model(u, &m[u], &state)).collect();
        for d in 0..=n - t {
            let dropped: BTreeSet<usize> = (n - d..n).collect();
            let ys: BTreeMap<_, _> = (0..n - d).map(|u| (u, ys_all[u].clone())).collect();
            let (z, metrics) = unmask_aggregate(&ys, &dropped, &state, t).map_err(|e| e.to_string())?;
            ensure(z == oracle(&m, &dropped), || format!("N={n} D={d}: wrong aggregate"))?;
            let expected = ((n - d) + d * (n - d)) as u64;
            ensure(metrics.prg_streams == expected, || {
                format!("N={n} D={d}: {} PRG streams, expected {expected}", metrics.prg_streams)
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (N, D) pairs exact, stream counts match"))
}

fn overhead_scaling() -> Check {
    let volume = |n: usize| -> Result<u64, String> {
        let g = group_size(n, 0.0, 0.0).map_err(|e| e.to_string())?;
        let cfg = config(n, g, 2, Mode::Sequential, 1, n as u64);
        let r = run_round(&cfg, &models(n, 2, 0), &BTreeSet::new()).map_err(|e| e.to_string())?;
        Ok(r.metrics.field_elems_sent)
    };
    let seeds = |n: u64| n * (n - 1) / 2;
    let mut ratios = Vec::new();
    for n in [64usize, 128, 256] {
        let ratio = volume(2 * n)? as f64 / volume(n)? as f64;
        let seed_ratio = seeds(2 * n as u64) as f64 / seeds(n as u64) as f64;
        ensure(ratio <= 2.6, || format!("V({})/V({n}) = {ratio:.3}", 2 * n))?;
        ensure(seed_ratio >= 3.8, || format!("seed ratio {seed_ratio:.3} at N={n}"))?;
        ratios.push(format!("{ratio:.2}"));
    }
    Ok(format!("volume ratios {}", ratios.join(", ")))
}

fn bound_validity() -> Check {
    let start = Instant::now();
    for &n in &[64usize, 256] {
        for &g in &[4usize, 8, 16] {
            for &p in &[0.1, 0.3, 0.45] {
                let bound = failure_bound(n, g, p).map_err(|e| e.to_string())?;
                let est = monte_carlo_failure(n, g, p, 2000, Seed((n * 100 + g) as u64));
                ensure(est.estimate <= bound + 3.0 * est.ci95, || {
                    format!("N={n} N_g={g} p={p}: {} > {bound} + 3*{}", est.estimate, est.ci95)
                })?;
            }
        }
    }
    let survive: Vec<f64> = [64usize, 512, 4096]
        .iter()
        .map(|&n| {
            let g = group_size(n, 0.0, 0.0).unwrap();
            1.0 - monte_carlo_failure(n, g, 0.45, 10_000, Seed(n as u64)).estimate
        })
        .collect();
    within(start, Duration::from_secs(60))?;
    ensure(survive.windows(2).all(|w| w[1] < w[0]), || {
        format!("all-groups-survive estimates {survive:?} are not strictly decreasing")
    })?;
    Ok(format!("grid within bound, survival {survive:?}"))
}

fn hiding() -> Check {
    let x = FieldVec::from_u64s(&[123_456]);
    let (bins, trials) = (20usize, 10_000u64);
    let mut counts = vec![0u64; bins];
    for s in 0..trials {
        let u = prg(Seed(s).derive(1), 1);
        let share = &make_additive_shares(&x, &u, 3, Seed(s).derive(2))[0];
        counts[(share[0].value() as u64 * bins as u64 / MODULUS as u64) as usize] += 1;
    }
    let expected = trials as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    ensure(stat < critical, || format!("chi-square {stat:.2} >= {critical:.2}"))?;

    for t in 2..=5usize {
        let n = t + 2;
        let idx = default_indices(n);
        let secret = prg(Seed(t as u64), 3);
        let shares = shamir_share(&secret, t, n, &idx, Seed(100 + t as u64)).map_err(|e| e.to_string())?;
        let seen = &shares[..t - 1];
        for c in 0..25u64 {
            let candidate = prg(Seed(1000 * t as u64 + c), 3);
            let mut known = EvalSet::new();
            known.push(FieldElem::ZERO, candidate.clone());
            for s in seen {
                known.push(s.index, s.value.clone());
            }
            let completed: Vec<ShamirShare> = idx
                .iter()
                .map(|&i| ShamirShare {
                    index: i,
                    value: interpolate_eval(&known, i).unwrap(),
                })
                .collect();
            let consistent = completed[..t - 1] == *seen
                && shamir_reconstruct(&completed[n - t..], t).ok() == Some(candidate);
            ensure(consistent, || format!("t={t}: {} shares rule out a secret", t - 1))?;
        }
    }
    Ok(format!("chi-square {stat:.2} < {critical:.2}, Shamir t=2..5 hiding"))
}

fn determinism() -> Check {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    cmd_verify(2024, &mut a).map_err(|e| e.to_string())?;
    cmd_verify(2024, &mut b).map_err(|e| e.to_string())?;
    ensure(a == b, || "verify outputs differ".into())?;
    ensure(a.ends_with(b"PASS\n"), || String::from_utf8_lossy(&a).into_owned())?;
    Ok(format!("{} identical bytes", a.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 golden example", golden_example),
        ("2 oracle equivalence", oracle_equivalence),
        ("3 dropout threshold", dropout_threshold),
        ("4 pairwise baseline", pairwise_baseline),
        ("5 overhead scaling", overhead_scaling),
        ("6 bound validity", bound_validity),
        ("7 hiding", hiding),
        ("8 determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                println!("FAIL criterion {name}: {detail}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        println!("{} of 8 criteria failed: {}", failed.len(), failed.join("; "));
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
