use std::collections::BTreeSet;
use std::io::Write;

use anyhow::{Context, Result};
use serde::Serialize;
use turbo_aggregate::analysis::bounds_report;
use turbo_aggregate::engine::{build_tree_schedule, run_round, Mode, ProtocolConfig, Seeds};
use turbo_aggregate::ff::{prg, FieldVec, Seed};
use turbo_aggregate::grouping::{group_size, partition};
use turbo_aggregate::net::{inject_dropouts, DropoutModel, MetricsRecord, NetParams};
use turbo_aggregate::pairwise::run_pairwise_round;

use crate::spec::{RunMode, RunSpec};

const MODELS_TAG: u64 = 0x6d6f_6465;

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ABORTED: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;

/// One grid point of a sweep.
#[derive(Clone, Copy, Debug)]
pub struct Instance {
    pub n: usize,
    pub group_size: usize,
    pub dim: usize,
    pub p: f64,
    pub k: usize,
    pub mode: RunMode,
    pub seed: Seed,
    pub dropout_model: DropoutModel,
    pub final_size: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub record: MetricsRecord,
    pub ok: bool,
    pub matches_oracle: bool,
}

pub fn instance_models(n: usize, dim: usize, seed: Seed) -> Vec<FieldVec> {
    (0..n)
        .map(|u| prg(seed.derive_path(&[MODELS_TAG, u as u64]), dim))
        .collect()
}

fn direct_sum(models: &[FieldVec], dropped: &BTreeSet<usize>, dim: usize) -> FieldVec {
    FieldVec::sum_of(
        dim,
        models.iter().enumerate().filter(|(u, _)| !dropped.contains(u)).map(|(_, m)| m),
    )
}

/// Runs one instance and checks the result against the direct sum. The
/// instance seed fixes models, partition and dropouts, so all modes of one
/// grid point see the same data.
pub fn execute(inst: &Instance, net: &NetParams) -> Result<Outcome> {
    let seeds = Seeds::from_base(inst.seed);
    let models = instance_models(inst.n, inst.dim, inst.seed);
    let assignment = partition(inst.n, inst.group_size, seeds.partition)?;
    let dropped = inject_dropouts(&assignment, inst.p, seeds.dropout, inst.dropout_model);
    let expected = direct_sum(&models, &dropped, inst.dim);

    let (aggregate, metrics, status) = match inst.mode {
        RunMode::Turbo(mode) => {
            let mut cfg = ProtocolConfig::new(inst.n, inst.group_size, inst.dim)
                .with_mode(mode)
                .with_redundancy(inst.k)
                .with_seeds(seeds)
                .with_dropout_rate(inst.p);
            cfg.final_size = inst.final_size;
            cfg.net = *net;
            let r = run_round(&cfg, &models, &dropped)?;
            (r.aggregate, r.metrics, r.status.label())
        }
        RunMode::Pairwise => match run_pairwise_round(&models, &dropped, seeds.masks, net) {
            Ok((z, m)) => (Some(z), m, "ok".to_string()),
            Err(e) => (None, Default::default(), format!("aborted:{e}")),
        },
    };
    let ok = aggregate.is_some();
    let matches_oracle = aggregate.as_ref().is_none_or(|z| *z == expected);
    let status = if matches_oracle { status } else { "mismatch".to_string() };
    Ok(Outcome {
        record: MetricsRecord {
            mode: inst.mode.to_string(),
            n: inst.n,
            group_size: inst.group_size,
            p: inst.p,
            k: inst.k,
            field_elems_sent: metrics.field_elems_sent,
            prg_streams: metrics.prg_streams,
            decode_ops: metrics.decode_ops,
            simulated_time_ms: metrics.simulated_time_ms,
            status,
        },
        ok,
        matches_oracle,
    })
}

/// Every (N, p, mode, k, trial) combination of the sweep, in file order.
pub fn instances(spec: &RunSpec) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    let base = Seed(spec.seed);
    for &n in &spec.sweep.n {
        let g = match spec.group_size {
            Some(g) => g,
            None => group_size(n, 0.0, 0.0)?,
        };
        for &p in &spec.sweep.p {
            for &mode in &spec.sweep.mode {
                for &k in &spec.sweep.k {
                    for trial in 0..spec.trials {
                        out.push(Instance {
                            n,
                            group_size: g,
                            dim: spec.d,
                            p,
                            k,
                            mode,
                            seed: base.derive_path(&[n as u64, p.to_bits(), k as u64, trial as u64]),
                            dropout_model: spec.dropout_model,
                            final_size: spec.final_size,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    runs: usize,
    ok: usize,
    aborted: usize,
    mismatches: usize,
    csv: &'a str,
}

/// Executes the sweep, writes the metrics CSV and prints a summary record.
pub fn cmd_run<W: Write>(spec: &RunSpec, out: &mut W) -> Result<i32> {
    let path = spec
        .output
        .clone()
        .unwrap_or_else(|| "metrics.csv".into());
    let mut writer = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    let (mut ok, mut aborted, mut mismatches) = (0, 0, 0);
    let all = instances(spec)?;
    for inst in &all {
        let outcome = execute(inst, &spec.net)?;
        writer.serialize(&outcome.record)?;
        if !outcome.matches_oracle {
            mismatches += 1;
        } else if outcome.ok {
            ok += 1;
        } else {
            aborted += 1;
        }
    }
    writer.flush()?;
    let summary = RunSummary {
        runs: all.len(),
        ok,
        aborted,
        mismatches,
        csv: &path.display().to_string(),
    };
    serde_json::to_writer(&mut *out, &summary)?;
    writeln!(out)?;
    Ok(if mismatches > 0 {
        EXIT_MISMATCH
    } else if aborted > 0 && spec.strict {
        EXIT_ABORTED
    } else {
        EXIT_OK
    })
}

/// Default dimension of verification runs.
pub const VERIFY_DIM: usize = 32;

/// Oracle-equivalence suite at reduced dimension: every Turbo mode and the
/// baseline against the direct sum. Output is deterministic for a seed.
pub fn cmd_verify<W: Write>(seed: u64, out: &mut W) -> Result<i32> {
    let net = NetParams::default();
    let mut failures = 0;
    let mut case = 0u64;
    for mode in [
        RunMode::Turbo(Mode::Sequential),
        RunMode::Turbo(Mode::Tree),
        RunMode::Turbo(Mode::Generalized),
        RunMode::Pairwise,
    ] {
        let (mut total, mut ok, mut aborted, mut wrong) = (0, 0, 0, 0);
        for n in (8..=64).step_by(8) {
            for p in [0.0, 0.1, 0.3, 0.45] {
                for k in [1, 2] {
                    if mode == RunMode::Pairwise && k == 2 {
                        continue;
                    }
                    for dropout_model in [DropoutModel::PerGroup, DropoutModel::Bernoulli] {
                        case += 1;
                        let inst = Instance {
                            n,
                            group_size: group_size(n, 0.0, 0.0)?,
                            dim: VERIFY_DIM,
                            p,
                            k,
                            mode,
                            seed: Seed(seed).derive_path(&[n as u64, p.to_bits(), k as u64, dropout_model as u64]),
                            dropout_model,
                            final_size: None,
                        };
                        let o = execute(&inst, &net)?;
                        total += 1;
                        if !o.matches_oracle {
                            wrong += 1;
                        } else if o.ok {
                            ok += 1;
                        } else {
                            aborted += 1;
                        }
                    }
                }
            }
        }
        failures += wrong;
        writeln!(
            out,
            "{mode:<12} instances={total} ok={ok} aborted={aborted} mismatches={wrong}"
        )?;
    }
    writeln!(out, "verify seed={seed} cases={case} {}", if failures == 0 { "PASS" } else { "FAIL" })?;
    Ok(if failures == 0 { EXIT_OK } else { EXIT_MISMATCH })
}

#[derive(Serialize)]
struct BoundsError {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "N_g")]
    group_size: usize,
    p: f64,
    #[serde(rename = "T")]
    collusion: usize,
    error: String,
}

/// One JSON record per point of the `[bounds]` grid.
pub fn cmd_bounds<W: Write>(spec: &RunSpec, out: &mut W) -> Result<i32> {
    let grid = spec
        .bounds
        .as_ref()
        .context("the spec has no [bounds] section")?;
    for &n in &grid.n {
        for &g in &grid.group_size {
            for &p in &grid.p {
                for &t in &grid.collusion {
                    let seed = Seed(spec.seed).derive_path(&[n as u64, g as u64, p.to_bits()]);
                    match bounds_report(n, g, p, t, grid.trials, seed) {
                        Ok(report) => serde_json::to_writer(&mut *out, &report)?,
                        Err(e) => serde_json::to_writer(
                            &mut *out,
                            &BoundsError {
                                n,
                                group_size: g,
                                p,
                                collusion: t,
                                error: e.to_string(),
                            },
                        )?,
                    }
                    writeln!(out)?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}

/// The tree schedule for `groups` groups, one line per round (1-indexed).
pub fn cmd_schedule<W: Write>(groups: usize, out: &mut W) -> Result<i32> {
    anyhow::ensure!(groups >= 2, "a schedule needs at least 2 groups");
    for (r, pairs) in build_tree_schedule(groups).iter().enumerate() {
        let edges: Vec<String> = pairs.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        writeln!(out, "round {}: {}", r + 1, edges.join(" "))?;
    }
    writeln!(out, "final: {groups}->final")?;
    Ok(EXIT_OK)
}
