//! Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
//! fails. Runs as a plain binary so the lines show under `cargo test`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::*;
use hit_core::harness::batch::run_batch;
use hit_core::harness::scenarios::{approach_robot, two_failures};
use hit_core::intent::{predict, transition_matrix, update, IntentionSpace, Level, Posterior};
use hit_core::sim::control::{push_action, PushParams, Queues, RobotMode};
use hit_core::{compute_metrics, frame_accuracy, run_trial, Metrics, ScenarioConfig, TrialLog, Variant};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn timed(name: &str, limit_s: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit_s.is_none_or(|l| secs < l);
    let ok = o.ok && in_time;
    let limit = limit_s.map(|l| format!(", limit {l} s")).unwrap_or_default();
    println!(
        "{} {name}: {} ({secs:.2} s{limit})",
        if ok { "PASS" } else { "FAIL" },
        o.detail
    );
    ok
}

fn filter_exactness() -> Outcome {
    let strides = 1000;
    let ticks = CONTEXT + TP * strides;
    let plan: Vec<(usize, usize)> = (0..ticks / 60 + 1).map(|k| ((k * 3) % 5, k * 60)).collect();
    let ll = stride_log_likelihoods(&synthetic_path(&plan, ticks, 0.003, 11));
    let ours = exact_filter(0.96, &ll);
    let oracle = forward_oracle(5, 0.96, &[0.2; 5], &ll);
    let worst = ours
        .iter()
        .flatten()
        .zip(oracle.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        ll.len() == strides && worst < 1e-9,
        format!("max |exact - oracle| = {worst:.2e} over {} steps (tol 1e-9)", ll.len()),
    )
}

fn mif_convergence() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, ll) in [("straight", straight_scenario(3)), ("switch", switch_scenario(3))] {
        let (mean, worst): (Vec<f64>, Vec<f64>) = (0..50u64)
            .into_par_iter()
            .map(|s| {
                let tv = mif_tvs(10_000, 1000 + s, 0.96, &ll);
                (tv.iter().sum::<f64>() / tv.len() as f64, tv.iter().cloned().fold(0.0, f64::max))
            })
            .unzip();
        let (m, w) = (median(&mean), median(&worst));
        ok &= w < 0.05;
        parts.push(format!("{name}: median TV mean {m:.4}, per-step max {w:.4}"));
    }
    outcome(ok, format!("N=1e4, 50 seeds; {} (tol 0.05)", parts.join("; ")))
}

/// (seconds from approach onset to P(CO) > 0.9, seconds from that crossing to
/// the mode switch, whether P(CO) stayed above 0.9 in between).
fn approach_timing(log: &TrialLog) -> Option<(f64, Option<(f64, bool)>)> {
    let onset = log.ticks.iter().position(|r| r.events.iter().any(|e| e.starts_with("fr_reach")))?;
    let ticks = &log.ticks[onset..];
    let cross = ticks.iter().position(|r| r.high.as_ref().is_some_and(|h| h[1] > 0.9))?;
    let latency = ticks[cross].t - log.ticks[onset].t;
    let switch = ticks.iter().position(|r| r.mode != RobotMode::Ce).map(|s| {
        let held = ticks[cross..s].iter().all(|r| r.high.as_ref().is_some_and(|h| h[1] > 0.9));
        (ticks[s].t - ticks[cross].t, held && s > cross)
    });
    Some((latency, switch))
}

fn hierarchy_behaviour() -> Outcome {
    let timings: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|seed| approach_timing(&run_trial(&approach_robot(seed)).unwrap()))
        .collect();
    let latencies: Vec<f64> = timings.iter().flatten().map(|t| t.0).collect();
    let switches: Vec<(f64, bool)> = timings.iter().flatten().filter_map(|t| t.1).collect();
    let lat = if latencies.is_empty() { f64::INFINITY } else { median(&latencies) };
    let sustain_ok = switches.iter().all(|(gap, held)| *held && *gap >= 0.5 - 1e-9);
    let gaps: Vec<f64> = switches.iter().map(|s| s.0).collect();
    let gap = if gaps.is_empty() { f64::NAN } else { median(&gaps) };
    outcome(
        latencies.len() * 2 > timings.len() && lat <= 1.0 && switches.len() == latencies.len() && sustain_ok,
        format!(
            "20 seeds: {} crossed, median latency {lat:.3} s (<= 1.0); {} switched, all after a held 0.5 s sustain: {sustain_ok} (median gap {gap:.3} s)",
            latencies.len(),
            switches.len()
        ),
    )
}

fn tracking_accuracy() -> Outcome {
    let (low, high): (Vec<f64>, Vec<f64>) = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let log = run_trial(&two_failures(seed)).unwrap();
            (
                frame_accuracy(&log, Level::Task).unwrap_or(0.0),
                frame_accuracy(&log, Level::Interactive).unwrap_or(0.0),
            )
        })
        .unzip();
    let (l, h) = (median(&low), median(&high));
    outcome(
        l >= 0.85 && h >= 0.90,
        format!("schedule 2,3,1,4, failures on 2 and 3, 20 seeds: median low {l:.4} (>= 0.85), high {h:.4} (>= 0.90)"),
    )
}

fn ablation_orderings() -> Outcome {
    let seeds: Vec<u64> = (0..30).collect();
    let rows = run_batch(&ScenarioConfig::default(), &Variant::ALL, &seeds).unwrap();
    let of = |v: Variant, f: fn(&Metrics) -> Option<f64>| -> Vec<f64> {
        rows.iter().filter(|m| m.variant == v).filter_map(f).collect()
    };
    let fails = |v| of(v, |m| Some(m.n_failures as f64));
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (fc, fh, fo) = (fails(Variant::Coexistence), fails(Variant::Hit), fails(Variant::Cooperation));
    let guided = |v| median(&of(v, |m| m.guided_path));
    let energy = |v| median(&of(v, |m| m.human_energy));
    let auto = |v| median(&of(v, |m| m.automated_path));
    let checks = [
        (mean(&fc) > 0.0, format!("n_failures coex mean {:.3} > 0", mean(&fc))),
        (
            fh.iter().all(|x| *x == 0.0) && fo.iter().all(|x| *x == 0.0),
            format!("hit {:.0} = coop {:.0} = 0", mean(&fh), mean(&fo)),
        ),
        (
            guided(Variant::Hit) < guided(Variant::Cooperation),
            format!("guided_path {:.3} < {:.3}", guided(Variant::Hit), guided(Variant::Cooperation)),
        ),
        (
            energy(Variant::Hit) < energy(Variant::Cooperation),
            format!("human_energy {:.3} < {:.3}", energy(Variant::Hit), energy(Variant::Cooperation)),
        ),
        (
            auto(Variant::Hit) <= auto(Variant::Coexistence),
            format!("automated_path {:.3} <= {:.3}", auto(Variant::Hit), auto(Variant::Coexistence)),
        ),
    ];
    let completed = rows.iter().filter(|m| m.completed).count();
    outcome(
        checks.iter().all(|c| c.0),
        format!(
            "30 seeds x 3 variants ({completed}/{} completed); {}",
            rows.len(),
            checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; ")
        ),
    )
}

fn push_model() -> Outcome {
    let p = PushParams {
        delta: 0.02,
        tol: 0.016,
        ..PushParams::default()
    };
    let q = Queues {
        task_set: vec![1, 2, 3],
        ongoing: Default::default(),
        ready: [4].into(),
        done: vec![],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let fails = (0..n).filter(|_| !push_action(&q, 4, &p, &mut rng).unwrap().ok).count();
    let rate = fails as f64 / n as f64;
    let closed = 1.0 - std::f64::consts::PI * p.tol * p.tol / (4.0 * p.delta * p.delta);
    outcome(
        (rate - closed).abs() < 0.02,
        format!("delta 2 cm, tol 1.6 cm: {n} pushes fail at {rate:.4}, closed form {closed:.4} (tol 0.02)"),
    )
}

fn jsonl(log: &TrialLog) -> Vec<u8> {
    let mut b = Vec::new();
    log.write_jsonl(&mut b).unwrap();
    b
}

fn determinism() -> Outcome {
    let cases: Vec<ScenarioConfig> = Variant::ALL
        .iter()
        .flat_map(|&v| {
            [0u64, 7, 123].map(|seed| ScenarioConfig {
                injected_failures: if v == Variant::Cooperation { vec![] } else { vec![3] },
                table_shake_prob: 0.3,
                ..ScenarioConfig::new(v, seed)
            })
        })
        .chain([two_failures(4), approach_robot(4)])
        .collect();
    // One pass sequential, one in parallel: thread scheduling must not leak in.
    let seq: Vec<(Vec<u8>, String)> = cases
        .iter()
        .map(|c| {
            let log = run_trial(c).unwrap();
            (jsonl(&log), serde_json::to_string(&compute_metrics(&log)).unwrap())
        })
        .collect();
    let par: Vec<(Vec<u8>, String)> = cases
        .par_iter()
        .map(|c| {
            let log = run_trial(c).unwrap();
            (jsonl(&log), serde_json::to_string(&compute_metrics(&log)).unwrap())
        })
        .collect();
    let same = seq == par;
    outcome(same, format!("{} trials over all variants: logs and metrics bit-identical across runs: {same}", cases.len()))
}

fn invariant_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_sum = 0.0f64;
    let mut negative = false;
    for space in [IntentionSpace::task_level(), IntentionSpace::interactive_level()] {
        let t = transition_matrix(space.m(), 0.9).unwrap();
        let mut p = Posterior::uniform(space.clone());
        for _ in 0..10_000 {
            let lik: Vec<f64> = (0..space.m()).map(|_| rng.random_range(1e-6..5.0)).collect();
            p = update(&predict(&p, &t).unwrap(), &lik).unwrap();
            worst_sum = worst_sum.max((p.probs().iter().sum::<f64>() - 1.0).abs());
            negative |= p.probs().iter().any(|v| *v < 0.0);
        }
    }
    let mut worst_row = 0.0f64;
    for m in 2..=8 {
        for k in 0..=20 {
            let alpha = (1.0 / m as f64 + (1.0 - 1.0 / m as f64) * k as f64 / 20.0).min(1.0);
            let t = transition_matrix(m, alpha).unwrap();
            for i in 0..m {
                let row = t.row(i);
                negative |= row.iter().any(|v| *v < 0.0);
                worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    let violations: Vec<String> = Variant::ALL
        .par_iter()
        .flat_map(|&v| {
            (0..100u64).into_par_iter().filter_map(move |seed| {
                let cfg = ScenarioConfig::new(v, seed);
                check_trial_invariants(&cfg, &run_trial(&cfg).unwrap())
                    .err()
                    .map(|e| format!("{v:?}/{seed}: {e}"))
            })
        })
        .collect();
    outcome(
        worst_sum < 1e-9 && worst_row < 1e-12 && !negative && violations.is_empty(),
        format!(
            "normalisation drift {worst_sum:.1e} after 1e4 steps; row sums off by {worst_row:.1e}; queue, speed and separation checks over 300 trials: {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first {v})")).unwrap_or_default()
        ),
    )
}

fn main() -> ExitCode {
    let results = [
        timed("filter exactness", Some(5.0), filter_exactness),
        timed("MIF convergence", Some(60.0), mif_convergence),
        timed("hierarchy behaviour", None, hierarchy_behaviour),
        timed("tracking accuracy", Some(120.0), tracking_accuracy),
        timed("ablation orderings", Some(600.0), ablation_orderings),
        timed("geometric push model", None, push_model),
        timed("determinism", None, determinism),
        timed("invariant suites", None, invariant_suites),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
