//! Oracles and fixtures shared by the integration tests and the acceptance
//! suite. Nothing here calls the filter code under test except to produce
//! inputs (likelihoods) that both sides consume.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use hit_core::intent::{predict, Intention, scaled_likelihoods, transition_matrix, update, IntentionSpace, Posterior};
use hit_core::prediction::gilm::gilm_step;
use hit_core::prediction::mif::{goal_log_likelihoods, mif_posterior, mif_step_with_log_likelihoods, ParticleSet};
use hit_core::sim::control::RobotMode;
use hit_core::sim::workspace::Workspace;
use hit_core::{GilmParams, GoalRegion, ObservationWindow, ScenarioConfig, TrialLog, Vec2};

pub const DT: f64 = 1.0 / 30.0;
pub const TP: usize = 5;
pub const CONTEXT: usize = 15;

/// Four part regions plus a static stand-in for the follow-robot region.
pub fn five_goals() -> Vec<GoalRegion> {
    let ws = Workspace::default();
    let mut g = ws.goal_regions();
    g.push(GoalRegion::task(ws.robot_home, 0.03));
    g
}

/// Wrist path that heads for `plan[i].0` from tick `plan[i].1` on, with the
/// simulated human's speed law and per-axis noise `noise_std`.
pub fn synthetic_path(plan: &[(usize, usize)], ticks: usize, noise_std: f64, seed: u64) -> Vec<Vec2> {
    let goals = five_goals();
    let ws = Workspace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise_std).unwrap();
    let mut x = ws.prep_region.center();
    let mut out = Vec::with_capacity(ticks);
    for k in 0..ticks {
        let goal_idx = plan.iter().rev().find(|(_, from)| k >= *from).map(|(g, _)| *g).unwrap_or(plan[0].0);
        let target = &goals[goal_idx];
        let speed = 0.3f64.min((target.mean - x).norm() / 0.12);
        x = gilm_step(x, target, speed, DT, Vec2::new(n.sample(&mut rng), n.sample(&mut rng)));
        out.push(x);
    }
    out
}

/// Per-stride log-likelihoods of each of the five goals along `path`.
pub fn stride_log_likelihoods(path: &[Vec2]) -> Vec<Vec<f64>> {
    let goals = five_goals();
    let params = GilmParams::default();
    let mut out = Vec::new();
    let mut end = CONTEXT + TP;
    while end <= path.len() {
        let w = ObservationWindow::from_wrist(path[end - CONTEXT - TP..end].to_vec(), DT, CONTEXT).unwrap();
        out.push(goal_log_likelihoods(&w, &goals, TP, &params).unwrap());
        end += TP;
    }
    out
}

/// Straight to part 2 for 3 s.
pub fn straight_scenario(seed: u64) -> Vec<Vec<f64>> {
    stride_log_likelihoods(&synthetic_path(&[(1, 0)], 90, 0.002, seed))
}

/// Part 2 for 3 s, then part 4 for 3 s.
pub fn switch_scenario(seed: u64) -> Vec<Vec<f64>> {
    stride_log_likelihoods(&synthetic_path(&[(1, 0), (3, 90)], 180, 0.002, seed))
}

/// Textbook scaled forward recursion over a symmetric sticky chain, written
/// out from scratch: alpha_j <- b_j * sum_i alpha_i A_ij, then normalise.
pub fn forward_oracle(m: usize, stay: f64, init: &[f64], log_liks: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let off = (1.0 - stay) / (m as f64 - 1.0);
    let mut alpha = init.to_vec();
    let mut out = Vec::with_capacity(log_liks.len());
    for ll in log_liks {
        let top = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut next = vec![0.0; m];
        for j in 0..m {
            let mut s = 0.0;
            for (i, a) in alpha.iter().enumerate() {
                s += a * if i == j { stay } else { off };
            }
            next[j] = s * (ll[j] - top).exp();
        }
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= z);
        alpha = next;
        out.push(alpha.clone());
    }
    out
}

/// The library's exact filter over the same inputs.
pub fn exact_filter(stay: f64, log_liks: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let space = IntentionSpace::task_level();
    let t = transition_matrix(space.m(), stay).unwrap();
    let mut post = Posterior::uniform(space);
    log_liks
        .iter()
        .map(|ll| {
            post = update(&predict(&post, &t).unwrap(), &scaled_likelihoods(ll)).unwrap();
            post.probs().to_vec()
        })
        .collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Per-stride TV distance between the particle posterior and the exact
/// posterior.
pub fn mif_tvs(n: usize, seed: u64, stay: f64, log_liks: &[Vec<f64>]) -> Vec<f64> {
    let exact = exact_filter(stay, log_liks);
    let t = transition_matrix(5, stay).unwrap();
    let mut ps = ParticleSet::uniform(IntentionSpace::task_level(), n, seed).unwrap();
    log_liks
        .iter()
        .zip(&exact)
        .map(|(ll, ex)| {
            mif_step_with_log_likelihoods(&mut ps, ll, &t).unwrap();
            total_variation(mif_posterior(&ps).probs(), ex)
        })
        .collect()
}

pub fn mif_mean_tv(n: usize, seed: u64, stay: f64, log_liks: &[Vec<f64>]) -> f64 {
    let tv = mif_tvs(n, seed, stay, log_liks);
    tv.iter().sum::<f64>() / tv.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    hit_core::harness::batch::median(v)
}

/// Per-tick checks on a finished trial: speed limits, queue conservation and
/// the CE separation property. Returns the first violation.
///
/// Separation may start below `r_min` when the human walks up to a robot that
/// is standing still (pushing, or just released from guidance), and a human
/// reaching for the robot at up to 0.3 m/s outruns a 0.1 m/s retreat. So the
/// check is twofold: the CE robot never moves toward a wrist inside `r_min`,
/// and while the human is not reaching for the robot the gap never shrinks
/// below `r_min` with both moving.
pub fn check_trial_invariants(cfg: &ScenarioConfig, log: &TrialLog) -> Result<(), String> {
    let r_min = cfg.robot.apf.r_min;
    let dt = cfg.dt;
    let mut prev_mode = RobotMode::Ce;
    let mut prev_wrist: Option<Vec2> = None;
    let mut prev_ee = Vec2::zeros();
    for r in &log.ticks {
        let limit = cfg.robot.speed_limit(r.mode).max(cfg.robot.speed_limit(prev_mode));
        if r.ee_vel.norm() > limit + 1e-9 {
            return Err(format!("tick {}: |v| {} above limit {limit} in {:?}", r.tick, r.ee_vel.norm(), r.mode));
        }
        let mut seen: BTreeMap<u8, usize> = BTreeMap::new();
        let q = &r.queues;
        for p in q.task_set.iter().chain(&q.ongoing).chain(&q.ready).chain(&q.done) {
            *seen.entry(*p).or_default() += 1;
        }
        if seen != (1..=4).map(|p| (p, 1)).collect() {
            return Err(format!("tick {}: queues {:?} do not partition the parts", r.tick, q));
        }
        if r.mode == RobotMode::Ce && prev_mode == RobotMode::Ce {
            // ee_vel was applied from the previous position; test it against
            // the separation the controller saw.
            let seen = prev_ee - r.wrist_est;
            if seen.norm() < r_min && r.ee_vel.dot(&seen) < -1e-12 {
                return Err(format!("tick {}: CE robot closes on the wrist inside r_min", r.tick));
            }
            if let Some(pw) = prev_wrist {
                let wrist_speed = (r.wrist - pw).norm() / dt;
                let both_move = wrist_speed > 0.01 && r.ee_vel.norm() > 0.01;
                let gap = (r.ee - r.wrist).norm();
                let falling = gap < (prev_ee - pw).norm();
                if r.gt_high == Some(Intention::Ce) && both_move && falling && gap < r_min {
                    return Err(format!("tick {}: CE separation fell to {gap} below r_min {r_min}", r.tick));
                }
            }
        }
        prev_mode = r.mode;
        prev_wrist = Some(r.wrist);
        prev_ee = r.ee;
    }
    Ok(())
}
