//! Sweeps the follow-robot region std, with and without goal back-propagation,
//! on the approach-robot scenario. Reports how fast P(CO) crosses 0.9 after
//! the reach starts, together with two-failures accuracy at each setting. The region
//! covariance only enters the rollout through back-propagation, so with it
//! off every row of that half is the same.
//!
//! cargo run --release -p hit-core --example tune_fr_cov [seeds]

use hit_core::harness::batch::median;
use hit_core::harness::scenarios;
use hit_core::intent::Level;
use hit_core::{frame_accuracy, run_trial, ScenarioConfig, TrialLog};

/// Seconds from the first `fr_reach` event to the first P(CO) > 0.9.
fn crossing_latency(log: &TrialLog) -> Option<f64> {
    let onset = log.ticks.iter().find(|r| r.events.iter().any(|e| e.starts_with("fr_reach")))?.t;
    let cross = log
        .ticks
        .iter()
        .filter(|r| r.t >= onset)
        .find(|r| r.high.as_ref().is_some_and(|h| h[1] > 0.9))?
        .t;
    Some(cross - onset)
}

fn with_fr(mut cfg: ScenarioConfig, std: f64, backprop: bool) -> ScenarioConfig {
    cfg.tracker.fr_std = std;
    cfg.tracker.gilm.goal_backprop = backprop;
    cfg
}

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    println!(
        "{:>9} {:>8} {:>14} {:>7} {:>13} {:>14}",
        "backprop", "fr_std", "latency_med_s", "missed", "tf_low_med", "tf_high_med"
    );
    for (backprop, std) in [false, true].into_iter().flat_map(|b| [0.01, 0.03, 0.05, 0.08, 0.12].map(|s| (b, s))) {
        let mut lat = Vec::new();
        let mut missed = 0;
        let (mut low, mut high) = (Vec::new(), Vec::new());
        for seed in 0..seeds {
            let log = run_trial(&with_fr(scenarios::approach_robot(seed), std, backprop)).expect("valid scenario");
            match crossing_latency(&log) {
                Some(l) => lat.push(l),
                None => missed += 1,
            }
            let log = run_trial(&with_fr(scenarios::two_failures(seed), std, backprop)).expect("valid scenario");
            low.extend(frame_accuracy(&log, Level::Task));
            high.extend(frame_accuracy(&log, Level::Interactive));
        }
        println!(
            "{backprop:>9} {std:>8.3} {:>14.3} {missed:>7} {:>13.3} {:>14.3}",
            median(&lat),
            median(&low),
            median(&high)
        );
    }
}
