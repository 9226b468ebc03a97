use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::harness::metrics::{compute_metrics, Metrics};
use crate::sim::log::TrialLog;
use crate::sim::world::World;

/// Runs one trial to completion or the duration cap.
pub fn run_trial(cfg: &ScenarioConfig) -> Result<TrialLog> {
    World::new(cfg.clone())?.run()
}

pub fn run_trial_metrics(cfg: &ScenarioConfig) -> Result<Metrics> {
    Ok(compute_metrics(&run_trial(cfg)?))
}
