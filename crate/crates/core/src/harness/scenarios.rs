//! Named scenarios used by the CLI and the acceptance suite.

use crate::harness::config::{InitialState, ScenarioConfig, Variant};
use crate::sim::control::AssemblyState;
use crate::sim::human::Activity;
use crate::sim::workspace::Workspace;
use crate::Vec2;

pub const NAMES: [&str; 3] = ["nominal", "two-failures", "approach-robot"];

/// Full HIT trial with a fixed schedule and two injected push failures.
pub fn two_failures(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        schedule: Some(vec![2, 3, 1, 4]),
        injected_failures: vec![2, 3],
        ..ScenarioConfig::new(Variant::Hit, seed)
    }
}

/// Starts with part 2 failed and realigned, the human resting beside it and
/// the robot idle at home; the human then reaches toward the robot.
pub fn approach_robot(seed: u64) -> ScenarioConfig {
    let ws = Workspace::default();
    ScenarioConfig {
        schedule: Some(vec![2, 1, 3, 4]),
        initial: Some(InitialState {
            assemblies: [
                AssemblyState::PushedOk,
                AssemblyState::PushedFailed,
                AssemblyState::PushedOk,
                AssemblyState::PushedOk,
            ],
            realigned: [false, true, false, false],
            done: vec![1, 2, 3, 4],
            wrist: Some(ws.part_center(2) + Vec2::new(0.0, -0.04)),
            ee: Some(ws.robot_home),
            agenda: Some(vec![Activity::Rest { secs: 2.0 }, Activity::Recover { part: 2 }]),
        }),
        ..ScenarioConfig::new(Variant::Hit, seed)
    }
}

pub fn by_name(name: &str, seed: u64) -> Option<ScenarioConfig> {
    match name {
        "nominal" => Some(ScenarioConfig::new(Variant::Hit, seed)),
        "two-failures" => Some(two_failures(seed)),
        "approach-robot" => Some(approach_robot(seed)),
        _ => None,
    }
}
