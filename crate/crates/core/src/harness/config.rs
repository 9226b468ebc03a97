//! Scenario configuration.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::tracker::TrackerConfig;
use crate::sim::control::AssemblyState;
use crate::sim::human::{Activity, HumanParams};
use crate::sim::kalman::KalmanParams;
use crate::sim::observe::ObservationNoise;
use crate::sim::robot::RobotParams;
use crate::sim::workspace::Workspace;
use crate::Vec2;

pub use crate::sim::Variant;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Scripted starting state, for scenarios that begin mid-task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub assemblies: [AssemblyState; 4],
    #[serde(default)]
    pub realigned: [bool; 4],
    /// Parts the robot has already dealt with.
    #[serde(default)]
    pub done: Vec<u8>,
    pub wrist: Option<Vec2>,
    pub ee: Option<Vec2>,
    /// Replaces the human's default agenda.
    pub agenda: Option<Vec<Activity>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub variant: Variant,
    pub seed: u64,
    /// Tick duration, s.
    pub dt: f64,
    pub duration_cap: f64,
    /// Order in which the human aligns parts; drawn from the seed when absent.
    pub schedule: Option<Vec<u8>>,
    pub injected_failures: Vec<u8>,
    /// Chance per completed push that another aligned part is knocked out
    /// of alignment.
    pub table_shake_prob: f64,
    pub workspace: Workspace,
    pub human: HumanParams,
    pub robot: RobotParams,
    pub observation: ObservationNoise,
    pub kalman: KalmanParams,
    pub tracker: TrackerConfig,
    pub initial: Option<InitialState>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            variant: Variant::Hit,
            seed: 0,
            dt: 1.0 / 30.0,
            duration_cap: 600.0,
            schedule: None,
            injected_failures: Vec::new(),
            table_shake_prob: 0.0,
            workspace: Workspace::default(),
            human: HumanParams::default(),
            robot: RobotParams::default(),
            observation: ObservationNoise::default(),
            kalman: KalmanParams::default(),
            tracker: TrackerConfig::default(),
            initial: None,
        }
    }
}

fn check_parts(path: &str, parts: &[u8], permutation: bool) -> Result<()> {
    let mut seen = [false; 4];
    for (i, &p) in parts.iter().enumerate() {
        if !(1..=4).contains(&p) {
            return Err(Error::config(format!("{path}[{i}]"), format!("part {p} is not in 1..=4")));
        }
        if seen[p as usize - 1] {
            return Err(Error::config(format!("{path}[{i}]"), format!("part {p} listed twice")));
        }
        seen[p as usize - 1] = true;
    }
    if permutation && parts.len() != 4 {
        return Err(Error::config(path, "must list all four parts"));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn new(variant: Variant, seed: u64) -> Self {
        Self {
            variant,
            seed,
            ..Self::default()
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {CONFIG_SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt", "must be > 0"));
        }
        if !(self.duration_cap > 0.0) || !self.duration_cap.is_finite() {
            return Err(Error::config("duration_cap", "must be > 0"));
        }
        if let Some(s) = &self.schedule {
            check_parts("schedule", s, true)?;
        }
        check_parts("injected_failures", &self.injected_failures, false)?;
        if !(0.0..=1.0).contains(&self.table_shake_prob) {
            return Err(Error::config("table_shake_prob", "must lie in [0, 1]"));
        }
        self.workspace.validate()?;
        self.human.validate()?;
        self.robot.validate()?;
        self.observation.validate()?;
        self.kalman.validate()?;
        self.tracker
            .validate()
            .map_err(|e| Error::config("tracker", e.to_string()))?;
        for (name, f) in [("tracker.low.dt", self.tracker.low.dt), ("tracker.high.dt", self.tracker.high.dt), ("tracker.gilm.dt", self.tracker.gilm.dt)] {
            if (f - self.dt).abs() > 1e-12 {
                return Err(Error::config(name, format!("must equal the tick duration {}", self.dt)));
            }
        }
        if self.variant == Variant::Cooperation && !self.injected_failures.is_empty() {
            return Err(Error::config(
                "injected_failures",
                "the cooperation baseline has no automated pushes to fail",
            ));
        }
        if let Some(init) = &self.initial {
            check_parts("initial.done", &init.done, false)?;
        }
        Ok(())
    }

    /// The configured schedule, or a seeded random permutation.
    pub fn resolved_schedule(&self) -> Vec<u8> {
        match &self.schedule {
            Some(s) => s.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(crate::sim::world::STREAM_SCHEDULE);
                let mut s = vec![1, 2, 3, 4];
                s.shuffle(&mut rng);
                s
            }
        }
    }
}
