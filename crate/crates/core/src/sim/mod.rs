//! Closed-loop 2D simulation of the collaborative assembly task.

use serde::{Deserialize, Serialize};

pub mod control;
pub mod human;
pub mod kalman;
pub mod log;
pub mod observe;
pub mod robot;
pub mod workspace;
pub mod world;

/// Which system runs the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Task-level tracking and the coexistence module only.
    Coexistence,
    /// No tracking; the robot moves only when guided.
    Cooperation,
    /// Both tracking levels, switching between the two modules.
    Hit,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Coexistence, Variant::Cooperation, Variant::Hit];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Coexistence => "coexistence",
            Variant::Cooperation => "cooperation",
            Variant::Hit => "hit",
        }
    }

    pub fn uses_tracking(self) -> bool {
        self != Variant::Cooperation
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coexistence" | "coex" => Ok(Variant::Coexistence),
            "cooperation" | "coop" => Ok(Variant::Cooperation),
            "hit" => Ok(Variant::Hit),
            other => Err(format!("unknown variant '{other}' (expected coexistence, cooperation or hit)")),
        }
    }
}
