//! Synthetic wrist detector: Gaussian position noise plus random dropouts.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationNoise {
    /// Per-axis standard deviation, m.
    pub std: f64,
    /// Probability that a frame has no detection.
    pub p_drop: f64,
}

impl Default for ObservationNoise {
    fn default() -> Self {
        Self {
            std: 0.01,
            p_drop: 0.02,
        }
    }
}

impl ObservationNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.std >= 0.0) || !self.std.is_finite() {
            return Err(Error::config("observation.std", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return Err(Error::config("observation.p_drop", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub fn observe<R: Rng + ?Sized>(wrist: Vec2, noise: &ObservationNoise, rng: &mut R) -> Option<Vec2> {
    // Always draw the dropout variate so the stream stays aligned across
    // parameter changes.
    let drop: f64 = rng.random();
    if drop < noise.p_drop {
        return None;
    }
    if noise.std == 0.0 {
        return Some(wrist);
    }
    let n = Normal::new(0.0, noise.std).expect("validated std");
    Some(wrist + Vec2::new(n.sample(rng), n.sample(rng)))
}
