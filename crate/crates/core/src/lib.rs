//! Hierarchical intention tracking for close-proximity human-robot
//! collaboration.
//!
//! The crate is layered bottom-up:
//!
//! * [`intent`] - recursive Bayesian filtering over a discrete, evolving
//!   intention and the two-level hierarchical composition.
//! * [`prediction`] - intention-conditioned wrist motion models (GILM), the
//!   particle-based low-level tracker and the high-level tracker.
//! * [`sim`] - a closed-loop planar simulation of the four-part assembly task
//!   (synthetic human, robot controller, noisy observations, push model).
//! * [`harness`] - scenario configuration, trials, metrics, batch evaluation
//!   and the live session service.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod intent;
pub mod prediction;
pub mod sim;

pub use error::{Error, Result};
pub use harness::config::{ScenarioConfig, Variant};
pub use harness::metrics::{compute_metrics, frame_accuracy, Metrics};
pub use harness::trial::run_trial;
pub use intent::{
    hierarchical_likelihood, link_distribution, map_intention, predict, trajectory_likelihood,
    transition_matrix, update, FilterConfig, FilterError, Intention, IntentionSpace, Level,
    LinkDistribution, Posterior, TransitionModel,
};
pub use prediction::gilm::{GilmParams, GoalKind, GoalRegion, ObservationWindow};
pub use prediction::mif::{Particle, ParticleSet};
pub use sim::log::{TickRecord, TrialLog};
pub use sim::world::World;

/// Planar position or velocity, metres or metres per second.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2x2 covariance, square metres.
pub type Mat2 = nalgebra::Matrix2<f64>;
