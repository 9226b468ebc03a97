//! Recursive filtering over a discrete, evolving intention.
//!
//! An intention `G_t` takes one of `m` values and evolves as a Markov chain
//! with a symmetric "sticky" transition matrix: it stays put with probability
//! `alpha` and jumps uniformly to any other value otherwise. Each filter step
//! covers a stride of `Tp` observation ticks during which the intention is
//! held constant:
//!
//! ```text
//! predict:  P(g' | x_1:t)      = sum_g T[g, g'] P(g | x_1:t)
//! update:   P(g' | x_1:t+Tp)  ∝  P(x_t+1:t+Tp | x_1:t, g') P(g' | x_1:t)
//! ```
//!
//! The trajectory likelihood in the update factorises into a product of
//! per-step human-state densities (the robot terms cancel because the robot
//! is a deterministic function of the observed history), see
//! [`trajectory_likelihood`].
//!
//! Two intention levels are stacked: the interactive level (coexistence vs
//! cooperation) scores its hypotheses by mixing task-level likelihoods through
//! a [`LinkDistribution`], see [`hierarchical_likelihood`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the intention filter primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate evidence: every likelihood is zero")]
    DegenerateEvidence,

    #[error("non-finite probability at index {0}")]
    NonFinite(usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("horizon of {horizon} steps exceeds the {available} new observations available")]
    InsufficientObservations { horizon: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, FilterError>;

/// Identifier of one intention value at either level of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Intention {
    /// Aligning (or realigning) part `n`, 1-based.
    Part(u8),
    /// Failure recovery: reach for and guide the robot end-effector.
    Fr,
    /// Coexistence: work side by side without contact.
    Ce,
    /// Cooperation: physically guide the robot.
    Co,
}

impl Intention {
    pub fn part_number(self) -> Option<u8> {
        match self {
            Intention::Part(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Intention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intention::Part(n) => write!(f, "{n}"),
            Intention::Fr => f.write_str("FR"),
            Intention::Ce => f.write_str("CE"),
            Intention::Co => f.write_str("CO"),
        }
    }
}

impl From<Intention> for String {
    fn from(value: Intention) -> Self {
        value.to_string()
    }
}

impl TryFrom<String> for Intention {
    type Error = String;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        value.parse()
    }
}

impl std::str::FromStr for Intention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "FR" => Ok(Intention::Fr),
            "CE" => Ok(Intention::Ce),
            "CO" => Ok(Intention::Co),
            other => other
                .parse::<u8>()
                .ok()
                .filter(|n| *n >= 1)
                .map(Intention::Part)
                .ok_or_else(|| format!("unknown intention label `{other}`")),
        }
    }
}

/// Hierarchy level of an intention space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    /// Task intention: which part the human works on, or failure recovery.
    Task = 1,
    /// Interactive intention: coexistence or cooperation.
    Interactive = 2,
}

/// Ordered, finite sample space of one intention variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentionSpace {
    level: Level,
    labels: Vec<Intention>,
}

impl IntentionSpace {
    pub fn new(level: Level, labels: Vec<Intention>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(FilterError::InvalidParameter(format!(
                "an intention space needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(FilterError::InvalidParameter(format!("duplicate label {a}")));
            }
        }
        let has = |l: Intention| labels.contains(&l);
        match level {
            Level::Task => {
                if !has(Intention::Fr) {
                    return Err(FilterError::InvalidParameter(
                        "task-level space must contain FR".into(),
                    ));
                }
                if let Some(bad) = labels
                    .iter()
                    .find(|l| matches!(l, Intention::Ce | Intention::Co))
                {
                    return Err(FilterError::InvalidParameter(format!(
                        "interactive label {bad} in task-level space"
                    )));
                }
            }
            Level::Interactive => {
                if labels.len() != 2 || !has(Intention::Ce) || !has(Intention::Co) {
                    return Err(FilterError::InvalidParameter(
                        "interactive space must be exactly {CE, CO}".into(),
                    ));
                }
            }
        }
        Ok(Self { level, labels })
    }

    /// Parts 1-4 followed by FR.
    pub fn task_level() -> Arc<Self> {
        Arc::new(Self {
            level: Level::Task,
            labels: vec![
                Intention::Part(1),
                Intention::Part(2),
                Intention::Part(3),
                Intention::Part(4),
                Intention::Fr,
            ],
        })
    }

    /// CE followed by CO.
    pub fn interactive_level() -> Arc<Self> {
        Arc::new(Self {
            level: Level::Interactive,
            labels: vec![Intention::Ce, Intention::Co],
        })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn labels(&self) -> &[Intention] {
        &self.labels
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: Intention) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn label(&self, index: usize) -> Intention {
        self.labels[index]
    }
}

/// Time-invariant intention dynamics `P(g_{t+Tp} | g_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    m: usize,
    alpha: f64,
    /// Row-major `m x m`; row = from, column = to.
    entries: Vec<f64>,
}

/// Builds the sticky transition matrix: `alpha` on the diagonal and
/// `(1 - alpha) / (m - 1)` everywhere else.
pub fn transition_matrix(m: usize, alpha: f64) -> Result<TransitionModel> {
    if m < 2 {
        return Err(FilterError::InvalidParameter(format!("m must be >= 2, got {m}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FilterError::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let off = (1.0 - alpha) / (m - 1) as f64;
    let mut entries = vec![off; m * m];
    for i in 0..m {
        entries[i * m + i] = alpha;
    }
    Ok(TransitionModel { m, alpha, entries })
}

impl TransitionModel {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.m + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.m..(from + 1) * self.m]
    }
}

/// Probability vector over an intention space at one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    space: Arc<IntentionSpace>,
    probs: Vec<f64>,
    step: u64,
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl Posterior {
    pub fn new(space: Arc<IntentionSpace>, probs: Vec<f64>, step: u64) -> Result<Self> {
        if probs.len() != space.m() {
            return Err(FilterError::DimensionMismatch {
                expected: space.m(),
                got: probs.len(),
            });
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite()) {
            return Err(FilterError::NonFinite(i));
        }
        if let Some(p) = probs.iter().find(|p| **p < 0.0) {
            return Err(FilterError::InvalidDistribution(format!("negative entry {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(FilterError::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { space, probs, step })
    }

    pub fn uniform(space: Arc<IntentionSpace>) -> Self {
        let m = space.m();
        Self {
            space,
            probs: vec![1.0 / m as f64; m],
            step: 0,
        }
    }

    pub fn point_mass(space: Arc<IntentionSpace>, index: usize) -> Self {
        let mut probs = vec![0.0; space.m()];
        probs[index] = 1.0;
        Self {
            space,
            probs,
            step: 0,
        }
    }

    /// Normalises nonnegative weights into a posterior.
    pub fn from_weights(space: Arc<IntentionSpace>, weights: &[f64], step: u64) -> Result<Self> {
        if weights.len() != space.m() {
            return Err(FilterError::DimensionMismatch {
                expected: space.m(),
                got: weights.len(),
            });
        }
        let probs = normalize(weights)?;
        Ok(Self { space, probs, step })
    }

    pub fn space(&self) -> &Arc<IntentionSpace> {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn prob_of(&self, label: Intention) -> f64 {
        self.space.index_of(label).map_or(0.0, |i| self.probs[i])
    }
}

fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(FilterError::NonFinite(i));
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(FilterError::InvalidDistribution("negative weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(FilterError::DegenerateEvidence);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Prediction step: pushes the prior through the transition model.
pub fn predict(prior: &Posterior, transition: &TransitionModel) -> Result<Posterior> {
    let m = prior.space.m();
    if transition.m() != m {
        return Err(FilterError::DimensionMismatch {
            expected: m,
            got: transition.m(),
        });
    }
    let mut out = vec![0.0; m];
    for (from, p) in prior.probs.iter().enumerate() {
        for (to, o) in out.iter_mut().enumerate() {
            *o += transition.get(from, to) * p;
        }
    }
    Ok(Posterior {
        space: prior.space.clone(),
        probs: out,
        step: prior.step + 1,
    })
}

/// Update step: multiplies the prediction by the trajectory likelihoods and
/// renormalises. Likelihoods may be arbitrarily scaled.
pub fn update(predicted: &Posterior, likelihoods: &[f64]) -> Result<Posterior> {
    let m = predicted.space.m();
    if likelihoods.len() != m {
        return Err(FilterError::DimensionMismatch {
            expected: m,
            got: likelihoods.len(),
        });
    }
    if let Some(i) = likelihoods.iter().position(|l| !l.is_finite()) {
        return Err(FilterError::NonFinite(i));
    }
    if likelihoods.iter().any(|l| *l < 0.0) {
        return Err(FilterError::InvalidParameter("negative likelihood".into()));
    }
    if likelihoods.iter().all(|l| *l == 0.0) {
        return Err(FilterError::DegenerateEvidence);
    }
    let joint: Vec<f64> = predicted
        .probs
        .iter()
        .zip(likelihoods)
        .map(|(p, l)| p * l)
        .collect();
    let probs = normalize(&joint)?;
    Ok(Posterior {
        space: predicted.space.clone(),
        probs,
        step: predicted.step,
    })
}

/// Converts log-likelihoods into linear likelihoods scaled so the largest is
/// one. Entries at `-inf` map to zero.
pub fn scaled_likelihoods(log_likelihoods: &[f64]) -> Vec<f64> {
    let max = log_likelihoods
        .iter()
        .copied()
        .filter(|l| !l.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![0.0; log_likelihoods.len()];
    }
    log_likelihoods
        .iter()
        .map(|l| if l.is_nan() { 0.0 } else { (l - max).exp() })
        .collect()
}

/// Index of the largest entry; ties go to the lowest index. Works on
/// unnormalised weights as well.
pub fn map_index(probs: &[f64]) -> Result<usize> {
    if probs.is_empty() {
        return Err(FilterError::InvalidParameter("empty probability vector".into()));
    }
    if let Some(i) = probs.iter().position(|p| !p.is_finite()) {
        return Err(FilterError::NonFinite(i));
    }
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Most probable intention of a posterior.
pub fn map_intention(posterior: &Posterior) -> Result<Intention> {
    map_index(&posterior.probs).map(|i| posterior.space.label(i))
}

/// Per-step density model for the human state given an intention.
///
/// `tau` is 1-based and indexes the new observations that follow the
/// conditioning history held in the window.
pub trait StepDensity<W: ?Sized, G: ?Sized> {
    /// Number of new observations available after the conditioning point.
    fn available_steps(&self, window: &W) -> usize;

    /// `log P(x_{t+tau} | history, g)`.
    fn step_log_density(&self, window: &W, goal: &G, tau: usize) -> f64;
}

/// `log prod_{tau=1..Tp} P(x_{t+tau} | history, g)`, accumulated in log space.
pub fn trajectory_log_likelihood<W, G, M>(
    window: &W,
    model: &M,
    goal: &G,
    horizon: usize,
) -> Result<f64>
where
    W: ?Sized,
    G: ?Sized,
    M: StepDensity<W, G> + ?Sized,
{
    if horizon == 0 {
        return Err(FilterError::InvalidParameter("horizon must be >= 1".into()));
    }
    let available = model.available_steps(window);
    if horizon > available {
        return Err(FilterError::InsufficientObservations { horizon, available });
    }
    let mut total = 0.0;
    for tau in 1..=horizon {
        let l = model.step_log_density(window, goal, tau);
        if l.is_nan() {
            return Err(FilterError::NonFinite(tau - 1));
        }
        total += l;
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// Linear-space version of [`trajectory_log_likelihood`]. Returns 0 when the
/// product underflows.
pub fn trajectory_likelihood<W, G, M>(window: &W, model: &M, goal: &G, horizon: usize) -> Result<f64>
where
    W: ?Sized,
    G: ?Sized,
    M: StepDensity<W, G> + ?Sized,
{
    trajectory_log_likelihood(window, model, goal, horizon).map(f64::exp)
}

/// `P(g^{l+1} | low level)`-conditional of the task intention, one row per
/// interactive intention.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDistribution {
    /// Row for CE: task posterior restricted to the parts.
    pub ce: Vec<f64>,
    /// Row for CO: point mass on FR.
    pub co: Vec<f64>,
    /// True when the CE row had no part mass and fell back to uniform.
    pub degenerate: bool,
}

impl LinkDistribution {
    pub fn row(&self, high: Intention) -> Option<&[f64]> {
        match high {
            Intention::Ce => Some(&self.ce),
            Intention::Co => Some(&self.co),
            _ => None,
        }
    }
}

/// Builds the conditional link rows from the task-level prediction-step
/// output at the current interactive step.
pub fn link_distribution(low_predicted: &Posterior) -> Result<LinkDistribution> {
    let space = low_predicted.space();
    if space.level() != Level::Task {
        return Err(FilterError::InvalidParameter(
            "link rows are built from a task-level posterior".into(),
        ));
    }
    let fr = space
        .index_of(Intention::Fr)
        .expect("task-level spaces always contain FR");
    let m = space.m();

    let mut co = vec![0.0; m];
    co[fr] = 1.0;

    let part_mass: f64 = low_predicted
        .probs()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fr)
        .map(|(_, p)| p)
        .sum();
    let mut degenerate = false;
    let ce = if part_mass > 0.0 {
        low_predicted
            .probs()
            .iter()
            .enumerate()
            .map(|(i, p)| if i == fr { 0.0 } else { p / part_mass })
            .collect()
    } else {
        log::warn!("CE link row has no task-goal mass; falling back to uniform over parts");
        degenerate = true;
        let u = 1.0 / (m - 1) as f64;
        (0..m).map(|i| if i == fr { 0.0 } else { u }).collect()
    };
    Ok(LinkDistribution { ce, co, degenerate })
}

/// `sum_g P(x | g) P(g | x_1:t, g^{l+1})`.
pub fn hierarchical_likelihood(low_level_likelihoods: &[f64], link_row: &[f64]) -> Result<f64> {
    if low_level_likelihoods.len() != link_row.len() {
        return Err(FilterError::DimensionMismatch {
            expected: link_row.len(),
            got: low_level_likelihoods.len(),
        });
    }
    Ok(low_level_likelihoods
        .iter()
        .zip(link_row)
        .map(|(l, w)| l * w)
        .sum())
}

/// Log-space [`hierarchical_likelihood`]; zero-weight terms are skipped so
/// `-inf` likelihoods under excluded intentions do not poison the sum.
pub fn hierarchical_log_likelihood(low_level_log_likelihoods: &[f64], link_row: &[f64]) -> Result<f64> {
    if low_level_log_likelihoods.len() != link_row.len() {
        return Err(FilterError::DimensionMismatch {
            expected: link_row.len(),
            got: low_level_log_likelihoods.len(),
        });
    }
    let terms: Vec<f64> = low_level_log_likelihoods
        .iter()
        .zip(link_row)
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, w)| l + w.ln())
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Ok(max);
    }
    Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
}

/// Filter stride configuration for one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Prediction horizon in observation ticks.
    pub tp: usize,
    /// Observation tick duration in seconds.
    pub dt: f64,
    /// Transition stay-probability.
    pub alpha: f64,
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tp < 1 {
            return Err(FilterError::InvalidParameter("tp must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(FilterError::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FilterError::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Stride length in seconds.
    pub fn horizon_secs(&self) -> f64 {
        self.tp as f64 * self.dt
    }
}
