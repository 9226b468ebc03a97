//! High-level (interactive intention) tracker.
//!
//! CO is scored by the GILM likelihood under the failure-recovery region
//! around the end-effector. CE is scored by mixing the task-goal likelihoods
//! with the CE link row, i.e. the low-level prediction restricted to the
//! parts.

use crate::intent::{
    hierarchical_log_likelihood, link_distribution, predict, scaled_likelihoods, update,
    FilterError, Intention, Level, LinkDistribution, Posterior, Result, TransitionModel,
};
use crate::prediction::gilm::{fr_goal_region, gilm_log_likelihood, GilmParams, GoalRegion, ObservationWindow};
use crate::Mat2;

/// Everything the high-level step needs besides the data.
#[derive(Debug, Clone)]
pub struct HighLevelModel {
    /// Task goals in low-level label order (FR excluded).
    pub task_goals: Vec<GoalRegion>,
    pub fr_cov: Mat2,
    pub params: GilmParams,
    pub transition: TransitionModel,
    /// New samples consumed per high-level step.
    pub tp: usize,
}

#[derive(Debug, Clone)]
pub struct HighLevelStep {
    pub predicted: Posterior,
    pub posterior: Posterior,
    pub link: LinkDistribution,
    /// Low-level GILM log-likelihoods on this window, FR last.
    pub low_log_likelihoods: Vec<f64>,
    /// `[CE, CO]` log-likelihoods.
    pub log_likelihoods: [f64; 2],
}

/// One predict/update step of the interactive intention.
pub fn high_level_step(
    prior: &Posterior,
    window: &ObservationWindow,
    low_predicted: &Posterior,
    model: &HighLevelModel,
) -> Result<HighLevelStep> {
    let space = prior.space();
    if space.level() != Level::Interactive {
        return Err(FilterError::InvalidParameter("high-level prior must be over {CE, CO}".into()));
    }
    let low_space = low_predicted.space();
    let fr_index = low_space.index_of(Intention::Fr).expect("task level has FR");
    if model.task_goals.len() + 1 != low_space.m() {
        return Err(FilterError::DimensionMismatch {
            expected: low_space.m() - 1,
            got: model.task_goals.len(),
        });
    }

    let anchor = window.robot_ee()[window.context_len().saturating_sub(1)];
    let fr = fr_goal_region(anchor, model.fr_cov);
    let mut low_ll = Vec::with_capacity(low_space.m());
    let mut goals = model.task_goals.iter();
    for i in 0..low_space.m() {
        let goal = if i == fr_index { &fr } else { goals.next().expect("counted above") };
        low_ll.push(gilm_log_likelihood(window, goal, model.tp, &model.params)?);
    }

    let link = link_distribution(low_predicted)?;
    let ce = hierarchical_log_likelihood(&low_ll, &link.ce)?;
    let co = hierarchical_log_likelihood(&low_ll, &link.co)?;
    let mut ll = vec![0.0; 2];
    ll[space.index_of(Intention::Ce).expect("interactive")] = ce;
    ll[space.index_of(Intention::Co).expect("interactive")] = co;

    let predicted = predict(prior, &model.transition)?;
    let posterior = update(&predicted, &scaled_likelihoods(&ll))?;
    Ok(HighLevelStep {
        predicted,
        posterior,
        link,
        low_log_likelihoods: low_ll,
        log_likelihoods: [ce, co],
    })
}
