//! Both tracking levels driven from one stream of smoothed wrist samples.
//!
//! Every sample is buffered. The low level steps whenever `low.tp` new
//! samples have arrived; the high level steps every `high.tp` samples and
//! consumes the most recent low-level prediction-step output.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::intent::{
    transition_matrix, FilterConfig, FilterError, IntentionSpace, Posterior, Result,
    TransitionModel,
};
use crate::prediction::gilm::{fr_goal_region, GilmParams, GoalRegion, ObservationWindow};
use crate::prediction::hierarchy::{high_level_step, HighLevelModel, HighLevelStep};
use crate::prediction::mif::{mif_step, MifOutput, ParticleSet};
use crate::{Mat2, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub particles: usize,
    /// Task-level stride: 5 ticks at 30 Hz.
    pub low: FilterConfig,
    /// Interactive-level stride: 6 ticks at 30 Hz, i.e. one step at 5 Hz.
    pub high: FilterConfig,
    /// Observation context preceding each stride (0.5 s at 30 Hz).
    pub context_len: usize,
    pub gilm: GilmParams,
    /// Standard deviation of the failure-recovery region around the
    /// end-effector, m.
    pub fr_std: f64,
    /// Initial probability of cooperation.
    pub initial_co: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let dt = 1.0 / 30.0;
        Self {
            particles: 1000,
            low: FilterConfig {
                tp: 5,
                dt,
                alpha: 0.96,
            },
            high: FilterConfig {
                tp: 6,
                dt,
                alpha: 0.99,
            },
            context_len: 15,
            gilm: GilmParams::default(),
            fr_std: 0.03,
            initial_co: 0.05,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.low.validate()?;
        self.high.validate()?;
        self.gilm.validate()?;
        if self.particles == 0 {
            return Err(FilterError::InvalidParameter("particles must be >= 1".into()));
        }
        if self.context_len < 2 {
            return Err(FilterError::InvalidParameter("context_len must be >= 2".into()));
        }
        if !(self.fr_std > 0.0) {
            return Err(FilterError::InvalidParameter("fr_std must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_co) {
            return Err(FilterError::InvalidParameter("initial_co must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn fr_cov(&self) -> Mat2 {
        Mat2::identity() * (self.fr_std * self.fr_std)
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    wrist: Vec2,
    ee: Vec2,
}

/// Which levels advanced on the last pushed sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrackerTick {
    pub low: bool,
    pub high: bool,
}

#[derive(Debug, Clone)]
pub struct IntentionTracker {
    cfg: TrackerConfig,
    task_goals: Vec<GoalRegion>,
    low_transition: TransitionModel,
    high_model: HighLevelModel,
    particles: ParticleSet,
    buffer: VecDeque<Sample>,
    samples: u64,
    low_predicted: Posterior,
    low_posterior: Posterior,
    high_posterior: Posterior,
    last_low: Option<MifOutput>,
    last_high: Option<HighLevelStep>,
}

impl IntentionTracker {
    /// `task_goals` are the regions of parts 1-4 in order.
    pub fn new(cfg: TrackerConfig, task_goals: Vec<GoalRegion>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let low_space = IntentionSpace::task_level();
        if task_goals.len() + 1 != low_space.m() {
            return Err(FilterError::DimensionMismatch {
                expected: low_space.m() - 1,
                got: task_goals.len(),
            });
        }
        let high_space = IntentionSpace::interactive_level();
        let high_posterior = Posterior::new(
            high_space.clone(),
            vec![1.0 - cfg.initial_co, cfg.initial_co],
            0,
        )?;
        let high_model = HighLevelModel {
            task_goals: task_goals.clone(),
            fr_cov: cfg.fr_cov(),
            params: cfg.gilm,
            transition: transition_matrix(2, cfg.high.alpha)?,
            tp: cfg.high.tp,
        };
        Ok(Self {
            low_transition: transition_matrix(low_space.m(), cfg.low.alpha)?,
            particles: ParticleSet::uniform(low_space.clone(), cfg.particles, seed)?,
            buffer: VecDeque::with_capacity(cfg.context_len + cfg.low.tp.max(cfg.high.tp)),
            samples: 0,
            low_predicted: Posterior::uniform(low_space.clone()),
            low_posterior: Posterior::uniform(low_space),
            high_posterior,
            last_low: None,
            last_high: None,
            high_model,
            task_goals,
            cfg,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn low_posterior(&self) -> &Posterior {
        &self.low_posterior
    }

    pub fn low_predicted(&self) -> &Posterior {
        &self.low_predicted
    }

    pub fn high_posterior(&self) -> &Posterior {
        &self.high_posterior
    }

    pub fn last_low(&self) -> Option<&MifOutput> {
        self.last_low.as_ref()
    }

    pub fn last_high(&self) -> Option<&HighLevelStep> {
        self.last_high.as_ref()
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    fn window(&self, tp: usize) -> Result<ObservationWindow> {
        let n = (self.cfg.context_len + tp).min(self.buffer.len());
        let skip = self.buffer.len() - n;
        let (mut ts, mut wr, mut ee) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for s in self.buffer.iter().skip(skip) {
            ts.push(s.t);
            wr.push(s.wrist);
            ee.push(s.ee);
        }
        ObservationWindow::new(ts, wr, ee, n - tp)
    }

    /// Feeds one smoothed wrist sample together with the end-effector
    /// position at the same tick.
    pub fn push(&mut self, t: f64, wrist: Vec2, ee: Vec2) -> Result<TrackerTick> {
        if let Some(last) = self.buffer.back() {
            if !(t > last.t) {
                return Err(FilterError::InvalidParameter(format!(
                    "sample time {t} does not advance past {}",
                    last.t
                )));
            }
        }
        let cap = self.cfg.context_len + self.cfg.low.tp.max(self.cfg.high.tp);
        if self.buffer.len() == cap {
            self.buffer.pop_front();
        }
        self.buffer.push_back(Sample { t, wrist, ee });
        self.samples += 1;

        let mut tick = TrackerTick::default();
        let ready = |tp: usize| self.samples.is_multiple_of(tp as u64) && self.samples >= (self.cfg.context_len + tp) as u64;

        if ready(self.cfg.low.tp) {
            let window = self.window(self.cfg.low.tp)?;
            let anchor = window.robot_ee()[window.context_len() - 1];
            let mut goals = self.task_goals.clone();
            goals.push(fr_goal_region(anchor, self.cfg.fr_cov()));
            let out = mif_step(
                &mut self.particles,
                &window,
                &goals,
                &self.cfg.low,
                &self.low_transition,
                &self.cfg.gilm,
            )?;
            self.low_predicted = out.predicted.clone();
            self.low_posterior = out.posterior.clone();
            self.last_low = Some(out);
            tick.low = true;
        }
        if ready(self.cfg.high.tp) {
            let window = self.window(self.cfg.high.tp)?;
            let step = high_level_step(&self.high_posterior, &window, &self.low_predicted, &self.high_model)?;
            self.high_posterior = step.posterior.clone();
            self.last_high = Some(step);
            tick.high = true;
        }
        Ok(tick)
    }
}
