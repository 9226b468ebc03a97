//! Robot-side building blocks: artificial potential field, velocity
//! smoothing, admittance, push model, task queues and mode switching.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::{map_index, Posterior};
use crate::Vec2;

/// Robot operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobotMode {
    /// Coexistence: goal reaching with human avoidance.
    Ce,
    /// Cooperation, before contact: the end-effector approaches the wrist.
    CoApproach,
    /// Cooperation with contact: admittance control.
    CoGuided,
}

impl RobotMode {
    pub fn is_cooperation(self) -> bool {
        !matches!(self, RobotMode::Ce)
    }

    pub fn label(self) -> &'static str {
        if self.is_cooperation() {
            "CO"
        } else {
            "CE"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApfMode {
    Ce,
    CoApproach,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApfParams {
    /// Goal-attraction speed, m/s.
    pub c: f64,
    /// Human-term gain, m^3/s: magnitude is `k_h / r^2`.
    pub k_h: f64,
    /// Distances below this are clipped to keep the human term finite, m.
    pub r_min: f64,
    /// No human influence beyond this distance, m.
    pub r_max: f64,
    /// Within `c * brake_time` of the goal the attraction tapers linearly, s.
    pub brake_time: f64,
}

impl Default for ApfParams {
    fn default() -> Self {
        Self {
            c: 0.08,
            k_h: 0.002,
            r_min: 0.05,
            r_max: 0.5,
            brake_time: 0.3,
        }
    }
}

/// Goal and human terms of the potential field, before clipping.
pub fn apf_components(ee: Vec2, goal: Vec2, wrist: Vec2, mode: ApfMode, p: &ApfParams) -> (Vec2, Vec2) {
    let to_goal = goal - ee;
    let dist = to_goal.norm();
    let v_goal = if dist < 1e-9 {
        Vec2::zeros()
    } else {
        to_goal / dist * p.c.min(dist / p.brake_time)
    };

    let to_wrist = wrist - ee;
    let r = to_wrist.norm();
    let v_human = if r > p.r_max {
        Vec2::zeros()
    } else {
        let mag = p.k_h / r.clamp(p.r_min, p.r_max).powi(2);
        // A coincident wrist gives no direction; retreat toward the robot's
        // side of the table (+y) in CE and hold still in CO.
        let toward = if r < 1e-9 { Vec2::new(0.0, -1.0) } else { to_wrist / r };
        match mode {
            ApfMode::Ce => -toward * mag,
            ApfMode::CoApproach if r < 1e-9 => Vec2::zeros(),
            ApfMode::CoApproach => toward * mag,
        }
    };
    (v_goal, v_human)
}

pub fn clip_norm(v: Vec2, limit: f64) -> Vec2 {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}

/// Commanded velocity: goal attraction plus the human term, clipped to the
/// mode's speed limit.
pub fn apf_velocity(ee: Vec2, goal: Vec2, wrist: Vec2, mode: ApfMode, p: &ApfParams, limit: f64) -> Vec2 {
    let (g, h) = apf_components(ee, goal, wrist, mode, p);
    clip_norm(g + h, limit)
}

/// `k * v_current + (1 - k) * v_goal`.
pub fn smooth_velocity(v_current: Vec2, v_goal: Vec2, k: f64) -> Vec2 {
    v_current * k + v_goal * (1.0 - k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceParams {
    /// Velocity = pull / damping.
    pub damping: f64,
    /// Pull magnitude below which the human is considered to have let go.
    pub f_min: f64,
    /// How long the pull must stay below `f_min` to end guidance, s.
    pub end_secs: f64,
    /// Wrist-to-end-effector distance that counts as contact, m.
    pub contact_radius: f64,
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        Self {
            damping: 10.0,
            f_min: 0.5,
            end_secs: 1.0,
            contact_radius: 0.03,
        }
    }
}

/// Pure-damping admittance with an end-of-guidance detector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Admittance {
    low_for: f64,
}

impl Admittance {
    pub fn reset(&mut self) {
        self.low_for = 0.0;
    }

    pub fn step(
        &mut self,
        mode: RobotMode,
        pull: Vec2,
        dt: f64,
        p: &AdmittanceParams,
        speed_limit: f64,
    ) -> Result<(Vec2, bool)> {
        if mode != RobotMode::CoGuided {
            return Err(Error::NotCooperating);
        }
        if pull.norm() < p.f_min {
            self.low_for += dt;
        } else {
            self.low_for = 0.0;
        }
        let ended = self.low_for >= p.end_secs - 1e-9;
        Ok((clip_norm(pull / p.damping, speed_limit), ended))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushParams {
    /// Half-width of the uniform position noise, m.
    pub delta: f64,
    /// Offsets within this radius seat the part, m.
    pub tol: f64,
    /// Time spent pushing once at the part, s.
    pub duration: f64,
    /// Automated pushes abort when the wrist comes closer than this, m.
    pub abort_radius: f64,
    /// Guided pushes act on a failed part within this distance, m.
    pub recovery_radius: f64,
}

impl Default for PushParams {
    fn default() -> Self {
        let delta = 0.02;
        Self {
            delta,
            // 1 - pi tol^2 / (4 delta^2) = 0.25
            tol: delta * (3.0 / std::f64::consts::PI).sqrt(),
            duration: 1.5,
            abort_radius: 0.2,
            recovery_radius: 0.05,
        }
    }
}

impl PushParams {
    pub fn sample_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Vec2::new((2.0 * u - 1.0) * self.delta, (2.0 * v - 1.0) * self.delta)
    }

    pub fn succeeds(&self, offset: Vec2) -> bool {
        offset.norm() <= self.tol
    }

    /// Closed-form failure probability of a uniform offset, valid for
    /// `tol <= delta`.
    pub fn failure_probability(&self) -> f64 {
        if self.delta == 0.0 {
            return 0.0;
        }
        1.0 - std::f64::consts::PI * self.tol * self.tol / (4.0 * self.delta * self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssemblyState {
    Unaligned,
    Aligned,
    PushedOk,
    PushedFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushOutcome {
    pub part: u8,
    pub offset: Vec2,
    pub ok: bool,
}

/// Samples a push on `part`, which must be at the front of the ready queue.
pub fn push_action<R: Rng + ?Sized>(
    queues: &Queues,
    part: u8,
    params: &PushParams,
    rng: &mut R,
) -> Result<PushOutcome> {
    if queues.ready.front() != Some(&part) {
        return Err(Error::Push(format!("part {part} is not next in the ready queue")));
    }
    let offset = params.sample_offset(rng);
    Ok(PushOutcome {
        part,
        offset,
        ok: params.succeeds(offset),
    })
}

/// Task bookkeeping: every part sits in exactly one collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Queues {
    pub task_set: Vec<u8>,
    pub ongoing: VecDeque<u8>,
    pub ready: VecDeque<u8>,
    pub done: Vec<u8>,
}

impl Queues {
    pub fn new(parts: &[u8]) -> Self {
        Self {
            task_set: parts.to_vec(),
            ongoing: VecDeque::new(),
            ready: VecDeque::new(),
            done: Vec::new(),
        }
    }

    /// All parts across the four collections, sorted.
    pub fn all_parts(&self) -> Vec<u8> {
        let mut all: Vec<u8> = self
            .task_set
            .iter()
            .chain(&self.ongoing)
            .chain(&self.ready)
            .chain(&self.done)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }

    pub fn finish(&mut self, part: u8) {
        self.ready.retain(|p| *p != part);
        self.ongoing.retain(|p| *p != part);
        self.task_set.retain(|p| *p != part);
        if !self.done.contains(&part) {
            self.done.push(part);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueueParams {
    pub ongoing_threshold: f64,
    pub ongoing_sustain: f64,
    pub ready_threshold: f64,
}

impl Default for QueueParams {
    fn default() -> Self {
        Self {
            ongoing_threshold: 0.80,
            ongoing_sustain: 1.5,
            ready_threshold: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueEvent {
    Ongoing(u8),
    Ready(u8),
}

/// Sustain state for the task-set to ongoing transition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueTimer {
    candidate: Option<(u8, f64)>,
}

/// `post` is over parts 1-4 followed by FR.
pub fn queue_update(
    queues: &mut Queues,
    timer: &mut QueueTimer,
    post: &Posterior,
    t: f64,
    params: &QueueParams,
) -> Vec<QueueEvent> {
    let mut events = Vec::new();
    let probs = post.probs();
    let best = map_index(probs).expect("posteriors are finite");
    let part = post.space().label(best).part_number();

    match part {
        Some(part) if queues.task_set.contains(&part) && probs[best] > params.ongoing_threshold => {
            let since = match timer.candidate {
                Some((p, since)) if p == part => since,
                _ => t,
            };
            timer.candidate = Some((part, since));
            if t - since >= params.ongoing_sustain - 1e-9 {
                queues.task_set.retain(|p| *p != part);
                queues.ongoing.push_back(part);
                timer.candidate = None;
                events.push(QueueEvent::Ongoing(part));
            }
        }
        _ => timer.candidate = None,
    }

    let ready: Vec<u8> = queues
        .ongoing
        .iter()
        .copied()
        .filter(|p| probs[*p as usize - 1] < params.ready_threshold)
        .collect();
    for p in ready {
        queues.ongoing.retain(|q| *q != p);
        queues.ready.push_back(p);
        events.push(QueueEvent::Ready(p));
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeParams {
    pub co_threshold: f64,
    pub co_sustain: f64,
    /// Before contact, fall back to CE when P(CO) stays at or below this.
    pub abort_threshold: f64,
    pub abort_sustain: f64,
}

impl Default for ModeParams {
    fn default() -> Self {
        Self {
            co_threshold: 0.90,
            co_sustain: 0.5,
            abort_threshold: 0.5,
            abort_sustain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeSwitcher {
    co_since: Option<f64>,
    abort_since: Option<f64>,
}

impl ModeSwitcher {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// CE to CO-approach when `P(CO)` stays strictly above the threshold for
    /// the sustain time; CO-approach back to CE when it collapses. Contact
    /// and end of guidance are handled by the robot.
    pub fn mode_switch(&mut self, mode: RobotMode, p_co: f64, t: f64, p: &ModeParams) -> RobotMode {
        match mode {
            RobotMode::Ce => {
                self.abort_since = None;
                if p_co > p.co_threshold {
                    let since = *self.co_since.get_or_insert(t);
                    if t - since >= p.co_sustain - 1e-9 {
                        self.co_since = None;
                        return RobotMode::CoApproach;
                    }
                } else {
                    self.co_since = None;
                }
                RobotMode::Ce
            }
            RobotMode::CoApproach => {
                self.co_since = None;
                if p_co <= p.abort_threshold {
                    let since = *self.abort_since.get_or_insert(t);
                    if t - since >= p.abort_sustain - 1e-9 {
                        self.abort_since = None;
                        return RobotMode::Ce;
                    }
                } else {
                    self.abort_since = None;
                }
                RobotMode::CoApproach
            }
            RobotMode::CoGuided => {
                self.co_since = None;
                self.abort_since = None;
                RobotMode::CoGuided
            }
        }
    }
}
