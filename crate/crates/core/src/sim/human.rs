//! Synthetic human partner.
//!
//! The wrist follows the same goal-directed linear model the trackers
//! assume, toward whatever the current activity targets, plus small motion
//! noise. Activities come from an agenda: align each part in the scheduled
//! order, then react to what the robot does (recover failed pushes by
//! guiding the robot in the HIT system, readjust parts in the coexistence
//! baseline, guide every push in the cooperation baseline).

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Variant;
use crate::intent::Intention;
use crate::prediction::gilm::{gilm_step, GoalRegion};
use crate::sim::control::{AssemblyState, RobotMode};
use crate::sim::workspace::Workspace;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanParams {
    /// Wrist cruise speed, m/s.
    pub cruise_speed: f64,
    /// Speed tapers to `distance / approach_time` near a target, s.
    pub approach_time: f64,
    /// Per-tick wrist motion noise, m.
    pub motion_noise_std: f64,
    /// Alignment starts once the wrist is this close to the region centre, m.
    pub dwell_radius: f64,
    pub align_dwell: f64,
    /// Uniform jitter added to each alignment dwell, +/- s.
    pub dwell_jitter: f64,
    pub realign_dwell: f64,
    pub readjust_dwell: f64,
    /// Outside cooperation the wrist never closes in below this distance
    /// to the end-effector, m.
    pub clearance: f64,
    /// Failure recovery: distance kept from the end-effector while waiting
    /// for the robot to come over, m.
    pub fr_standoff: f64,
    /// Give up a recovery reach after this long without cooperation, s.
    pub fr_patience: f64,
    /// Guidance pull = min(pull_max, pull_gain * distance).
    pub pull_gain: f64,
    pub pull_max: f64,
    /// The human lets go once the end-effector is this close to the target, m.
    pub release_dist: f64,
    /// Coexistence baseline: chance of readjusting a part the robot is about
    /// to push badly / well.
    pub readjust_prob_fail: f64,
    pub readjust_prob_ok: f64,
    pub max_readjust: u8,
    /// Re-align a part the robot seems to have missed after the robot has
    /// idled this long, s.
    pub idle_patience: f64,
    /// Rest before the first activity, s.
    pub start_pause: f64,
}

impl Default for HumanParams {
    fn default() -> Self {
        Self {
            cruise_speed: 0.3,
            approach_time: 0.12,
            motion_noise_std: 0.0015,
            dwell_radius: 0.03,
            align_dwell: 3.0,
            dwell_jitter: 0.5,
            realign_dwell: 2.0,
            readjust_dwell: 1.5,
            clearance: 0.08,
            fr_standoff: 0.09,
            fr_patience: 10.0,
            pull_gain: 25.0,
            pull_max: 2.5,
            release_dist: 0.004,
            readjust_prob_fail: 0.9,
            readjust_prob_ok: 0.3,
            max_readjust: 2,
            idle_patience: 3.0,
            start_pause: 1.0,
        }
    }
}

impl HumanParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cruise_speed", self.cruise_speed),
            ("approach_time", self.approach_time),
            ("dwell_radius", self.dwell_radius),
            ("align_dwell", self.align_dwell),
            ("realign_dwell", self.realign_dwell),
            ("readjust_dwell", self.readjust_dwell),
            ("fr_standoff", self.fr_standoff),
            ("fr_patience", self.fr_patience),
            ("pull_gain", self.pull_gain),
            ("pull_max", self.pull_max),
            ("release_dist", self.release_dist),
            ("idle_patience", self.idle_patience),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("human.{name}"), "must be > 0"));
            }
        }
        for (name, v) in [
            ("motion_noise_std", self.motion_noise_std),
            ("dwell_jitter", self.dwell_jitter),
            ("clearance", self.clearance),
            ("start_pause", self.start_pause),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("human.{name}"), "must be >= 0"));
            }
        }
        if self.dwell_jitter >= self.align_dwell {
            return Err(Error::config("human.dwell_jitter", "must be smaller than align_dwell"));
        }
        for (name, v) in [("readjust_prob_fail", self.readjust_prob_fail), ("readjust_prob_ok", self.readjust_prob_ok)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("human.{name}"), "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// One item on the human's agenda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activity {
    Align { part: u8, realign: bool },
    Readjust { part: u8 },
    Recover { part: u8 },
    /// Cooperation baseline: guide the robot through every push, then home.
    CoopGuide,
    Rest { secs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Travel,
    Dwell { left: f64 },
    Wait,
    Reach { since: f64 },
    Hold { since: f64 },
    Guide { grasp: Vec2, target: Vec2 },
    Release { grasp: Vec2, target: Vec2, since: f64 },
    Resting { left: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Current {
    activity: Activity,
    phase: Phase,
}

/// A push the robot has just started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushNotice {
    pub part: u8,
    pub will_fail: bool,
    pub automated: bool,
}

/// What the human can see of the world at the start of a tick.
#[derive(Debug, Clone)]
pub struct HumanView {
    pub t: f64,
    pub ee: Vec2,
    pub mode: RobotMode,
    pub contact: bool,
    /// Pushing, or on the way to a ready part.
    pub robot_busy: bool,
    pub pushing: Option<u8>,
    pub robot_idle_for: f64,
    pub assemblies: [AssemblyState; 4],
    /// Part has left the robot's task set.
    pub queued: [bool; 4],
    pub push_started: Option<PushNotice>,
    /// Parts whose push failed on the previous tick.
    pub push_failed: Vec<u8>,
    /// Parts knocked out of alignment on the previous tick.
    pub unaligned: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HumanOutput {
    pub pull: Vec2,
    /// `(part, realign)` when an alignment finished this tick.
    pub aligned: Option<(u8, bool)>,
    pub readjusted: Option<u8>,
    pub events: Vec<String>,
    pub gt_low: Option<Intention>,
    pub gt_high: Option<Intention>,
}

#[derive(Debug, Clone)]
pub struct HumanAgent {
    pub wrist: Vec2,
    pub vel: Vec2,
    pub params: HumanParams,
    variant: Variant,
    schedule: Vec<u8>,
    agenda: VecDeque<Activity>,
    current: Option<Current>,
    readjusts: [u8; 4],
}

impl HumanAgent {
    pub fn new(start: Vec2, params: HumanParams, variant: Variant, schedule: &[u8]) -> Self {
        let mut agenda = VecDeque::new();
        if params.start_pause > 0.0 {
            agenda.push_back(Activity::Rest {
                secs: params.start_pause,
            });
        }
        for &part in schedule {
            agenda.push_back(Activity::Align { part, realign: false });
        }
        if variant == Variant::Cooperation {
            agenda.push_back(Activity::CoopGuide);
        }
        Self {
            wrist: start,
            vel: Vec2::zeros(),
            params,
            variant,
            schedule: schedule.to_vec(),
            agenda,
            current: None,
            readjusts: [0; 4],
        }
    }

    /// Replaces the agenda; used to script scenarios.
    pub fn set_agenda(&mut self, agenda: Vec<Activity>) {
        self.agenda = agenda.into();
        self.current = None;
    }

    pub fn agenda(&self) -> impl Iterator<Item = &Activity> {
        self.agenda.iter()
    }

    pub fn current_activity(&self) -> Option<Activity> {
        self.current.map(|c| c.activity)
    }

    pub fn is_idle(&self) -> bool {
        self.current.is_none() && self.agenda.is_empty()
    }

    fn react<R: Rng + ?Sized>(&mut self, view: &HumanView, rng: &mut R) {
        for &part in &view.push_failed {
            if self.variant == Variant::Hit {
                self.agenda.push_back(Activity::Align { part, realign: true });
                self.agenda.push_back(Activity::Recover { part });
            }
        }
        for &part in &view.unaligned {
            self.agenda.push_back(Activity::Align { part, realign: false });
        }
        if let Some(notice) = view.push_started {
            if self.variant == Variant::Coexistence && notice.automated {
                let i = notice.part as usize - 1;
                let p = if notice.will_fail {
                    self.params.readjust_prob_fail
                } else {
                    self.params.readjust_prob_ok
                };
                let u: f64 = rng.random();
                if self.readjusts[i] < self.params.max_readjust && u < p {
                    self.readjusts[i] += 1;
                    if let Some(cur) = self.current.take() {
                        if !matches!(cur.activity, Activity::Rest { .. }) {
                            self.agenda.push_front(cur.activity);
                        }
                    }
                    self.current = Some(Current {
                        activity: Activity::Readjust { part: notice.part },
                        phase: Phase::Travel,
                    });
                }
            }
        }
        if self.is_idle() && self.variant != Variant::Cooperation && view.robot_idle_for > self.params.idle_patience {
            let missed = (1..=4u8).find(|p| {
                view.assemblies[*p as usize - 1] == AssemblyState::Aligned && !view.queued[*p as usize - 1]
            });
            if let Some(part) = missed {
                self.agenda.push_back(Activity::Align { part, realign: true });
            }
        }
    }

    fn start(&self, activity: Activity) -> Current {
        let phase = match activity {
            Activity::Recover { .. } => Phase::Wait,
            Activity::CoopGuide => Phase::Reach { since: 0.0 },
            Activity::Rest { secs } => Phase::Resting { left: secs },
            _ => Phase::Travel,
        };
        Current { activity, phase }
    }

    fn dwell_time<R: Rng + ?Sized>(&self, activity: Activity, rng: &mut R) -> f64 {
        match activity {
            Activity::Align { realign: true, .. } => self.params.realign_dwell,
            Activity::Readjust { .. } => self.params.readjust_dwell,
            _ => {
                let j = self.params.dwell_jitter;
                let u: f64 = rng.random();
                self.params.align_dwell + (2.0 * u - 1.0) * j
            }
        }
    }

    fn coop_target(&self, view: &HumanView, ws: &Workspace) -> Vec2 {
        self.schedule
            .iter()
            .find(|p| view.assemblies[**p as usize - 1] == AssemblyState::Aligned)
            .map(|p| ws.part_center(*p))
            .unwrap_or(ws.robot_home)
    }

    fn pull_toward(&self, ee: Vec2, target: Vec2) -> Vec2 {
        let d = target - ee;
        let n = d.norm();
        if n < 1e-12 {
            return Vec2::zeros();
        }
        d / n * (self.params.pull_gain * n).min(self.params.pull_max)
    }

    fn free_move<R: Rng + ?Sized>(&self, target: Vec2, dt: f64, rng: &mut R) -> Vec2 {
        let dist = (target - self.wrist).norm();
        let speed = self.params.cruise_speed.min(dist / self.params.approach_time);
        let noise = if self.params.motion_noise_std > 0.0 {
            let n = Normal::new(0.0, self.params.motion_noise_std).expect("validated");
            Vec2::new(n.sample(rng), n.sample(rng))
        } else {
            Vec2::zeros()
        };
        gilm_step(self.wrist, &GoalRegion::task(target, 0.0), speed, dt, noise)
    }

    /// Advances the wrist by one tick.
    pub fn step<R: Rng + ?Sized>(&mut self, view: &HumanView, ws: &Workspace, dt: f64, rng: &mut R) -> HumanOutput {
        self.react(view, rng);
        let mut out = HumanOutput {
            gt_high: Some(Intention::Ce),
            ..HumanOutput::default()
        };
        if self.current.is_none() {
            self.current = self.agenda.pop_front().map(|a| self.start(a));
        }
        let old = self.wrist;
        // `None` target: the wrist is attached to the end-effector.
        let mut target = Some(ws.prep_region.center());
        let mut attached: Option<Vec2> = None;
        let mut keep_clear = true;
        let mut finished = false;

        if let Some(mut cur) = self.current {
            match cur.activity {
                Activity::Align { part, .. } | Activity::Readjust { part } => {
                    out.gt_low = Some(Intention::Part(part));
                    let centre = ws.part_center(part);
                    target = Some(centre);
                    match cur.phase {
                        Phase::Travel => {
                            if (self.wrist - centre).norm() < self.params.dwell_radius {
                                cur.phase = Phase::Dwell {
                                    left: self.dwell_time(cur.activity, rng),
                                };
                            }
                        }
                        Phase::Dwell { left } => {
                            let left = left - dt;
                            if left <= 0.0 {
                                finished = true;
                                match cur.activity {
                                    Activity::Align { realign, .. } => {
                                        out.aligned = Some((part, realign));
                                        out.events.push(format!("aligned:{part}"));
                                    }
                                    _ => {
                                        out.readjusted = Some(part);
                                        out.events.push(format!("readjusted:{part}"));
                                    }
                                }
                            } else {
                                cur.phase = Phase::Dwell { left };
                            }
                        }
                        _ => unreachable!("alignment phases"),
                    }
                }
                Activity::Recover { part } => {
                    let centre = ws.part_center(part);
                    match cur.phase {
                        Phase::Wait => {
                            target = Some(self.wrist);
                            if !view.robot_busy && !view.mode.is_cooperation() {
                                cur.phase = Phase::Reach { since: view.t };
                                out.events.push(format!("fr_reach:{part}"));
                            }
                        }
                        Phase::Reach { since } => {
                            out.gt_high = Some(Intention::Co);
                            let away = self.wrist - view.ee;
                            let dist = away.norm();
                            // Follow the end-effector at the standoff; the
                            // clearance rule keeps the hand from closing in.
                            let dir = if dist > 1e-9 { away / dist } else { Vec2::new(0.0, -1.0) };
                            target = Some(view.ee + dir * self.params.fr_standoff);
                            if view.mode.is_cooperation() {
                                cur.phase = Phase::Hold { since };
                            } else if view.t - since > self.params.fr_patience {
                                out.events.push(format!("fr_giveup:{part}"));
                                finished = true;
                                self.agenda.push_front(cur.activity);
                                self.agenda.push_front(Activity::Rest { secs: 2.0 });
                            }
                        }
                        Phase::Hold { since } => {
                            out.gt_high = Some(Intention::Co);
                            target = Some(self.wrist);
                            keep_clear = false;
                            if view.contact {
                                let grasp = self.wrist - view.ee;
                                cur.phase = Phase::Guide { grasp, target: centre };
                                attached = Some(grasp);
                                out.pull = self.pull_toward(view.ee, centre);
                            } else if !view.mode.is_cooperation() {
                                cur.phase = Phase::Reach { since };
                            }
                        }
                        Phase::Guide { grasp, target: goal } => {
                            out.gt_high = Some(Intention::Co);
                            attached = Some(grasp);
                            if (goal - view.ee).norm() < self.params.release_dist {
                                cur.phase = Phase::Release { grasp, target: goal, since: view.t };
                            } else {
                                out.pull = self.pull_toward(view.ee, goal);
                            }
                        }
                        Phase::Release { grasp, .. } => {
                            out.gt_high = Some(Intention::Co);
                            attached = Some(grasp);
                            if !view.mode.is_cooperation() {
                                finished = true;
                                out.gt_high = Some(Intention::Ce);
                            }
                        }
                        _ => unreachable!("recovery phases"),
                    }
                }
                Activity::CoopGuide => {
                    out.gt_high = Some(Intention::Co);
                    keep_clear = false;
                    match cur.phase {
                        Phase::Reach { .. } => {
                            target = Some(view.ee);
                            // Grab and start pulling once the hand is on the
                            // end-effector; contact needs a pull in this mode.
                            if (self.wrist - view.ee).norm() < self.params.dwell_radius {
                                out.pull = self.pull_toward(view.ee, self.coop_target(view, ws));
                            }
                            if view.contact {
                                let grasp = self.wrist - view.ee;
                                let goal = self.coop_target(view, ws);
                                cur.phase = Phase::Guide { grasp, target: goal };
                                attached = Some(grasp);
                                out.pull = self.pull_toward(view.ee, goal);
                            }
                        }
                        Phase::Guide { grasp, target: goal } => {
                            attached = Some(grasp);
                            if (goal - view.ee).norm() < self.params.release_dist {
                                cur.phase = Phase::Release { grasp, target: goal, since: view.t };
                            } else {
                                out.pull = self.pull_toward(view.ee, goal);
                            }
                        }
                        Phase::Release { grasp, target: goal, since } => {
                            attached = Some(grasp);
                            let settled = view.pushing.is_none() && view.t - since > 1.2;
                            if settled {
                                let next = self.coop_target(view, ws);
                                let at_home = (goal - ws.robot_home).norm() < 1e-9;
                                if at_home && (next - ws.robot_home).norm() < 1e-9 {
                                    finished = true;
                                } else {
                                    cur.phase = Phase::Guide { grasp, target: next };
                                    out.pull = self.pull_toward(view.ee, next);
                                }
                            }
                        }
                        _ => unreachable!("cooperation phases"),
                    }
                }
                Activity::Rest { .. } => {
                    target = Some(self.wrist);
                    if let Phase::Resting { left } = cur.phase {
                        let left = left - dt;
                        if left <= 0.0 {
                            finished = true;
                        } else {
                            cur.phase = Phase::Resting { left };
                        }
                    }
                }
            }
            self.current = if finished { None } else { Some(cur) };
        }

        if let Some(grasp) = attached.filter(|_| !finished) {
            self.wrist = view.ee + grasp;
            target = None;
        }
        if let Some(target) = target {
            let mut next = self.free_move(target, dt, rng);
            if keep_clear && !view.mode.is_cooperation() {
                next = keep_clearance(old, next, view.ee, self.params.clearance);
            }
            self.wrist = ws.bounds.clamp(next);
        }
        self.vel = (self.wrist - old) / dt;
        out
    }
}

/// Stops the wrist from closing in on the end-effector below `clearance`.
fn keep_clearance(old: Vec2, next: Vec2, ee: Vec2, clearance: f64) -> Vec2 {
    let d_new = (next - ee).norm();
    let d_old = (old - ee).norm();
    if d_new >= clearance || d_new >= d_old {
        return next;
    }
    let radius = d_old.min(clearance);
    let dir = if d_new > 1e-9 { (next - ee) / d_new } else { Vec2::new(0.0, -1.0) };
    ee + dir * radius
}
