//! One simulated trial, stepped tick by tick.
//!
//! Tick order: human, observation, Kalman smoothing, tracker, queue and
//! mode updates, robot control and integration, push resolution, logging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::intent::{map_index, Intention};
use crate::prediction::tracker::IntentionTracker;
use crate::sim::control::AssemblyState;
use crate::sim::human::{HumanAgent, HumanView, PushNotice};
use crate::sim::kalman::{kalman_smooth, KalmanState};
use crate::sim::log::{TickRecord, TrialFooter, TrialHeader, TrialLog, LOG_SCHEMA_VERSION};
use crate::sim::observe::observe;
use crate::sim::robot::{Robot, RobotInput};
use crate::Vec2;

pub const STREAM_HUMAN: u64 = 1;
pub const STREAM_OBSERVE: u64 = 2;
pub const STREAM_ROBOT: u64 = 3;
pub const STREAM_SCHEDULE: u64 = 4;
pub const STREAM_SHAKE: u64 = 5;

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

/// Wrist input supplied from outside the simulation, e.g. a live cursor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalInput {
    pub wrist: Vec2,
    pub pull: Vec2,
}

#[derive(Debug, Clone)]
pub struct World {
    cfg: ScenarioConfig,
    schedule: Vec<u8>,
    tick: u64,
    t: f64,
    pub human: HumanAgent,
    pub robot: Robot,
    kalman: KalmanState,
    tracker: Option<IntentionTracker>,
    rng_human: ChaCha8Rng,
    rng_observe: ChaCha8Rng,
    rng_robot: ChaCha8Rng,
    rng_shake: ChaCha8Rng,
    push_started: Option<PushNotice>,
    push_failed: Vec<u8>,
    unaligned: Vec<u8>,
    /// Part under an external wrist and how long it has dwelt there.
    ext_dwell: Option<(u8, f64)>,
    failed_pushes: u32,
    low_seen: bool,
    high_seen: bool,
    records: Vec<TickRecord>,
    keep_records: bool,
    finished: bool,
}

impl World {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let schedule = cfg.resolved_schedule();
        let ws = &cfg.workspace;
        let mut human = HumanAgent::new(ws.prep_region.center(), cfg.human, cfg.variant, &schedule);
        let mut robot = Robot::new(ws.robot_home, cfg.robot, cfg.variant, &cfg.injected_failures);
        if let Some(init) = &cfg.initial {
            robot.assemblies = init.assemblies;
            robot.realigned = init.realigned;
            for &p in &init.done {
                robot.queues.finish(p);
            }
            if let Some(ee) = init.ee {
                robot.ee = ee;
            }
            if let Some(w) = init.wrist {
                human.wrist = w;
            }
            if let Some(agenda) = &init.agenda {
                human.set_agenda(agenda.clone());
            }
        }
        let tracker = if cfg.variant.uses_tracking() {
            Some(IntentionTracker::new(
                cfg.tracker.clone(),
                ws.goal_regions(),
                cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED,
            )?)
        } else {
            None
        };
        let kalman = KalmanState::new(human.wrist, cfg.kalman);
        Ok(Self {
            schedule,
            tick: 0,
            t: 0.0,
            human,
            robot,
            kalman,
            tracker,
            rng_human: stream(cfg.seed, STREAM_HUMAN),
            rng_observe: stream(cfg.seed, STREAM_OBSERVE),
            rng_robot: stream(cfg.seed, STREAM_ROBOT),
            rng_shake: stream(cfg.seed, STREAM_SHAKE),
            push_started: None,
            push_failed: Vec::new(),
            unaligned: Vec::new(),
            ext_dwell: None,
            failed_pushes: 0,
            low_seen: false,
            high_seen: false,
            records: Vec::new(),
            keep_records: true,
            finished: false,
            cfg,
        })
    }

    /// Stops accumulating per-tick records (long live sessions).
    pub fn set_keep_records(&mut self, keep: bool) {
        self.keep_records = keep;
        if !keep {
            self.records.clear();
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &[u8] {
        &self.schedule
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn tracker(&self) -> Option<&IntentionTracker> {
        self.tracker.as_ref()
    }

    pub fn records(&self) -> &[TickRecord] {
        &self.records
    }

    pub fn last_record(&self) -> Option<&TickRecord> {
        self.records.last()
    }

    /// Task done, or the duration cap reached.
    pub fn is_done(&self) -> bool {
        self.finished || self.t >= self.cfg.duration_cap - 1e-9
    }

    pub fn completed(&self) -> bool {
        self.finished
    }

    /// Alignment by an external wrist: holding it within the dwell radius of a
    /// part that still needs work aligns (or realigns) that part after the
    /// human model's nominal dwell.
    fn external_dwell(&mut self, wrist: Vec2, dt: f64) -> Option<u8> {
        let hp = &self.cfg.human;
        let ws = &self.cfg.workspace;
        let needs = |part: u8| match self.robot.assemblies[part as usize - 1] {
            AssemblyState::Unaligned => Some(hp.align_dwell),
            AssemblyState::PushedFailed if !self.robot.realigned[part as usize - 1] => Some(hp.realign_dwell),
            _ => None,
        };
        let here = (1..=4u8).find(|&p| (wrist - ws.part_center(p)).norm() < hp.dwell_radius);
        let Some((part, need)) = here.and_then(|p| needs(p).map(|n| (p, n))) else {
            self.ext_dwell = None;
            return None;
        };
        let held = match self.ext_dwell {
            Some((p, held)) if p == part => held + dt,
            _ => dt,
        };
        if held >= need - 1e-9 {
            self.ext_dwell = None;
            Some(part)
        } else {
            self.ext_dwell = Some((part, held));
            None
        }
    }

    /// One tick with the simulated human.
    pub fn step(&mut self) -> Result<&TickRecord> {
        self.advance(None)
    }

    /// One tick driven by an external wrist position and pull.
    pub fn step_external(&mut self, input: ExternalInput) -> Result<&TickRecord> {
        self.advance(Some(input))
    }

    fn advance(&mut self, external: Option<ExternalInput>) -> Result<&TickRecord> {
        let dt = self.cfg.dt;
        self.tick += 1;
        self.t = self.tick as f64 * dt;
        let t = self.t;
        let dwelt = match &external {
            Some(ext) => self.external_dwell(self.cfg.workspace.bounds.clamp(ext.wrist), dt),
            None => None,
        };
        let ws = &self.cfg.workspace;
        let mut events = Vec::new();

        let (wrist, pull, gt_low, gt_high) = match external {
            Some(ext) => {
                let w = ws.bounds.clamp(ext.wrist);
                self.human.vel = (w - self.human.wrist) / dt;
                self.human.wrist = w;
                if let Some(part) = dwelt {
                    let realign = self.robot.assemblies[part as usize - 1] == AssemblyState::PushedFailed;
                    self.robot.on_aligned(part, realign);
                    events.push(format!("aligned:{part}"));
                }
                (w, ext.pull, None, None)
            }
            None => {
                let view = HumanView {
                    t,
                    ee: self.robot.ee,
                    mode: self.robot.mode,
                    contact: self.robot.contact,
                    robot_busy: self.robot.busy(),
                    pushing: self.robot.pushing.map(|p| p.part),
                    robot_idle_for: self.robot.idle_for,
                    assemblies: self.robot.assemblies,
                    queued: self.robot.queued(),
                    push_started: self.push_started.take(),
                    push_failed: std::mem::take(&mut self.push_failed),
                    unaligned: std::mem::take(&mut self.unaligned),
                };
                let out = self.human.step(&view, ws, dt, &mut self.rng_human);
                if let Some((part, realign)) = out.aligned {
                    self.robot.on_aligned(part, realign);
                }
                events.extend(out.events);
                (self.human.wrist, out.pull, out.gt_low, out.gt_high)
            }
        };

        let obs = observe(wrist, &self.cfg.observation, &mut self.rng_observe);
        let est = kalman_smooth(&mut self.kalman, obs, dt)?;

        let mut p_co = None;
        if let Some(tracker) = self.tracker.as_mut() {
            let tick = tracker.push(t, est, self.robot.ee)?;
            self.low_seen |= tick.low;
            self.high_seen |= tick.high;
            if self.cfg.variant == crate::sim::Variant::Hit && self.high_seen {
                p_co = Some(tracker.high_posterior().prob_of(Intention::Co));
            }
        }
        let low = self.tracker.as_ref().filter(|_| self.low_seen).map(|tr| tr.low_posterior());
        let input = RobotInput {
            t,
            dt,
            wrist_est: est,
            wrist_true: wrist,
            pull,
            low,
            p_co,
        };
        let out = self.robot.step(&input, ws, &mut self.rng_robot)?;
        events.extend(out.events);
        self.push_started = out.push_started;
        self.failed_pushes += out.push_failed.len() as u32;
        self.push_failed = out.push_failed;

        if out.push_done.is_some() && self.cfg.table_shake_prob > 0.0 {
            let u: f64 = self.rng_shake.random();
            if u < self.cfg.table_shake_prob {
                let victim = (1..=4u8).find(|p| self.robot.assemblies[*p as usize - 1] == AssemblyState::Aligned);
                if let Some(p) = victim {
                    self.robot.unalign(p);
                    self.unaligned.push(p);
                    events.push(format!("shake:{p}"));
                }
            }
        }

        self.finished = self.robot.finished(ws);
        if self.finished {
            events.push("finished".into());
        }

        let (low_probs, pred_low, high_probs, pred_high) = match &self.tracker {
            Some(tr) => {
                let (lp, pl) = if self.low_seen {
                    let p = tr.low_posterior();
                    (Some(p.probs().to_vec()), Some(p.space().label(map_index(p.probs())?)))
                } else {
                    (None, None)
                };
                let (hp, ph) = if self.high_seen && self.cfg.variant == crate::sim::Variant::Hit {
                    let p = tr.high_posterior();
                    (Some(p.probs().to_vec()), Some(p.space().label(map_index(p.probs())?)))
                } else {
                    (None, None)
                };
                (lp, pl, hp, ph)
            }
            None => (None, None, None, None),
        };

        let record = TickRecord {
            tick: self.tick,
            t,
            wrist,
            wrist_obs: obs,
            wrist_est: est,
            ee: self.robot.ee,
            ee_vel: self.robot.vel,
            mode: self.robot.mode,
            contact: self.robot.contact,
            pull,
            low: low_probs,
            high: high_probs,
            pred_low,
            pred_high,
            gt_low,
            gt_high: if self.cfg.variant == crate::sim::Variant::Hit { gt_high } else { None },
            queues: self.robot.queues.clone(),
            assemblies: self.robot.assemblies,
            pushing: self.robot.pushing.map(|p| p.part),
            events,
        };
        if !self.keep_records {
            self.records.clear();
        }
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn header(&self) -> Result<TrialHeader> {
        Ok(TrialHeader {
            schema_version: LOG_SCHEMA_VERSION,
            variant: self.cfg.variant,
            seed: self.cfg.seed,
            schedule: self.schedule.clone(),
            injected_failures: self.cfg.injected_failures.clone(),
            dt: self.cfg.dt,
            config: serde_json::to_value(&self.cfg)?,
        })
    }

    pub fn footer(&self) -> TrialFooter {
        TrialFooter {
            completed: self.finished,
            t_end: self.t,
            ticks: self.tick,
            n_failures: self
                .robot
                .assemblies
                .iter()
                .filter(|a| **a == AssemblyState::PushedFailed)
                .count() as u32,
            failed_pushes: self.failed_pushes,
            push_attempts: self.robot.attempts,
            assemblies: self.robot.assemblies,
        }
    }

    /// Runs to completion or the cap and returns the full log.
    pub fn run(mut self) -> Result<TrialLog> {
        while !self.is_done() {
            self.advance(None)?;
        }
        self.into_log()
    }

    pub fn into_log(self) -> Result<TrialLog> {
        let header = self.header()?;
        let footer = self.footer();
        Ok(TrialLog {
            header,
            ticks: self.records,
            footer,
        })
    }
}
