//! Robot controller: coexistence module (task queues, APF, automated
//! pushes) and cooperation module (approach, admittance, recovery push).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::Posterior;
use crate::sim::control::{
    apf_velocity, clip_norm, push_action, smooth_velocity, Admittance, AdmittanceParams, ApfMode, ApfParams,
    AssemblyState, ModeParams, ModeSwitcher, PushParams, QueueEvent, QueueParams, QueueTimer, Queues, RobotMode,
};
use crate::sim::human::PushNotice;
use crate::sim::workspace::Workspace;
use crate::sim::Variant;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub apf: ApfParams,
    pub admittance: AdmittanceParams,
    pub push: PushParams,
    pub queue: QueueParams,
    pub mode: ModeParams,
    /// Speed limit outside guidance, m/s.
    pub ce_speed: f64,
    /// Speed limit while guided, m/s.
    pub guided_speed: f64,
    /// Velocity smoothing factor k per tick.
    pub smoothing: f64,
    /// The robot starts pushing once within this distance of the part, m.
    pub arrive_radius: f64,
    /// The robot counts as home within this distance, m.
    pub home_radius: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            apf: ApfParams::default(),
            admittance: AdmittanceParams::default(),
            push: PushParams::default(),
            queue: QueueParams::default(),
            mode: ModeParams::default(),
            ce_speed: 0.1,
            guided_speed: 0.3,
            smoothing: 0.8,
            arrive_radius: 0.01,
            home_radius: 0.01,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("robot.apf.c", self.apf.c),
            ("robot.apf.k_h", self.apf.k_h),
            ("robot.apf.r_min", self.apf.r_min),
            ("robot.apf.brake_time", self.apf.brake_time),
            ("robot.admittance.damping", self.admittance.damping),
            ("robot.admittance.end_secs", self.admittance.end_secs),
            ("robot.admittance.contact_radius", self.admittance.contact_radius),
            ("robot.push.duration", self.push.duration),
            ("robot.ce_speed", self.ce_speed),
            ("robot.guided_speed", self.guided_speed),
            ("robot.arrive_radius", self.arrive_radius),
            ("robot.home_radius", self.home_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        if self.apf.r_max <= self.apf.r_min {
            return Err(Error::config("robot.apf.r_max", "must exceed r_min"));
        }
        if !(self.push.delta >= 0.0) || !(self.push.tol >= 0.0) {
            return Err(Error::config("robot.push", "delta and tol must be >= 0"));
        }
        if self.ce_speed >= self.guided_speed {
            return Err(Error::config("robot.ce_speed", "must be below guided_speed"));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::config("robot.smoothing", "must lie in [0, 1)"));
        }
        for (name, v) in [
            ("robot.queue.ongoing_threshold", self.queue.ongoing_threshold),
            ("robot.queue.ready_threshold", self.queue.ready_threshold),
            ("robot.mode.co_threshold", self.mode.co_threshold),
            ("robot.mode.abort_threshold", self.mode.abort_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn speed_limit(&self, mode: RobotMode) -> f64 {
        if mode == RobotMode::CoGuided {
            self.guided_speed
        } else {
            self.ce_speed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivePush {
    pub part: u8,
    pub offset: Vec2,
    pub ok: bool,
    pub left: f64,
    pub automated: bool,
}

/// Inputs the controller reads at one tick.
#[derive(Debug, Clone)]
pub struct RobotInput<'a> {
    pub t: f64,
    pub dt: f64,
    /// Smoothed wrist estimate.
    pub wrist_est: Vec2,
    /// True wrist, used only for contact detection.
    pub wrist_true: Vec2,
    pub pull: Vec2,
    pub low: Option<&'a Posterior>,
    pub p_co: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RobotOutput {
    pub push_started: Option<PushNotice>,
    pub push_failed: Vec<u8>,
    pub push_done: Option<(u8, bool)>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Robot {
    pub ee: Vec2,
    pub vel: Vec2,
    pub mode: RobotMode,
    pub contact: bool,
    pub queues: Queues,
    pub assemblies: [AssemblyState; 4],
    /// Part was aligned again by the human after a failed push.
    pub realigned: [bool; 4],
    pub pushing: Option<ActivePush>,
    pub idle_for: f64,
    pub params: RobotParams,
    pub attempts: u32,
    variant: Variant,
    injected: Vec<u8>,
    timer: QueueTimer,
    switcher: ModeSwitcher,
    admittance: Admittance,
}

impl Robot {
    pub fn new(home: Vec2, params: RobotParams, variant: Variant, injected: &[u8]) -> Self {
        let mode = if variant == Variant::Cooperation {
            RobotMode::CoApproach
        } else {
            RobotMode::Ce
        };
        Self {
            ee: home,
            vel: Vec2::zeros(),
            mode,
            contact: false,
            queues: Queues::new(&[1, 2, 3, 4]),
            assemblies: [AssemblyState::Unaligned; 4],
            realigned: [false; 4],
            pushing: None,
            idle_for: 0.0,
            params,
            attempts: 0,
            variant,
            injected: injected.to_vec(),
            timer: QueueTimer::default(),
            switcher: ModeSwitcher::default(),
            admittance: Admittance::default(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Pushing, or heading to a ready part.
    pub fn busy(&self) -> bool {
        self.pushing.is_some() || (self.mode == RobotMode::Ce && !self.queues.ready.is_empty())
    }

    pub fn queued(&self) -> [bool; 4] {
        let mut q = [true; 4];
        for p in &self.queues.task_set {
            q[*p as usize - 1] = false;
        }
        q
    }

    pub fn at_home(&self, ws: &Workspace, radius: f64) -> bool {
        (self.ee - ws.robot_home).norm() < radius
    }

    pub fn all_pushed_ok(&self) -> bool {
        self.assemblies.iter().all(|a| *a == AssemblyState::PushedOk)
    }

    /// Trial end condition for the variant.
    pub fn finished(&self, ws: &Workspace) -> bool {
        match self.variant {
            Variant::Hit => {
                self.all_pushed_ok()
                    && self.mode == RobotMode::Ce
                    && self.pushing.is_none()
                    && self.at_home(ws, self.params.home_radius)
            }
            Variant::Coexistence => {
                self.queues.done.len() == 4 && self.pushing.is_none() && self.at_home(ws, self.params.home_radius)
            }
            Variant::Cooperation => {
                self.all_pushed_ok() && self.pushing.is_none() && !self.contact && self.at_home(ws, 0.02)
            }
        }
    }

    fn start_automated_push<R: Rng + ?Sized>(&mut self, part: u8, rng: &mut R) -> Result<PushNotice> {
        let outcome = push_action(&self.queues, part, &self.params.push, rng)?;
        let i = part as usize - 1;
        let ok = outcome.ok && self.assemblies[i] == AssemblyState::Aligned && !self.injected.contains(&part);
        self.pushing = Some(ActivePush {
            part,
            offset: outcome.offset,
            ok,
            left: self.params.push.duration,
            automated: true,
        });
        Ok(PushNotice {
            part,
            will_fail: !ok,
            automated: true,
        })
    }

    /// Push on whatever part lies under the guided pose; the guided pose
    /// carries no sampled offset.
    fn start_guided_push(&mut self, ws: &Workspace) -> Option<PushNotice> {
        let wanted = match self.variant {
            Variant::Cooperation => AssemblyState::Aligned,
            _ => AssemblyState::PushedFailed,
        };
        let part = (1..=4u8).find(|p| {
            self.assemblies[*p as usize - 1] == wanted
                && (ws.part_center(*p) - self.ee).norm() < self.params.push.recovery_radius
        })?;
        let i = part as usize - 1;
        let ok = match self.variant {
            Variant::Cooperation => true,
            _ => self.realigned[i],
        };
        self.pushing = Some(ActivePush {
            part,
            offset: Vec2::zeros(),
            ok,
            left: self.params.push.duration,
            automated: false,
        });
        Some(PushNotice {
            part,
            will_fail: !ok,
            automated: false,
        })
    }

    fn finish_push(&mut self, push: ActivePush, out: &mut RobotOutput) {
        let i = push.part as usize - 1;
        self.attempts += 1;
        if push.automated {
            self.injected.retain(|p| *p != push.part);
        }
        self.queues.finish(push.part);
        if push.ok {
            self.assemblies[i] = AssemblyState::PushedOk;
            out.events.push(format!("push_ok:{}", push.part));
        } else {
            self.assemblies[i] = AssemblyState::PushedFailed;
            self.realigned[i] = false;
            out.push_failed.push(push.part);
            out.events.push(format!("push_fail:{}", push.part));
        }
        out.push_done = Some((push.part, push.ok));
    }

    /// Called when the human finishes aligning a part.
    pub fn on_aligned(&mut self, part: u8, realign: bool) {
        let i = part as usize - 1;
        match self.assemblies[i] {
            AssemblyState::PushedFailed => self.realigned[i] = true,
            AssemblyState::Unaligned => self.assemblies[i] = AssemblyState::Aligned,
            _ => {}
        }
        let _ = realign;
    }

    pub fn step<R: Rng + ?Sized>(&mut self, input: &RobotInput, ws: &Workspace, rng: &mut R) -> Result<RobotOutput> {
        let mut out = RobotOutput::default();
        let p = self.params;
        let dt = input.dt;

        if let Some(low) = input.low {
            for ev in crate::sim::control::queue_update(&mut self.queues, &mut self.timer, low, input.t, &p.queue) {
                out.events.push(match ev {
                    QueueEvent::Ongoing(part) => format!("ongoing:{part}"),
                    QueueEvent::Ready(part) => format!("ready:{part}"),
                });
            }
        }

        match self.variant {
            Variant::Hit => {
                if let Some(p_co) = input.p_co {
                    if self.pushing.is_some() {
                        self.switcher.reset();
                    } else {
                        let next = self.switcher.mode_switch(self.mode, p_co, input.t, &p.mode);
                        if next != self.mode {
                            out.events.push(match next {
                                RobotMode::CoApproach => "mode:CO".to_string(),
                                _ => "approach_abort".to_string(),
                            });
                            self.mode = next;
                        }
                    }
                }
                if self.mode == RobotMode::CoApproach
                    && (input.wrist_true - self.ee).norm() < p.admittance.contact_radius
                {
                    self.mode = RobotMode::CoGuided;
                    self.contact = true;
                    self.admittance.reset();
                    out.events.push("contact".into());
                }
            }
            Variant::Cooperation => {
                if !self.contact
                    && self.pushing.is_none()
                    && (input.wrist_true - self.ee).norm() < p.admittance.contact_radius
                    && input.pull.norm() >= p.admittance.f_min
                {
                    self.mode = RobotMode::CoGuided;
                    self.contact = true;
                    self.admittance.reset();
                    out.events.push("contact".into());
                }
            }
            Variant::Coexistence => {}
        }

        let mut v_cmd = Vec2::zeros();
        if let Some(mut push) = self.pushing {
            let wrist_near = (input.wrist_est - self.ee).norm() < p.push.abort_radius;
            if push.automated && wrist_near {
                self.pushing = None;
                self.queues.ready.retain(|q| *q != push.part);
                self.queues.ready.push_front(push.part);
                out.events.push(format!("push_abort:{}", push.part));
            } else {
                push.left -= dt;
                if push.left <= 1e-9 {
                    self.pushing = None;
                    self.finish_push(push, &mut out);
                } else {
                    self.pushing = Some(push);
                }
            }
        } else {
            match self.mode {
                RobotMode::Ce => {
                    let target = self.queues.ready.front().copied();
                    let goal = target.map(|t| ws.part_center(t)).unwrap_or(ws.robot_home);
                    if let Some(part) = target {
                        let arrived = (goal - self.ee).norm() < p.arrive_radius;
                        let clear = (input.wrist_est - self.ee).norm() >= p.push.abort_radius;
                        if arrived && clear {
                            let notice = self.start_automated_push(part, rng)?;
                            out.push_started = Some(notice);
                            out.events.push(format!("push_start:{part}"));
                        }
                    }
                    if self.pushing.is_none() {
                        v_cmd = apf_velocity(self.ee, goal, input.wrist_est, ApfMode::Ce, &p.apf, p.ce_speed);
                    }
                }
                RobotMode::CoApproach => {
                    if self.variant == Variant::Hit {
                        v_cmd = apf_velocity(
                            self.ee,
                            input.wrist_est,
                            input.wrist_est,
                            ApfMode::CoApproach,
                            &p.apf,
                            p.ce_speed,
                        );
                    }
                }
                RobotMode::CoGuided => {
                    let (v, ended) = self.admittance.step(self.mode, input.pull, dt, &p.admittance, p.guided_speed)?;
                    v_cmd = v;
                    if ended {
                        self.contact = false;
                        self.admittance.reset();
                        self.switcher.reset();
                        self.mode = if self.variant == Variant::Cooperation {
                            RobotMode::CoApproach
                        } else {
                            RobotMode::Ce
                        };
                        out.events.push("guidance_end".into());
                        v_cmd = Vec2::zeros();
                        if let Some(notice) = self.start_guided_push(ws) {
                            out.events.push(format!("push_start:{}", notice.part));
                            out.push_started = Some(notice);
                        }
                    }
                }
            }
        }

        let busy = self.pushing.is_some() || !self.queues.ready.is_empty() || self.mode != RobotMode::Ce;
        self.idle_for = if busy { 0.0 } else { self.idle_for + dt };

        let limit = p.speed_limit(self.mode);
        self.vel = clip_norm(smooth_velocity(self.vel, v_cmd, p.smoothing), limit);
        if self.mode == RobotMode::Ce {
            self.vel = drop_closing(self.vel, self.ee - input.wrist_est, p.apf.r_min);
        }
        let next = ws.bounds.clamp(self.ee + self.vel * dt);
        self.vel = (next - self.ee) / dt;
        self.ee = next;
        Ok(out)
    }

    /// Marks a part as knocked out of alignment.
    pub fn unalign(&mut self, part: u8) {
        let i = part as usize - 1;
        if self.assemblies[i] == AssemblyState::Aligned {
            self.assemblies[i] = AssemblyState::Unaligned;
        }
    }
}

/// Removes the part of `vel` that closes on the wrist when the wrist is inside
/// `r_min`. Smoother momentum left over from an approach would otherwise keep
/// carrying the end-effector in.
fn drop_closing(vel: Vec2, away: Vec2, r_min: f64) -> Vec2 {
    let d = away.norm();
    if d >= r_min || d == 0.0 {
        return vel;
    }
    let n = away / d;
    let along = vel.dot(&n);
    if along < 0.0 {
        vel - n * along
    } else {
        vel
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::IntentionSpace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 1.0 / 30.0;

    fn input(t: f64, wrist: Vec2) -> RobotInput<'static> {
        RobotInput {
            t,
            dt: DT,
            wrist_est: wrist,
            wrist_true: wrist,
            pull: Vec2::zeros(),
            low: None,
            p_co: None,
        }
    }

    #[test]
    fn goes_to_ready_part_and_pushes() {
        let ws = Workspace::default();
        let mut r = Robot::new(ws.robot_home, RobotParams::default(), Variant::Coexistence, &[]);
        r.assemblies[1] = AssemblyState::Aligned;
        r.queues.task_set.retain(|p| *p != 2);
        r.queues.ready.push_back(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let far = Vec2::new(0.45, 0.02);
        let mut done = None;
        for k in 0..2000 {
            let out = r.step(&input(k as f64 * DT, far), &ws, &mut rng).unwrap();
            assert!(r.vel.norm() <= r.params.ce_speed + 1e-12);
            if out.push_done.is_some() {
                done = out.push_done;
                break;
            }
        }
        let (part, _) = done.expect("push completed");
        assert_eq!(part, 2);
        assert_eq!(r.queues.done, vec![2]);
        assert_eq!(r.queues.all_parts(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn injected_failure_fails_first_automated_push_only() {
        let ws = Workspace::default();
        let params = RobotParams {
            push: PushParams { delta: 0.0, ..PushParams::default() },
            ..RobotParams::default()
        };
        let mut r = Robot::new(ws.part_center(2), params, Variant::Hit, &[2]);
        r.assemblies[1] = AssemblyState::Aligned;
        r.queues.task_set.retain(|p| *p != 2);
        r.queues.ready.push_back(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let far = Vec2::new(0.45, 0.02);
        let mut outcome = None;
        for k in 0..200 {
            let out = r.step(&input(k as f64 * DT, far), &ws, &mut rng).unwrap();
            if let Some(done) = out.push_done {
                outcome = Some(done);
                break;
            }
        }
        assert_eq!(outcome, Some((2, false)));
        assert_eq!(r.assemblies[1], AssemblyState::PushedFailed);
        assert!(r.injected.is_empty());
    }

    #[test]
    fn automated_push_waits_for_clearance() {
        let ws = Workspace::default();
        let mut r = Robot::new(ws.part_center(1), RobotParams::default(), Variant::Coexistence, &[]);
        r.assemblies[0] = AssemblyState::Aligned;
        r.queues.task_set.retain(|p| *p != 1);
        r.queues.ready.push_back(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let near = ws.part_center(1) + Vec2::new(0.0, -0.15);
        let out = r.step(&input(0.0, near), &ws, &mut rng).unwrap();
        assert!(out.push_started.is_none());
        assert!(r.pushing.is_none());
    }

    #[test]
    fn sustained_co_belief_starts_approach_then_contact() {
        let ws = Workspace::default();
        let mut r = Robot::new(ws.robot_home, RobotParams::default(), Variant::Hit, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let wrist = ws.robot_home + Vec2::new(0.0, -0.12);
        let space = IntentionSpace::task_level();
        let low = Posterior::uniform(space);
        let mut contact_at = None;
        for k in 0..200 {
            let inp = RobotInput {
                p_co: Some(0.95),
                low: Some(&low),
                ..input(k as f64 * DT, wrist)
            };
            r.step(&inp, &ws, &mut rng).unwrap();
            if k == 15 {
                assert_eq!(r.mode, RobotMode::CoApproach);
            }
            if r.mode == RobotMode::CoGuided {
                contact_at = Some(k);
                break;
            }
        }
        assert!(contact_at.is_some());
        assert!((r.ee - wrist).norm() < r.params.admittance.contact_radius);
    }

    #[test]
    fn closing_velocity_is_dropped_inside_r_min() {
        let v = drop_closing(Vec2::new(-0.05, 0.03), Vec2::new(0.02, 0.0), 0.05);
        assert_eq!(v, Vec2::new(0.0, 0.03));
        let away = Vec2::new(0.05, 0.03);
        assert_eq!(drop_closing(away, Vec2::new(0.02, 0.0), 0.05), away);
        let far = Vec2::new(-0.05, 0.0);
        assert_eq!(drop_closing(far, Vec2::new(0.2, 0.0), 0.05), far);
    }
}
