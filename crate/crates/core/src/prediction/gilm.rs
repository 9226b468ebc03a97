//! Gaussian intention-aware linear model (GILM) of wrist motion.
//!
//! Given an intention whose goal region has mean `g`, the wrist moves toward
//! `g` at the speed it showed over the recent observation context:
//!
//! ```text
//! x_{t+1} = x_t + (d * dt / |g - x_t|) (g - x_t) + w_t,   w_t ~ N(0, Q)
//! ```
//!
//! Rolling the mean forward and accumulating `Q` per step gives one Gaussian
//! per future tick; the trajectory likelihood of the new observations is the
//! product of their densities.
//!
//! Goal regions of kind [`GoalKind::FollowRobot`] move with the robot
//! end-effector. They are evaluated in the end-effector frame: every sample
//! of the window is re-expressed as `wrist - ee` and the goal sits at a fixed
//! offset from the origin. For a robot that does not move this is identical to
//! a static goal at the end-effector.

use serde::{Deserialize, Serialize};

use crate::intent::{trajectory_log_likelihood, FilterError, Result, StepDensity};
use crate::{Mat2, Vec2};

/// Distances below this leave the directed term at zero.
pub const EPS_GOAL: f64 = 1e-6;
/// Added to a covariance that is not positive definite.
pub const COV_REGULARIZATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    StaticTaskGoal,
    PreparationArea,
    FollowRobot,
}

/// Gaussian region an intention points at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub mean: Vec2,
    pub cov: Mat2,
    pub kind: GoalKind,
}

impl GoalRegion {
    pub fn new(mean: Vec2, cov: Mat2, kind: GoalKind) -> Result<Self> {
        check_psd(&cov, "goal covariance")?;
        Ok(Self { mean, cov, kind })
    }

    pub fn task(mean: Vec2, std: f64) -> Self {
        Self {
            mean,
            cov: Mat2::identity() * (std * std),
            kind: GoalKind::StaticTaskGoal,
        }
    }
}

/// Failure-recovery region centred on the current end-effector position.
pub fn fr_goal_region(robot_ee: Vec2, radius_cov: Mat2) -> GoalRegion {
    GoalRegion {
        mean: robot_ee,
        cov: radius_cov,
        kind: GoalKind::FollowRobot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GilmParams {
    /// Number of most recent context samples used for the speed estimate.
    pub speed_window: usize,
    /// Per-tick process noise covariance, m^2.
    pub process_noise_cov: Mat2,
    /// Propagate goal-region uncertainty into the rollout covariance.
    pub goal_backprop: bool,
    /// Observation tick, s.
    pub dt: f64,
}

impl Default for GilmParams {
    fn default() -> Self {
        Self {
            speed_window: 15,
            process_noise_cov: Mat2::identity() * (0.01 * 0.01),
            goal_backprop: false,
            dt: 1.0 / 30.0,
        }
    }
}

impl GilmParams {
    pub fn validate(&self) -> Result<()> {
        if self.speed_window < 2 {
            return Err(FilterError::InvalidParameter("speed_window must be >= 2".into()));
        }
        if !(self.dt > 0.0) {
            return Err(FilterError::InvalidParameter("dt must be > 0".into()));
        }
        check_psd(&self.process_noise_cov, "process_noise_cov")
    }
}

fn check_psd(cov: &Mat2, what: &str) -> Result<()> {
    let sym = (cov[(0, 1)] - cov[(1, 0)]).abs() <= 1e-12 * (1.0 + cov.abs().max());
    let det = cov.determinant();
    if !cov.iter().all(|v| v.is_finite())
        || !sym
        || cov[(0, 0)] < 0.0
        || cov[(1, 1)] < 0.0
        || det < -1e-18
    {
        return Err(FilterError::InvalidParameter(format!(
            "{what} must be symmetric positive semi-definite"
        )));
    }
    Ok(())
}

/// Recent wrist and end-effector history split into a conditioning context
/// and the new observations that follow it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationWindow {
    timestamps: Vec<f64>,
    wrist: Vec<Vec2>,
    robot_ee: Vec<Vec2>,
    context_len: usize,
}

impl ObservationWindow {
    pub fn new(
        timestamps: Vec<f64>,
        wrist: Vec<Vec2>,
        robot_ee: Vec<Vec2>,
        context_len: usize,
    ) -> Result<Self> {
        if wrist.len() != timestamps.len() || robot_ee.len() != timestamps.len() {
            return Err(FilterError::DimensionMismatch {
                expected: timestamps.len(),
                got: wrist.len().min(robot_ee.len()),
            });
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FilterError::InvalidParameter(
                "window timestamps must be strictly increasing".into(),
            ));
        }
        if context_len > timestamps.len() {
            return Err(FilterError::InvalidParameter(format!(
                "context of {context_len} samples exceeds window of {}",
                timestamps.len()
            )));
        }
        Ok(Self {
            timestamps,
            wrist,
            robot_ee,
            context_len,
        })
    }

    /// Window with a stationary robot at the origin and evenly spaced ticks.
    pub fn from_wrist(wrist: Vec<Vec2>, dt: f64, context_len: usize) -> Result<Self> {
        let n = wrist.len();
        let timestamps = (0..n).map(|i| i as f64 * dt).collect();
        Self::new(timestamps, wrist, vec![Vec2::zeros(); n], context_len)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn context_len(&self) -> usize {
        self.context_len
    }

    pub fn new_len(&self) -> usize {
        self.len() - self.context_len
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn wrist(&self) -> &[Vec2] {
        &self.wrist
    }

    pub fn robot_ee(&self) -> &[Vec2] {
        &self.robot_ee
    }

    /// Wrist positions relative to the end-effector at the same tick.
    pub fn relative_to_robot(&self) -> Self {
        let wrist = self
            .wrist
            .iter()
            .zip(&self.robot_ee)
            .map(|(w, e)| w - e)
            .collect();
        Self {
            timestamps: self.timestamps.clone(),
            wrist,
            robot_ee: vec![Vec2::zeros(); self.len()],
            context_len: self.context_len,
        }
    }

    /// Same window with a different split between context and new samples.
    pub fn with_context_len(&self, context_len: usize) -> Result<Self> {
        Self::new(
            self.timestamps.clone(),
            self.wrist.clone(),
            self.robot_ee.clone(),
            context_len,
        )
    }
}

/// Mean per-tick wrist displacement over the last `speed_window` context
/// samples, divided by `dt`. The mean is taken over displacement vectors,
/// so the result is the net travel per tick.
pub fn estimate_speed(window: &ObservationWindow, params: &GilmParams) -> Result<f64> {
    let ctx = &window.wrist[..window.context_len];
    if ctx.len() < 2 {
        return Err(FilterError::InsufficientObservations {
            horizon: 2,
            available: ctx.len(),
        });
    }
    let take = params.speed_window.min(ctx.len());
    let recent = &ctx[ctx.len() - take..];
    // Magnitude of the mean step: jitter in the smoothed track cancels
    // instead of accumulating as it would in a mean of step lengths.
    let net = recent[take - 1] - recent[0];
    Ok(net.norm() / (take - 1) as f64 / params.dt)
}

/// One GILM transition.
pub fn gilm_step(x: Vec2, goal: &GoalRegion, speed: f64, dt: f64, noise: Vec2) -> Vec2 {
    let to_goal = goal.mean - x;
    let dist = to_goal.norm();
    if dist < EPS_GOAL {
        return x + noise;
    }
    x + to_goal * (speed * dt / dist) + noise
}

/// Mean and covariance of the wrist `tau` ticks ahead, `tau = 1..=tp`.
pub fn gilm_rollout(
    x: Vec2,
    goal: &GoalRegion,
    speed: f64,
    tp: usize,
    params: &GilmParams,
) -> Vec<(Vec2, Mat2)> {
    let mut out = Vec::with_capacity(tp);
    let mut mean = x;
    let mut cov = Mat2::zeros();
    let step = speed * params.dt;
    for _ in 0..tp {
        if params.goal_backprop {
            cov += goal_term(mean, goal, step);
        }
        mean = gilm_step(mean, goal, speed, params.dt, Vec2::zeros());
        cov += params.process_noise_cov;
        out.push((mean, cov));
    }
    out
}

/// Linearised effect of goal uncertainty on one directed step: the step
/// direction `u = (g - x)/r` moves by `(I - u u^T) dg / r`.
fn goal_term(x: Vec2, goal: &GoalRegion, step: f64) -> Mat2 {
    let to_goal = goal.mean - x;
    let r = to_goal.norm();
    if r < EPS_GOAL || step == 0.0 {
        return Mat2::zeros();
    }
    let u = to_goal / r;
    let perp = Mat2::identity() - u * u.transpose();
    let gain = (step / r).min(1.0);
    perp * goal.cov * perp.transpose() * (gain * gain)
}

/// Log density of a bivariate Gaussian, regularising singular covariances.
pub fn gaussian_log_density(x: Vec2, mean: Vec2, cov: &Mat2) -> f64 {
    let mut c = *cov;
    if c.determinant() <= 1e-30 {
        c += Mat2::identity() * COV_REGULARIZATION;
    }
    let det = c.determinant();
    let inv = match c.try_inverse() {
        Some(inv) => inv,
        None => return f64::NEG_INFINITY,
    };
    let d = x - mean;
    let maha = (d.transpose() * inv * d)[(0, 0)];
    -std::f64::consts::LN_2 - std::f64::consts::PI.ln() - 0.5 * det.ln() - 0.5 * maha
}

/// Per-step GILM densities under a goal region.
#[derive(Debug, Clone, Copy)]
pub struct GilmModel<'a> {
    pub params: &'a GilmParams,
}

impl GilmModel<'_> {
    fn frame(&self, window: &ObservationWindow, goal: &GoalRegion) -> (ObservationWindow, GoalRegion) {
        match goal.kind {
            GoalKind::FollowRobot => {
                // Goal offset from the end-effector at the conditioning tick.
                let anchor = window
                    .robot_ee
                    .get(window.context_len.saturating_sub(1))
                    .copied()
                    .unwrap_or_else(Vec2::zeros);
                let rel = GoalRegion {
                    mean: goal.mean - anchor,
                    ..*goal
                };
                (window.relative_to_robot(), rel)
            }
            _ => (window.clone(), *goal),
        }
    }
}

impl StepDensity<ObservationWindow, GoalRegion> for GilmModel<'_> {
    fn available_steps(&self, window: &ObservationWindow) -> usize {
        if window.context_len < 2 {
            0
        } else {
            window.new_len()
        }
    }

    fn step_log_density(&self, window: &ObservationWindow, goal: &GoalRegion, tau: usize) -> f64 {
        let (w, g) = self.frame(window, goal);
        let speed = match estimate_speed(&w, self.params) {
            Ok(s) => s,
            Err(_) => return f64::NAN,
        };
        let x0 = w.wrist[w.context_len - 1];
        let (mean, cov) = gilm_rollout(x0, &g, speed, tau, self.params)[tau - 1];
        gaussian_log_density(w.wrist[w.context_len + tau - 1], mean, &cov)
    }
}

/// `log` of the GILM trajectory likelihood of the first `tp` new samples.
pub fn gilm_log_likelihood(
    window: &ObservationWindow,
    goal: &GoalRegion,
    tp: usize,
    params: &GilmParams,
) -> Result<f64> {
    // Evaluate the whole rollout once rather than per step.
    let model = GilmModel { params };
    let available = model.available_steps(window);
    if tp == 0 {
        return Err(FilterError::InvalidParameter("horizon must be >= 1".into()));
    }
    if tp > available {
        return Err(FilterError::InsufficientObservations {
            horizon: tp,
            available,
        });
    }
    let (w, g) = model.frame(window, goal);
    let speed = estimate_speed(&w, params)?;
    let x0 = w.wrist[w.context_len - 1];
    let rollout = gilm_rollout(x0, &g, speed, tp, params);
    Ok(rollout
        .iter()
        .enumerate()
        .map(|(k, (mean, cov))| gaussian_log_density(w.wrist[w.context_len + k], *mean, cov))
        .sum())
}

/// GILM trajectory likelihood as a density (may underflow to 0).
pub fn gilm_likelihood(
    window: &ObservationWindow,
    goal: &GoalRegion,
    tp: usize,
    params: &GilmParams,
) -> Result<f64> {
    gilm_log_likelihood(window, goal, tp, params).map(f64::exp)
}

/// Reference implementation through the generic per-step product; used to
/// cross-check [`gilm_log_likelihood`].
pub fn gilm_log_likelihood_stepwise(
    window: &ObservationWindow,
    goal: &GoalRegion,
    tp: usize,
    params: &GilmParams,
) -> Result<f64> {
    trajectory_log_likelihood(window, &GilmModel { params }, goal, tp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const DT: f64 = 1.0 / 30.0;

    fn params(sigma: f64) -> GilmParams {
        GilmParams {
            speed_window: 5,
            process_noise_cov: Mat2::identity() * sigma * sigma,
            goal_backprop: false,
            dt: DT,
        }
    }

    fn line(from: Vec2, step: Vec2, n: usize) -> Vec<Vec2> {
        (0..n).map(|i| from + step * i as f64).collect()
    }

    #[test]
    fn speed_examples() {
        let p = params(0.004);
        let w = ObservationWindow::from_wrist(line(Vec2::zeros(), Vec2::new(0.01, 0.0), 10), DT, 10).unwrap();
        assert_abs_diff_eq!(estimate_speed(&w, &p).unwrap(), 0.3, epsilon = 1e-12);
        let w = ObservationWindow::from_wrist(vec![Vec2::new(0.2, 0.1); 6], DT, 6).unwrap();
        assert_eq!(estimate_speed(&w, &p).unwrap(), 0.0);
        let w = ObservationWindow::from_wrist(vec![Vec2::zeros()], DT, 1).unwrap();
        assert!(estimate_speed(&w, &p).is_err());
    }

    #[test]
    fn step_examples() {
        let goal = GoalRegion::task(Vec2::new(3.0, 4.0), 0.025);
        let x = gilm_step(Vec2::zeros(), &goal, 1.0, 1.0, Vec2::zeros());
        assert_abs_diff_eq!(x.x, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(x.y, 0.8, epsilon = 1e-15);
        assert_eq!(gilm_step(goal.mean, &goal, 1.0, 1.0, Vec2::zeros()), goal.mean);
        let p = Vec2::new(0.3, -0.2);
        assert_eq!(gilm_step(p, &goal, 0.0, DT, Vec2::zeros()), p);
    }

    #[test]
    fn rollout_covariance_accumulates() {
        let s = 0.004;
        let goal = GoalRegion::task(Vec2::new(1.0, 0.0), 0.025);
        let r = gilm_rollout(Vec2::zeros(), &goal, 0.3, 1, &params(s));
        assert_abs_diff_eq!(r[0].1, Mat2::identity() * s * s, epsilon = 1e-18);
        let r = gilm_rollout(Vec2::zeros(), &goal, 0.3, 3, &params(s));
        assert_abs_diff_eq!(r[2].1, Mat2::identity() * 3.0 * s * s, epsilon = 1e-18);
        assert_abs_diff_eq!(r[2].0.x, 0.03, epsilon = 1e-12);
    }

    #[test]
    fn goal_backprop_widens_across_track_only() {
        let mut p = params(0.004);
        p.goal_backprop = true;
        let goal = GoalRegion::task(Vec2::new(0.2, 0.0), 0.025);
        let r = gilm_rollout(Vec2::zeros(), &goal, 0.3, 2, &p);
        let extra = r[1].1 - Mat2::identity() * 2.0 * 0.004 * 0.004;
        assert_abs_diff_eq!(extra[(0, 0)], 0.0, epsilon = 1e-18);
        assert!(extra[(1, 1)] > 0.0);
    }

    // Monte-Carlo oracle: iterate the noisy step and compare the empirical
    // mean against the rollout.
    #[test]
    fn rollout_mean_matches_monte_carlo() {
        let p = params(0.004);
        let goal = GoalRegion::task(Vec2::new(0.3, 0.5), 0.025);
        let x0 = Vec2::new(-0.1, 0.05);
        let speed = 0.25;
        let tp = 6;
        let rollout = gilm_rollout(x0, &goal, speed, tp, &p);
        let n = 100_000;
        let normal = Normal::new(0.0, 0.004).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sum = vec![Vec2::zeros(); tp];
        let mut sq = vec![Vec2::zeros(); tp];
        for _ in 0..n {
            let mut x = x0;
            for k in 0..tp {
                let w = Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng));
                x = gilm_step(x, &goal, speed, DT, w);
                sum[k] += x;
                sq[k] += x.component_mul(&x);
            }
        }
        for k in 0..tp {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean.component_mul(&mean);
            for c in 0..2 {
                let se = (var[c] / n as f64).sqrt();
                assert!(
                    (mean[c] - rollout[k].0[c]).abs() < 3.0 * se,
                    "step {k} axis {c}: mc {} rollout {} se {se}",
                    mean[c],
                    rollout[k].0[c]
                );
            }
        }
    }

    #[test]
    fn single_step_likelihood_is_one_gaussian() {
        let p = params(0.005);
        let wrist = vec![Vec2::new(0.0, 0.0), Vec2::new(0.01, 0.0), Vec2::new(0.02, 0.0), Vec2::new(0.031, 0.002)];
        let w = ObservationWindow::from_wrist(wrist, DT, 3).unwrap();
        let goal = GoalRegion::task(Vec2::new(0.5, 0.0), 0.025);
        let ll = gilm_log_likelihood(&w, &goal, 1, &p).unwrap();
        // Mean 0.03, cov 25e-6 I.
        let d2 = 0.001f64.powi(2) + 0.002f64.powi(2);
        let expect = -(2.0 * std::f64::consts::PI * 25e-6).ln() - 0.5 * d2 / 25e-6;
        assert_abs_diff_eq!(ll, expect, epsilon = 1e-9);
        assert_abs_diff_eq!(ll, gilm_log_likelihood_stepwise(&w, &goal, 1, &p).unwrap(), epsilon = 1e-12);
    }

    fn five_goals() -> Vec<GoalRegion> {
        [(-0.18, 0.30), (0.18, 0.30), (-0.18, 0.55), (0.18, 0.55), (0.0, 0.80)]
            .iter()
            .map(|(x, y)| GoalRegion::task(Vec2::new(*x, *y), 0.025))
            .collect()
    }

    // Synthetic trajectory generated from the GILM toward goal 3, then every
    // goal is scored by brute force.
    #[test]
    fn true_goal_wins_on_synthetic_trajectory() {
        let p = params(0.004);
        let goals = five_goals();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 0.002).unwrap();
        let mut x = Vec2::new(0.0, 0.05);
        let mut traj = vec![x];
        for _ in 0..24 {
            let w = Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng));
            x = gilm_step(x, &goals[2], 0.3, DT, w);
            traj.push(x);
        }
        let w = ObservationWindow::from_wrist(traj, DT, 15).unwrap();
        let ll: Vec<f64> = goals
            .iter()
            .map(|g| gilm_log_likelihood(&w, g, 10, &p).unwrap())
            .collect();
        let best = crate::intent::map_index(&ll).unwrap();
        assert_eq!(best, 2, "{ll:?}");
    }

    #[test]
    fn exact_rollout_observations_are_maximal_for_true_goal() {
        let p = params(0.004);
        let goals = five_goals();
        let mut x = Vec2::new(0.05, 0.05);
        let mut traj = vec![x];
        for _ in 0..20 {
            x = gilm_step(x, &goals[1], 0.3, DT, Vec2::zeros());
            traj.push(x);
        }
        let w = ObservationWindow::from_wrist(traj, DT, 15).unwrap();
        let ll: Vec<f64> = goals.iter().map(|g| gilm_log_likelihood(&w, g, 5, &p).unwrap()).collect();
        for (i, l) in ll.iter().enumerate() {
            if i != 1 {
                assert!(ll[1] > *l, "{ll:?}");
            }
        }
    }

    #[test]
    fn follow_robot_goal_tracks_a_moving_robot() {
        let p = params(0.004);
        // Robot and wrist translate together, wrist closing in on the robot.
        let n = 20;
        let ee: Vec<Vec2> = (0..n).map(|i| Vec2::new(0.3 + 0.009 * i as f64, 0.6)).collect();
        let wrist: Vec<Vec2> = (0..n)
            .map(|i| ee[i] + Vec2::new(-0.12 + 0.005 * i as f64, 0.0))
            .collect();
        let ts = (0..n).map(|i| i as f64 * DT).collect();
        let w = ObservationWindow::new(ts, wrist, ee.clone(), 15).unwrap();
        let moving = fr_goal_region(ee[14], Mat2::identity() * 0.03f64.powi(2));
        let frozen = GoalRegion { kind: GoalKind::StaticTaskGoal, ..moving };
        let l_moving = gilm_log_likelihood(&w, &moving, 5, &p).unwrap();
        let l_frozen = gilm_log_likelihood(&w, &frozen, 5, &p).unwrap();
        assert!(l_moving > l_frozen);
        assert_abs_diff_eq!(
            l_moving,
            gilm_log_likelihood_stepwise(&w, &moving, 5, &p).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn follow_robot_goal_equals_static_goal_for_still_robot() {
        let p = GilmParams::default();
        let n = 20;
        let ee = vec![Vec2::new(0.1, 0.7); n];
        let wrist: Vec<Vec2> = (0..n).map(|i| Vec2::new(0.0, 0.2 + 0.008 * i as f64)).collect();
        let ts = (0..n).map(|i| i as f64 * DT).collect();
        let w = ObservationWindow::new(ts, wrist, ee.clone(), 15).unwrap();
        let cov = Mat2::identity() * 0.03f64.powi(2);
        let fr = fr_goal_region(ee[0], cov);
        let st = GoalRegion { kind: GoalKind::StaticTaskGoal, ..fr };
        assert_abs_diff_eq!(
            gilm_log_likelihood(&w, &fr, 5, &p).unwrap(),
            gilm_log_likelihood(&w, &st, 5, &p).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn fr_region_examples() {
        let cov = Mat2::identity() * 0.03f64.powi(2);
        let a = fr_goal_region(Vec2::new(0.4, 0.2), cov);
        assert_eq!(a.mean, Vec2::new(0.4, 0.2));
        assert_eq!(a.kind, GoalKind::FollowRobot);
        let b = fr_goal_region(Vec2::new(0.45, 0.1), cov);
        assert_abs_diff_eq!(b.mean - a.mean, Vec2::new(0.05, -0.1), epsilon = 1e-15);
        assert_abs_diff_eq!(a.cov[(0, 0)].sqrt(), 0.03, epsilon = 1e-15);
    }

    #[test]
    fn too_short_window_is_an_error() {
        let p = params(0.004);
        let w = ObservationWindow::from_wrist(line(Vec2::zeros(), Vec2::new(0.01, 0.0), 8), DT, 5).unwrap();
        let g = GoalRegion::task(Vec2::new(1.0, 0.0), 0.025);
        assert!(matches!(
            gilm_log_likelihood(&w, &g, 4, &p),
            Err(FilterError::InsufficientObservations { horizon: 4, available: 3 })
        ));
        assert!(ObservationWindow::from_wrist(vec![Vec2::zeros(); 3], DT, 4).is_err());
        assert!(ObservationWindow::new(vec![0.0, 0.0], vec![Vec2::zeros(); 2], vec![Vec2::zeros(); 2], 1).is_err());
    }

    #[test]
    fn singular_covariance_is_regularised() {
        let ll = gaussian_log_density(Vec2::zeros(), Vec2::zeros(), &Mat2::zeros());
        assert!(ll.is_finite());
        let expect = -(2.0 * std::f64::consts::PI * COV_REGULARIZATION).ln();
        assert_abs_diff_eq!(ll, expect, epsilon = 1e-9);
    }

    fn rot(theta: f64) -> nalgebra::Rotation2<f64> {
        nalgebra::Rotation2::new(theta)
    }

    proptest! {
        #[test]
        fn distance_to_goal_decreases(
            x in (-1.0f64..1.0, -1.0f64..1.0),
            g in (-1.0f64..1.0, -1.0f64..1.0),
            frac in 0.01f64..0.99,
        ) {
            let x = Vec2::new(x.0, x.1);
            let goal = GoalRegion::task(Vec2::new(g.0, g.1), 0.025);
            let d = (goal.mean - x).norm();
            prop_assume!(d > 1e-3);
            let speed = frac * d / DT;
            let next = gilm_step(x, &goal, speed, DT, Vec2::zeros());
            prop_assert!((goal.mean - next).norm() < d);
        }

        #[test]
        fn likelihood_invariant_under_rigid_motion(
            seed in 0u64..1000,
            shift in (-2.0f64..2.0, -2.0f64..2.0),
            theta in -3.1f64..3.1,
            pivot in (-1.0f64..1.0, -1.0f64..1.0),
            backprop in any::<bool>(),
        ) {
            let mut p = params(0.004);
            p.goal_backprop = backprop;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 0.003).unwrap();
            let goal = GoalRegion::task(Vec2::new(0.2, 0.4), 0.025);
            let mut x = Vec2::new(-0.1, 0.0);
            let mut traj = vec![x];
            for _ in 0..19 {
                let w = Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng));
                x = gilm_step(x, &goal, 0.2, DT, w);
                traj.push(x);
            }
            let base_w = ObservationWindow::from_wrist(traj.clone(), DT, 15).unwrap();
            let base = gilm_log_likelihood(&base_w, &goal, 5, &p).unwrap();

            let t = Vec2::new(shift.0, shift.1);
            let moved: Vec<Vec2> = traj.iter().map(|v| v + t).collect();
            let mw = ObservationWindow::from_wrist(moved, DT, 15).unwrap();
            let mg = GoalRegion { mean: goal.mean + t, ..goal };
            prop_assert!((gilm_log_likelihood(&mw, &mg, 5, &p).unwrap() - base).abs() < 1e-6);

            let c = Vec2::new(pivot.0, pivot.1);
            let r = rot(theta);
            let turned: Vec<Vec2> = traj.iter().map(|v| c + r * (v - c)).collect();
            let rw = ObservationWindow::from_wrist(turned, DT, 15).unwrap();
            let rg = GoalRegion { mean: c + r * (goal.mean - c), ..goal };
            prop_assert!((gilm_log_likelihood(&rw, &rg, 5, &p).unwrap() - base).abs() < 1e-6);
        }
    }
}
