//! Per-trial metrics: completion time, path lengths split by who drives the
//! robot, human effort, residual failures and frame-wise accuracy.

use serde::{Deserialize, Serialize};

use crate::intent::Level;
use crate::sim::log::TrialLog;
use crate::sim::Variant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub variant: Variant,
    pub seed: u64,
    pub completed: bool,
    pub completion_time: f64,
    /// End-effector path driven by the coexistence module, m. Absent in the
    /// cooperation baseline.
    pub automated_path: Option<f64>,
    /// End-effector path while in contact with the human, m. Absent in the
    /// coexistence baseline.
    pub guided_path: Option<f64>,
    /// Mean pull magnitude while guiding, N-equivalent.
    pub human_force: Option<f64>,
    /// Sum of |pull| |ee velocity| dt, J-equivalent.
    pub human_energy: Option<f64>,
    pub n_failures: u32,
    pub low_accuracy: Option<f64>,
    pub high_accuracy: Option<f64>,
}

/// Share of ticks whose MAP estimate matches the ground truth. Ticks with
/// blank ground truth or no estimate yet are excluded.
pub fn frame_accuracy(log: &TrialLog, level: Level) -> Option<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for r in &log.ticks {
        let (gt, pred) = match level {
            Level::Task => (r.gt_low, r.pred_low),
            Level::Interactive => (r.gt_high, r.pred_high),
        };
        if let (Some(gt), Some(pred)) = (gt, pred) {
            n += 1;
            hit += usize::from(gt == pred);
        }
    }
    (n > 0).then(|| hit as f64 / n as f64)
}

pub fn compute_metrics(log: &TrialLog) -> Metrics {
    let variant = log.header.variant;
    let dt = log.header.dt;
    let (mut automated, mut guided, mut force_sum, mut energy) = (0.0, 0.0, 0.0, 0.0);
    let mut guided_ticks = 0usize;
    for r in &log.ticks {
        // ee_vel is the realised displacement over the tick divided by dt.
        let step = r.ee_vel.norm() * dt;
        if r.contact {
            guided += step;
            guided_ticks += 1;
            force_sum += r.pull.norm();
            energy += r.pull.norm() * r.ee_vel.norm() * dt;
        } else {
            automated += step;
        }
    }
    let guided_present = variant != Variant::Coexistence;
    Metrics {
        variant,
        seed: log.header.seed,
        completed: log.footer.completed,
        completion_time: log.footer.t_end,
        automated_path: (variant != Variant::Cooperation).then_some(automated),
        guided_path: guided_present.then_some(guided),
        human_force: guided_present.then(|| if guided_ticks > 0 { force_sum / guided_ticks as f64 } else { 0.0 }),
        human_energy: guided_present.then_some(energy),
        n_failures: log.footer.n_failures,
        low_accuracy: frame_accuracy(log, Level::Task),
        high_accuracy: frame_accuracy(log, Level::Interactive),
    }
}
