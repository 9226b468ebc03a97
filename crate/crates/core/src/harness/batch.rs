//! Seed sweeps run in parallel, with CSV output and summary statistics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::harness::metrics::Metrics;
use crate::harness::trial::run_trial_metrics;
use crate::sim::Variant;

/// Metric columns, in results-table order.
pub const CSV_COLUMNS: [&str; 11] = [
    "variant",
    "seed",
    "completion_time",
    "automated_path",
    "guided_path",
    "human_force",
    "human_energy",
    "n_failures",
    "low_accuracy",
    "high_accuracy",
    "completed",
];

/// One trial per `(variant, seed)`; each trial keeps its own generator
/// streams so results do not depend on thread scheduling.
pub fn run_batch(base: &ScenarioConfig, variants: &[Variant], seeds: &[u64]) -> Result<Vec<Metrics>> {
    let jobs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|v| seeds.iter().map(move |s| (*v, *s)))
        .collect();
    jobs.par_iter()
        .map(|(variant, seed)| {
            let mut cfg = base.clone();
            cfg.variant = *variant;
            cfg.seed = *seed;
            if *variant == Variant::Cooperation {
                cfg.injected_failures.clear();
            }
            run_trial_metrics(&cfg)
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into())
}

pub fn write_csv<W: Write>(rows: &[Metrics], mut w: W) -> Result<()> {
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for m in rows {
        writeln!(
            w,
            "{},{},{:.6},{},{},{},{},{},{},{},{}",
            m.variant,
            m.seed,
            m.completion_time,
            opt(m.automated_path),
            opt(m.guided_path),
            opt(m.human_force),
            opt(m.human_energy),
            m.n_failures,
            opt(m.low_accuracy),
            opt(m.high_accuracy),
            m.completed
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub n: usize,
}

impl Stat {
    /// `None` when no value is present.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            std,
            median: median(values),
            n,
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub trials: usize,
    pub completed: usize,
    pub completion_time: Option<Stat>,
    pub automated_path: Option<Stat>,
    pub guided_path: Option<Stat>,
    pub human_force: Option<Stat>,
    pub human_energy: Option<Stat>,
    pub n_failures: Option<Stat>,
    pub low_accuracy: Option<Stat>,
    pub high_accuracy: Option<Stat>,
}

pub fn summarize(rows: &[Metrics]) -> Vec<VariantSummary> {
    let mut out = Vec::new();
    for variant in Variant::ALL {
        let rs: Vec<&Metrics> = rows.iter().filter(|m| m.variant == variant).collect();
        if rs.is_empty() {
            continue;
        }
        let col = |f: &dyn Fn(&Metrics) -> Option<f64>| Stat::of(&rs.iter().filter_map(|m| f(m)).collect::<Vec<_>>());
        out.push(VariantSummary {
            variant,
            trials: rs.len(),
            completed: rs.iter().filter(|m| m.completed).count(),
            completion_time: col(&|m| Some(m.completion_time)),
            automated_path: col(&|m| m.automated_path),
            guided_path: col(&|m| m.guided_path),
            human_force: col(&|m| m.human_force),
            human_energy: col(&|m| m.human_energy),
            n_failures: col(&|m| Some(m.n_failures as f64)),
            low_accuracy: col(&|m| m.low_accuracy),
            high_accuracy: col(&|m| m.high_accuracy),
        });
    }
    out
}
