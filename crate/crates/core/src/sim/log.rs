//! Per-tick trial log, serialized as JSON lines: one header, one record per
//! tick, one footer.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::Intention;
use crate::sim::control::{AssemblyState, Queues, RobotMode};
use crate::sim::Variant;
use crate::Vec2;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub wrist: Vec2,
    /// Raw detection; `None` on dropout.
    pub wrist_obs: Option<Vec2>,
    /// Kalman-smoothed estimate.
    pub wrist_est: Vec2,
    pub ee: Vec2,
    pub ee_vel: Vec2,
    pub mode: RobotMode,
    pub contact: bool,
    pub pull: Vec2,
    /// Task-level posterior over [1, 2, 3, 4, FR].
    pub low: Option<Vec<f64>>,
    /// Interactive-level posterior over [CE, CO].
    pub high: Option<Vec<f64>>,
    pub pred_low: Option<Intention>,
    pub pred_high: Option<Intention>,
    pub gt_low: Option<Intention>,
    pub gt_high: Option<Intention>,
    pub queues: Queues,
    pub assemblies: [AssemblyState; 4],
    pub pushing: Option<u8>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub schema_version: u32,
    pub variant: Variant,
    pub seed: u64,
    pub schedule: Vec<u8>,
    pub injected_failures: Vec<u8>,
    pub dt: f64,
    /// Full scenario configuration.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFooter {
    /// Finished before the duration cap.
    pub completed: bool,
    pub t_end: f64,
    pub ticks: u64,
    /// Parts left in the failed state at the end.
    pub n_failures: u32,
    /// Every failed push, including recovered ones.
    pub failed_pushes: u32,
    pub push_attempts: u32,
    pub assemblies: [AssemblyState; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub header: TrialHeader,
    pub ticks: Vec<TickRecord>,
    pub footer: TrialFooter,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(TrialHeader),
    Tick(TickRecord),
    Footer(TrialFooter),
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a TrialHeader),
    Tick(&'a TickRecord),
    Footer(&'a TrialFooter),
}

impl TrialLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &LineRef::Header(&self.header))?;
        w.write_all(b"\n")?;
        for t in &self.ticks {
            serde_json::to_writer(&mut w, &LineRef::Tick(t))?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &LineRef::Footer(&self.footer))?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut ticks = Vec::new();
        let mut footer = None;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if footer.is_some() {
                return Err(Error::TruncatedLog(format!("line {}: data after footer", n + 1)));
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| Error::TruncatedLog(format!("line {}: {e}", n + 1)))?;
            match parsed {
                Line::Header(h) if header.is_none() && n == 0 => header = Some(h),
                Line::Header(_) => return Err(Error::TruncatedLog(format!("line {}: unexpected header", n + 1))),
                Line::Tick(_) if header.is_none() => {
                    return Err(Error::TruncatedLog("missing header".into()));
                }
                Line::Tick(t) => ticks.push(t),
                Line::Footer(f) => footer = Some(f),
            }
        }
        let header = header.ok_or_else(|| Error::TruncatedLog("missing header".into()))?;
        let footer = footer.ok_or_else(|| Error::TruncatedLog(format!("no footer after {} ticks", ticks.len())))?;
        if footer.ticks != ticks.len() as u64 {
            return Err(Error::TruncatedLog(format!(
                "footer counts {} ticks, log has {}",
                footer.ticks,
                ticks.len()
            )));
        }
        Ok(Self { header, ticks, footer })
    }

    /// Event tags in tick order, each prefixed with its tick index.
    pub fn events(&self) -> Vec<(u64, &str)> {
        self.ticks
            .iter()
            .flat_map(|r| r.events.iter().map(move |e| (r.tick, e.as_str())))
            .collect()
    }
}
