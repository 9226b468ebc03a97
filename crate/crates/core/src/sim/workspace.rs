//! Table geometry: four square part regions, the preparation strip on the
//! human side and the robot's home position on the far side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::gilm::GoalRegion;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Square {
    pub center: Vec2,
    pub side: f64,
}

impl Square {
    pub fn contains(&self, p: Vec2) -> bool {
        let h = self.side / 2.0;
        (p.x - self.center.x).abs() <= h && (p.y - self.center.y).abs() <= h
    }

    fn rect(&self) -> Rect {
        let h = Vec2::new(self.side / 2.0, self.side / 2.0);
        Rect {
            min: self.center - h,
            max: self.center + h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn center(&self) -> Vec2 {
        (self.min + self.max) / 2.0
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x < other.max.x && other.min.x < self.max.x && self.min.y < other.max.y && other.min.y < self.max.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Workspace {
    /// Parts 1-4 in label order.
    pub task_regions: Vec<Square>,
    pub prep_region: Rect,
    pub bounds: Rect,
    pub robot_home: Vec2,
    /// Goal-region standard deviation as a fraction of the square side.
    pub goal_std_fraction: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        // 10 cm squares with 26 cm / 15 cm edge gaps: centres 36 cm apart
        // across the table and 25 cm apart along it.
        let side = 0.10;
        let task_regions = [(-0.18, 0.30), (0.18, 0.30), (-0.18, 0.55), (0.18, 0.55)]
            .iter()
            .map(|(x, y)| Square {
                center: Vec2::new(*x, *y),
                side,
            })
            .collect();
        Self {
            task_regions,
            prep_region: Rect {
                min: Vec2::new(-0.08, 0.025),
                max: Vec2::new(0.08, 0.075),
            },
            bounds: Rect {
                min: Vec2::new(-0.5, 0.0),
                max: Vec2::new(0.5, 0.9),
            },
            robot_home: Vec2::new(0.0, 0.80),
            goal_std_fraction: 0.25,
        }
    }
}

impl Workspace {
    pub fn validate(&self) -> Result<()> {
        if self.task_regions.len() != 4 {
            return Err(Error::config(
                "workspace.task_regions",
                format!("expected 4 regions, got {}", self.task_regions.len()),
            ));
        }
        for (i, sq) in self.task_regions.iter().enumerate() {
            if !(sq.side > 0.0) {
                return Err(Error::config(format!("workspace.task_regions[{i}].side"), "must be > 0"));
            }
            if !self.bounds.contains_rect(&sq.rect()) {
                return Err(Error::config(format!("workspace.task_regions[{i}]"), "outside table bounds"));
            }
            for (j, other) in self.task_regions.iter().enumerate().take(i) {
                if sq.rect().overlaps(&other.rect()) {
                    return Err(Error::config(
                        format!("workspace.task_regions[{i}]"),
                        format!("overlaps region {}", j + 1),
                    ));
                }
            }
            if sq.rect().overlaps(&self.prep_region) {
                return Err(Error::config(format!("workspace.task_regions[{i}]"), "overlaps the preparation area"));
            }
        }
        if !self.bounds.contains_rect(&self.prep_region) {
            return Err(Error::config("workspace.prep_region", "outside table bounds"));
        }
        if !self.bounds.contains(self.robot_home) {
            return Err(Error::config("workspace.robot_home", "outside table bounds"));
        }
        if !(self.goal_std_fraction > 0.0) {
            return Err(Error::config("workspace.goal_std_fraction", "must be > 0"));
        }
        Ok(())
    }

    /// Centre of part `part` (1-based).
    pub fn part_center(&self, part: u8) -> Vec2 {
        self.task_regions[part as usize - 1].center
    }

    pub fn goal_regions(&self) -> Vec<GoalRegion> {
        self.task_regions
            .iter()
            .map(|sq| GoalRegion::task(sq.center, sq.side * self.goal_std_fraction))
            .collect()
    }

    /// Part whose region contains `p`, if any.
    pub fn region_at(&self, p: Vec2) -> Option<u8> {
        self.task_regions
            .iter()
            .position(|sq| sq.contains(p))
            .map(|i| i as u8 + 1)
    }
}
