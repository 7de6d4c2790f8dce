//! Timestamped state sequences.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    Open,
    Closed,
}

impl Gripper {
    pub fn as_real(self) -> f64 {
        match self {
            Gripper::Open => 0.0,
            Gripper::Closed => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub position: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper: Option<Gripper>,
}

impl Sample {
    pub fn new(t: f64, position: Point) -> Self {
        Sample {
            t,
            position,
            gripper: None,
        }
    }

    pub fn with_gripper(t: f64, position: Point, gripper: Gripper) -> Self {
        Sample {
            t,
            position,
            gripper: Some(gripper),
        }
    }
}

/// Indices of the grab and release actions into the sample list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMarks {
    pub grab: usize,
    pub release: usize,
}

/// A validated trajectory: at least two samples, strictly increasing time,
/// one position dimensionality, and a gripper channel on all samples or none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory", into = "RawTrajectory")]
pub struct Trajectory {
    samples: Vec<Sample>,
    action_marks: Option<ActionMarks>,
}

#[derive(Serialize, Deserialize)]
struct RawTrajectory {
    samples: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action_marks: Option<ActionMarks>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = Error;

    fn try_from(raw: RawTrajectory) -> Result<Self> {
        Trajectory::new(raw.samples, raw.action_marks)
    }
}

impl From<Trajectory> for RawTrajectory {
    fn from(t: Trajectory) -> Self {
        RawTrajectory {
            samples: t.samples,
            action_marks: t.action_marks,
        }
    }
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>, action_marks: Option<ActionMarks>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        let dim = samples[0].position.dim();
        let has_gripper = samples[0].gripper.is_some();
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || !s.position.is_finite() {
                return Err(Error::InvalidTrajectory(format!(
                    "sample {i} is not finite"
                )));
            }
            if s.position.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.position.dim(),
                });
            }
            if s.gripper.is_some() != has_gripper {
                return Err(Error::InvalidTrajectory(format!(
                    "sample {i}: gripper channel must be present on all samples or none"
                )));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::InvalidTrajectory(format!(
                    "timestamps must be strictly increasing (sample {i})"
                )));
            }
        }
        if let Some(m) = action_marks {
            if m.grab >= m.release || m.release >= samples.len() {
                return Err(Error::InvalidTrajectory(format!(
                    "action marks ({}, {}) invalid for {} samples",
                    m.grab,
                    m.release,
                    samples.len()
                )));
            }
        }
        Ok(Trajectory {
            samples,
            action_marks,
        })
    }

    /// Trajectory from bare 2D/3D points at unit-spaced timestamps.
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, p)| Sample::new(i as f64, *p))
            .collect();
        Trajectory::new(samples, None)
    }

    /// Derive action marks from the gripper channel: grab at the first
    /// open-to-closed flip, release at the first closed-to-open flip after it.
    pub fn with_marks_from_gripper(samples: Vec<Sample>) -> Result<Self> {
        let marks = marks_from_states(samples.iter().map(|s| s.gripper == Some(Gripper::Closed)));
        Trajectory::new(samples, marks)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].position.dim()
    }

    pub fn has_gripper(&self) -> bool {
        self.samples[0].gripper.is_some()
    }

    pub fn action_marks(&self) -> Option<ActionMarks> {
        self.action_marks
    }

    pub fn first(&self) -> &Point {
        &self.samples[0].position
    }

    pub fn last(&self) -> &Point {
        &self.samples[self.samples.len() - 1].position
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point> + '_ {
        self.samples.iter().map(|s| &s.position)
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }

    pub fn translated(&self, offset: &[f64]) -> Trajectory {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                position: s.position.translate(offset),
                ..s.clone()
            })
            .collect();
        Trajectory {
            samples,
            action_marks: self.action_marks,
        }
    }

    /// Insert the midpoint between every pair of consecutive samples.
    /// Action marks keep pointing at the same original samples.
    pub fn densified(&self) -> Trajectory {
        let mut samples = Vec::with_capacity(2 * self.samples.len() - 1);
        for (i, s) in self.samples.iter().enumerate() {
            if i > 0 {
                let prev = &self.samples[i - 1];
                samples.push(Sample {
                    t: 0.5 * (prev.t + s.t),
                    position: prev.position.lerp(&s.position, 0.5),
                    gripper: prev.gripper,
                });
            }
            samples.push(s.clone());
        }
        let action_marks = self.action_marks.map(|m| ActionMarks {
            grab: 2 * m.grab,
            release: 2 * m.release,
        });
        Trajectory {
            samples,
            action_marks,
        }
    }

    /// Position at normalized time `u` in `[0, 1]` by linear interpolation.
    pub fn position_at_normalized(&self, u: f64) -> Point {
        let t0 = self.samples[0].t;
        let t = t0 + u.clamp(0.0, 1.0) * self.duration();
        let idx = self.samples.partition_point(|s| s.t <= t);
        if idx == 0 {
            return self.samples[0].position;
        }
        if idx >= self.samples.len() {
            return *self.last();
        }
        let a = &self.samples[idx - 1];
        let b = &self.samples[idx];
        a.position.lerp(&b.position, (t - a.t) / (b.t - a.t))
    }

    /// Gripper state at normalized time `u` (zero-order hold), as 0/1.
    pub fn gripper_at_normalized(&self, u: f64) -> Option<f64> {
        if !self.has_gripper() {
            return None;
        }
        let t = self.samples[0].t + u.clamp(0.0, 1.0) * self.duration();
        let idx = self.samples.partition_point(|s| s.t <= t).max(1) - 1;
        self.samples[idx].gripper.map(Gripper::as_real)
    }

    /// Positions resampled at `n` uniformly spaced normalized times.
    pub fn resample_positions(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| self.position_at_normalized(normalized_time(i, n)))
            .collect()
    }
}

/// `i`-th of `n` uniform times over `[0, 1]`.
pub fn normalized_time(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Grab at the first false→true flip, release at the first true→false flip after it.
pub fn marks_from_states(closed: impl Iterator<Item = bool>) -> Option<ActionMarks> {
    let mut prev: Option<bool> = None;
    let mut grab = None;
    for (i, c) in closed.enumerate() {
        if let Some(p) = prev {
            match grab {
                None if !p && c => grab = Some(i),
                Some(g) if p && !c => {
                    return Some(ActionMarks {
                        grab: g,
                        release: i,
                    })
                }
                _ => {}
            }
        }
        prev = Some(c);
    }
    None
}

/// A trajectory as handed to the learner, with the task condition it was
/// demonstrated for (the grab target for pick-and-place).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_index: Option<usize>,
}

impl Demonstration {
    pub fn maze(trajectory: Trajectory) -> Self {
        Demonstration {
            trajectory,
            target_index: None,
        }
    }

    pub fn pick_place(trajectory: Trajectory, target_index: usize) -> Self {
        Demonstration {
            trajectory,
            target_index: Some(target_index),
        }
    }
}
