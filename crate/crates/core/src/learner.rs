//! Binds the TP-GMM to the teaching tasks: which frames describe a task
//! condition, and how demonstrations and test items map onto them.
//!
//! Maze frames are the start point, the target center and the two obstacle
//! centers; pick-and-place frames are the start, the grab target and the bin.
//! All frames are pure translations.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::gmm::EmTrace;
use crate::hash::Fnv1a;
use crate::task::{Task, TestCondition};
use crate::tpgmm::{self, FitConfig, Frame, FrameInstance, Init, StateLayout, TpGmmModel};
use crate::trajectory::{Demonstration, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub regularization: f64,
    pub seed: u64,
    /// Demonstrations are resampled to this many states before fitting.
    #[serde(default = "default_len")]
    pub resample_len: usize,
    /// Samples per realized trajectory.
    #[serde(default = "default_len")]
    pub realization_len: usize,
    #[serde(default)]
    pub init: Init,
}

fn default_len() -> usize {
    100
}

impl LearnerConfig {
    /// K = 11 for the maze, K = 7 for pick-and-place; regularization floor
    /// 1e-4 times the squared workspace diagonal; time-based initialization.
    pub fn for_task(task: &Task, seed: u64) -> Self {
        let k = if task.is_maze() { 11 } else { 7 };
        let s = task.scale();
        LearnerConfig {
            k,
            regularization: 1e-4 * s * s,
            seed,
            resample_len: 100,
            realization_len: 100,
            init: Init::TimeBased,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !(self.regularization > 0.0 && self.regularization.is_finite()) {
            return Err(Error::InvalidConfig(
                "learner needs K >= 1 and a positive regularization".into(),
            ));
        }
        if self.resample_len < 2 || self.realization_len < 2 {
            return Err(Error::InvalidConfig(
                "resample and realization lengths must be at least 2".into(),
            ));
        }
        Ok(())
    }

    fn fit_config(&self) -> FitConfig {
        let mut c = FitConfig::new(self.k, self.regularization, self.seed);
        c.resample_len = self.resample_len;
        c.init = self.init;
        c
    }
}

pub fn layout(task: &Task) -> StateLayout {
    if task.is_maze() {
        StateLayout::maze()
    } else {
        StateLayout::pick_place()
    }
}

fn instance(task: &Task, origins: &[Point]) -> Result<FrameInstance> {
    let l = layout(task);
    let frames = origins
        .iter()
        .map(|o| Frame::translation(l, o.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameInstance::new(frames))
}

/// Frames for a concrete start point (maze) or grab target (pick-and-place).
fn frames_at(task: &Task, start: &Point, target: Option<&Point>) -> Result<FrameInstance> {
    match task {
        Task::Maze(m) => {
            let mut origins = Vec::with_capacity(2 + m.obstacles().len());
            origins.push(*start);
            origins.push(m.target().center);
            origins.extend(m.obstacles().iter().map(|o| o.center()));
            instance(task, &origins)
        }
        Task::PickPlace(p) => {
            let target =
                target.ok_or_else(|| Error::contract("pick-and-place frames need a target"))?;
            instance(task, &[*start, *target, *p.bin()])
        }
    }
}

/// Frames under which a test item is realized.
pub fn frames_for_condition(task: &Task, condition: &TestCondition) -> Result<FrameInstance> {
    match (task, condition) {
        (Task::Maze(_), TestCondition::Start(p)) => frames_at(task, p, None),
        (Task::PickPlace(pp), TestCondition::Target { position, .. }) => {
            frames_at(task, pp.start(), Some(position))
        }
        _ => Err(Error::contract("test condition does not match the task")),
    }
}

/// Frames observed during a demonstration: its own first sample is the start
/// frame origin.
pub fn frames_for_demo(task: &Task, demo: &Demonstration) -> Result<FrameInstance> {
    let start = demo.trajectory.first();
    match task {
        Task::Maze(_) => frames_at(task, start, None),
        Task::PickPlace(pp) => {
            let idx = demo
                .target_index
                .ok_or_else(|| Error::contract("pick-and-place demos name a target"))?;
            let target = pp.targets().get(idx).ok_or(Error::TestItemOutOfRange {
                item: idx,
                size: pp.targets().len(),
            })?;
            frames_at(task, start, Some(target))
        }
    }
}

/// Validate that a demonstration fits the task's state layout.
pub fn check_demo_shape(task: &Task, demo: &Demonstration) -> Result<()> {
    let traj = &demo.trajectory;
    if traj.dim() != task.dim() {
        return Err(Error::DimensionMismatch {
            expected: task.dim(),
            found: traj.dim(),
        });
    }
    let wants_gripper = !task.is_maze();
    if traj.has_gripper() != wants_gripper {
        return Err(Error::InvalidTrajectory(if wants_gripper {
            "pick-and-place demonstrations need a gripper channel".into()
        } else {
            "maze demonstrations carry no gripper channel".into()
        }));
    }
    if let Task::PickPlace(pp) = task {
        match demo.target_index {
            None => {
                return Err(Error::InvalidTrajectory(
                    "pick-and-place demonstrations name a target".into(),
                ))
            }
            Some(i) if i >= pp.targets().len() => {
                return Err(Error::TestItemOutOfRange {
                    item: i,
                    size: pp.targets().len(),
                })
            }
            _ => {}
        }
    }
    Ok(())
}

/// Fit a model to all demonstrations so far.
pub fn fit(
    task: &Task,
    demos: &[Demonstration],
    config: &LearnerConfig,
) -> Result<(TpGmmModel, EmTrace)> {
    let mut trajectories = Vec::with_capacity(demos.len());
    let mut frames = Vec::with_capacity(demos.len());
    for d in demos {
        check_demo_shape(task, d)?;
        trajectories.push(d.trajectory.clone());
        frames.push(frames_for_demo(task, d)?);
    }
    tpgmm::fit(&trajectories, &frames, &config.fit_config())
}

/// Realize the model for one test condition.
pub fn realize(
    task: &Task,
    model: &TpGmmModel,
    condition: &TestCondition,
    config: &LearnerConfig,
) -> Result<Trajectory> {
    let frames = frames_for_condition(task, condition)?;
    tpgmm::realize(model, &frames, config.realization_len)
}

/// Stable fingerprint of every model parameter.
pub fn model_hash(model: &TpGmmModel) -> u64 {
    let mut h = Fnv1a::new();
    for v in [
        model.k,
        model.frame_count,
        model.state_dim,
        model.iterations,
    ] {
        h.write_u64(v as u64);
    }
    h.write_u64(model.seed);
    h.write_f64(model.regularization);
    h.write_f64(model.log_likelihood);
    for p in &model.priors {
        h.write_f64(*p);
    }
    for c in model.components.iter().flatten() {
        for v in c.mean.iter().chain(&c.covariance) {
            h.write_f64(*v);
        }
    }
    h.finish()
}

/// The test item a demonstration covers: the grid point nearest its start for
/// the maze, the selected target for pick-and-place.
pub fn covered_item(task: &Task, test_set: &crate::task::TestSet, demo: &Demonstration) -> usize {
    match (task, demo.target_index) {
        (Task::PickPlace(_), Some(i)) => i,
        _ => test_set.nearest(demo.trajectory.first()),
    }
}
