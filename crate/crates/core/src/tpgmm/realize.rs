use alloc::vec::Vec;

use super::{fuse, FrameInstance, TpGmmModel};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::gmm::gmr;
use crate::trajectory::{marks_from_states, normalized_time, Gripper, Sample, Trajectory};

/// Generate a `steps`-sample trajectory for the task condition `instance`.
///
/// With a gripper dimension, the regressed gripper value is thresholded at
/// 0.5; grab is the first upward crossing, release the first downward
/// crossing after it.
pub fn realize(model: &TpGmmModel, instance: &FrameInstance, steps: usize) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::contract("a realization needs at least 2 samples"));
    }
    let global = fuse(model, instance)?;
    let pdim = model.layout.position_dim;
    let mut samples = Vec::with_capacity(steps);
    let mut closed = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = normalized_time(i, steps);
        let out = gmr(&global, t);
        let position = Point::from_slice(&out.mean[..pdim])?;
        let gripper = if model.layout.gripper {
            let c = out.mean[pdim] >= 0.5;
            closed.push(c);
            Some(if c { Gripper::Closed } else { Gripper::Open })
        } else {
            None
        };
        samples.push(Sample {
            t,
            position,
            gripper,
        });
    }
    let marks = if model.layout.gripper {
        marks_from_states(closed.into_iter())
    } else {
        None
    };
    Trajectory::new(samples, marks)
}
