//! Task-parameterized Gaussian mixture model.
//!
//! Demonstrations are observed from several reference frames (start, goal,
//! obstacles, ...). One mixture is learned jointly over all frames: each
//! component owns one local Gaussian per frame and shares its prior and
//! responsibilities across frames. For a new task condition, the local
//! Gaussians are mapped into the world frame and fused by a product of
//! Gaussians, and trajectories are generated by regressing position on time.
//!
//! State vectors are `(t, position..., [gripper])` with `t` normalized to
//! `[0, 1]`.

mod fit;
mod fuse;
mod realize;

pub use fit::{encode_demonstration, fit, FitConfig, Init};
pub use fuse::{fuse, product_of_gaussians};
pub use realize::realize;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::GaussianComponent;
use crate::linalg::to_matrix;

/// Which coordinates a state vector carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub position_dim: usize,
    pub gripper: bool,
}

impl StateLayout {
    pub fn maze() -> Self {
        StateLayout {
            position_dim: 2,
            gripper: false,
        }
    }

    pub fn pick_place() -> Self {
        StateLayout {
            position_dim: 3,
            gripper: true,
        }
    }

    pub fn state_dim(&self) -> usize {
        1 + self.position_dim + usize::from(self.gripper)
    }

    pub fn gripper_index(&self) -> Option<usize> {
        self.gripper.then_some(1 + self.position_dim)
    }
}

/// An affine reference frame over the full state. Time maps identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame", into = "RawFrame")]
pub struct Frame {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TryFrom<RawFrame> for Frame {
    type Error = Error;
    fn try_from(r: RawFrame) -> Result<Self> {
        Frame::new(r.a, r.b)
    }
}

impl From<Frame> for RawFrame {
    fn from(f: Frame) -> Self {
        RawFrame { a: f.a, b: f.b }
    }
}

impl Frame {
    /// `a` is row-major `d x d`, `b` has length `d`.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let d = b.len();
        if d == 0 || a.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: a.len(),
            });
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("frame entries must be finite".into()));
        }
        let time_identity =
            a[0] == 1.0 && (1..d).all(|i| a[i] == 0.0 && a[i * d] == 0.0) && b[0] == 0.0;
        if !time_identity {
            return Err(Error::InvalidConfig(
                "frames must map time identically".into(),
            ));
        }
        let det = to_matrix(d, &a).determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::SingularFrame { frame: 0 });
        }
        Ok(Frame { a, b })
    }

    /// Pure translation placing the frame origin at `origin` (position slots
    /// only; time and gripper untouched).
    pub fn translation(layout: StateLayout, origin: &[f64]) -> Result<Self> {
        if origin.len() != layout.position_dim {
            return Err(Error::DimensionMismatch {
                expected: layout.position_dim,
                found: origin.len(),
            });
        }
        let d = layout.state_dim();
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            a[i * d + i] = 1.0;
        }
        let mut b = vec![0.0; d];
        b[1..=layout.position_dim].copy_from_slice(origin);
        Frame::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> DMatrix<f64> {
        to_matrix(self.dim(), &self.a)
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn translated(&self, offset: &[f64]) -> Frame {
        let mut out = self.clone();
        for (o, v) in out.b[1..].iter_mut().zip(offset) {
            *o += v;
        }
        out
    }
}

/// Concrete frame values for one task condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInstance {
    pub frames: Vec<Frame>,
}

impl FrameInstance {
    pub fn new(frames: Vec<Frame>) -> Self {
        FrameInstance { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn translated(&self, offset: &[f64]) -> FrameInstance {
        FrameInstance {
            frames: self.frames.iter().map(|f| f.translated(offset)).collect(),
        }
    }
}

/// A fitted model: `components[k][f]` is component `k` seen from frame `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpGmmModel {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "F")]
    pub frame_count: usize,
    pub state_dim: usize,
    pub layout: StateLayout,
    pub priors: Vec<f64>,
    pub components: Vec<Vec<GaussianComponent>>,
    pub regularization: f64,
    pub seed: u64,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl TpGmmModel {
    /// Check structural invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.priors.len() != self.k || self.components.len() != self.k {
            return Err(Error::InvalidConfig(
                "component count does not match K".into(),
            ));
        }
        if self.state_dim != self.layout.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.state_dim(),
                found: self.state_dim,
            });
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.priors.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidConfig(
                "priors must be nonnegative and sum to 1".into(),
            ));
        }
        for (k, per_frame) in self.components.iter().enumerate() {
            if per_frame.len() != self.frame_count {
                return Err(Error::InvalidConfig("frame count does not match F".into()));
            }
            for c in per_frame {
                if c.mean.len() != self.state_dim
                    || c.covariance.len() != self.state_dim * self.state_dim
                {
                    return Err(Error::DimensionMismatch {
                        expected: self.state_dim,
                        found: c.mean.len(),
                    });
                }
                if c.covariance_matrix().cholesky().is_none() {
                    return Err(Error::SingularComponent { component: k });
                }
            }
        }
        Ok(())
    }
}
