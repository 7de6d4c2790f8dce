//! Core of the teaching workbench.
//!
//! Everything in this crate is pure computation over in-memory values: task
//! geometry and membership predicates, the task-parameterized mixture-model
//! learner, teaching metrics and failure detectors, simulated teacher
//! policies, and the iterative session engine. File formats, rendering, the
//! CLI and the HTTP service live in the `teachgym` companion crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod gmm;
pub mod hash;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod scenarios;
pub mod session;
pub mod task;
pub mod teachers;
pub mod tpgmm;
pub mod trajectory;

pub use error::{Error, Result};
pub use geometry::{Aabb, Circle, Point, Rect};
pub use task::{MazeTask, MembershipResult, PickPlaceTask, Task, TestCondition, TestSet};
pub use trajectory::{ActionMarks, Demonstration, Gripper, Sample, Trajectory};
