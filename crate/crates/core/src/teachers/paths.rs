//! Scripted demonstration paths standing in for a human moving the robot.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::task::{MazeTask, PickPlaceTask, Task};
use crate::trajectory::{Gripper, Sample, Trajectory};

/// Maze paths: start, then fixed corridor waypoints, then the target center.
/// Each leg takes the same time so demonstrations align in normalized time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeScript {
    pub waypoints: Vec<Point>,
    /// Standard deviation of waypoint jitter (meters), clipped at 3 sigma.
    pub noise_sigma: f64,
    pub samples_per_leg: usize,
    /// Half-width of the moving-average smoothing window, in samples.
    pub smoothing: usize,
    /// Seconds between samples.
    pub dt: f64,
}

/// Pick-and-place paths: reach for the target, pause while the gripper
/// closes, carry to the bin, pause while it opens, lift. Every leg follows a
/// minimum-jerk profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickPlaceScript {
    /// Height of the final lift above the release point.
    pub clearance: f64,
    /// Standard deviation of grab/release placement error (meters), clipped
    /// at 3 sigma.
    pub noise_sigma: f64,
    pub samples_per_leg: usize,
    /// Samples spent still at the grab and release points; the gripper
    /// switches halfway through.
    pub dwell_samples: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemoScript {
    Maze(MazeScript),
    PickPlace(PickPlaceScript),
}

impl DemoScript {
    pub fn validate(&self, task: &Task) -> Result<()> {
        let (sigma, per_leg, dt) = match (self, task) {
            (DemoScript::Maze(s), Task::Maze(_)) => {
                if s.waypoints.iter().any(|w| w.dim() != 2) {
                    return Err(Error::InvalidConfig("maze waypoints are 2D".into()));
                }
                (s.noise_sigma, s.samples_per_leg, s.dt)
            }
            (DemoScript::PickPlace(s), Task::PickPlace(_)) => {
                if !(s.clearance >= 0.0) || s.dwell_samples < 2 {
                    return Err(Error::InvalidConfig(
                        "clearance must be nonnegative and dwell at least 2 samples".into(),
                    ));
                }
                (s.noise_sigma, s.samples_per_leg, s.dt)
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "demonstration script does not match the task".into(),
                ))
            }
        };
        if !(sigma >= 0.0) || per_leg == 0 || !(dt > 0.0) {
            return Err(Error::InvalidConfig(
                "script needs sigma >= 0, samples_per_leg >= 1, dt > 0".into(),
            ));
        }
        Ok(())
    }
}

fn clipped_normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let n = Normal::new(0.0, sigma).expect("positive sigma");
    n.sample(rng).clamp(-3.0 * sigma, 3.0 * sigma)
}

fn jitter<R: Rng + ?Sized>(p: &Point, sigma: f64, rng: &mut R) -> Point {
    let offset: Vec<f64> = (0..p.dim()).map(|_| clipped_normal(rng, sigma)).collect();
    p.translate(&offset)
}

/// Points along the polyline, `per_leg` per leg, ending exactly on the last vertex.
fn polyline(vertices: &[Point], per_leg: usize) -> Vec<Point> {
    polyline_timed(vertices, per_leg, |u| u)
}

/// Polyline whose legs follow the time scaling `profile` on `[0, 1]`.
fn polyline_timed(vertices: &[Point], per_leg: usize, profile: impl Fn(f64) -> f64) -> Vec<Point> {
    let mut out = Vec::with_capacity((vertices.len() - 1) * per_leg + 1);
    for w in vertices.windows(2) {
        for i in 0..per_leg {
            out.push(w[0].lerp(&w[1], profile(i as f64 / per_leg as f64)));
        }
    }
    out.push(vertices[vertices.len() - 1]);
    out
}

/// Minimum-jerk time scaling: zero velocity and acceleration at both ends.
fn minimum_jerk(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// Centered moving average whose window shrinks near the ends, so both
/// endpoints are kept.
fn smooth(points: &[Point], half: usize) -> Vec<Point> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let w = half.min(i).min(n - 1 - i);
            let mut acc = [0.0; 3];
            for p in &points[i - w..=i + w] {
                for (a, c) in acc.iter_mut().zip(p.as_slice()) {
                    *a += c;
                }
            }
            let m = (2 * w + 1) as f64;
            Point::from_slice(
                &acc[..points[i].dim()]
                    .iter()
                    .map(|a| a / m)
                    .collect::<Vec<_>>(),
            )
            .expect("finite")
        })
        .collect()
}

/// One maze path from `start` through the corridor waypoints to the target.
/// Only interior waypoints are jittered.
pub fn scripted_maze_path<R: Rng + ?Sized>(
    task: &MazeTask,
    script: &MazeScript,
    start: &Point,
    rng: &mut R,
) -> Result<Trajectory> {
    if start.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: start.dim(),
        });
    }
    let mut vertices = Vec::with_capacity(script.waypoints.len() + 2);
    vertices.push(*start);
    vertices.extend(
        script
            .waypoints
            .iter()
            .map(|w| jitter(w, script.noise_sigma, rng)),
    );
    vertices.push(task.target().center);
    let points = smooth(
        &polyline(&vertices, script.samples_per_leg),
        script.smoothing,
    );
    let samples = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| Sample::new(i as f64 * script.dt, p))
        .collect();
    Trajectory::new(samples, None)
}

/// One pick-and-place path grabbing at `grab_target` and releasing over the bin.
pub fn scripted_pick_place_path<R: Rng + ?Sized>(
    task: &PickPlaceTask,
    script: &PickPlaceScript,
    grab_target: &Point,
    rng: &mut R,
) -> Result<Trajectory> {
    let up = |p: &Point| p.translate(&[0.0, 0.0, script.clearance]);
    let grasp = jitter(grab_target, script.noise_sigma, rng);
    let release = jitter(task.bin(), script.noise_sigma, rng);
    let n = script.samples_per_leg;
    let dwell = script.dwell_samples.max(2);
    let mut points = polyline_timed(&[*task.start(), grasp], n, minimum_jerk);
    let grab_idx = points.len() - 1 + dwell / 2;
    points.extend(core::iter::repeat_n(grasp, dwell));
    points.extend(
        polyline_timed(&[grasp, release], n, minimum_jerk)
            .into_iter()
            .skip(1),
    );
    let release_idx = points.len() - 1 + dwell / 2;
    points.extend(core::iter::repeat_n(release, dwell));
    points.extend(
        polyline_timed(&[release, up(&release)], n, minimum_jerk)
            .into_iter()
            .skip(1),
    );
    let samples = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let g = if (grab_idx..release_idx).contains(&i) {
                Gripper::Closed
            } else {
                Gripper::Open
            };
            Sample::with_gripper(i as f64 * script.dt, p, g)
        })
        .collect();
    Trajectory::with_marks_from_gripper(samples)
}
