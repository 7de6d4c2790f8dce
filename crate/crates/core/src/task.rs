//! Teaching tasks, their membership predicates, and finite test sets.
//!
//! The maze task accepts a path when it starts in the start zone, ends in
//! the target disc, and never enters an obstacle or leaves the bounds. The
//! pick-and-place task accepts a path that stays inside the admissible box,
//! grabs close enough to the intended target, and releases close enough to
//! the bin.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Circle, Point, Rect};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMaze", into = "RawMaze")]
pub struct MazeTask {
    bounds: Rect,
    start_zone: Rect,
    target: Circle,
    obstacles: Vec<Rect>,
}

#[derive(Serialize, Deserialize)]
struct RawMaze {
    bounds: Rect,
    start_zone: Rect,
    target: Circle,
    obstacles: Vec<Rect>,
}

impl TryFrom<RawMaze> for MazeTask {
    type Error = Error;
    fn try_from(r: RawMaze) -> Result<Self> {
        MazeTask::new(r.bounds, r.start_zone, r.target, r.obstacles)
    }
}

impl From<MazeTask> for RawMaze {
    fn from(m: MazeTask) -> Self {
        RawMaze {
            bounds: m.bounds,
            start_zone: m.start_zone,
            target: m.target,
            obstacles: m.obstacles,
        }
    }
}

impl MazeTask {
    pub fn new(
        bounds: Rect,
        start_zone: Rect,
        target: Circle,
        obstacles: Vec<Rect>,
    ) -> Result<Self> {
        if target.center.dim() != 2 || !(target.radius > 0.0) {
            return Err(Error::InvalidTask(
                "target must be a 2D disc with positive radius".into(),
            ));
        }
        if !bounds.contains_rect(&start_zone) {
            return Err(Error::InvalidTask(
                "start zone must lie inside the bounds".into(),
            ));
        }
        if !bounds.contains(&target.center) {
            return Err(Error::InvalidTask(
                "target center must lie inside the bounds".into(),
            ));
        }
        for (i, o) in obstacles.iter().enumerate() {
            if !bounds.contains_rect(o) {
                return Err(Error::InvalidTask(format!(
                    "obstacle {i} leaves the bounds"
                )));
            }
            if o.interiors_overlap(&start_zone) {
                return Err(Error::InvalidTask(format!(
                    "obstacle {i} overlaps the start zone"
                )));
            }
            if o.distance_to(&target.center) < target.radius {
                return Err(Error::InvalidTask(format!(
                    "obstacle {i} overlaps the target"
                )));
            }
        }
        Ok(MazeTask {
            bounds,
            start_zone,
            target,
            obstacles,
        })
    }

    pub fn bounds(&self) -> &Rect {
        &self.bounds
    }

    pub fn start_zone(&self) -> &Rect {
        &self.start_zone
    }

    pub fn target(&self) -> &Circle {
        &self.target
    }

    pub fn obstacles(&self) -> &[Rect] {
        &self.obstacles
    }

    pub fn admissible(&self, p: &Point) -> Result<bool> {
        check_dim(2, p.dim())?;
        Ok(self.bounds.contains(p)
            && self
                .obstacles
                .iter()
                .all(|o| !o.segment_hits_interior(p, p)))
    }

    /// Segment `a`-`b` lies in the admissible space (bounds are convex, so
    /// checking the endpoints suffices for them).
    pub fn segment_admissible(&self, a: &Point, b: &Point) -> bool {
        self.bounds.contains(a)
            && self.bounds.contains(b)
            && self
                .obstacles
                .iter()
                .all(|o| !o.segment_hits_interior(a, b))
    }

    pub fn check_membership(&self, traj: &Trajectory) -> Result<MembershipResult> {
        check_dim(2, traj.dim())?;
        if traj.has_gripper() {
            return Err(Error::contract(
                "maze trajectories carry no gripper channel",
            ));
        }
        let mut result = MembershipBuilder::default();

        let mut admissible_violation: f64 = 0.0;
        let mut admissible = true;
        let samples = traj.samples();
        for (i, s) in samples.iter().enumerate() {
            let p = &s.position;
            if !self.bounds.contains(p) {
                admissible = false;
                admissible_violation = admissible_violation.max(self.bounds.distance_to(p));
            }
            let a = if i == 0 { p } else { &samples[i - 1].position };
            for o in &self.obstacles {
                if o.segment_hits_interior(a, p) {
                    admissible = false;
                    admissible_violation = admissible_violation.max(o.segment_penetration(a, p));
                }
            }
        }
        if !admissible {
            result.violate(Criterion::AdmissibleSpace, admissible_violation);
        }
        if !self.start_zone.contains(traj.first()) {
            result.violate(
                Criterion::StartCondition,
                self.start_zone.distance_to(traj.first()),
            );
        }
        if !self.target.contains(traj.last()) {
            let d = self.target.center.distance(traj.last()) - self.target.radius;
            result.violate(Criterion::EndCondition, d);
        }
        Ok(result.finish(false))
    }

    /// `nx` x `ny` grid of cell centers over the start zone, row-major
    /// (y outer, x inner). A single cell along an axis puts its point at the center.
    pub fn build_test_set(&self, nx: usize, ny: usize) -> Result<TestSet> {
        if nx == 0 || ny == 0 {
            return Err(Error::contract("grid resolution must be positive"));
        }
        let z = &self.start_zone;
        let mut items = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = Point::xy(
                    grid_coord(z.xmin, z.xmax, i, nx),
                    grid_coord(z.ymin, z.ymax, j, ny),
                );
                items.push(TestCondition::Start(p));
            }
        }
        Ok(TestSet { items })
    }

    pub fn diagonal(&self) -> f64 {
        (self.bounds.width().powi(2) + self.bounds.height().powi(2)).sqrt()
    }
}

/// Center of cell `i` of `n` equal cells spanning `[lo, hi]`.
fn grid_coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * ((i as f64 + 0.5) / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPickPlace", into = "RawPickPlace")]
pub struct PickPlaceTask {
    admissible_box: Aabb,
    targets: Vec<Point>,
    tray_rows: usize,
    tray_cols: usize,
    bin: Point,
    start: Point,
    grab_threshold: f64,
    release_threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPickPlace {
    admissible_box: Aabb,
    targets: Vec<Point>,
    tray_rows: usize,
    tray_cols: usize,
    bin: Point,
    start: Point,
    grab_threshold: f64,
    release_threshold: f64,
}

impl TryFrom<RawPickPlace> for PickPlaceTask {
    type Error = Error;
    fn try_from(r: RawPickPlace) -> Result<Self> {
        PickPlaceTask::new(
            r.admissible_box,
            r.targets,
            (r.tray_rows, r.tray_cols),
            r.bin,
            r.start,
            r.grab_threshold,
            r.release_threshold,
        )
    }
}

impl From<PickPlaceTask> for RawPickPlace {
    fn from(t: PickPlaceTask) -> Self {
        RawPickPlace {
            admissible_box: t.admissible_box,
            targets: t.targets,
            tray_rows: t.tray_rows,
            tray_cols: t.tray_cols,
            bin: t.bin,
            start: t.start,
            grab_threshold: t.grab_threshold,
            release_threshold: t.release_threshold,
        }
    }
}

impl PickPlaceTask {
    /// `targets` are the tray cells in row-major order of a `rows` x `cols` grid.
    pub fn new(
        admissible_box: Aabb,
        targets: Vec<Point>,
        (tray_rows, tray_cols): (usize, usize),
        bin: Point,
        start: Point,
        grab_threshold: f64,
        release_threshold: f64,
    ) -> Result<Self> {
        if targets.is_empty() || targets.len() != tray_rows * tray_cols {
            return Err(Error::InvalidTask(format!(
                "{} targets do not fill a {tray_rows}x{tray_cols} tray",
                targets.len()
            )));
        }
        for p in targets.iter().chain([&bin, &start]) {
            if p.dim() != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    found: p.dim(),
                });
            }
            if !admissible_box.contains(p) {
                return Err(Error::InvalidTask(format!(
                    "point {p} lies outside the admissible box"
                )));
            }
        }
        if !(grab_threshold > 0.0 && release_threshold > 0.0) {
            return Err(Error::InvalidTask(
                "grab/release thresholds must be positive".into(),
            ));
        }
        Ok(PickPlaceTask {
            admissible_box,
            targets,
            tray_rows,
            tray_cols,
            bin,
            start,
            grab_threshold,
            release_threshold,
        })
    }

    pub fn admissible_box(&self) -> &Aabb {
        &self.admissible_box
    }

    pub fn targets(&self) -> &[Point] {
        &self.targets
    }

    pub fn tray_shape(&self) -> (usize, usize) {
        (self.tray_rows, self.tray_cols)
    }

    pub fn bin(&self) -> &Point {
        &self.bin
    }

    pub fn start(&self) -> &Point {
        &self.start
    }

    pub fn grab_threshold(&self) -> f64 {
        self.grab_threshold
    }

    pub fn release_threshold(&self) -> f64 {
        self.release_threshold
    }

    pub fn with_thresholds(mut self, grab: f64, release: f64) -> Result<Self> {
        if !(grab > 0.0 && release > 0.0) {
            return Err(Error::InvalidTask(
                "grab/release thresholds must be positive".into(),
            ));
        }
        self.grab_threshold = grab;
        self.release_threshold = release;
        Ok(self)
    }

    pub fn admissible(&self, p: &Point) -> Result<bool> {
        check_dim(3, p.dim())?;
        Ok(self.admissible_box.contains(p))
    }

    /// Items probed by generalisation sampling: the four tray corners and the
    /// center cell (row-major, ties toward the lowest index).
    pub fn generalisation_sampling_items(&self) -> Vec<usize> {
        let (r, c) = (self.tray_rows, self.tray_cols);
        let mut items = Vec::new();
        for idx in [
            0,
            c - 1,
            (r - 1) * c,
            r * c - 1,
            ((r - 1) / 2) * c + (c - 1) / 2,
        ] {
            if !items.contains(&idx) {
                items.push(idx);
            }
        }
        items
    }

    pub fn check_membership(
        &self,
        traj: &Trajectory,
        target_index: usize,
    ) -> Result<MembershipResult> {
        check_dim(3, traj.dim())?;
        if !traj.has_gripper() {
            return Err(Error::contract(
                "pick-and-place trajectories carry a gripper channel",
            ));
        }
        let target = self
            .targets
            .get(target_index)
            .ok_or(Error::TestItemOutOfRange {
                item: target_index,
                size: self.targets.len(),
            })?;
        let mut result = MembershipBuilder::default();
        let outside = traj
            .positions()
            .map(|p| self.admissible_box.distance_outside(p))
            .fold(0.0, f64::max);
        if outside > 0.0 {
            result.violate(Criterion::AdmissibleSpace, outside);
        }
        let samples = traj.samples();
        match traj.action_marks() {
            Some(marks) => {
                let g = samples[marks.grab].position.distance(target);
                if g > self.grab_threshold {
                    result.violate(Criterion::GrabDistance, g - self.grab_threshold);
                }
                let r = samples[marks.release].position.distance(&self.bin);
                if r > self.release_threshold {
                    result.violate(Criterion::ReleaseDistance, r - self.release_threshold);
                }
                Ok(result.finish(false))
            }
            None => {
                let closest = |q: &Point| {
                    traj.positions()
                        .map(|p| p.distance(q))
                        .fold(f64::INFINITY, f64::min)
                };
                result.violate(
                    Criterion::GrabDistance,
                    (closest(target) - self.grab_threshold).max(0.0),
                );
                result.violate(
                    Criterion::ReleaseDistance,
                    (closest(&self.bin) - self.release_threshold).max(0.0),
                );
                Ok(result.finish(true))
            }
        }
    }

    pub fn build_test_set(&self) -> TestSet {
        let items = self
            .targets
            .iter()
            .enumerate()
            .map(|(index, p)| TestCondition::Target {
                index,
                position: *p,
            })
            .collect();
        TestSet { items }
    }

    pub fn diagonal(&self) -> f64 {
        self.admissible_box.diagonal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Maze(MazeTask),
    PickPlace(PickPlaceTask),
}

impl Task {
    pub fn dim(&self) -> usize {
        match self {
            Task::Maze(_) => 2,
            Task::PickPlace(_) => 3,
        }
    }

    pub fn is_maze(&self) -> bool {
        matches!(self, Task::Maze(_))
    }

    pub fn admissible(&self, p: &Point) -> Result<bool> {
        match self {
            Task::Maze(m) => m.admissible(p),
            Task::PickPlace(t) => t.admissible(p),
        }
    }

    /// Workspace diagonal, the length scale for regularization and tolerances.
    pub fn scale(&self) -> f64 {
        match self {
            Task::Maze(m) => m.diagonal(),
            Task::PickPlace(t) => t.diagonal(),
        }
    }

    /// Membership of `traj` executed for `condition`. The maze verdict does
    /// not depend on which grid start was intended; pick-and-place judges the
    /// grab against the condition's target.
    pub fn check_membership(
        &self,
        traj: &Trajectory,
        condition: &TestCondition,
    ) -> Result<MembershipResult> {
        match (self, condition) {
            (Task::Maze(m), _) => m.check_membership(traj),
            (Task::PickPlace(t), TestCondition::Target { index, .. }) => {
                t.check_membership(traj, *index)
            }
            (Task::PickPlace(_), TestCondition::Start(_)) => Err(Error::contract(
                "pick-and-place conditions are target indices",
            )),
        }
    }

    pub fn check_demo_membership(
        &self,
        traj: &Trajectory,
        target_index: Option<usize>,
    ) -> Result<MembershipResult> {
        match self {
            Task::Maze(m) => m.check_membership(traj),
            Task::PickPlace(t) => {
                let idx = target_index
                    .ok_or_else(|| Error::contract("pick-and-place demos name a target"))?;
                t.check_membership(traj, idx)
            }
        }
    }

    /// Default test set: the 20x7 start grid for the maze, the tray for
    /// pick-and-place.
    pub fn default_test_set(&self) -> TestSet {
        match self {
            Task::Maze(m) => m.build_test_set(20, 7).expect("positive resolution"),
            Task::PickPlace(t) => t.build_test_set(),
        }
    }

    pub fn build_test_set(&self, nx: usize, ny: usize) -> Result<TestSet> {
        match self {
            Task::Maze(m) => m.build_test_set(nx, ny),
            Task::PickPlace(t) => Ok(t.build_test_set()),
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    AdmissibleSpace,
    StartCondition,
    EndCondition,
    GrabDistance,
    ReleaseDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipResult {
    pub is_member: bool,
    /// Violated criteria in canonical order.
    pub violated_criteria: Vec<Criterion>,
    /// Largest violation distance in meters, 0 for members.
    pub worst_violation: f64,
    /// The trajectory emitted no grab/release actions.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub missing_actions: bool,
}

impl MembershipResult {
    pub fn member() -> Self {
        MembershipResult {
            is_member: true,
            violated_criteria: Vec::new(),
            worst_violation: 0.0,
            missing_actions: false,
        }
    }

    pub fn violates(&self, c: Criterion) -> bool {
        self.violated_criteria.contains(&c)
    }
}

#[derive(Default)]
struct MembershipBuilder {
    violated: Vec<Criterion>,
    worst: f64,
}

impl MembershipBuilder {
    fn violate(&mut self, c: Criterion, amount: f64) {
        if !self.violated.contains(&c) {
            self.violated.push(c);
        }
        self.worst = self.worst.max(amount);
    }

    fn finish(mut self, missing_actions: bool) -> MembershipResult {
        self.violated.sort();
        MembershipResult {
            is_member: self.violated.is_empty(),
            worst_violation: if self.violated.is_empty() {
                0.0
            } else {
                self.worst
            },
            violated_criteria: self.violated,
            missing_actions,
        }
    }
}

/// One task condition in the finite test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestCondition {
    /// Maze start point.
    Start(Point),
    /// Pick-and-place grab target.
    Target { index: usize, position: Point },
}

impl TestCondition {
    /// Location used for neighborhoods and nearest-item lookups.
    pub fn position(&self) -> &Point {
        match self {
            TestCondition::Start(p) => p,
            TestCondition::Target { position, .. } => position,
        }
    }

    pub fn target_index(&self) -> Option<usize> {
        match self {
            TestCondition::Start(_) => None,
            TestCondition::Target { index, .. } => Some(*index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    items: Vec<TestCondition>,
}

impl TestSet {
    pub fn items(&self) -> &[TestCondition] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&TestCondition> {
        self.items.get(i)
    }

    pub fn position(&self, i: usize) -> &Point {
        self.items[i].position()
    }

    /// Index of the item closest to `p`, ties toward the lowest index.
    pub fn nearest(&self, p: &Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, item) in self.items.iter().enumerate() {
            let d = item.position().distance(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Items within `radius` of item `i` (inclusive of `i`).
    pub fn neighbors(&self, i: usize, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let c = *self.position(i);
        (0..self.items.len()).filter(move |&j| self.position(j).distance(&c) <= radius)
    }
}

/// Grab/release thresholds from demonstrations: mean distance plus two
/// population standard deviations plus 1 mm. Demonstrations without action
/// marks are skipped. `grab_targets[i]` is the target of `demos[i]`.
pub fn compute_grab_thresholds(
    demos: &[Trajectory],
    grab_targets: &[Point],
    bin: &Point,
) -> Result<(f64, f64)> {
    if demos.len() != grab_targets.len() {
        return Err(Error::contract("one grab target per demonstration"));
    }
    let mut grab = Vec::new();
    let mut release = Vec::new();
    for (d, target) in demos.iter().zip(grab_targets) {
        if let Some(m) = d.action_marks() {
            grab.push(d.samples()[m.grab].position.distance(target));
            release.push(d.samples()[m.release].position.distance(bin));
        }
    }
    if grab.is_empty() {
        return Err(Error::NoActionMarks);
    }
    Ok((threshold(&grab), threshold(&release)))
}

const THRESHOLD_REGULARIZER: f64 = 0.001;

fn threshold(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    mean + 2.0 * var.sqrt() + THRESHOLD_REGULARIZER
}
