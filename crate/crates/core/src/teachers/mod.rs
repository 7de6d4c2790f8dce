//! Simulated teachers: a belief about what the learner can do, and policies
//! choosing the next demonstration from that belief.
//!
//! * `Naive` ignores feedback and demonstrates a fixed, evenly spaced plan.
//! * `Informed` demonstrates where it believes the learner fails, as far as
//!   possible from believed successes, and stops once it believes 90% of the
//!   test set succeeds.
//! * `RuleGuided` follows the visual-rule protocol: a first demonstration,
//!   then demonstrations within 4 cm of it until that neighborhood succeeds,
//!   then demonstrations near successes bordering the most failures.

mod paths;

pub use paths::{
    scripted_maze_path, scripted_pick_place_path, DemoScript, MazeScript, PickPlaceScript,
};

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RealizationRecord;
use crate::task::{Task, TestSet};
use crate::trajectory::Demonstration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Belief {
    Unknown,
    Success,
    Fail,
}

/// What the teacher believes about each test item. Observed outcomes are
/// kept exactly; an observed success also makes unobserved items within the
/// optimism radius believed successes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub optimism_radius: f64,
    observed: Vec<Option<bool>>,
    believed: Vec<Belief>,
}

impl BeliefState {
    pub fn new(test_size: usize, optimism_radius: f64) -> Self {
        BeliefState {
            optimism_radius,
            observed: vec![None; test_size],
            believed: vec![Belief::Unknown; test_size],
        }
    }

    pub fn get(&self, item: usize) -> Belief {
        self.believed[item]
    }

    pub fn believed(&self) -> &[Belief] {
        &self.believed
    }

    pub fn observed(&self, item: usize) -> Option<bool> {
        self.observed[item]
    }

    pub fn success_fraction(&self) -> f64 {
        let n = self
            .believed
            .iter()
            .filter(|b| **b == Belief::Success)
            .count();
        n as f64 / self.believed.len() as f64
    }

    /// Fold observed realizations into the belief. The latest observation of
    /// an item wins.
    pub fn interpret(&self, test_set: &TestSet, observed: &[RealizationRecord]) -> BeliefState {
        let mut next = self.clone();
        for r in observed {
            if let Some(slot) = next.observed.get_mut(r.test_item) {
                *slot = Some(r.membership.is_member);
            }
        }
        let successes: Vec<usize> = (0..next.observed.len())
            .filter(|i| next.observed[*i] == Some(true))
            .collect();
        for i in 0..next.believed.len() {
            next.believed[i] = match next.observed[i] {
                Some(true) => Belief::Success,
                Some(false) => Belief::Fail,
                None => {
                    let p = test_set.position(i);
                    if successes
                        .iter()
                        .any(|s| test_set.position(*s).distance(p) <= next.optimism_radius)
                    {
                        Belief::Success
                    } else {
                        Belief::Unknown
                    }
                }
            };
        }
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherVariant {
    Naive,
    Informed,
    RuleGuided,
}

/// A real parameter drawn once per teacher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealPrior {
    Fixed(f64),
    Uniform { min: f64, max: f64 },
}

impl RealPrior {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RealPrior::Fixed(v) => v,
            RealPrior::Uniform { min, max } if min < max => rng.random_range(min..=max),
            RealPrior::Uniform { min, .. } => min,
        }
    }

    fn valid(&self) -> bool {
        match *self {
            RealPrior::Fixed(v) => v >= 0.0 && v.is_finite(),
            RealPrior::Uniform { min, max } => min >= 0.0 && min <= max && max.is_finite(),
        }
    }
}

/// An integer parameter drawn once per teacher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountPrior {
    Fixed(usize),
    Uniform { min: usize, max: usize },
}

impl CountPrior {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            CountPrior::Fixed(v) => v,
            CountPrior::Uniform { min, max } if min < max => rng.random_range(min..=max),
            CountPrior::Uniform { min, .. } => min,
        }
    }

    fn valid(&self) -> bool {
        match *self {
            CountPrior::Fixed(v) => v >= 1,
            CountPrior::Uniform { min, max } => min >= 1 && min <= max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub variant: TeacherVariant,
    /// Radius (meters) over which one observed success is assumed to generalise.
    pub optimism_radius: RealPrior,
    /// Number of demonstrations the naive teacher plans.
    pub naive_plan: CountPrior,
    /// Neighborhood radius of the rule-guided protocol (meters).
    #[serde(default = "default_rule_radius")]
    pub rule_radius: f64,
    /// Believed success fraction at which feedback-driven teachers stop.
    #[serde(default = "default_stop_belief")]
    pub stop_belief: f64,
}

fn default_rule_radius() -> f64 {
    0.04
}

fn default_stop_belief() -> f64 {
    0.9
}

impl TeacherConfig {
    pub fn new(variant: TeacherVariant) -> Self {
        TeacherConfig {
            variant,
            optimism_radius: RealPrior::Fixed(0.0),
            naive_plan: CountPrior::Fixed(5),
            rule_radius: default_rule_radius(),
            stop_belief: default_stop_belief(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.optimism_radius.valid() {
            return Err(Error::InvalidConfig(
                "optimism radius prior must be nonnegative".into(),
            ));
        }
        if !self.naive_plan.valid() {
            return Err(Error::InvalidConfig(
                "naive plan count must be at least 1".into(),
            ));
        }
        if !(self.rule_radius > 0.0) || !(self.stop_belief > 0.0 && self.stop_belief <= 1.0) {
            return Err(Error::InvalidConfig(
                "rule radius must be positive and stop belief in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TeacherAction {
    Demonstrate {
        item: usize,
        demonstration: Demonstration,
    },
    Stop,
}

/// Attempts at producing a valid demonstration before giving up.
const PATH_ATTEMPTS: usize = 10;

/// A simulated teacher. Deterministic given its seed and the observations fed
/// to it.
#[derive(Debug, Clone)]
pub struct Teacher {
    config: TeacherConfig,
    policy_rng: ChaCha8Rng,
    path_rng: ChaCha8Rng,
    belief: BeliefState,
    plan: Vec<usize>,
    demonstrated: Vec<usize>,
}

impl Teacher {
    pub fn new(config: TeacherConfig, seed: u64, test_set: &TestSet) -> Result<Self> {
        config.validate()?;
        if test_set.is_empty() {
            return Err(Error::contract("test set must be nonempty"));
        }
        let mut policy_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut path_rng = ChaCha8Rng::seed_from_u64(seed);
        path_rng.set_stream(1);
        let radius = config.optimism_radius.draw(&mut policy_rng);
        let plan = match config.variant {
            TeacherVariant::Naive => sweep_plan(test_set, config.naive_plan.draw(&mut policy_rng)),
            _ => Vec::new(),
        };
        Ok(Teacher {
            belief: BeliefState::new(test_set.len(), radius),
            config,
            policy_rng,
            path_rng,
            plan,
            demonstrated: Vec::new(),
        })
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.config
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn demonstrated(&self) -> &[usize] {
        &self.demonstrated
    }

    /// The naive teacher's planned items, in demonstration order.
    pub fn plan(&self) -> &[usize] {
        &self.plan
    }

    /// Update the belief with realizations shown to the teacher.
    pub fn observe(&mut self, test_set: &TestSet, records: &[RealizationRecord]) {
        self.belief = self.belief.interpret(test_set, records);
    }

    /// Items the teacher asks to see when free to choose: the believed-unknown
    /// item nearest its last demonstration.
    pub fn choose_tests(&self, test_set: &TestSet) -> Vec<usize> {
        let Some(&last) = self.demonstrated.last() else {
            return Vec::new();
        };
        let anchor = test_set.position(last);
        let mut best: Option<(usize, f64)> = None;
        for i in 0..test_set.len() {
            if self.belief.get(i) == Belief::Unknown {
                let d = test_set.position(i).distance(anchor);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
        }
        best.map(|(i, _)| vec![i]).unwrap_or_default()
    }

    /// Choose the next test item to demonstrate, or `None` to stop.
    pub fn next_item(&mut self, test_set: &TestSet) -> Option<usize> {
        let item = match self.config.variant {
            TeacherVariant::Naive => self.plan.get(self.demonstrated.len()).copied(),
            TeacherVariant::Informed => {
                if self.believes_done() {
                    None
                } else {
                    self.informed_choice(test_set)
                }
            }
            TeacherVariant::RuleGuided => {
                if self.believes_done() {
                    None
                } else {
                    self.rule_choice(test_set)
                }
            }
        }?;
        self.demonstrated.push(item);
        Some(item)
    }

    /// Choose the next item and produce a demonstration for it.
    pub fn next_demonstration(
        &mut self,
        task: &Task,
        test_set: &TestSet,
        script: &DemoScript,
    ) -> Result<TeacherAction> {
        let Some(item) = self.next_item(test_set) else {
            return Ok(TeacherAction::Stop);
        };
        let demonstration = self.demonstrate(task, test_set, script, item)?;
        Ok(TeacherAction::Demonstrate {
            item,
            demonstration,
        })
    }

    /// Produce a valid demonstration for `item`, retrying noisy attempts.
    pub fn demonstrate(
        &mut self,
        task: &Task,
        test_set: &TestSet,
        script: &DemoScript,
        item: usize,
    ) -> Result<Demonstration> {
        let condition = test_set.get(item).ok_or(Error::TestItemOutOfRange {
            item,
            size: test_set.len(),
        })?;
        let position = *condition.position();
        for _ in 0..PATH_ATTEMPTS {
            let demo = match (task, script) {
                (Task::Maze(m), DemoScript::Maze(s)) => {
                    Demonstration::maze(scripted_maze_path(m, s, &position, &mut self.path_rng)?)
                }
                (Task::PickPlace(p), DemoScript::PickPlace(s)) => {
                    let index = condition
                        .target_index()
                        .ok_or_else(|| Error::contract("pick-and-place items are targets"))?;
                    Demonstration::pick_place(
                        scripted_pick_place_path(p, s, &position, &mut self.path_rng)?,
                        index,
                    )
                }
                _ => {
                    return Err(Error::InvalidConfig(
                        "demonstration script does not match the task".into(),
                    ))
                }
            };
            if task
                .check_demo_membership(&demo.trajectory, demo.target_index)?
                .is_member
            {
                return Ok(demo);
            }
        }
        Err(Error::PathGeneration { start: position })
    }

    fn believes_done(&self) -> bool {
        self.belief.success_fraction() >= self.config.stop_belief
    }

    fn random_item(&mut self, n: usize) -> usize {
        self.policy_rng.random_range(0..n)
    }

    /// Candidate not believed successful, farthest from every believed
    /// success; ties, including the case with no believed success at all, are
    /// broken at random.
    fn farthest_from_successes(
        &mut self,
        test_set: &TestSet,
        candidates: impl Iterator<Item = usize>,
    ) -> Option<usize> {
        let successes: Vec<usize> = (0..test_set.len())
            .filter(|i| self.belief.get(*i) == Belief::Success)
            .collect();
        let mut best = f64::NEG_INFINITY;
        let mut tied = Vec::new();
        for c in candidates {
            if self.belief.get(c) == Belief::Success {
                continue;
            }
            let p = test_set.position(c);
            let d = successes
                .iter()
                .map(|e| test_set.position(*e).distance(p))
                .fold(f64::INFINITY, f64::min);
            if d > best {
                best = d;
                tied.clear();
            }
            if d == best {
                tied.push(c);
            }
        }
        match tied.len() {
            0 => None,
            1 => Some(tied[0]),
            n => Some(tied[self.random_item(n)]),
        }
    }

    fn informed_choice(&mut self, test_set: &TestSet) -> Option<usize> {
        if self.demonstrated.is_empty() {
            return Some(self.random_item(test_set.len()));
        }
        self.farthest_from_successes(test_set, 0..test_set.len())
    }

    fn rule_choice(&mut self, test_set: &TestSet) -> Option<usize> {
        let Some(&first) = self.demonstrated.first() else {
            return Some(self.random_item(test_set.len()));
        };
        let r = self.config.rule_radius;
        let local: Vec<usize> = test_set.neighbors(first, r).collect();
        if local.iter().any(|i| self.belief.get(*i) != Belief::Success) {
            if let Some(c) = self.farthest_from_successes(test_set, local.into_iter()) {
                return Some(c);
            }
        }
        // the believed success bordering the most believed failures
        let mut best: Option<(usize, usize)> = None;
        for c in 0..test_set.len() {
            if self.belief.get(c) != Belief::Success {
                continue;
            }
            let fails = test_set
                .neighbors(c, r)
                .filter(|i| self.belief.get(*i) == Belief::Fail)
                .count();
            if fails > 0 && best.is_none_or(|(_, bf)| fails > bf) {
                best = Some((c, fails));
            }
        }
        if let Some((center, _)) = best {
            let anchor = *test_set.position(center);
            let mut pick: Option<(usize, f64)> = None;
            for i in test_set.neighbors(center, r) {
                if self.belief.get(i) != Belief::Fail || self.demonstrated.contains(&i) {
                    continue;
                }
                let d = test_set.position(i).distance(&anchor);
                if pick.is_none_or(|(_, pd)| d > pd) {
                    pick = Some((i, d));
                }
            }
            if let Some((i, _)) = pick {
                return Some(i);
            }
        }
        self.informed_choice(test_set)
    }
}

/// `count` items evenly spaced over the test set swept by x, then y.
pub fn sweep_plan(test_set: &TestSet, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..test_set.len()).collect();
    order.sort_by(|a, b| {
        let (pa, pb) = (test_set.position(*a), test_set.position(*b));
        pa.x()
            .total_cmp(&pb.x())
            .then(pa.y().total_cmp(&pb.y()))
            .then(a.cmp(b))
    });
    let n = order.len();
    let count = count.min(n);
    if count == 1 {
        return vec![order[n / 2]];
    }
    (0..count)
        .map(|j| order[(j * (n - 1) + (count - 1) / 2) / (count - 1)])
        .collect()
}
