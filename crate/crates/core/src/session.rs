//! The iterative teaching loop: a demonstration arrives, the learner is refit
//! from scratch on every demonstration so far, the full test set is realized
//! (hidden efficacy, logged for every condition), the demonstration is
//! classified, and the feedback condition decides which realizations the
//! teacher gets to see.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{self, LearnerConfig};
use crate::metrics::{
    classify_demo, efficacy, efficiency, session_report, similarity, DemoClassification,
    EfficacyReport, MetricsConfig, MetricsReport, RealizationRecord, StepMetrics,
};
use crate::task::{MembershipResult, Task, TestSet};
use crate::teachers::{DemoScript, Teacher, TeacherAction, TeacherConfig, TeacherVariant};
use crate::tpgmm::TpGmmModel;
use crate::trajectory::{Demonstration, Trajectory};

pub const SCHEMA_VERSION: u32 = 1;

/// What the teacher is shown between demonstrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeedbackCondition {
    /// No feedback while teaching.
    Nf,
    /// Every test-set realization, colored by success.
    Vf,
    /// As `Vf`, with the teacher following the visual rules.
    Vr,
    /// The realization for the last demonstrated condition.
    Rf,
    /// Realizations at the generalisation-sampling items.
    Bf,
    /// Realizations at items the teacher selects.
    Sf,
}

impl FeedbackCondition {
    pub const ALL: [FeedbackCondition; 6] = [
        FeedbackCondition::Nf,
        FeedbackCondition::Vf,
        FeedbackCondition::Vr,
        FeedbackCondition::Rf,
        FeedbackCondition::Bf,
        FeedbackCondition::Sf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackCondition::Nf => "NF",
            FeedbackCondition::Vf => "VF",
            FeedbackCondition::Vr => "VR",
            FeedbackCondition::Rf => "RF",
            FeedbackCondition::Bf => "BF",
            FeedbackCondition::Sf => "SF",
        }
    }

    /// Visual conditions need a 2D task; replay, batch and selected feedback
    /// belong to pick-and-place. `NF` fits both.
    pub fn allowed_for(self, task: &Task) -> bool {
        match self {
            FeedbackCondition::Nf => true,
            FeedbackCondition::Vf | FeedbackCondition::Vr => task.is_maze(),
            FeedbackCondition::Rf | FeedbackCondition::Bf | FeedbackCondition::Sf => {
                !task.is_maze()
            }
        }
    }

    /// Whether per-step efficacy reaches the teacher during teaching.
    pub fn reveals_efficacy(self) -> bool {
        matches!(self, FeedbackCondition::Vf | FeedbackCondition::Vr)
    }

    pub fn check_task(self, task: &Task) -> Result<()> {
        if self.allowed_for(task) {
            Ok(())
        } else {
            Err(Error::InvalidCondition(format!(
                "{self} is not available for the {} task",
                if task.is_maze() {
                    "maze"
                } else {
                    "pick-and-place"
                }
            )))
        }
    }

    /// The naive teacher ignores feedback and pairs with `NF`; the others
    /// need feedback.
    pub fn check_teacher(self, variant: TeacherVariant) -> Result<()> {
        let ok = match variant {
            TeacherVariant::Naive => self == FeedbackCondition::Nf,
            _ => self != FeedbackCondition::Nf,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCondition(format!(
                "{variant:?} teacher cannot teach under {self}"
            )))
        }
    }
}

impl fmt::Display for FeedbackCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeedbackCondition::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidCondition(format!("unknown condition '{s}'")))
    }
}

/// Runs one realization per index; implementations may parallelize but must
/// return results in index order.
pub trait BatchRealizer {
    fn run(
        &self,
        n: usize,
        f: &(dyn Fn(usize) -> Result<RealizationRecord> + Sync),
    ) -> Vec<Result<RealizationRecord>>;
}

pub struct Sequential;

impl BatchRealizer for Sequential {
    fn run(
        &self,
        n: usize,
        f: &(dyn Fn(usize) -> Result<RealizationRecord> + Sync),
    ) -> Vec<Result<RealizationRecord>> {
        (0..n).map(f).collect()
    }
}

/// Wall-clock source; `None` means no clock is available.
pub trait Clock {
    fn elapsed_secs(&self) -> Option<f64>;
}

pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_demos: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wall_time_s: Option<f64>,
}

impl Limits {
    pub fn demos(max_demos: usize) -> Self {
        Limits {
            max_demos,
            max_wall_time_s: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_demos == 0 {
            return Err(Error::InvalidConfig("max_demos must be positive".into()));
        }
        if self.max_wall_time_s.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidConfig(
                "max_wall_time_s must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub learner: LearnerConfig,
    pub metrics: MetricsConfig,
    pub condition: FeedbackCondition,
}

impl SessionConfig {
    pub fn for_task(task: &Task, condition: FeedbackCondition, seed: u64) -> Self {
        SessionConfig {
            learner: LearnerConfig::for_task(task, seed),
            metrics: MetricsConfig::for_task(task),
            condition,
        }
    }
}

/// A realization outcome as logged (trajectories are recomputed on replay).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub test_item: usize,
    pub is_member: bool,
}

impl From<&RealizationRecord> for FeedbackOutcome {
    fn from(r: &RealizationRecord) -> Self {
        FeedbackOutcome {
            test_item: r.test_item,
            is_member: r.membership.is_member,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step number, equal to the number of demonstrations so far.
    pub step: usize,
    /// Test item the teacher aimed at, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<usize>,
    pub demonstration: Demonstration,
    pub demo_membership: MembershipResult,
    pub covered_item: usize,
    /// FNV-1a fingerprint of the refit model, as 16 hex digits.
    pub model_hash: String,
    pub em_iterations: usize,
    pub log_likelihood: f64,
    /// Full test-set efficacy, computed whatever the condition shows.
    pub efficacy: EfficacyReport,
    pub efficacy_prev: f64,
    pub classification: DemoClassification,
    /// Realizations shown to the teacher after this step.
    pub feedback: Vec<FeedbackOutcome>,
    /// Realizations requested on demand after this step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requested: Vec<FeedbackOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherStamp {
    pub config: TeacherConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema_version: u32,
    pub engine_version: String,
    pub task: Task,
    pub test_set: TestSet,
    pub config: SessionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<TeacherStamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    Teacher,
    MaxDemos,
    WallTime,
    External,
    Aborted { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    /// On-demand realizations requested after stopping.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub post_stop_requests: Vec<FeedbackOutcome>,
}

/// Engine state for one teaching session.
#[derive(Debug, Clone)]
pub struct TeachingSession {
    header: SessionHeader,
    demos: Vec<Demonstration>,
    steps: Vec<StepRecord>,
    model: Option<TpGmmModel>,
    batch: Vec<RealizationRecord>,
    stop: Option<StopReason>,
    post_stop: Vec<FeedbackOutcome>,
}

fn hex(v: u64) -> String {
    format!("{v:016x}")
}

impl TeachingSession {
    pub fn new(task: Task, test_set: TestSet, config: SessionConfig) -> Result<Self> {
        config.condition.check_task(&task)?;
        config.metrics.validate()?;
        config.learner.validate()?;
        if test_set.is_empty() {
            return Err(Error::contract("test set must be nonempty"));
        }
        Ok(TeachingSession {
            header: SessionHeader {
                schema_version: SCHEMA_VERSION,
                engine_version: env!("CARGO_PKG_VERSION").to_string(),
                task,
                test_set,
                config,
                teacher: None,
                limits: None,
            },
            demos: Vec::new(),
            steps: Vec::new(),
            model: None,
            batch: Vec::new(),
            stop: None,
            post_stop: Vec::new(),
        })
    }

    pub fn task(&self) -> &Task {
        &self.header.task
    }

    pub fn test_set(&self) -> &TestSet {
        &self.header.test_set
    }

    pub fn config(&self) -> &SessionConfig {
        &self.header.config
    }

    pub fn condition(&self) -> FeedbackCondition {
        self.header.config.condition
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn demonstrations(&self) -> &[Demonstration] {
        &self.demos
    }

    pub fn model(&self) -> Option<&TpGmmModel> {
        self.model.as_ref()
    }

    /// Realizations of the current model over the full test set.
    pub fn realizations(&self) -> &[RealizationRecord] {
        &self.batch
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.is_some()
    }

    pub fn stop_reason(&self) -> Option<&StopReason> {
        self.stop.as_ref()
    }

    pub fn set_teacher(&mut self, stamp: TeacherStamp) {
        self.header.teacher = Some(stamp);
    }

    pub fn set_limits(&mut self, limits: Limits) {
        self.header.limits = Some(limits);
    }

    /// Add a demonstration and run one full step. On error the session is
    /// left as it was.
    pub fn step(
        &mut self,
        demo: Demonstration,
        item: Option<usize>,
        realizer: &dyn BatchRealizer,
        clock: &dyn Clock,
    ) -> Result<&StepRecord> {
        if self.stop.is_some() {
            return Err(Error::SessionStopped);
        }
        let task = &self.header.task;
        let test_set = &self.header.test_set;
        let cfg = &self.header.config;
        learner::check_demo_shape(task, &demo)?;
        if let Some(i) = item {
            if i >= test_set.len() {
                return Err(Error::TestItemOutOfRange {
                    item: i,
                    size: test_set.len(),
                });
            }
        }
        let demo_membership = task.check_demo_membership(&demo.trajectory, demo.target_index)?;
        let prior: Vec<Trajectory> = self.demos.iter().map(|d| d.trajectory.clone()).collect();
        let s = similarity(&demo.trajectory, &prior, &cfg.metrics);

        let mut demos = self.demos.clone();
        demos.push(demo.clone());
        let (model, _) = learner::fit(task, &demos, &cfg.learner)?;
        let realize_one = |i: usize| -> Result<RealizationRecord> {
            let condition = &test_set.items()[i];
            let trajectory = learner::realize(task, &model, condition, &cfg.learner)?;
            let membership = task.check_membership(&trajectory, condition)?;
            Ok(RealizationRecord {
                test_item: i,
                trajectory,
                membership,
            })
        };
        let batch = realizer
            .run(test_set.len(), &realize_one)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let report = efficacy(&batch, test_set.len())?;
        let efficacy_prev = self.steps.last().map_or(0.0, |s| s.efficacy.efficacy);
        let classification = classify_demo(
            report.efficacy,
            efficacy_prev,
            s,
            &demo_membership,
            &cfg.metrics,
        );
        let record = StepRecord {
            step: self.steps.len() + 1,
            item,
            covered_item: learner::covered_item(task, test_set, &demo),
            demonstration: demo,
            demo_membership,
            model_hash: hex(learner::model_hash(&model)),
            em_iterations: model.iterations,
            log_likelihood: model.log_likelihood,
            efficacy: report,
            efficacy_prev,
            classification,
            feedback: Vec::new(),
            requested: Vec::new(),
            elapsed_s: clock.elapsed_secs(),
        };
        self.demos = demos;
        self.model = Some(model);
        self.batch = batch;
        self.steps.push(record);
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Feedback items for the latest step under the session's condition.
    pub fn feedback_items(&self, teacher_choice: &[usize]) -> Vec<usize> {
        let Some(last) = self.steps.last() else {
            return Vec::new();
        };
        match self.condition() {
            FeedbackCondition::Nf => Vec::new(),
            FeedbackCondition::Vf | FeedbackCondition::Vr => (0..self.test_set().len()).collect(),
            FeedbackCondition::Rf => alloc::vec![last.covered_item],
            FeedbackCondition::Bf => match self.task() {
                Task::PickPlace(p) => p.generalisation_sampling_items(),
                Task::Maze(_) => Vec::new(),
            },
            FeedbackCondition::Sf => teacher_choice
                .iter()
                .copied()
                .filter(|i| *i < self.test_set().len())
                .collect(),
        }
    }

    /// The realizations the condition lets the teacher see after the latest
    /// step, logged into that step.
    pub fn deliver_feedback(&mut self, teacher_choice: &[usize]) -> Vec<RealizationRecord> {
        let records: Vec<RealizationRecord> = self
            .feedback_items(teacher_choice)
            .into_iter()
            .map(|i| self.batch[i].clone())
            .collect();
        if let Some(last) = self.steps.last_mut() {
            last.feedback = records.iter().map(FeedbackOutcome::from).collect();
        }
        records
    }

    /// Whether on-demand realizations are allowed right now: under `SF`
    /// while teaching, and under `NF` once teaching has stopped.
    pub fn may_request(&self) -> bool {
        match self.condition() {
            FeedbackCondition::Sf => true,
            FeedbackCondition::Nf => self.stop.is_some(),
            _ => false,
        }
    }

    /// Realizations of the current model for chosen test items.
    pub fn request_realizations(&mut self, items: &[usize]) -> Result<Vec<RealizationRecord>> {
        if !self.may_request() {
            return Err(Error::InvalidCondition(format!(
                "{} does not allow on-demand realizations {}",
                self.condition(),
                if self.stop.is_some() {
                    "after stopping"
                } else {
                    "while teaching"
                }
            )));
        }
        if self.steps.is_empty() {
            return Err(Error::NoDemonstrations);
        }
        let n = self.test_set().len();
        let records = items
            .iter()
            .map(|&i| {
                self.batch
                    .get(i)
                    .cloned()
                    .ok_or(Error::TestItemOutOfRange { item: i, size: n })
            })
            .collect::<Result<Vec<_>>>()?;
        let outcomes = records.iter().map(FeedbackOutcome::from);
        if self.stop.is_some() {
            self.post_stop.extend(outcomes);
        } else if let Some(last) = self.steps.last_mut() {
            last.requested.extend(outcomes);
        }
        Ok(records)
    }

    /// Stop teaching. Later calls keep the first reason.
    pub fn stop(&mut self, reason: StopReason) {
        if self.stop.is_none() {
            self.stop = Some(reason);
        }
    }

    pub fn report(&self) -> Result<MetricsReport> {
        let steps = self
            .steps
            .iter()
            .map(|s| {
                Ok(StepMetrics {
                    demo_count: s.step,
                    successes: s.efficacy.successes,
                    test_size: s.efficacy.test_size,
                    efficacy: s.efficacy.efficacy,
                    efficiency: efficiency(s.efficacy.efficacy, s.step)?,
                    classification: s.classification,
                    covered_item: s.covered_item,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let last = self.steps.last().ok_or(Error::NoDemonstrations)?;
        session_report(steps, &last.efficacy, self.header.config.metrics)
    }

    pub fn log(&self) -> SessionLog {
        SessionLog {
            header: self.header.clone(),
            steps: self.steps.clone(),
            stop: self.stop.clone(),
            post_stop_requests: self.post_stop.clone(),
        }
    }
}

/// A finished simulated session; `error` is set when it aborted, in which
/// case the log holds every step completed before the failure.
#[derive(Debug, Clone)]
pub struct SessionRun {
    pub session: TeachingSession,
    pub error: Option<Error>,
}

/// Let a simulated teacher teach until it stops or a limit is reached.
pub fn run_session(
    task: &Task,
    test_set: &TestSet,
    teacher: &mut Teacher,
    teacher_seed: u64,
    script: &DemoScript,
    config: SessionConfig,
    limits: Limits,
    realizer: &dyn BatchRealizer,
    clock: &dyn Clock,
) -> Result<SessionRun> {
    limits.validate()?;
    script.validate(task)?;
    config.condition.check_teacher(teacher.config().variant)?;
    let mut session = TeachingSession::new(task.clone(), test_set.clone(), config)?;
    session.set_teacher(TeacherStamp {
        config: teacher.config().clone(),
        seed: teacher_seed,
    });
    session.set_limits(limits);
    let error = loop {
        if session.steps().len() >= limits.max_demos {
            session.stop(StopReason::MaxDemos);
            break None;
        }
        if let (Some(max), Some(now)) = (limits.max_wall_time_s, clock.elapsed_secs()) {
            if now >= max {
                session.stop(StopReason::WallTime);
                break None;
            }
        }
        let (item, demo) = match teacher.next_demonstration(task, test_set, script) {
            Ok(TeacherAction::Stop) => {
                session.stop(StopReason::Teacher);
                break None;
            }
            Ok(TeacherAction::Demonstrate {
                item,
                demonstration,
            }) => (item, demonstration),
            Err(e) => break Some(e),
        };
        if let Err(e) = session.step(demo, Some(item), realizer, clock) {
            break Some(e);
        }
        let choice = if session.condition() == FeedbackCondition::Sf {
            teacher.choose_tests(test_set)
        } else {
            Vec::new()
        };
        let shown = session.deliver_feedback(&choice);
        if !shown.is_empty() {
            teacher.observe(test_set, &shown);
        }
    };
    if let Some(e) = &error {
        session.stop(StopReason::Aborted {
            error: e.to_string(),
        });
    }
    Ok(SessionRun { session, error })
}

/// Recompute every step of a log and check it against what was recorded.
pub fn replay(log: &SessionLog, realizer: &dyn BatchRealizer) -> Result<TeachingSession> {
    if log.header.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: log.header.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    let h = &log.header;
    let mut session = TeachingSession::new(h.task.clone(), h.test_set.clone(), h.config.clone())?;
    session.header = h.clone();
    for (idx, logged) in log.steps.iter().enumerate() {
        let step = idx + 1;
        let diverged = |detail: String| Error::ReplayDivergence { step, detail };
        if logged.step != step {
            return Err(diverged(format!("logged step number {}", logged.step)));
        }
        let got = session
            .step(
                logged.demonstration.clone(),
                logged.item,
                realizer,
                &NoClock,
            )
            .map_err(|e| diverged(format!("step failed: {e}")))?
            .clone();
        if got.model_hash != logged.model_hash {
            return Err(diverged(format!(
                "model hash {} != logged {}",
                got.model_hash, logged.model_hash
            )));
        }
        if got.efficacy != logged.efficacy {
            return Err(diverged(format!(
                "efficacy {} != logged {}",
                got.efficacy.efficacy, logged.efficacy.efficacy
            )));
        }
        if got.demo_membership != logged.demo_membership {
            return Err(diverged("demonstration membership differs".into()));
        }
        if got.classification != logged.classification || got.efficacy_prev != logged.efficacy_prev
        {
            return Err(diverged("classification differs".into()));
        }
        if got.covered_item != logged.covered_item {
            return Err(diverged("covered item differs".into()));
        }
        for o in logged.feedback.iter().chain(&logged.requested) {
            let actual = session
                .batch
                .get(o.test_item)
                .map(|r| r.membership.is_member);
            if actual != Some(o.is_member) {
                return Err(diverged(format!(
                    "feedback for item {} differs",
                    o.test_item
                )));
            }
        }
        let last = session.steps.last_mut().expect("step recorded");
        last.feedback = logged.feedback.clone();
        last.requested = logged.requested.clone();
        last.elapsed_s = logged.elapsed_s;
    }
    for o in &log.post_stop_requests {
        if session
            .batch
            .get(o.test_item)
            .map(|r| r.membership.is_member)
            != Some(o.is_member)
        {
            return Err(Error::ReplayDivergence {
                step: log.steps.len(),
                detail: format!("post-stop realization for item {} differs", o.test_item),
            });
        }
    }
    session.post_stop = log.post_stop_requests.clone();
    session.stop = log.stop.clone();
    Ok(session)
}
