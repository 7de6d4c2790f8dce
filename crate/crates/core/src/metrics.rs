//! Teaching efficacy and efficiency, and the failure detectors for incorrect
//! demonstrations, undemonstrated states and ambiguous demonstrations.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{MembershipResult, Task};
use crate::trajectory::Trajectory;

/// Efficacy at which the demonstration count for efficiency is taken.
pub const COVERAGE_TARGET: f64 = 0.9;

/// One realization of the learned policy for one test item, with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub test_item: usize,
    pub trajectory: Trajectory,
    pub membership: MembershipResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacyReport {
    pub successes: usize,
    pub test_size: usize,
    pub efficacy: f64,
    /// `outcomes[i]` is the verdict for test item `i`.
    pub outcomes: Vec<bool>,
}

impl EfficacyReport {
    pub fn from_outcomes(outcomes: Vec<bool>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::contract("test set must be nonempty"));
        }
        let successes = outcomes.iter().filter(|o| **o).count();
        Ok(EfficacyReport {
            successes,
            test_size: outcomes.len(),
            efficacy: successes as f64 / outcomes.len() as f64,
            outcomes,
        })
    }

    pub fn successful_items(&self) -> BTreeSet<usize> {
        self.outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| **o)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fraction of test items whose realization is a task member. Requires
/// exactly one record per test item.
pub fn efficacy(realizations: &[RealizationRecord], test_size: usize) -> Result<EfficacyReport> {
    if test_size == 0 {
        return Err(Error::contract("test set must be nonempty"));
    }
    let mut outcomes: Vec<Option<bool>> = vec![None; test_size];
    for r in realizations {
        let slot = outcomes
            .get_mut(r.test_item)
            .ok_or(Error::TestItemOutOfRange {
                item: r.test_item,
                size: test_size,
            })?;
        if slot.is_some() {
            return Err(Error::DuplicateTestItem(r.test_item));
        }
        *slot = Some(r.membership.is_member);
    }
    let outcomes = outcomes
        .into_iter()
        .enumerate()
        .map(|(i, o)| o.ok_or(Error::MissingTestItem(i)))
        .collect::<Result<Vec<_>>>()?;
    EfficacyReport::from_outcomes(outcomes)
}

/// Efficacy per demonstration.
pub fn efficiency(efficacy: f64, demo_count: usize) -> Result<f64> {
    if demo_count == 0 {
        return Err(Error::contract(
            "efficiency is undefined before the first demonstration",
        ));
    }
    if !(0.0..=1.0).contains(&efficacy) {
        return Err(Error::contract("efficacy must lie in [0, 1]"));
    }
    Ok(efficacy / demo_count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Similarity at or below which a demonstration may be ambiguous (meters).
    pub ambiguity_threshold: f64,
    /// `(lower, upper)` band of efficacy change counted as no improvement.
    pub efficacy_delta_bounds: (f64, f64),
    pub similarity_len: usize,
}

impl MetricsConfig {
    /// 0.02 m for the maze, 0.05 m for pick-and-place; band (-0.01, 0.02).
    pub fn for_task(task: &Task) -> Self {
        MetricsConfig {
            ambiguity_threshold: if task.is_maze() { 0.02 } else { 0.05 },
            efficacy_delta_bounds: (-0.01, 0.02),
            similarity_len: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.efficacy_delta_bounds;
        if !(lo < hi) {
            return Err(Error::InvalidConfig(
                "efficacy delta bounds need lower < upper".into(),
            ));
        }
        if !(self.ambiguity_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "ambiguity threshold must be nonnegative".into(),
            ));
        }
        if self.similarity_len < 2 {
            return Err(Error::InvalidConfig(
                "similarity length must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Mean pointwise distance between two trajectories resampled to `n` points.
pub fn mean_pointwise_distance(a: &Trajectory, b: &Trajectory, n: usize) -> f64 {
    let pa = a.resample_positions(n);
    let pb = b.resample_positions(n);
    pa.iter().zip(&pb).map(|(p, q)| p.distance(q)).sum::<f64>() / n as f64
}

/// Distance to the most similar existing demonstration; infinite when there
/// is none.
pub fn similarity(candidate: &Trajectory, existing: &[Trajectory], config: &MetricsConfig) -> f64 {
    existing
        .iter()
        .map(|e| mean_pointwise_distance(candidate, e, config.similarity_len))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoClass {
    Informative,
    Ambiguous,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncorrectCause {
    /// The demonstration itself is not a task member.
    NotMember,
    /// Efficacy did not improve and fell by at least the lower bound.
    Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoClassification {
    pub class: DemoClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<IncorrectCause>,
    pub delta_efficacy: f64,
    /// Similarity to prior demonstrations; `None` for the first.
    pub similarity: Option<f64>,
}

/// Classify a demonstration. Rules apply in order: non-member demonstration,
/// then degradation, then ambiguity (similar and inside the band), else
/// informative.
pub fn classify_demo(
    efficacy_now: f64,
    efficacy_prev: f64,
    similarity: f64,
    membership: &MembershipResult,
    config: &MetricsConfig,
) -> DemoClassification {
    let delta = efficacy_now - efficacy_prev;
    let (lo, hi) = config.efficacy_delta_bounds;
    let (class, cause) = if !membership.is_member {
        (DemoClass::Incorrect, Some(IncorrectCause::NotMember))
    } else if delta <= lo && delta <= 0.0 {
        (DemoClass::Incorrect, Some(IncorrectCause::Degraded))
    } else if similarity <= config.ambiguity_threshold && lo <= delta && delta <= hi {
        (DemoClass::Ambiguous, None)
    } else {
        (DemoClass::Informative, None)
    };
    DemoClassification {
        class,
        cause,
        delta_efficacy: delta,
        similarity: similarity.is_finite().then_some(similarity),
    }
}

/// Test items neither successfully realized nor covered by a demonstration.
pub fn undemonstrated_states(
    outcomes: &EfficacyReport,
    covered: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    (0..outcomes.test_size)
        .filter(|i| !outcomes.outcomes[*i] && !covered.contains(i))
        .collect()
}

/// Successfully realized test items that no demonstration covers.
pub fn generalisation_set(outcomes: &EfficacyReport, covered: &BTreeSet<usize>) -> BTreeSet<usize> {
    (0..outcomes.test_size)
        .filter(|i| outcomes.outcomes[*i] && !covered.contains(i))
        .collect()
}

/// The demonstration count used for efficiency: the first step reaching the
/// coverage target, otherwise all steps.
pub fn efficiency_demo_count(efficacies: &[f64]) -> usize {
    efficacies
        .iter()
        .position(|v| *v >= COVERAGE_TARGET)
        .map_or(efficacies.len(), |i| i + 1)
}

/// Per-step inputs to a session report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 1-based demonstration count after this step.
    pub demo_count: usize,
    pub successes: usize,
    pub test_size: usize,
    pub efficacy: f64,
    pub efficiency: f64,
    pub classification: DemoClassification,
    pub covered_item: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: MetricsConfig,
    pub steps: Vec<StepMetrics>,
    /// Demonstrations counted for efficiency.
    pub efficiency_demo_count: usize,
    /// Efficacy at that demonstration count.
    pub efficacy: f64,
    pub efficiency: f64,
    pub final_efficacy: f64,
    pub incorrect_demonstrations: usize,
    pub ambiguous_demonstrations: usize,
    pub undemonstrated_states: usize,
    pub generalised_states: usize,
}

/// Summarize a session from its steps and the final full-set outcomes.
pub fn session_report(
    steps: Vec<StepMetrics>,
    final_outcomes: &EfficacyReport,
    config: MetricsConfig,
) -> Result<MetricsReport> {
    if steps.is_empty() {
        return Err(Error::NoDemonstrations);
    }
    let efficacies: Vec<f64> = steps.iter().map(|s| s.efficacy).collect();
    let m = efficiency_demo_count(&efficacies);
    let nu = efficacies[m - 1];
    let covered: BTreeSet<usize> = steps.iter().map(|s| s.covered_item).collect();
    let count = |c: DemoClass| steps.iter().filter(|s| s.classification.class == c).count();
    Ok(MetricsReport {
        config,
        efficiency_demo_count: m,
        efficacy: nu,
        efficiency: efficiency(nu, m)?,
        final_efficacy: final_outcomes.efficacy,
        incorrect_demonstrations: count(DemoClass::Incorrect),
        ambiguous_demonstrations: count(DemoClass::Ambiguous),
        undemonstrated_states: undemonstrated_states(final_outcomes, &covered).len(),
        generalised_states: generalisation_set(final_outcomes, &covered).len(),
        steps,
    })
}
