//! The `evaluate` driver: fit on a file of demonstrations in order, score
//! every step over the test set, and write the report, log and renderings.

use std::path::Path;

use serde::Serialize;
use teachgym_core::metrics::MetricsReport;
use teachgym_core::scenarios::Scenario;
use teachgym_core::session::{
    FeedbackCondition, NoClock, SessionConfig, StopReason, TeachingSession, SCHEMA_VERSION,
};
use teachgym_core::task::Task;
use teachgym_core::Demonstration;

use crate::error::{AppError, AppResult};
use crate::formats::{model_json, report_json, to_json_pretty, write_atomic};
use crate::logfile::write_log;
use crate::parallel::Parallel;
use crate::render::{self, MetricsSeries, Plane};
use crate::simulate::list_outputs;

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    demos: String,
    condition: FeedbackCondition,
    seed: u64,
    scenario: &'a Scenario,
    outputs: Vec<String>,
}

/// Run the demonstrations through one session and return it stopped.
pub fn evaluate_demos(
    scenario: &Scenario,
    demos: &[Demonstration],
    condition: FeedbackCondition,
    seed: u64,
) -> AppResult<TeachingSession> {
    if demos.is_empty() {
        return Err(AppError::Data("no demonstrations to evaluate".into()));
    }
    condition.check_task(&scenario.task)?;
    let config = SessionConfig::for_task(&scenario.task, condition, seed);
    let mut session = TeachingSession::new(scenario.task.clone(), scenario.test_set(), config)?;
    for (i, demo) in demos.iter().enumerate() {
        session
            .step(demo.clone(), None, &Parallel, &NoClock)
            .map_err(|e| AppError::from(e).context(&format!("demonstration {}", i + 1)))?;
        session.deliver_feedback(&[]);
    }
    session.stop(StopReason::External);
    Ok(session)
}

/// Evaluate and write `report.json`, `session.jsonl`, `model.json`,
/// renderings, `metrics.svg`/`metrics.csv` and `manifest.json` under `out`.
pub fn run_evaluate(
    scenario: &Scenario,
    demos: &[Demonstration],
    demos_source: &str,
    condition: FeedbackCondition,
    seed: u64,
    out: &Path,
) -> AppResult<MetricsReport> {
    let session = evaluate_demos(scenario, demos, condition, seed)?;
    let report = session.report()?;
    write_atomic(&out.join("report.json"), report_json(&report)?.as_bytes())?;
    write_log(&out.join("session.jsonl"), &session.log())?;
    if let Some(model) = session.model() {
        write_atomic(
            &out.join("model.json"),
            model_json(&session.config().learner, model)?.as_bytes(),
        )?;
    }
    let (realizations, demos) = (session.realizations(), session.demonstrations());
    match &scenario.task {
        Task::Maze(_) => write_atomic(
            &out.join("feedback.svg"),
            render::render_feedback(&scenario.task, realizations, demos)?.as_bytes(),
        )?,
        Task::PickPlace(p) => {
            for plane in [Plane::Xy, Plane::Xz] {
                let svg = render::render_projection(p, realizations, demos, plane);
                write_atomic(
                    &out.join(format!("projection_{}.svg", plane.name())),
                    svg.as_bytes(),
                )?;
            }
        }
    }
    let series = [MetricsSeries::from_report(condition.as_str(), &report)];
    write_atomic(
        &out.join("metrics.svg"),
        render::render_metrics(&series)?.as_bytes(),
    )?;
    write_atomic(
        &out.join("metrics.csv"),
        render::metrics_csv(&series).as_bytes(),
    )?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "teachgym",
        version: crate::VERSION,
        command: "evaluate",
        demos: demos_source.to_string(),
        condition,
        seed,
        scenario,
        outputs: list_outputs(out)?,
    };
    write_atomic(
        &out.join("manifest.json"),
        to_json_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(report)
}
