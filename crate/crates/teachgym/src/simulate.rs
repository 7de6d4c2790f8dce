//! The `simulate` driver: seeded simulated-teacher sessions for every cell,
//! written as logs, reports, renderings and a summary of teaching efficiency.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use teachgym_core::metrics::{MetricsReport, RealizationRecord};
use teachgym_core::session::{run_session, Clock, NoClock, StopReason, SCHEMA_VERSION};
use teachgym_core::task::Task;
use teachgym_core::teachers::{Teacher, TeacherVariant};
use teachgym_core::Demonstration;

use crate::config::{Cell, ResolvedSimulate, SimulateConfig};
use crate::error::{AppError, AppResult};
use crate::formats::{report_json, to_json_pretty, write_atomic};
use crate::logfile::write_log;
use crate::parallel::{Parallel, WallClock};
use crate::render::{self, MetricsSeries, Plane};

/// Statistics of one cell over its sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub condition: teachgym_core::session::FeedbackCondition,
    pub teacher: TeacherVariant,
    /// Sessions with at least one completed step.
    pub n: usize,
    pub median_efficiency: f64,
    pub mean_efficiency: f64,
    /// Sample standard deviation of the efficiency.
    pub std_efficiency: f64,
    pub median_efficiency_demo_count: f64,
    pub median_final_efficacy: f64,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario: String,
    pub seeds: usize,
    pub base_seed: u64,
    pub max_demos: usize,
    pub cells: Vec<CellSummary>,
}

/// What one session leaves behind for the summary.
struct SessionOutcome {
    cell: usize,
    report: Option<MetricsReport>,
    aborted: bool,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn session_stem(cell: &Cell, seed: u64) -> String {
    format!("{}_{seed:03}", cell.label())
}

fn render_session(
    task: &Task,
    realizations: &[RealizationRecord],
    demos: &[Demonstration],
) -> AppResult<Vec<(String, String)>> {
    Ok(match task {
        Task::Maze(_) => vec![(
            String::new(),
            render::render_feedback(task, realizations, demos)?,
        )],
        Task::PickPlace(p) => [Plane::Xy, Plane::Xz]
            .into_iter()
            .map(|plane| {
                (
                    format!("_{}", plane.name()),
                    render::render_projection(p, realizations, demos, plane),
                )
            })
            .collect(),
    })
}

fn run_one(
    r: &ResolvedSimulate,
    out: &Path,
    cell_index: usize,
    seed_index: usize,
    seed: u64,
) -> AppResult<SessionOutcome> {
    let cell = r.config.cells[cell_index];
    let scenario = &r.scenario;
    let test_set = scenario.test_set();
    let mut teacher = Teacher::new(r.teacher_config(cell.teacher), seed, &test_set)?;
    let wall;
    let clock: &dyn Clock = if r.config.limits.max_wall_time_s.is_some() {
        wall = WallClock::start();
        &wall
    } else {
        &NoClock
    };
    let run = run_session(
        &scenario.task,
        &test_set,
        &mut teacher,
        seed,
        &scenario.script,
        r.session_config(cell.condition, seed),
        r.config.limits,
        &Parallel,
        clock,
    )?;
    let stem = session_stem(&cell, seed);
    write_log(
        &out.join("logs").join(format!("{stem}.jsonl")),
        &run.session.log(),
    )?;
    let report = run.session.report().ok();
    if let Some(report) = &report {
        write_atomic(
            &out.join("reports").join(format!("{stem}.json")),
            report_json(report)?.as_bytes(),
        )?;
    }
    if seed_index == 0 && !run.session.steps().is_empty() {
        for (suffix, svg) in render_session(
            &scenario.task,
            run.session.realizations(),
            run.session.demonstrations(),
        )? {
            write_atomic(
                &out.join("renderings").join(format!("{stem}{suffix}.svg")),
                svg.as_bytes(),
            )?;
        }
    }
    let aborted = matches!(run.session.stop_reason(), Some(StopReason::Aborted { .. }));
    Ok(SessionOutcome {
        cell: cell_index,
        report,
        aborted,
    })
}

/// Per-step medians over the sessions of one cell that reached each step.
fn cell_series(label: &str, reports: &[&MetricsReport]) -> MetricsSeries {
    let longest = reports.iter().map(|r| r.steps.len()).max().unwrap_or(0);
    let points = (0..longest)
        .map(|i| {
            let at: Vec<_> = reports.iter().filter_map(|r| r.steps.get(i)).collect();
            let nu: Vec<f64> = at.iter().map(|s| s.efficacy).collect();
            let eta: Vec<f64> = at.iter().map(|s| s.efficiency).collect();
            (i + 1, median(&nu), median(&eta))
        })
        .collect();
    MetricsSeries {
        label: label.to_string(),
        points,
    }
}

pub fn summary_table(s: &Summary) -> String {
    let mut out = format!(
        "scenario {}: {} seeds from {}, at most {} demonstrations\n{:<22} {:>3} {:>10} {:>9} {:>8} {:>9} {:>15} {:>7}\n",
        s.scenario, s.seeds, s.base_seed, s.max_demos, "cell", "n", "median_eta", "mean_eta", "std_eta", "median_m", "median_final_nu", "aborted"
    );
    for c in &s.cells {
        out.push_str(&format!(
            "{:<22} {:>3} {:>10.4} {:>9.4} {:>8.4} {:>9.1} {:>15.4} {:>7}\n",
            c.cell,
            c.n,
            c.median_efficiency,
            c.mean_efficiency,
            c.std_efficiency,
            c.median_efficiency_demo_count,
            c.median_final_efficacy,
            c.aborted
        ));
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed_source: &'static str,
    jobs: usize,
    config: SimulateConfig,
    outputs: &'a [String],
}

/// Run every session of the config on `jobs` threads and write all outputs
/// under `out`. Outputs do not depend on `jobs`.
pub fn run_simulate(r: &ResolvedSimulate, jobs: usize, out: &Path) -> AppResult<Summary> {
    r.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AppError::Internal(format!("cannot start worker pool: {e}")))?;
    let seeds: Vec<u64> = r.seeds().collect();
    let work: Vec<(usize, usize, u64)> = (0..r.config.cells.len())
        .flat_map(|c| seeds.iter().enumerate().map(move |(i, s)| (c, i, *s)))
        .collect();
    let outcomes = pool.install(|| {
        work.par_iter()
            .map(|&(c, i, seed)| run_one(r, out, c, i, seed))
            .collect::<Vec<AppResult<SessionOutcome>>>()
    });
    let outcomes = outcomes.into_iter().collect::<AppResult<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut series = Vec::new();
    for (ci, cell) in r.config.cells.iter().enumerate() {
        let mine: Vec<&SessionOutcome> = outcomes.iter().filter(|o| o.cell == ci).collect();
        let reports: Vec<&MetricsReport> = mine.iter().filter_map(|o| o.report.as_ref()).collect();
        let eta: Vec<f64> = reports.iter().map(|r| r.efficiency).collect();
        let m: Vec<f64> = reports
            .iter()
            .map(|r| r.efficiency_demo_count as f64)
            .collect();
        let fin: Vec<f64> = reports.iter().map(|r| r.final_efficacy).collect();
        cells.push(CellSummary {
            cell: cell.label(),
            condition: cell.condition,
            teacher: cell.teacher,
            n: reports.len(),
            median_efficiency: median(&eta),
            mean_efficiency: mean(&eta),
            std_efficiency: std_dev(&eta),
            median_efficiency_demo_count: median(&m),
            median_final_efficacy: median(&fin),
            aborted: mine.iter().filter(|o| o.aborted).count(),
        });
        series.push(cell_series(&cell.label(), &reports));
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        scenario: r.scenario.name.clone(),
        seeds: r.config.seeds,
        base_seed: r.config.seed,
        max_demos: r.config.limits.max_demos,
        cells,
    };
    write_atomic(
        &out.join("summary.json"),
        to_json_pretty(&summary)?.as_bytes(),
    )?;
    write_atomic(&out.join("summary.txt"), summary_table(&summary).as_bytes())?;
    if series.iter().any(|s| !s.points.is_empty()) {
        write_atomic(
            &out.join("metrics.svg"),
            render::render_metrics(&series)?.as_bytes(),
        )?;
        write_atomic(
            &out.join("metrics.csv"),
            render::metrics_csv(&series).as_bytes(),
        )?;
    }
    let outputs = list_outputs(out)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "teachgym",
        version: crate::VERSION,
        command: "simulate",
        seed_source: if r.seed_from_env { "env" } else { "config" },
        jobs,
        config: r.self_contained(),
        outputs: &outputs,
    };
    write_atomic(
        &out.join("manifest.json"),
        to_json_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(summary)
}

/// Files under `dir` relative to it, sorted, excluding the manifest.
pub fn list_outputs(dir: &Path) -> AppResult<Vec<String>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<String>) -> AppResult<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| AppError::read(dir, e))?;
        for e in entries {
            let path: PathBuf = e.map_err(|e| AppError::read(dir, e))?.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else if let Ok(rel) = path.strip_prefix(base) {
                let rel = rel.to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" && !rel.ends_with(".tmp") {
                    out.push(rel);
                }
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}
