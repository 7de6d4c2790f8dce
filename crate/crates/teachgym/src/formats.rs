//! On-disk formats: scenario files, trajectory files (CSV and JSON Lines),
//! model files and metric reports. Every document carries `schema_version`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use teachgym_core::learner::LearnerConfig;
use teachgym_core::metrics::MetricsReport;
use teachgym_core::scenarios::Scenario;
use teachgym_core::session::SCHEMA_VERSION;
use teachgym_core::tpgmm::TpGmmModel;
use teachgym_core::{Demonstration, Gripper, Point, Sample, Trajectory};

use crate::error::{AppError, AppResult};

/// Write `bytes` to `path` through a sibling temporary file and a rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::write(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(|e| AppError::write(path, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::write(path, e))
}

pub fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::read(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> AppResult<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| AppError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub(crate) fn check_version(source: &str, found: u32) -> AppResult<()> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(AppError::Data(format!(
            "{source}: schema_version {found} is not supported (supported: {SCHEMA_VERSION})"
        )))
    }
}

#[derive(Serialize)]
struct ScenarioFile {
    schema_version: u32,
    #[serde(flatten)]
    scenario: Scenario,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

pub fn parse_scenario(source: &str, text: &str) -> AppResult<Scenario> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| AppError::json(source, &e))?;
    check_version(source, probe.schema_version)?;
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| AppError::json(source, &e))?;
    scenario
        .validate()
        .map_err(|e| AppError::Data(format!("{source}: {e}")))?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> AppResult<Scenario> {
    parse_scenario(&path.display().to_string(), &read_text(path)?)
}

pub fn scenario_json(scenario: &Scenario) -> AppResult<String> {
    to_json_pretty(&ScenarioFile {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.clone(),
    })
}

/// Demonstrations from a trajectory file: `.csv` or JSON Lines (any other
/// extension).
pub fn load_demos(path: &Path) -> AppResult<Vec<Demonstration>> {
    let text = read_text(path)?;
    let source = path.display().to_string();
    let demos = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => parse_demos_csv(&source, &text)?,
        _ => parse_demos_jsonl(&source, &text)?,
    };
    if demos.is_empty() {
        return Err(AppError::Data(format!("{source}: no demonstrations")));
    }
    Ok(demos)
}

/// One [`Demonstration`] per nonempty line.
pub fn parse_demos_jsonl(source: &str, text: &str) -> AppResult<Vec<Demonstration>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let demo: Demonstration = serde_json::from_str(line).map_err(|e| {
            AppError::Data(format!(
                "{source}: line {}, column {}: {e}",
                i + 1,
                e.column()
            ))
        })?;
        out.push(demo);
    }
    Ok(out)
}

pub fn demos_jsonl(demos: &[Demonstration]) -> AppResult<String> {
    let mut s = String::new();
    for d in demos {
        s.push_str(&serde_json::to_string(d).map_err(|e| AppError::Internal(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Column {
    Demo,
    Target,
    T,
    X,
    Y,
    Z,
    Gripper,
}

impl Column {
    fn parse(name: &str) -> Option<Column> {
        Some(match name {
            "demo" => Column::Demo,
            "target" => Column::Target,
            "t" => Column::T,
            "x" => Column::X,
            "y" => Column::Y,
            "z" => Column::Z,
            "gripper" => Column::Gripper,
            _ => return None,
        })
    }
}

struct PendingDemo {
    target: Option<usize>,
    samples: Vec<Sample>,
    first_line: u64,
}

/// Trajectories as CSV with a header naming columns `t, x, y[, z, gripper]`,
/// plus optional `demo` (groups rows into demonstrations, in order of first
/// appearance) and `target` (grab target index for pick-and-place). The
/// gripper column takes `0`/`1` or `open`/`closed`; action marks follow its
/// transitions.
pub fn parse_demos_csv(source: &str, text: &str) -> AppResult<Vec<Demonstration>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let at = |line: u64, col: usize, msg: &str| {
        AppError::Data(format!("{source}: line {line}, column {col}: {msg}"))
    };
    let headers = reader
        .headers()
        .map_err(|e| AppError::Data(format!("{source}: {e}")))?
        .clone();
    let mut columns = Vec::with_capacity(headers.len());
    for (i, h) in headers.iter().enumerate() {
        let c = Column::parse(&h.to_ascii_lowercase())
            .ok_or_else(|| at(1, i + 1, &format!("unknown column '{h}'")))?;
        if columns.contains(&c) {
            return Err(at(1, i + 1, &format!("duplicate column '{h}'")));
        }
        columns.push(c);
    }
    for required in [Column::T, Column::X, Column::Y] {
        if !columns.contains(&required) {
            return Err(at(1, 1, "header needs columns t, x and y"));
        }
    }
    let has = |c: Column| columns.contains(&c);
    let mut order: Vec<String> = Vec::new();
    let mut pending: BTreeMap<String, PendingDemo> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            AppError::Data(format!("{source}: line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut demo_id = String::from("0");
        let mut target = None;
        let (mut t, mut coords, mut gripper) = (0.0, [0.0; 3], None);
        for (i, (field, col)) in record.iter().zip(&columns).enumerate() {
            let number = || {
                field
                    .parse::<f64>()
                    .map_err(|_| at(line, i + 1, &format!("'{field}' is not a number")))
            };
            match col {
                Column::Demo => demo_id = field.to_string(),
                Column::Target => {
                    target = Some(field.parse::<usize>().map_err(|_| {
                        at(line, i + 1, &format!("'{field}' is not a target index"))
                    })?)
                }
                Column::T => t = number()?,
                Column::X => coords[0] = number()?,
                Column::Y => coords[1] = number()?,
                Column::Z => coords[2] = number()?,
                Column::Gripper => {
                    gripper = Some(match field.to_ascii_lowercase().as_str() {
                        "0" | "open" => Gripper::Open,
                        "1" | "closed" => Gripper::Closed,
                        _ => {
                            return Err(at(
                                line,
                                i + 1,
                                &format!("'{field}' is not a gripper state"),
                            ))
                        }
                    })
                }
            }
        }
        let position = Point::from_slice(&coords[..if has(Column::Z) { 3 } else { 2 }])
            .map_err(|e| at(line, 1, &e.to_string()))?;
        let entry = pending.entry(demo_id.clone()).or_insert_with(|| {
            order.push(demo_id.clone());
            PendingDemo {
                target,
                samples: Vec::new(),
                first_line: line,
            }
        });
        if entry.target != target {
            return Err(at(line, 1, &format!("demo '{demo_id}' changes its target")));
        }
        entry.samples.push(Sample {
            t,
            position,
            gripper,
        });
    }
    order
        .into_iter()
        .map(|id| {
            let p = pending.remove(&id).expect("recorded");
            let trajectory = if has(Column::Gripper) {
                Trajectory::with_marks_from_gripper(p.samples)
            } else {
                Trajectory::new(p.samples, None)
            }
            .map_err(|e| at(p.first_line, 1, &format!("demo '{id}': {e}")))?;
            Ok(Demonstration {
                trajectory,
                target_index: p.target,
            })
        })
        .collect()
}

/// The CSV form read by [`parse_demos_csv`].
pub fn demos_csv(demos: &[Demonstration]) -> String {
    let Some(first) = demos.first() else {
        return String::new();
    };
    let three_d = first.trajectory.dim() == 3;
    let gripper = first.trajectory.has_gripper();
    let targets = demos.iter().any(|d| d.target_index.is_some());
    let mut s = String::from("demo");
    if targets {
        s.push_str(",target");
    }
    s.push_str(",t,x,y");
    if three_d {
        s.push_str(",z");
    }
    if gripper {
        s.push_str(",gripper");
    }
    s.push('\n');
    for (i, d) in demos.iter().enumerate() {
        for sample in d.trajectory.samples() {
            let _ = write!(s, "{i}");
            if targets {
                let _ = write!(
                    s,
                    ",{}",
                    d.target_index.map(|t| t.to_string()).unwrap_or_default()
                );
            }
            let _ = write!(s, ",{}", sample.t);
            for c in sample.position.as_slice() {
                let _ = write!(s, ",{c}");
            }
            if let Some(g) = sample.gripper {
                let _ = write!(s, ",{}", g.as_real());
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub learner: LearnerConfig,
    pub model: TpGmmModel,
}

pub fn model_json(learner: &LearnerConfig, model: &TpGmmModel) -> AppResult<String> {
    to_json_pretty(&ModelFile {
        schema_version: SCHEMA_VERSION,
        learner: *learner,
        model: model.clone(),
    })
}

pub fn parse_model(source: &str, text: &str) -> AppResult<ModelFile> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| AppError::json(source, &e))?;
    check_version(source, file.schema_version)?;
    file.model
        .validate()
        .map_err(|e| AppError::Data(format!("{source}: {e}")))?;
    Ok(file)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

pub fn report_json(report: &MetricsReport) -> AppResult<String> {
    to_json_pretty(&ReportFile {
        schema_version: SCHEMA_VERSION,
        report,
    })
}

/// Human-readable per-step table followed by the session summary.
pub fn report_table(report: &MetricsReport) -> String {
    let mut s = String::from("step  successes  efficacy  efficiency  class         similarity\n");
    for st in &report.steps {
        let class = match st.classification.cause {
            Some(cause) => format!("{:?}({cause:?})", st.classification.class),
            None => format!("{:?}", st.classification.class),
        };
        let sim = st
            .classification
            .similarity
            .map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{:>4}  {:>4}/{:<4}  {:>8.4}  {:>10.4}  {:<12}  {:>10}",
            st.demo_count, st.successes, st.test_size, st.efficacy, st.efficiency, class, sim
        );
    }
    let _ = writeln!(
        s,
        "efficiency {:.4} (efficacy {:.4} at {} demos); final efficacy {:.4}; incorrect {}; ambiguous {}; undemonstrated {}; generalised {}",
        report.efficiency,
        report.efficacy,
        report.efficiency_demo_count,
        report.final_efficacy,
        report.incorrect_demonstrations,
        report.ambiguous_demonstrations,
        report.undemonstrated_states,
        report.generalised_states
    );
    s
}
