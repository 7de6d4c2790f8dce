//! Configuration documents for `simulate` and `serve`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use teachgym_core::learner::LearnerConfig;
use teachgym_core::metrics::MetricsConfig;
use teachgym_core::scenarios::{self, Scenario};
use teachgym_core::session::{FeedbackCondition, Limits, SessionConfig, SCHEMA_VERSION};
use teachgym_core::teachers::{CountPrior, RealPrior, TeacherConfig, TeacherVariant};
use teachgym_core::tpgmm::Init;

use crate::error::{AppError, AppResult};
use crate::formats::{check_version, load_scenario, read_text};

/// Environment variable that replaces the configured base seed.
pub const SEED_ENV: &str = "TEACHGYM_SEED";

fn default_version() -> u32 {
    SCHEMA_VERSION
}

fn default_seeds() -> usize {
    20
}

fn default_limits() -> Limits {
    Limits::demos(20)
}

/// A scenario given by file path (relative to the config file) or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Path(PathBuf),
    Inline(Box<Scenario>),
}

/// One experiment cell: a feedback condition taught by one teacher variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub condition: FeedbackCondition,
    pub teacher: TeacherVariant,
}

impl Cell {
    pub fn label(&self) -> String {
        let t = match self.teacher {
            TeacherVariant::Naive => "naive",
            TeacherVariant::Informed => "informed",
            TeacherVariant::RuleGuided => "rule_guided",
        };
        format!("{}_{t}", self.condition)
    }
}

/// Learner fields that replace the per-task defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerOverrides {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Init>,
}

impl LearnerOverrides {
    pub fn apply(&self, mut c: LearnerConfig) -> LearnerConfig {
        c.k = self.k.unwrap_or(c.k);
        c.regularization = self.regularization.unwrap_or(c.regularization);
        c.resample_len = self.resample_len.unwrap_or(c.resample_len);
        c.realization_len = self.realization_len.unwrap_or(c.realization_len);
        c.init = self.init.unwrap_or(c.init);
        c
    }
}

/// Teacher fields that replace the scenario's priors and the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimism_radius: Option<RealPrior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive_plan: Option<CountPrior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_belief: Option<f64>,
}

impl TeacherOverrides {
    pub fn apply(&self, mut c: TeacherConfig) -> TeacherConfig {
        c.optimism_radius = self.optimism_radius.unwrap_or(c.optimism_radius);
        c.naive_plan = self.naive_plan.unwrap_or(c.naive_plan);
        c.rule_radius = self.rule_radius.unwrap_or(c.rule_radius);
        c.stop_belief = self.stop_belief.unwrap_or(c.stop_belief);
        c
    }
}

/// The `simulate` config: `seeds` sessions per cell, session `i` seeded with
/// `seed + i` for both teacher and learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub scenario: ScenarioRef,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
    pub cells: Vec<Cell>,
    #[serde(default = "default_limits")]
    pub limits: Limits,
    #[serde(default)]
    pub learner: LearnerOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsConfig>,
    #[serde(default)]
    pub teacher: TeacherOverrides,
}

/// A simulate config with its scenario loaded and the seed resolved.
#[derive(Debug, Clone)]
pub struct ResolvedSimulate {
    pub config: SimulateConfig,
    pub scenario: Scenario,
    pub seed_from_env: bool,
}

impl ResolvedSimulate {
    pub fn session_config(&self, condition: FeedbackCondition, seed: u64) -> SessionConfig {
        let mut c = SessionConfig::for_task(&self.scenario.task, condition, seed);
        c.learner = self.config.learner.apply(c.learner);
        if let Some(m) = self.config.metrics {
            c.metrics = m;
        }
        c
    }

    pub fn teacher_config(&self, variant: TeacherVariant) -> TeacherConfig {
        self.config
            .teacher
            .apply(self.scenario.teacher_config(variant))
    }

    /// Seeds of the sessions in each cell, in order.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.config.seeds as u64).map(|i| self.config.seed.wrapping_add(i))
    }

    /// The config with the scenario inlined and the effective seed, enough
    /// to rerun without the original files.
    pub fn self_contained(&self) -> SimulateConfig {
        let mut c = self.config.clone();
        c.scenario = ScenarioRef::Inline(Box::new(self.scenario.clone()));
        c
    }

    /// Reject anything that would make a session fail before it starts.
    pub fn validate(&self) -> AppResult<()> {
        let c = &self.config;
        if c.seeds == 0 {
            return Err(AppError::Usage("seeds must be at least 1".into()));
        }
        if c.cells.is_empty() {
            return Err(AppError::Usage("at least one cell is required".into()));
        }
        for (i, cell) in c.cells.iter().enumerate() {
            if c.cells[..i].contains(cell) {
                return Err(AppError::Usage(format!(
                    "cell {} is listed twice",
                    cell.label()
                )));
            }
            cell.condition.check_task(&self.scenario.task)?;
            cell.condition.check_teacher(cell.teacher)?;
            self.teacher_config(cell.teacher).validate()?;
        }
        c.limits.validate()?;
        let session = self.session_config(FeedbackCondition::Nf, 0);
        session.learner.validate()?;
        session.metrics.validate()?;
        Ok(())
    }
}

fn parse_seed_env(value: Option<String>) -> AppResult<Option<u64>> {
    value
        .map(|v| {
            v.trim().parse::<u64>().map_err(|_| {
                AppError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })
        })
        .transpose()
}

/// Load a simulate config, its scenario, and apply `TEACHGYM_SEED`.
pub fn load_simulate(path: &Path) -> AppResult<ResolvedSimulate> {
    resolve_simulate(path, std::env::var(SEED_ENV).ok())
}

pub fn resolve_simulate(path: &Path, seed_env: Option<String>) -> AppResult<ResolvedSimulate> {
    let source = path.display().to_string();
    let mut config: SimulateConfig =
        serde_json::from_str(&read_text(path)?).map_err(|e| AppError::json(&source, &e))?;
    check_version(&source, config.schema_version)?;
    let scenario = match &config.scenario {
        ScenarioRef::Path(p) => load_scenario(&path.parent().unwrap_or(Path::new("")).join(p))?,
        ScenarioRef::Inline(s) => {
            s.validate()
                .map_err(|e| AppError::Data(format!("{source}: inline scenario: {e}")))?;
            (**s).clone()
        }
    };
    let env = parse_seed_env(seed_env)?;
    if let Some(seed) = env {
        config.seed = seed;
    }
    let resolved = ResolvedSimulate {
        config,
        scenario,
        seed_from_env: env.is_some(),
    };
    resolved.validate().map_err(|e| e.context(&source))?;
    Ok(resolved)
}

fn default_log_dir() -> PathBuf {
    PathBuf::from("sessions")
}

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

/// The `serve` config. An empty scenario list serves the built-in scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub scenarios: Vec<PathBuf>,
    #[serde(default = "default_log_dir")]
    pub log_dir: PathBuf,
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            schema_version: SCHEMA_VERSION,
            scenarios: Vec::new(),
            log_dir: default_log_dir(),
            host: default_host(),
            port: default_port(),
        }
    }
}

/// A serve config with scenarios loaded and paths made absolute relative to
/// the config file.
#[derive(Debug, Clone)]
pub struct ResolvedServe {
    pub config: ServeConfig,
    pub scenarios: Vec<Scenario>,
}

pub fn load_serve(path: &Path) -> AppResult<ResolvedServe> {
    let source = path.display().to_string();
    let mut config: ServeConfig =
        serde_json::from_str(&read_text(path)?).map_err(|e| AppError::json(&source, &e))?;
    check_version(&source, config.schema_version)?;
    let base = path.parent().unwrap_or(Path::new(""));
    config.log_dir = base.join(&config.log_dir);
    let scenarios = if config.scenarios.is_empty() {
        scenarios::shipped()
    } else {
        config
            .scenarios
            .iter()
            .map(|p| load_scenario(&base.join(p)))
            .collect::<AppResult<Vec<_>>>()?
    };
    for (i, s) in scenarios.iter().enumerate() {
        if scenarios[..i].iter().any(|o| o.name == s.name) {
            return Err(AppError::Data(format!(
                "{source}: scenario name '{}' is used twice",
                s.name
            )));
        }
    }
    Ok(ResolvedServe { config, scenarios })
}
