//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data, 3 internal.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use teachgym_core::session::FeedbackCondition;

use crate::config::{self, SEED_ENV};
use crate::error::{AppError, AppResult};
use crate::formats::{load_demos, load_scenario, report_table};
use crate::{evaluate, service, simulate};

#[derive(Debug, Parser)]
#[command(
    name = "teachgym",
    version,
    about = "Teaching-efficacy workbench for learning from demonstration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run seeded simulated-teacher sessions for every configured cell.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; outputs do not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit on a demonstration file in order and score every step.
    Evaluate {
        /// CSV (by extension) or JSON Lines trajectories.
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "NF")]
        condition: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Host the HTTP session service until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
}

fn env_seed() -> AppResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| AppError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn execute(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Simulate { config, jobs, out } => {
            if jobs == 0 {
                return Err(AppError::Usage("--jobs must be at least 1".into()));
            }
            let resolved = config::load_simulate(&config)?;
            let summary = simulate::run_simulate(&resolved, jobs, &out)?;
            print!("{}", simulate::summary_table(&summary));
            Ok(())
        }
        Command::Evaluate {
            demos,
            scenario,
            condition,
            out,
        } => {
            let condition: FeedbackCondition = condition.parse()?;
            let scenario = load_scenario(&scenario)?;
            condition.check_task(&scenario.task)?;
            let demo_list = load_demos(&demos)?;
            let report = evaluate::run_evaluate(
                &scenario,
                &demo_list,
                &demos.display().to_string(),
                condition,
                env_seed()?,
                &out,
            )?;
            print!("{}", report_table(&report));
            Ok(())
        }
        Command::Serve { config, port } => {
            let mut resolved = match config {
                Some(path) => config::load_serve(&path)?,
                None => config::ResolvedServe {
                    config: config::ServeConfig::default(),
                    scenarios: teachgym_core::scenarios::shipped(),
                },
            };
            if let Some(port) = port {
                resolved.config.port = port;
            }
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| AppError::Internal(format!("cannot start runtime: {e}")))?;
            runtime.block_on(service::serve(resolved))
        }
    }
}

/// Parse `args` (program name first), run, print errors, return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("teachgym: {e}");
            e.exit_code()
        }
    }
}
