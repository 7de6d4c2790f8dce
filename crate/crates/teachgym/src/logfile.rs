//! Session logs as JSON Lines: a header line, one line per step, and an end
//! line with the stop reason and any post-stop realization requests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use teachgym_core::session::{
    FeedbackOutcome, SessionHeader, SessionLog, StepRecord, StopReason, SCHEMA_VERSION,
};

use crate::error::{AppError, AppResult};
use crate::formats::{read_text, write_atomic};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Line {
    Header(SessionHeader),
    Step(StepRecord),
    End {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stop: Option<StopReason>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        post_stop_requests: Vec<FeedbackOutcome>,
    },
}

#[derive(Deserialize)]
struct VersionProbe {
    header: Probe,
}

#[derive(Deserialize)]
struct Probe {
    schema_version: u32,
}

pub fn to_jsonl(log: &SessionLog) -> AppResult<String> {
    let mut out = String::new();
    let mut push = |line: &Line| -> AppResult<()> {
        out.push_str(&serde_json::to_string(line).map_err(|e| AppError::Internal(e.to_string()))?);
        out.push('\n');
        Ok(())
    };
    push(&Line::Header(log.header.clone()))?;
    for s in &log.steps {
        push(&Line::Step(s.clone()))?;
    }
    push(&Line::End {
        stop: log.stop.clone(),
        post_stop_requests: log.post_stop_requests.clone(),
    })?;
    Ok(out)
}

pub fn from_jsonl(source: &str, text: &str) -> AppResult<SessionLog> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let at = |i: usize, e: serde_json::Error| {
        AppError::Data(format!(
            "{source}: line {}, column {}: {e}",
            i + 1,
            e.column()
        ))
    };
    let (i, first) = lines
        .next()
        .ok_or_else(|| AppError::Data(format!("{source}: empty session log")))?;
    if let Ok(probe) = serde_json::from_str::<VersionProbe>(first) {
        if probe.header.schema_version != SCHEMA_VERSION {
            return Err(AppError::Data(format!(
                "{source}: log schema_version {} is not supported (supported: {SCHEMA_VERSION})",
                probe.header.schema_version
            )));
        }
    }
    let header = match serde_json::from_str::<Line>(first).map_err(|e| at(i, e))? {
        Line::Header(h) => h,
        _ => {
            return Err(AppError::Data(format!(
                "{source}: line {}: expected the header line",
                i + 1
            )))
        }
    };
    let mut log = SessionLog {
        header,
        steps: Vec::new(),
        stop: None,
        post_stop_requests: Vec::new(),
    };
    let mut ended = false;
    for (i, text) in lines {
        if ended {
            return Err(AppError::Data(format!(
                "{source}: line {}: content after the end line",
                i + 1
            )));
        }
        match serde_json::from_str::<Line>(text).map_err(|e| at(i, e))? {
            Line::Header(_) => {
                return Err(AppError::Data(format!(
                    "{source}: line {}: second header",
                    i + 1
                )))
            }
            Line::Step(s) => log.steps.push(s),
            Line::End {
                stop,
                post_stop_requests,
            } => {
                log.stop = stop;
                log.post_stop_requests = post_stop_requests;
                ended = true;
            }
        }
    }
    Ok(log)
}

pub fn write_log(path: &Path, log: &SessionLog) -> AppResult<()> {
    write_atomic(path, to_jsonl(log)?.as_bytes())
}

pub fn read_log(path: &Path) -> AppResult<SessionLog> {
    from_jsonl(&path.display().to_string(), &read_text(path)?)
}
