//! Automatic judges over episode logs.
//!
//! Scene tasks fail by rule 1 when some logged frame met every condition but
//! done was never declared, and by rule 2 when done was declared but the frame
//! it was declared on does not meet them. Item tasks succeed when the target
//! milestone appears within the tick limit.

use thiserror::Error;

use super::{Family, TaskSpec};
use crate::agent::episode::{EndPayload, EndReason, StartPayload};
use crate::agent::{EpisodeVerdict, FailureKind, LogKind, LogRecord, Milestone};
use crate::observation::Frame;
use crate::percipient::{holds, Condition};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JudgeError {
    #[error("empty log")]
    Empty,
    #[error("log does not open with a start record")]
    MissingStart,
    #[error("log is truncated: no end record")]
    Truncated,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Parses JSON lines into records, reporting 1-based line numbers.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, JudgeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| JudgeError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn bad(index: usize, message: impl Into<String>) -> JudgeError {
    JudgeError::Malformed {
        line: index + 1,
        message: message.into(),
    }
}

/// Start and end payloads, checking the log is complete.
fn frame_of(log: &[LogRecord]) -> Result<(StartPayload, EndPayload), JudgeError> {
    let first = log.first().ok_or(JudgeError::Empty)?;
    if first.kind != LogKind::Start {
        return Err(JudgeError::MissingStart);
    }
    let start: StartPayload = first.payload_as().map_err(|e| bad(0, e.to_string()))?;
    let last = log.last().expect("non-empty");
    if last.kind != LogKind::End {
        return Err(JudgeError::Truncated);
    }
    let end: EndPayload = last.payload_as().map_err(|e| bad(log.len() - 1, e.to_string()))?;
    Ok((start, end))
}

fn unfinished(end: &EndPayload) -> FailureKind {
    match end.reason {
        EndReason::Death => FailureKind::Death,
        EndReason::BackendError => FailureKind::BackendError,
        _ if !end.alive => FailureKind::Death,
        _ => FailureKind::Timeout,
    }
}

/// Judges a complete log, taking the task from its start record.
pub fn judge_log(log: &[LogRecord]) -> Result<EpisodeVerdict, JudgeError> {
    let (start, _) = frame_of(log)?;
    match start.task.family {
        Family::Context => judge_context(&start.task, log),
        Family::Process => judge_process(&start.task, log),
    }
}

fn all_hold(conditions: &[Condition], frame: &Frame) -> bool {
    conditions.iter().all(|c| holds(c, frame))
}

pub fn judge_context(task: &TaskSpec, log: &[LogRecord]) -> Result<EpisodeVerdict, JudgeError> {
    let (_, end) = frame_of(log)?;
    let mut last_frame: Option<Frame> = None;
    let mut any_satisfying = false;
    for (i, rec) in log.iter().enumerate() {
        match rec.kind {
            LogKind::Frame => {
                let frame: Frame = rec
                    .payload_as()
                    .map_err(|e| bad(i, format!("scene judging needs full frames: {e}")))?;
                any_satisfying |= all_hold(&task.conditions, &frame);
                last_frame = Some(frame);
            }
            LogKind::Done => {
                return Ok(match &last_frame {
                    Some(f) if all_hold(&task.conditions, f) => EpisodeVerdict::Success,
                    _ => EpisodeVerdict::Failure(FailureKind::JudgeRule2),
                });
            }
            _ => {}
        }
    }
    if any_satisfying {
        return Ok(EpisodeVerdict::Failure(FailureKind::JudgeRule1));
    }
    Ok(EpisodeVerdict::Failure(unfinished(&end)))
}

pub fn judge_process(task: &TaskSpec, log: &[LogRecord]) -> Result<EpisodeVerdict, JudgeError> {
    let (start, end) = frame_of(log)?;
    let target = task.target.as_ref().map(|t| t.as_str()).unwrap_or_default();
    for (i, rec) in log.iter().enumerate() {
        match rec.kind {
            LogKind::Milestone => {
                let m: Milestone = rec.payload_as().map_err(|e| bad(i, e.to_string()))?;
                if m.item.as_str() == target && m.tick.saturating_sub(start.start_tick) <= start.tick_limit {
                    return Ok(EpisodeVerdict::Success);
                }
            }
            LogKind::End => break,
            _ => {}
        }
    }
    Ok(EpisodeVerdict::Failure(unfinished(&end)))
}
