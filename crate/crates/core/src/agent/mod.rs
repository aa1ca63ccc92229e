//! The five-role agent: parser, percipient dialogue, planner, performer and patroller.
//!
//! A task is parsed into short sub-objectives. Each sub-objective is planned
//! into an action sequence that the performer runs through the action library
//! while the patroller questions the percipient about every polled frame and
//! checks actions and sub-objectives, triggering re-plans when they fail.

pub mod episode;
pub mod parser;
pub mod patroller;
pub mod perception;
pub mod planner;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{ActionStep, FailureReason};
use crate::memory::MemoryError;
use crate::percipient::{Answer, BackendError, Condition};
use crate::world::{Item, RecipeError};

pub use episode::{
    run_episode, Backends, EpisodeConfig, EpisodeResult, EpisodeVerdict, FailureKind, FrameDetail, LogKind,
    LogRecord, Milestone, WorldSetup,
};
pub use parser::{OracleParser, Parser, RemoteParser};
pub use patroller::{modify_next_subobjective, patrol_action, patrol_subobjective};
pub use perception::{active_perception, generate_queries, QueryStep};
pub use planner::{MemoryPlanner, OraclePlanner, PlanInput, Planner, RemotePlanner};

/// Re-plans allowed per sub-objective before the remaining sequence is revised.
pub const REPLAN_LIMIT: u32 = 3;
/// Sequence revisions allowed per episode before it is abandoned.
pub const MODIFY_LIMIT: u32 = 3;
/// Idle slice used while waiting for time or weather to change.
pub const WAIT_SLICE: u64 = 400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    Obtain { item: Item, count: u32 },
    Find { conditions: Vec<Condition> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubObjective {
    pub description: String,
    #[serde(flatten)]
    pub kind: ObjectiveKind,
    pub position_index: u32,
    /// Knowledge-memory text retrieved for this step, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge: Option<String>,
}

impl SubObjective {
    pub fn obtain(description: impl Into<String>, item: Item, count: u32, position_index: u32) -> SubObjective {
        SubObjective {
            description: description.into(),
            kind: ObjectiveKind::Obtain { item, count },
            position_index,
            knowledge: None,
        }
    }

    pub fn find(description: impl Into<String>, conditions: Vec<Condition>) -> SubObjective {
        SubObjective {
            description: description.into(),
            kind: ObjectiveKind::Find { conditions },
            position_index: 0,
            knowledge: None,
        }
    }

    /// Find-kind condition set; empty for obtain-kind.
    pub fn conditions(&self) -> &[Condition] {
        match &self.kind {
            ObjectiveKind::Find { conditions } => conditions,
            ObjectiveKind::Obtain { .. } => &[],
        }
    }

    pub fn item(&self) -> Option<(&Item, u32)> {
        match &self.kind {
            ObjectiveKind::Obtain { item, count } => Some((item, *count)),
            ObjectiveKind::Find { .. } => None,
        }
    }
}

impl fmt::Display for SubObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ObjectiveKind::Obtain { count, .. } => write!(f, "{} (x{count})", self.description),
            ObjectiveKind::Find { .. } => f.write_str(&self.description),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub condition: Condition,
    pub answer: Answer,
}

/// Facts gathered from one frame by one active-perception invocation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvInfoSet {
    pub facts: Vec<Fact>,
    pub round_count: u32,
    pub complete: bool,
    pub missing: Vec<Condition>,
}

impl EnvInfoSet {
    pub fn get(&self, condition: &Condition) -> Option<&Answer> {
        self.facts.iter().find(|f| &f.condition == condition).map(|f| &f.answer)
    }

    pub fn satisfied(&self, condition: &Condition) -> bool {
        self.get(condition).is_some_and(|a| condition.satisfied_by(a))
    }

    pub fn record(&mut self, condition: Condition, answer: Answer) {
        match self.facts.iter_mut().find(|f| f.condition == condition) {
            Some(f) => f.answer = answer,
            None => self.facts.push(Fact { condition, answer }),
        }
    }

    /// Recomputes `missing` and `complete` against the required conditions.
    pub fn refresh(&mut self, required: &[Condition]) {
        self.missing = required.iter().filter(|c| !self.satisfied(c)).cloned().collect();
        self.complete = self.missing.is_empty();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SingleRound,
    MultiRound,
}

impl Strategy {
    pub fn from_name(name: &str) -> Option<Strategy> {
        match name {
            "single" | "single_round" => Some(Strategy::SingleRound),
            "multi" | "multi_round" => Some(Strategy::MultiRound),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    PatrollerAction,
    PatrollerSubobjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub source: FeedbackSource,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested: Option<SubObjective>,
}

impl Feedback {
    pub fn ok(source: FeedbackSource) -> Feedback {
        Feedback {
            source,
            ok: true,
            reason: None,
            missing: Vec::new(),
            suggested: None,
        }
    }

    pub fn failed(source: FeedbackSource, reason: FailureReason) -> Feedback {
        Feedback {
            source,
            ok: false,
            reason: Some(reason),
            missing: Vec::new(),
            suggested: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    MemoryAugmented,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub steps: Vec<ActionStep>,
    pub provenance: Provenance,
    /// Descriptions of the performer-memory records offered as templates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub templates: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Recipe(#[from] RecipeError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("task `{0}` is malformed: {1}")]
    Task(String, String),
    #[error("cannot plan `{0}`: {1}")]
    Unplannable(String, String),
}
