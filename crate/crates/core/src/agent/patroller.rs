//! Action and sub-objective checks, and revision of the remaining sequence.

use super::parser::obtain_chain;
use super::perception::required_conditions;
use super::{AgentError, EnvInfoSet, Feedback, FeedbackSource, ObjectiveKind, SubObjective};
use crate::actions::{ActionOutcome, ActionStep, ActionVerdict, FailureReason};
use crate::memory::KnowledgeStore;
use crate::observation::StatusObservation;
use crate::world::{Item, RecipeBook};

/// Checks one action: a failed outcome is forwarded, and perception-checked
/// actions are ok only when `env_info` holds every required condition.
///
/// `outcome` is `None` while the action is still running (a poll).
pub fn patrol_action(
    sub: &SubObjective,
    action: &ActionStep,
    env_info: &EnvInfoSet,
    outcome: Option<&ActionOutcome>,
) -> Feedback {
    let src = FeedbackSource::PatrollerAction;
    let mut fb = match outcome.map(|o| &o.verdict) {
        Some(ActionVerdict::Failed { reason }) => Feedback::failed(src, reason.clone()),
        Some(ActionVerdict::BudgetExhausted) => Feedback::failed(
            src,
            FailureReason::GoalUnmet {
                detail: format!("{action} ran out of budget"),
            },
        ),
        _ => Feedback::ok(src),
    };
    let required = required_conditions(sub, action);
    let missing: Vec<_> = required.iter().filter(|c| !env_info.satisfied(c)).cloned().collect();
    if !missing.is_empty() {
        if fb.ok {
            fb = Feedback::failed(
                src,
                FailureReason::TargetAbsent {
                    object: missing[0].subject.clone(),
                },
            );
        }
        fb.missing = missing;
    }
    fb
}

/// Checks a finished sub-objective against the agent's status.
pub fn patrol_subobjective(
    sub: &SubObjective,
    status: &StatusObservation,
    last_env: Option<&EnvInfoSet>,
) -> Feedback {
    let src = FeedbackSource::PatrollerSubobjective;
    match &sub.kind {
        ObjectiveKind::Obtain { item, count } => {
            let have = status.inventory.count(item.as_str());
            if have >= *count {
                Feedback::ok(src)
            } else {
                Feedback::failed(
                    src,
                    FailureReason::GoalUnmet {
                        detail: format!("holding {have} of {count} {item}"),
                    },
                )
            }
        }
        ObjectiveKind::Find { conditions } => match last_env {
            Some(env) if env.complete => Feedback::ok(src),
            _ => {
                let mut fb = Feedback::failed(
                    src,
                    FailureReason::GoalUnmet {
                        detail: "scene conditions not all observed".into(),
                    },
                );
                fb.missing = match last_env {
                    Some(env) => env.missing.clone(),
                    None => conditions.clone(),
                };
                fb
            }
        },
    }
}

/// Recomputes the remaining sub-objectives toward `target` from what is held now.
pub fn modify_next_subobjective(
    book: &RecipeBook,
    target: &Item,
    status: &StatusObservation,
    knowledge: Option<&KnowledgeStore>,
) -> Result<Vec<SubObjective>, AgentError> {
    obtain_chain(book, target, &status.inventory, knowledge)
}
