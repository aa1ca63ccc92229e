//! Active perception: the patroller questions the percipient about one frame
//! until the required facts are established or every question is spent.

use super::{EnvInfoSet, ObjectiveKind, Strategy, SubObjective};
use crate::actions::ActionStep;
use crate::observation::Frame;
use crate::percipient::{Answer, BackendError, Condition, Exchange, Percipient, Query};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryStep {
    Ask(Vec<Query>),
    Done,
}

/// Conditions the patroller needs while `action` runs for `sub`, the
/// action's own target first.
pub fn required_conditions(sub: &SubObjective, action: &ActionStep) -> Vec<Condition> {
    match &sub.kind {
        ObjectiveKind::Find { conditions } => {
            let mut out = conditions.clone();
            if let Some(obj) = action.object() {
                if let Some(i) = out.iter().position(|c| c.subject == obj) {
                    let first = out.remove(i);
                    out.insert(0, first);
                }
            }
            out
        }
        ObjectiveKind::Obtain { .. } => match action {
            ActionStep::Find { object } => vec![Condition::infer(object)],
            _ => Vec::new(),
        },
    }
}

fn history(gathered: &EnvInfoSet) -> Vec<Exchange> {
    gathered
        .facts
        .iter()
        .map(|f| Exchange {
            q: Query::for_condition(&f.condition, Vec::new()).text,
            a: f.answer.verdict.text(),
        })
        .collect()
}

/// The next question(s) to ask, or `Done` once nothing is left to ask.
pub fn generate_queries(
    sub: &SubObjective,
    action: &ActionStep,
    gathered: &EnvInfoSet,
    strategy: Strategy,
) -> QueryStep {
    let required = required_conditions(sub, action);
    match strategy {
        Strategy::SingleRound => {
            if gathered.round_count > 0 || required.is_empty() {
                return QueryStep::Done;
            }
            QueryStep::Ask(required.iter().map(|c| Query::for_condition(c, Vec::new())).collect())
        }
        Strategy::MultiRound => match required.iter().find(|c| gathered.get(c).is_none()) {
            Some(c) => QueryStep::Ask(vec![Query::for_condition(c, history(gathered))]),
            None => QueryStep::Done,
        },
    }
}

/// Fresh fact gathering on one frame, with every exchange kept for the log.
pub fn perceive(
    sub: &SubObjective,
    action: &ActionStep,
    frame: &Frame,
    percipient: &dyn Percipient,
    strategy: Strategy,
) -> Result<(EnvInfoSet, Vec<(Query, Answer)>), BackendError> {
    let required = required_conditions(sub, action);
    let mut set = EnvInfoSet::default();
    set.refresh(&required);
    let mut exchanges = Vec::new();
    loop {
        let step = generate_queries(sub, action, &set, strategy);
        set.round_count += 1;
        let QueryStep::Ask(queries) = step else { break };
        for q in queries {
            let answer = percipient.answer(&q, frame)?;
            set.record(q.condition(), answer.clone());
            exchanges.push((q, answer));
        }
        set.refresh(&required);
        if set.complete {
            break;
        }
    }
    Ok((set, exchanges))
}

/// Resets the fact set, then alternates questions and completeness checks.
pub fn active_perception(
    sub: &SubObjective,
    action: &ActionStep,
    frame: &Frame,
    percipient: &dyn Percipient,
    strategy: Strategy,
) -> Result<EnvInfoSet, BackendError> {
    perceive(sub, action, frame, percipient, strategy).map(|(set, _)| set)
}
