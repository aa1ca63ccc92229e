//! Task → ordered sub-objectives.

use std::sync::Arc;

use serde::Deserialize;

use super::{AgentError, SubObjective};
use crate::bench::{Family, TaskSpec};
use crate::memory::{KnowledgeStore, Lookup};
use crate::percipient::remote::{Message, MessagesRequest};
use crate::percipient::{BackendError, BackendConfig, Condition, RemoteClient};
use crate::world::{Inventory, Item, RecipeBook};

pub trait Parser: Send + Sync {
    fn parse(&self, task: &TaskSpec, knowledge: &KnowledgeStore) -> Result<Vec<SubObjective>, AgentError>;
}

/// Decomposes from the recipe book and the structured task.
#[derive(Debug, Clone)]
pub struct OracleParser {
    book: Arc<RecipeBook>,
}

impl OracleParser {
    pub fn new(book: Arc<RecipeBook>) -> Self {
        OracleParser { book }
    }
}

/// Knowledge text for a step, when the store has something close enough.
pub fn knowledge_for(knowledge: &KnowledgeStore, description: &str) -> Option<String> {
    match knowledge.lookup(&format!("{description} recipe")) {
        Lookup::Hit { entry, .. } => Some(entry.text.clone()),
        Lookup::Miss { .. } => None,
    }
}

/// Obtain-kind sub-objectives for everything still missing toward `target`,
/// indexed by position in the target's full dependency closure.
pub fn obtain_chain(
    book: &RecipeBook,
    target: &Item,
    inventory: &Inventory,
    knowledge: Option<&KnowledgeStore>,
) -> Result<Vec<SubObjective>, AgentError> {
    let closure = book.dependency_closure(target.as_str())?;
    let demands = [(target.clone(), 1)].into_iter().collect();
    let needed = book.net_requirements(&demands, inventory)?;
    let mut out = Vec::with_capacity(needed.len());
    for (item, count) in needed {
        let (idx, step) = closure
            .iter()
            .enumerate()
            .find(|(_, s)| s.item == item)
            .ok_or_else(|| AgentError::Unplannable(item.to_string(), "outside the target closure".into()))?;
        let mut sub = SubObjective::obtain(step.description.clone(), item, count, idx as u32);
        sub.knowledge = knowledge.and_then(|k| knowledge_for(k, &sub.description));
        out.push(sub);
    }
    Ok(out)
}

impl Parser for OracleParser {
    fn parse(&self, task: &TaskSpec, knowledge: &KnowledgeStore) -> Result<Vec<SubObjective>, AgentError> {
        match task.family {
            Family::Process => {
                let target = task
                    .target
                    .as_ref()
                    .ok_or_else(|| AgentError::Task(task.id.clone(), "no target item".into()))?;
                obtain_chain(&self.book, target, &Inventory::new(), Some(knowledge))
            }
            Family::Context => {
                if task.conditions.is_empty() {
                    return Err(AgentError::Task(task.id.clone(), "no conditions".into()));
                }
                Ok(vec![SubObjective::find(task.description.clone(), task.conditions.clone())])
            }
        }
    }
}

const PARSE_INSTRUCTIONS: &str = "Decompose the task into ordered sub-objectives. Reply with a JSON array. \
Item tasks: one {\"description\", \"item\", \"count\"} per step in dependency order. \
Scene tasks: a single {\"description\", \"conditions\": [{\"category\", \"subject\"}]}.";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSub {
    description: String,
    #[serde(default)]
    item: Option<Item>,
    #[serde(default)]
    count: Option<u32>,
    #[serde(default)]
    conditions: Option<Vec<Condition>>,
}

/// Asks a remote model for the decomposition over the backend wire protocol.
#[derive(Debug, Clone)]
pub struct RemoteParser {
    client: RemoteClient,
    book: Arc<RecipeBook>,
}

impl RemoteParser {
    pub fn new(config: &BackendConfig, book: Arc<RecipeBook>) -> Self {
        RemoteParser {
            client: RemoteClient::new(config),
            book,
        }
    }

    fn decode(&self, reply: &str) -> Result<Vec<SubObjective>, BackendError> {
        let wire: Vec<WireSub> =
            serde_json::from_str(reply.trim()).map_err(|e| BackendError::Malformed(e.to_string()))?;
        if wire.is_empty() {
            return Err(BackendError::Malformed("empty decomposition".into()));
        }
        wire.into_iter()
            .enumerate()
            .map(|(i, w)| match (w.item, w.conditions) {
                (Some(item), None) => {
                    if !self.book.contains(item.as_str()) {
                        return Err(BackendError::Malformed(format!("unknown item `{item}`")));
                    }
                    Ok(SubObjective::obtain(w.description, item, w.count.unwrap_or(1).max(1), i as u32))
                }
                (None, Some(conditions)) if !conditions.is_empty() => Ok(SubObjective::find(w.description, conditions)),
                _ => Err(BackendError::Malformed(format!("step {i} needs exactly one of item or conditions"))),
            })
            .collect()
    }
}

impl Parser for RemoteParser {
    fn parse(&self, task: &TaskSpec, knowledge: &KnowledgeStore) -> Result<Vec<SubObjective>, AgentError> {
        let facts: Vec<&str> = knowledge.entries().iter().map(|e| e.text.as_str()).collect();
        let user = serde_json::json!({ "task": task, "knowledge": facts });
        let body = MessagesRequest {
            frame: None,
            messages: vec![
                Message {
                    role: "system".into(),
                    content: PARSE_INSTRUCTIONS.into(),
                },
                Message {
                    role: "user".into(),
                    content: user.to_string(),
                },
            ],
            history: Vec::new(),
        };
        let reply = self.client.post("/v1/parse", &body)?;
        let mut subs = self.decode(&reply)?;
        for s in &mut subs {
            s.knowledge = knowledge_for(knowledge, &s.description);
        }
        Ok(subs)
    }
}
