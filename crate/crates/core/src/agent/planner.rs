//! Sub-objective → action sequence, aware of what the agent sees and holds.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ActionSequence, AgentError, EnvInfoSet, Feedback, ObjectiveKind, Provenance, SubObjective};
use crate::actions::{ActionStep, FailureReason};
use crate::memory::PerformerStore;
use crate::observation::{StatusObservation, VoxelNeighborhood};
use crate::percipient::remote::{Message, MessagesRequest};
use crate::percipient::{BackendConfig, BackendError, Category, Condition, RemoteClient};
use crate::world::{BlockKind, Inventory, Item, RecipeBook};

/// Everything a planner may consult.
#[derive(Debug, Clone, Copy)]
pub struct PlanInput<'a> {
    pub env_info: &'a EnvInfoSet,
    pub status: &'a StatusObservation,
    pub neighborhood: &'a VoxelNeighborhood,
    pub feedback: Option<&'a Feedback>,
    pub memory: Option<&'a PerformerStore>,
}

pub trait Planner: Send + Sync {
    fn plan(&self, sub: &SubObjective, input: &PlanInput<'_>) -> Result<ActionSequence, AgentError>;
}

/// Words Find and Move use for the block that yields `item`.
pub fn search_words(block: BlockKind) -> (&'static str, &'static str) {
    match block {
        BlockKind::Log => ("tree", "log"),
        other => (other.name(), other.name()),
    }
}

/// What the orchestrator should perceive before planning `sub`: the target
/// block and, for surface-only materials and crafted items, whether the sky
/// is open.
pub fn planning_conditions(book: &RecipeBook, sub: &SubObjective) -> Vec<Condition> {
    let Some((item, _)) = sub.item() else {
        return sub.conditions().to_vec();
    };
    let Ok(r) = book.get(item.as_str()) else {
        return Vec::new();
    };
    let Some(block) = r.source_block else {
        // Recovery chains for a crafted item may lead back to the surface.
        return vec![Condition::new(Category::Object, "sky")];
    };
    let mut out = vec![Condition::infer(search_words(block).0)];
    if r.surface_only {
        out.push(Condition::new(Category::Object, "sky"));
    }
    out
}

/// Rule-based planner over the recipe book.
#[derive(Debug, Clone)]
pub struct OraclePlanner {
    book: Arc<RecipeBook>,
}

impl OraclePlanner {
    pub fn new(book: Arc<RecipeBook>) -> Self {
        OraclePlanner { book }
    }
}

/// Accumulates steps while tracking where the agent will be and what it will hold.
struct Builder<'a> {
    book: &'a RecipeBook,
    input: &'a PlanInput<'a>,
    steps: Vec<ActionStep>,
    y: i32,
    sky: bool,
    /// Set once a planned step relocates the agent; observations are stale after that.
    moved: bool,
    allow_skip: bool,
    equipped: Option<Item>,
    held: Inventory,
}

impl<'a> Builder<'a> {
    fn new(book: &'a RecipeBook, input: &'a PlanInput<'a>) -> Self {
        let sky_fact = Condition::new(Category::Object, "sky");
        let sky = match input.env_info.get(&sky_fact) {
            Some(a) => sky_fact.satisfied_by(a),
            None => true,
        };
        Builder {
            book,
            input,
            steps: Vec::new(),
            y: input.status.feet_cell()[1],
            sky,
            moved: false,
            allow_skip: true,
            equipped: input.status.equipment.clone(),
            held: input.status.inventory.clone(),
        }
    }

    fn best_pickaxe(&self) -> Option<Item> {
        self.book.best_tool_in(&self.held)
    }

    fn here(&self, block: BlockKind) -> bool {
        self.allow_skip && !self.moved && self.input.neighborhood.contains_block(block)
    }

    fn seen(&self, find_word: &str) -> bool {
        self.allow_skip && !self.moved && self.input.env_info.satisfied(&Condition::infer(find_word))
    }

    fn obtain(&mut self, item: &Item, n: u32) -> Result<(), AgentError> {
        let r = self.book.get(item.as_str())?.clone();
        if let Some(block) = r.source_block {
            let (find_word, move_word) = search_words(block);
            let present = self.here(block);
            let visible = self.seen(find_word);
            if r.surface_only && !self.sky && !present && !visible {
                self.steps.push(ActionStep::DigUp {
                    tool: self.best_pickaxe(),
                });
                self.sky = true;
                self.moved = true;
                self.y = i32::MAX;
            }
            if let Some(max_y) = r.max_y {
                if self.y >= max_y && !present && !visible {
                    self.steps.push(ActionStep::DigDown {
                        y_level: max_y - 4,
                        tool: self.best_pickaxe(),
                    });
                    self.y = max_y - 4;
                    self.sky = false;
                    self.moved = true;
                }
            }
            let required = self.book.tool_for(r.required_tool_tier).cloned();
            let tool = match (&required, self.best_pickaxe()) {
                (None, _) => None,
                (Some(req), Some(best)) if self.book.tier_of(Some(&best)) >= self.book.tier_of(Some(req)) => Some(best),
                (Some(req), _) => Some(req.clone()),
            };
            for k in 0..n {
                let first = k == 0;
                if !(first && self.here(block)) {
                    if !(first && self.seen(find_word)) {
                        self.steps.push(ActionStep::Find {
                            object: find_word.into(),
                        });
                    }
                    self.steps.push(ActionStep::Move {
                        object: move_word.into(),
                    });
                }
                if tool.is_some() && self.equipped != tool {
                    self.steps.push(ActionStep::Equip {
                        object: tool.clone().expect("checked"),
                    });
                    self.equipped = tool.clone();
                }
                self.steps.push(ActionStep::Mine {
                    object: move_word.into(),
                    tool: tool.clone(),
                });
                self.moved = true;
            }
            self.held.add(item, n);
            return Ok(());
        }
        let crafts = n.div_ceil(r.output_count).max(1);
        let materials: BTreeMap<Item, u32> = r.inputs.iter().map(|(i, per)| (i.clone(), per * crafts)).collect();
        let platform_block = r.platform.block();
        let place = platform_block.is_some_and(|b| !self.here(b));
        if place {
            self.steps.push(ActionStep::Place {
                object: r.platform.item().expect("platform item"),
            });
        }
        self.steps.push(ActionStep::Craft {
            object: item.clone(),
            materials: materials.clone(),
            platform: r.platform,
        });
        if place {
            let block = platform_block.expect("checked");
            // Pick the platform back up so later steps can place it again.
            let tool = (block.harvest_tier() > crate::world::ToolTier::None)
                .then(|| self.best_pickaxe())
                .flatten();
            if tool.is_some() {
                self.equipped = tool.clone();
            }
            self.steps.push(ActionStep::Mine {
                object: block.name().into(),
                tool,
            });
        }
        for (i, m) in &materials {
            self.held.remove(i.as_str(), *m);
        }
        self.held.add(item, crafts * r.output_count);
        Ok(())
    }

    /// Prepends the sub-chain producing everything in `demands` that is not held.
    fn chain(&mut self, demands: &BTreeMap<Item, u32>) -> Result<(), AgentError> {
        for (item, required) in self.book.net_requirements(demands, &self.held.clone())? {
            let need = required.saturating_sub(self.held.count(item.as_str()));
            if need > 0 {
                self.obtain(&item, need)?;
            }
        }
        Ok(())
    }
}

impl OraclePlanner {
    fn obtain_plan(&self, item: &Item, count: u32, input: &PlanInput<'_>) -> Result<Vec<ActionStep>, AgentError> {
        let mut b = Builder::new(&self.book, input);
        if let Some(fb) = input.feedback.filter(|f| !f.ok) {
            match &fb.reason {
                Some(FailureReason::InsufficientMaterials { shortfall }) => {
                    let demands: BTreeMap<Item, u32> = shortfall
                        .iter()
                        .map(|(i, n)| (i.clone(), b.held.count(i.as_str()) + n))
                        .collect();
                    b.chain(&demands)?;
                }
                Some(FailureReason::MissingTool { tool }) if self.book.contains(tool.as_str()) => {
                    b.chain(&BTreeMap::from([(tool.clone(), 1)]))?;
                }
                Some(FailureReason::PlatformUnavailable) => {
                    let r = self.book.get(item.as_str())?;
                    if let Some(p) = r.platform.item() {
                        b.chain(&BTreeMap::from([(p, 1)]))?;
                    }
                }
                Some(FailureReason::TargetAbsent { .. }) => b.allow_skip = false,
                _ => {}
            }
        }
        let need = count.saturating_sub(b.held.count(item.as_str())).max(1);
        b.obtain(item, need)?;
        Ok(b.steps)
    }
}

/// The missing scene condition to search for next: a relation first, otherwise
/// the first one moving can satisfy.
pub fn next_search_subject(conditions: &[Condition], env_info: Option<&EnvInfoSet>) -> Option<String> {
    let missing: Vec<&Condition> = match env_info {
        Some(env) => conditions.iter().filter(|c| !env.satisfied(c)).collect(),
        None => conditions.iter().collect(),
    };
    // A missing relation is searched for as a whole: chasing its operands one
    // at a time walks away from whichever was already in view.
    let movable: Vec<&Condition> = missing
        .into_iter()
        .filter(|c| !matches!(c.category, Category::Time | Category::Weather))
        .collect();
    movable
        .iter()
        .find(|c| c.category == Category::Spatial)
        .or(movable.first())
        .map(|c| c.subject.clone())
}

impl Planner for OraclePlanner {
    fn plan(&self, sub: &SubObjective, input: &PlanInput<'_>) -> Result<ActionSequence, AgentError> {
        let steps = match &sub.kind {
            ObjectiveKind::Obtain { item, count } => self.obtain_plan(item, *count, input)?,
            ObjectiveKind::Find { conditions } => {
                let subject = next_search_subject(conditions, Some(input.env_info))
                    .ok_or_else(|| AgentError::Unplannable(sub.description.clone(), "only waiting can help".into()))?;
                vec![ActionStep::Find { object: subject }]
            }
        };
        Ok(ActionSequence {
            steps,
            provenance: Provenance::Oracle,
            templates: Vec::new(),
        })
    }
}

/// Oracle planning with up to two retrieved prior sequences attached as templates.
#[derive(Debug, Clone)]
pub struct MemoryPlanner {
    inner: OraclePlanner,
}

impl MemoryPlanner {
    pub fn new(book: Arc<RecipeBook>) -> Self {
        MemoryPlanner {
            inner: OraclePlanner::new(book),
        }
    }
}

impl Planner for MemoryPlanner {
    fn plan(&self, sub: &SubObjective, input: &PlanInput<'_>) -> Result<ActionSequence, AgentError> {
        let mut seq = self.inner.plan(sub, input)?;
        if let Some(store) = input.memory {
            let templates: Vec<String> = store
                .retrieve(&sub.description)
                .into_iter()
                .map(|r| r.description.clone())
                .collect();
            if !templates.is_empty() {
                seq.provenance = Provenance::MemoryAugmented;
                seq.templates = templates;
            }
        }
        Ok(seq)
    }
}

const PLAN_INSTRUCTIONS: &str = "Plan the sub-objective as a JSON array of actions, each {\"name\", \"arguments\"}. \
Names: Find, Move, Craft, Mine, Equip, Fight, DigUp, DigDown, Use, Place. Reply with the array only.";

/// Plans over the backend wire protocol.
#[derive(Debug, Clone)]
pub struct RemotePlanner {
    client: RemoteClient,
}

impl RemotePlanner {
    pub fn new(config: &BackendConfig) -> Self {
        RemotePlanner {
            client: RemoteClient::new(config),
        }
    }
}

/// Decodes a planner reply into schema-valid steps.
pub fn decode_plan(reply: &str) -> Result<Vec<ActionStep>, BackendError> {
    let steps: Vec<ActionStep> = serde_json::from_str(reply.trim()).map_err(|e| BackendError::Malformed(e.to_string()))?;
    if steps.is_empty() {
        return Err(BackendError::Malformed("empty plan".into()));
    }
    Ok(steps)
}

impl Planner for RemotePlanner {
    fn plan(&self, sub: &SubObjective, input: &PlanInput<'_>) -> Result<ActionSequence, AgentError> {
        let templates: Vec<_> = input
            .memory
            .map(|m| m.retrieve(&sub.description).into_iter().cloned().collect())
            .unwrap_or_default();
        let user = serde_json::json!({
            "subobjective": sub,
            "env_info": input.env_info,
            "status": input.status,
            "feedback": input.feedback,
            "templates": templates,
        });
        let body = MessagesRequest {
            frame: None,
            messages: vec![
                Message {
                    role: "system".into(),
                    content: PLAN_INSTRUCTIONS.into(),
                },
                Message {
                    role: "user".into(),
                    content: user.to_string(),
                },
            ],
            history: Vec::new(),
        };
        let reply = self.client.post("/v1/plan", &body)?;
        Ok(ActionSequence {
            steps: decode_plan(&reply)?,
            provenance: Provenance::Remote,
            templates: templates.into_iter().map(|r| r.description).collect(),
        })
    }
}
