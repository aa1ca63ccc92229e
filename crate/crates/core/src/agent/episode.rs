//! One episode: parse, then plan / perform / patrol until done, death or the tick limit.
//!
//! Every frame poll, question, answer, plan, action outcome, feedback, drop and
//! milestone is appended to a JSON-lines log; the judge reads nothing else.

use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::parser::{OracleParser, RemoteParser};
use super::patroller::{modify_next_subobjective, patrol_action, patrol_subobjective};
use super::perception::perceive;
use super::planner::{next_search_subject, planning_conditions, MemoryPlanner, PlanInput, Planner, RemotePlanner};
use super::{
    ActionSequence, AgentError, EnvInfoSet, Feedback, ObjectiveKind, Parser, Strategy, SubObjective, MODIFY_LIMIT,
    REPLAN_LIMIT, WAIT_SLICE,
};
use crate::actions::{self, ActionOutcome, ActionStep, Embodiment, FailureReason, HookDecision, PollHook};
use crate::bench::{judge_log, Family, TaskSpec};
use crate::memory::{KnowledgeStore, PerformerRecord, PerformerStore, Situation};
use crate::observation::{self, FovConfig, Frame, Scene};
use crate::percipient::{
    Answer, BackendConfig, BackendError, FallbackPercipient, OraclePercipient, Percipient, Query, RemotePercipient,
};
use crate::world::{generate_world, GenConfig, Inventory, Item, Platform, RecipeBook, WorldProfile, WorldState};

/// Seed stream for random drops, kept apart from the world's own RNG.
const DROP_STREAM: u64 = 0x6472_6f70;
/// Items the random-drop perturbation may remove.
pub const DROP_CANDIDATES: [&str; 3] = ["log", "planks", "stick"];
/// Drops follow sub-objectives with more reasoning steps than this.
pub const DROP_MIN_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSetup {
    pub seed: u64,
    pub profile: WorldProfile,
    #[serde(default)]
    pub gen: GenConfig,
}

/// How much of each polled frame goes into the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameDetail {
    /// The whole frame; needed by the scene-task judge.
    Full,
    /// Entry count and scene attributes only.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub world: WorldSetup,
    pub tick_limit: u64,
    pub random_drop: bool,
    pub patroller_check: bool,
    pub memory_enabled: bool,
    pub strategy: Strategy,
    pub frame_detail: FrameDetail,
    #[serde(default)]
    pub fov: FovConfig,
}

impl EpisodeConfig {
    pub fn new(world: WorldSetup) -> Self {
        EpisodeConfig {
            world,
            tick_limit: crate::world::EPISODE_TICKS,
            random_drop: false,
            patroller_check: true,
            memory_enabled: true,
            strategy: Strategy::MultiRound,
            frame_detail: FrameDetail::Full,
            fov: FovConfig::default(),
        }
    }
}

/// The backends one episode talks to. Performer memory is a read-only snapshot;
/// new records come back in the result.
#[derive(Clone)]
pub struct Backends {
    pub book: Arc<RecipeBook>,
    pub parser: Arc<dyn Parser>,
    pub planner: Arc<dyn Planner>,
    pub percipient: Arc<dyn Percipient>,
    pub knowledge: Arc<KnowledgeStore>,
    pub performer: Arc<PerformerStore>,
}

impl Backends {
    /// Ground-truth percipient, rule-based parser and memory-augmented planner.
    pub fn oracle(book: Arc<RecipeBook>) -> Backends {
        Backends {
            parser: Arc::new(OracleParser::new(book.clone())),
            planner: Arc::new(MemoryPlanner::new(book.clone())),
            percipient: Arc::new(OraclePercipient),
            knowledge: Arc::new(KnowledgeStore::standard(&book)),
            performer: Arc::new(PerformerStore::new()),
            book,
        }
    }

    /// Parser, planner and percipient served over the wire protocol. The
    /// percipient applies the configured fallback policy; knowledge stays local.
    pub fn remote(book: Arc<RecipeBook>, config: &BackendConfig) -> Backends {
        Backends {
            parser: Arc::new(RemoteParser::new(config, book.clone())),
            planner: Arc::new(RemotePlanner::new(config)),
            percipient: Arc::new(FallbackPercipient::new(RemotePercipient::new(config), config.fallback)),
            knowledge: Arc::new(KnowledgeStore::standard(&book)),
            performer: Arc::new(PerformerStore::new()),
            book,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Start,
    Frame,
    Query,
    Answer,
    Plan,
    Action,
    Feedback,
    Drop,
    Done,
    Milestone,
    End,
}

/// One JSON line: `{"tick", "kind", "payload"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: u64,
    pub kind: LogKind,
    pub payload: Box<RawValue>,
}

impl PartialEq for LogRecord {
    fn eq(&self, other: &Self) -> bool {
        self.tick == other.tick && self.kind == other.kind && self.payload.get() == other.payload.get()
    }
}

impl LogRecord {
    pub fn new<T: Serialize + ?Sized>(tick: u64, kind: LogKind, payload: &T) -> LogRecord {
        let payload = serde_json::value::to_raw_value(payload).expect("log payloads serialize");
        LogRecord { tick, kind, payload }
    }

    pub fn payload_as<T: DeserializeOwned>(&self) -> Result<T, serde_json::Error> {
        serde_json::from_str(self.payload.get())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log records serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartPayload {
    pub task: TaskSpec,
    pub seed: u64,
    pub tick_limit: u64,
    pub start_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub entries: usize,
    pub scene: Scene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Done,
    TargetObtained,
    Death,
    Timeout,
    Exhausted,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndPayload {
    pub reason: EndReason,
    pub alive: bool,
    pub ticks_used: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropPayload {
    pub after: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<Item>,
    pub skipped: bool,
    /// Whether the rest of the chain, replayed on the reduced inventory, runs short.
    pub shortfall: bool,
    /// Inventory right after the drop.
    #[serde(default)]
    pub inventory: Inventory,
    /// Items the queued sub-objectives still have to hold, in order.
    #[serde(default)]
    pub remaining: Vec<(Item, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub item: Item,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Death,
    Timeout,
    JudgeRule1,
    JudgeRule2,
    BackendError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum EpisodeVerdict {
    Success,
    Failure(FailureKind),
}

impl EpisodeVerdict {
    pub fn is_success(self) -> bool {
        self == EpisodeVerdict::Success
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub seed: u64,
    pub verdict: EpisodeVerdict,
    pub ticks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
    pub milestones: Vec<Milestone>,
    /// Digest of the final world state.
    pub digest: String,
    #[serde(skip)]
    pub log: Vec<LogRecord>,
    /// Performer-memory records earned by this episode, in order.
    #[serde(skip)]
    pub memories: Vec<PerformerRecord>,
}

/// Sees every polled frame: logs it, runs active perception, and stops the
/// action once the patroller is satisfied.
struct Watch<'e> {
    sub: &'e SubObjective,
    percipient: &'e dyn Percipient,
    strategy: Strategy,
    detail: FrameDetail,
    log: &'e mut Vec<LogRecord>,
    last_env: &'e mut Option<EnvInfoSet>,
    done: &'e mut bool,
    perceive: bool,
    /// Declare done at the first complete set (scene tasks).
    declare_done: bool,
}

impl PollHook for Watch<'_> {
    fn on_frame(&mut self, action: &ActionStep, frame: &Frame) -> Result<HookDecision, BackendError> {
        let tick = frame.tick_stamp;
        match self.detail {
            FrameDetail::Full => self.log.push(LogRecord::new(tick, LogKind::Frame, frame)),
            FrameDetail::Summary => self.log.push(LogRecord::new(
                tick,
                LogKind::Frame,
                &FrameSummary {
                    entries: frame.entries.len(),
                    scene: frame.scene.clone(),
                },
            )),
        }
        if !self.perceive {
            return Ok(HookDecision::Continue);
        }
        let (env, exchanges) = perceive(self.sub, action, frame, self.percipient, self.strategy)?;
        if env.facts.is_empty() {
            return Ok(HookDecision::Continue);
        }
        log_exchanges(self.log, tick, &exchanges);
        let feedback = patrol_action(self.sub, action, &env, None);
        let complete = env.complete;
        *self.last_env = Some(env);
        if self.declare_done && complete {
            self.log.push(LogRecord::new(tick, LogKind::Done, &self.sub.conditions()));
            *self.done = true;
            return Ok(HookDecision::Stop);
        }
        if feedback.ok && !self.declare_done {
            return Ok(HookDecision::Stop);
        }
        Ok(HookDecision::Continue)
    }
}

fn log_exchanges(log: &mut Vec<LogRecord>, tick: u64, exchanges: &[(Query, Answer)]) {
    for (q, a) in exchanges {
        log.push(LogRecord::new(tick, LogKind::Query, q));
        log.push(LogRecord::new(tick, LogKind::Answer, a));
    }
}

#[derive(Serialize)]
struct ActionPayload<'a> {
    action: &'a ActionStep,
    #[serde(flatten)]
    outcome: OutcomeView<'a>,
}

#[derive(Serialize)]
struct OutcomeView<'a> {
    #[serde(flatten)]
    verdict: &'a actions::ActionVerdict,
    ticks_used: u64,
}

#[derive(Serialize)]
struct PlanPayload<'a> {
    subobjective: &'a SubObjective,
    #[serde(flatten)]
    sequence: &'a ActionSequence,
}

enum Stop {
    End(EndReason),
}

struct Episode<'a> {
    task: &'a TaskSpec,
    cfg: &'a EpisodeConfig,
    be: &'a Backends,
    world: WorldState,
    start_tick: u64,
    log: Vec<LogRecord>,
    milestones: Vec<Milestone>,
    seen: BTreeSet<Item>,
    memories: Vec<PerformerRecord>,
    drop_rng: ChaCha8Rng,
    last_env: Option<EnvInfoSet>,
    done: bool,
}

impl<'a> Episode<'a> {
    fn elapsed(&self) -> u64 {
        self.world.tick - self.start_tick
    }

    fn remaining(&self) -> u64 {
        self.cfg.tick_limit.saturating_sub(self.elapsed())
    }

    fn push<T: Serialize + ?Sized>(&mut self, kind: LogKind, payload: &T) {
        self.log.push(LogRecord::new(self.world.tick, kind, payload));
    }

    /// Why the episode must stop now, if it must.
    fn check_stop(&self) -> Option<EndReason> {
        if !self.world.agent.alive {
            return Some(EndReason::Death);
        }
        if let Some(t) = &self.task.target {
            if self.world.agent.inventory.has(t.as_str()) {
                return Some(EndReason::TargetObtained);
            }
        }
        if self.done {
            return Some(EndReason::Done);
        }
        if self.remaining() == 0 {
            return Some(EndReason::Timeout);
        }
        None
    }

    fn note_milestones(&mut self) {
        let new: Vec<Item> = self
            .world
            .agent
            .inventory
            .iter()
            .filter(|(i, n)| *n > 0 && !self.seen.contains(*i))
            .map(|(i, _)| i.clone())
            .collect();
        for item in new {
            self.seen.insert(item.clone());
            self.milestones.push(Milestone {
                item: item.clone(),
                tick: self.world.tick,
            });
            self.push(LogKind::Milestone, &Milestone {
                item,
                tick: self.world.tick,
            });
        }
    }

    /// Runs one step under the poll hook, logging its outcome.
    fn execute(&mut self, sub: &SubObjective, step: &ActionStep, wait: bool) -> Result<ActionOutcome, Stop> {
        let budget = self.remaining().min(if wait { WAIT_SLICE } else { actions::DEFAULT_BUDGET });
        let scene_task = self.task.family == Family::Context;
        let process_find = matches!(step, ActionStep::Find { .. }) && self.cfg.patroller_check;
        let mut watch = Watch {
            sub,
            percipient: self.be.percipient.as_ref(),
            strategy: self.cfg.strategy,
            detail: self.cfg.frame_detail,
            log: &mut self.log,
            last_env: &mut self.last_env,
            done: &mut self.done,
            perceive: scene_task || process_find,
            declare_done: scene_task,
        };
        let mut e = Embodiment::new(&mut self.world, self.cfg.fov.clone(), budget).with_hook(&mut watch);
        let outcome = if wait {
            actions::wait(&mut e, step, budget)
        } else {
            actions::execute(&mut e, step)
        };
        #[derive(Serialize)]
        struct Waited {
            wait: u64,
        }
        if wait {
            self.push(LogKind::Action, &Waited {
                wait: outcome.ticks_used,
            });
        } else {
            let payload = ActionPayload {
                action: step,
                outcome: OutcomeView {
                    verdict: &outcome.verdict,
                    ticks_used: outcome.ticks_used,
                },
            };
            self.push(LogKind::Action, &payload);
        }
        self.note_milestones();
        if let Some(FailureReason::Backend { .. }) = outcome.failure() {
            return Err(Stop::End(EndReason::BackendError));
        }
        Ok(outcome)
    }

    fn plan(&mut self, sub: &SubObjective, feedback: Option<&Feedback>) -> Result<Result<ActionSequence, AgentError>, Stop> {
        let status = observation::status(&self.world);
        let neighborhood = observation::voxel_neighborhood(&self.world);
        // Situation-aware planning: perceive what the plan depends on first.
        let conds = planning_conditions(&self.be.book, sub);
        let mut env = EnvInfoSet::default();
        if !conds.is_empty() && sub.item().is_some() {
            let frame = observation::render_frame(&self.world, &self.cfg.fov);
            let probe = SubObjective::find(sub.description.clone(), conds.clone());
            let nominal = ActionStep::Find {
                object: conds[0].subject.clone(),
            };
            match perceive(&probe, &nominal, &frame, self.be.percipient.as_ref(), self.cfg.strategy) {
                Ok((set, exchanges)) => {
                    log_exchanges(&mut self.log, frame.tick_stamp, &exchanges);
                    env = set;
                }
                Err(_) => return Err(Stop::End(EndReason::BackendError)),
            }
        } else if let Some(last) = &self.last_env {
            env = last.clone();
        }
        let memory = self.cfg.memory_enabled.then_some(self.be.performer.as_ref());
        let input = PlanInput {
            env_info: &env,
            status: &status,
            neighborhood: &neighborhood,
            feedback,
            memory,
        };
        match self.be.planner.plan(sub, &input) {
            Err(AgentError::Backend(_)) => Err(Stop::End(EndReason::BackendError)),
            other => Ok(other),
        }
    }

    /// Picks up platforms this plan placed before it failed, so the replan
    /// can place them again wherever it ends up.
    fn recover_platforms(&mut self, sub: &SubObjective, steps: &[ActionStep]) -> Result<(), Stop> {
        let n = observation::voxel_neighborhood(&self.world);
        for step in steps.iter().filter(|s| is_platform_pickup(s)) {
            let ActionStep::Mine { object, .. } = step else { continue };
            if n.contains(object) && self.world.agent.inventory.count(object) == 0 {
                self.execute(sub, step, false)?;
            }
        }
        Ok(())
    }

    fn remember(&mut self, sub: &SubObjective, steps: &[ActionStep]) {
        if !self.cfg.memory_enabled {
            return;
        }
        let scene = observation::scene(&self.world);
        self.memories.push(PerformerRecord {
            description: sub.description.clone(),
            position_index: sub.position_index,
            sequence: steps.to_vec(),
            situation: Situation {
                inventory: self.world.agent.inventory.clone(),
                scene: format!("{} {} {}", scene.biome.name(), scene.time.name(), scene.weather.name()),
            },
        });
    }

    /// Random drop after a completed sub-objective deep enough in the tech tree.
    fn maybe_drop(&mut self, sub: &SubObjective, rest: &VecDeque<SubObjective>) {
        if !self.cfg.random_drop {
            return;
        }
        let Some((item, _)) = sub.item() else { return };
        let steps = self.be.book.reasoning_steps(item.as_str()).unwrap_or(0);
        if steps <= DROP_MIN_STEPS {
            return;
        }
        let candidates: Vec<&str> = DROP_CANDIDATES
            .iter()
            .copied()
            .filter(|i| self.world.agent.inventory.has(i))
            .collect();
        let payload = if candidates.is_empty() {
            DropPayload {
                after: sub.description.clone(),
                item: None,
                skipped: true,
                shortfall: false,
                inventory: self.world.agent.inventory.clone(),
                remaining: rest.iter().filter_map(|s| s.item().map(|(i, n)| (i.clone(), n))).collect(),
            }
        } else {
            let pick = candidates[self.drop_rng.random_range(0..candidates.len())];
            self.world.agent.inventory.remove(pick, 1);
            let remaining: Vec<SubObjective> = rest.iter().cloned().collect();
            DropPayload {
                after: sub.description.clone(),
                item: Some(Item::new(pick)),
                skipped: false,
                shortfall: !chain_feasible(&self.be.book, &remaining, &self.world.agent.inventory),
                inventory: self.world.agent.inventory.clone(),
                remaining: remaining.iter().filter_map(|s| s.item().map(|(i, n)| (i.clone(), n))).collect(),
            }
        };
        self.push(LogKind::Drop, &payload);
    }

    fn run_process(&mut self) -> EndReason {
        let target = self.task.target.clone().expect("process task has a target");
        let mut queue: VecDeque<SubObjective> = match self.be.parser.parse(self.task, &self.be.knowledge) {
            Ok(subs) => subs.into(),
            Err(AgentError::Backend(_)) => return EndReason::BackendError,
            Err(_) => return EndReason::Exhausted,
        };
        self.push(LogKind::Plan, &serde_json::json!({ "subobjectives": &queue }));
        let check = self.cfg.patroller_check;
        let mut modifications = 0;
        'subs: while let Some(sub) = queue.pop_front() {
            let mut replans = 0;
            let mut feedback: Option<Feedback> = None;
            loop {
                if let Some(r) = self.check_stop() {
                    return r;
                }
                let (item, count) = sub.item().expect("obtain-kind");
                if self.world.agent.inventory.count(item.as_str()) >= count {
                    // Already satisfied; nothing to perform.
                    continue 'subs;
                }
                if replans > REPLAN_LIMIT {
                    modifications += 1;
                    if modifications > MODIFY_LIMIT {
                        return EndReason::Exhausted;
                    }
                    let status = observation::status(&self.world);
                    match modify_next_subobjective(&self.be.book, &target, &status, Some(&self.be.knowledge)) {
                        Ok(revised) => {
                            let mut fb = feedback.clone().unwrap_or_else(|| {
                                Feedback::failed(
                                    super::FeedbackSource::PatrollerSubobjective,
                                    FailureReason::GoalUnmet {
                                        detail: "re-plan limit".into(),
                                    },
                                )
                            });
                            fb.suggested = revised.first().cloned();
                            self.push(LogKind::Feedback, &fb);
                            self.push(LogKind::Plan, &serde_json::json!({ "subobjectives": &revised }));
                            queue = revised.into();
                            continue 'subs;
                        }
                        Err(_) => return EndReason::Exhausted,
                    }
                }
                let seq = match self.plan(&sub, feedback.as_ref()) {
                    Err(Stop::End(r)) => return r,
                    Ok(Ok(seq)) => seq,
                    Ok(Err(e)) => {
                        let fb = Feedback::failed(
                            super::FeedbackSource::PatrollerSubobjective,
                            FailureReason::GoalUnmet { detail: e.to_string() },
                        );
                        self.push(LogKind::Feedback, &fb);
                        feedback = Some(fb);
                        replans += 1;
                        continue;
                    }
                };
                self.push(LogKind::Plan, &PlanPayload {
                    subobjective: &sub,
                    sequence: &seq,
                });
                let mut failed: Option<Feedback> = None;
                let mut met = false;
                for step in &seq.steps {
                    if met && !is_platform_pickup(step) {
                        // Goal reached early; only collect placed platforms.
                        continue;
                    }
                    if let Some(r) = self.check_stop() {
                        return r;
                    }
                    self.last_env = None;
                    let outcome = match self.execute(&sub, step, false) {
                        Ok(o) => o,
                        Err(Stop::End(r)) => return r,
                    };
                    if let Some(r) = self.check_stop() {
                        if r == EndReason::TargetObtained && check {
                            // The last sub-objective still gets its check and record.
                            let fb = patrol_subobjective(&sub, &observation::status(&self.world), None);
                            self.push(LogKind::Feedback, &fb);
                            if fb.ok {
                                self.remember(&sub, &seq.steps);
                            }
                        }
                        return r;
                    }
                    if !check {
                        continue;
                    }
                    let env = match (step, &self.last_env) {
                        (ActionStep::Find { .. }, Some(env)) => env.clone(),
                        _ => EnvInfoSet::default(),
                    };
                    let fb = patrol_action(&sub, step, &env, Some(&outcome));
                    if !fb.ok {
                        self.push(LogKind::Feedback, &fb);
                        failed = Some(fb);
                        if let Err(Stop::End(r)) = self.recover_platforms(&sub, &seq.steps) {
                            return r;
                        }
                        break;
                    }
                    met = self.world.agent.inventory.count(item.as_str()) >= count;
                }
                if !check {
                    self.maybe_drop(&sub, &queue);
                    continue 'subs;
                }
                if let Some(fb) = failed {
                    feedback = Some(fb);
                    replans += 1;
                    continue;
                }
                let status = observation::status(&self.world);
                let fb = patrol_subobjective(&sub, &status, None);
                self.push(LogKind::Feedback, &fb);
                if fb.ok {
                    self.remember(&sub, &seq.steps);
                    self.maybe_drop(&sub, &queue);
                    continue 'subs;
                }
                feedback = Some(fb);
                replans += 1;
            }
        }
        self.check_stop().unwrap_or(EndReason::Exhausted)
    }

    fn run_context(&mut self) -> EndReason {
        let sub = match self.be.parser.parse(self.task, &self.be.knowledge) {
            Ok(mut subs) if !subs.is_empty() => subs.remove(0),
            Ok(_) => return EndReason::Exhausted,
            Err(AgentError::Backend(_)) => return EndReason::BackendError,
            Err(_) => return EndReason::Exhausted,
        };
        self.push(LogKind::Plan, &serde_json::json!({ "subobjectives": [&sub] }));
        let conditions = sub.conditions().to_vec();
        let mut last_steps: Vec<ActionStep> = Vec::new();
        loop {
            if let Some(r) = self.check_stop() {
                if r == EndReason::Done {
                    let status = observation::status(&self.world);
                    let fb = patrol_subobjective(&sub, &status, self.last_env.as_ref());
                    self.push(LogKind::Feedback, &fb);
                    if fb.ok {
                        self.remember(&sub, &last_steps);
                    }
                }
                return r;
            }
            let movable = next_search_subject(&conditions, self.last_env.as_ref());
            if movable.is_none() && self.last_env.is_some() {
                // Only time or weather is missing: wait where we are.
                let nominal = ActionStep::Find {
                    object: conditions[0].subject.clone(),
                };
                if let Err(Stop::End(r)) = self.execute(&sub, &nominal, true) {
                    return r;
                }
                continue;
            }
            let feedback = self
                .last_env
                .as_ref()
                .map(|env| patrol_subobjective(&sub, &observation::status(&self.world), Some(env)));
            let seq = match self.plan(&sub, feedback.as_ref()) {
                Err(Stop::End(r)) => return r,
                Ok(Ok(seq)) => seq,
                Ok(Err(_)) => ActionSequence {
                    steps: vec![ActionStep::Find {
                        object: conditions[0].subject.clone(),
                    }],
                    provenance: super::Provenance::Oracle,
                    templates: Vec::new(),
                },
            };
            self.push(LogKind::Plan, &PlanPayload {
                subobjective: &sub,
                sequence: &seq,
            });
            for step in &seq.steps {
                let outcome = match self.execute(&sub, step, false) {
                    Ok(o) => o,
                    Err(Stop::End(r)) => return r,
                };
                if self.done || !self.world.agent.alive {
                    break;
                }
                let env = self.last_env.clone().unwrap_or_default();
                let fb = patrol_action(&sub, step, &env, Some(&outcome));
                self.push(LogKind::Feedback, &fb);
            }
            last_steps = seq.steps;
        }
    }
}

fn is_platform_pickup(step: &ActionStep) -> bool {
    matches!(step, ActionStep::Mine { object, .. }
        if [Platform::CraftingTable, Platform::Furnace]
            .iter()
            .any(|p| p.block().is_some_and(|b| b.name() == object)))
}

/// Replays the remaining sub-objectives on `inventory`, assuming every mined
/// unit is obtained; false when some craft would lack its inputs.
pub fn chain_feasible(book: &RecipeBook, remaining: &[SubObjective], inventory: &Inventory) -> bool {
    let mut inv = inventory.clone();
    for sub in remaining {
        let ObjectiveKind::Obtain { item, count } = &sub.kind else { continue };
        let have = inv.count(item.as_str());
        if have >= *count {
            continue;
        }
        let need = count - have;
        let Ok(r) = book.get(item.as_str()) else { return false };
        if r.is_mined() {
            inv.add(item, need);
            continue;
        }
        let crafts = need.div_ceil(r.output_count);
        for (input, per) in &r.inputs {
            if !inv.remove(input.as_str(), per * crafts) {
                return false;
            }
        }
        inv.add(item, crafts * r.output_count);
    }
    true
}

/// Builds the world for `config`, runs the task to its end and judges the log.
pub fn run_episode(task: &TaskSpec, config: &EpisodeConfig, backends: &Backends) -> EpisodeResult {
    let world = match generate_world(config.world.seed, &config.world.profile, &config.world.gen) {
        Ok(w) => w,
        Err(e) => panic!("world generation failed for seed {}: {e}", config.world.seed),
    };
    run_episode_in(task, config, backends, world)
}

/// Like [`run_episode`] but in a caller-supplied world.
pub fn run_episode_in(task: &TaskSpec, config: &EpisodeConfig, backends: &Backends, world: WorldState) -> EpisodeResult {
    let start_tick = world.tick;
    let mut ep = Episode {
        task,
        cfg: config,
        be: backends,
        world,
        start_tick,
        log: Vec::new(),
        milestones: Vec::new(),
        seen: BTreeSet::new(),
        memories: Vec::new(),
        drop_rng: ChaCha8Rng::seed_from_u64(config.world.seed ^ DROP_STREAM),
        last_env: None,
        done: false,
    };
    ep.push(LogKind::Start, &StartPayload {
        task: task.clone(),
        seed: config.world.seed,
        tick_limit: config.tick_limit,
        start_tick,
    });
    let seen: Vec<Item> = ep.world.agent.inventory.iter().map(|(i, _)| i.clone()).collect();
    ep.seen.extend(seen);
    let reason = match task.family {
        Family::Process => ep.run_process(),
        Family::Context => ep.run_context(),
    };
    let end = EndPayload {
        reason,
        alive: ep.world.agent.alive,
        ticks_used: ep.elapsed(),
    };
    ep.push(LogKind::End, &end);
    let verdict = judge_log(&ep.log).unwrap_or(EpisodeVerdict::Failure(FailureKind::Timeout));
    EpisodeResult {
        task_id: task.id.clone(),
        seed: config.world.seed,
        verdict,
        ticks: ep.elapsed(),
        log_path: None,
        milestones: ep.milestones,
        digest: ep.world.digest(),
        log: ep.log,
        memories: ep.memories,
    }
}
