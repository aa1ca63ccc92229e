//! The performer's compound actions.
//!
//! Each action is a closed control loop that sees the world only through an
//! [`Embodiment`]: ego-view frames, the voxel neighborhood, the status readout,
//! and one low-level control per tick.

mod control;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::observation::{self, FovConfig, Frame, StatusObservation, VoxelNeighborhood};
use crate::percipient::{self, BackendError, Condition};
use crate::world::{BlockKind, Control, Item, MobKind, Platform, RecipeBook, StepFeedback, WorldError, WorldState};

pub use control::execute;

pub const DEFAULT_BUDGET: u64 = 2_400;
/// Ticks between frame polls while travelling.
pub const POLL_INTERVAL: u64 = 20;

/// One planner-level action with the argument columns of the action table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", content = "arguments", deny_unknown_fields)]
pub enum ActionStep {
    Find {
        object: String,
    },
    Move {
        object: String,
    },
    Craft {
        object: Item,
        materials: BTreeMap<Item, u32>,
        platform: Platform,
    },
    Mine {
        object: String,
        tool: Option<Item>,
    },
    Equip {
        object: Item,
    },
    Fight {
        object: String,
        tool: Option<Item>,
    },
    DigUp {
        tool: Option<Item>,
    },
    DigDown {
        #[serde(rename = "y-level")]
        y_level: i32,
        tool: Option<Item>,
    },
    Use {
        object: Item,
    },
    Place {
        object: Item,
    },
}

impl ActionStep {
    pub fn name(&self) -> &'static str {
        match self {
            ActionStep::Find { .. } => "Find",
            ActionStep::Move { .. } => "Move",
            ActionStep::Craft { .. } => "Craft",
            ActionStep::Mine { .. } => "Mine",
            ActionStep::Equip { .. } => "Equip",
            ActionStep::Fight { .. } => "Fight",
            ActionStep::DigUp { .. } => "DigUp",
            ActionStep::DigDown { .. } => "DigDown",
            ActionStep::Use { .. } => "Use",
            ActionStep::Place { .. } => "Place",
        }
    }

    /// The object argument, when the action has one.
    pub fn object(&self) -> Option<&str> {
        match self {
            ActionStep::Find { object }
            | ActionStep::Move { object }
            | ActionStep::Mine { object, .. }
            | ActionStep::Fight { object, .. } => Some(object),
            ActionStep::Craft { object, .. } | ActionStep::Equip { object } | ActionStep::Use { object } | ActionStep::Place { object } => {
                Some(object.as_str())
            }
            ActionStep::DigUp { .. } | ActionStep::DigDown { .. } => None,
        }
    }
}

impl fmt::Display for ActionStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionStep::DigDown { y_level, .. } => write!(f, "DigDown({y_level})"),
            ActionStep::DigUp { .. } => write!(f, "DigUp"),
            other => write!(f, "{}({})", other.name(), other.object().unwrap_or("")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FailureReason {
    MissingTool { tool: Item },
    InsufficientMaterials { shortfall: BTreeMap<Item, u32> },
    PlatformUnavailable,
    TargetAbsent { object: String },
    Blocked,
    Died,
    /// Stopped by the poll hook before the halt condition held.
    Interrupted,
    InvalidArguments { detail: String },
    Backend { error: BackendError },
    /// A sub-objective's goal was not met after its sequence ran.
    GoalUnmet { detail: String },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::MissingTool { tool } => write!(f, "missing tool {tool}"),
            FailureReason::InsufficientMaterials { shortfall } => {
                let parts: Vec<String> = shortfall.iter().map(|(i, n)| format!("{i}:{n}")).collect();
                write!(f, "insufficient materials ({})", parts.join(", "))
            }
            FailureReason::PlatformUnavailable => write!(f, "platform unavailable"),
            FailureReason::TargetAbsent { object } => write!(f, "target absent: {object}"),
            FailureReason::Blocked => write!(f, "blocked"),
            FailureReason::Died => write!(f, "died"),
            FailureReason::Interrupted => write!(f, "interrupted"),
            FailureReason::InvalidArguments { detail } => write!(f, "invalid arguments: {detail}"),
            FailureReason::Backend { error } => write!(f, "backend: {error}"),
            FailureReason::GoalUnmet { detail } => write!(f, "goal unmet: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ActionVerdict {
    Halted,
    Failed { reason: FailureReason },
    BudgetExhausted,
}

/// Which observation an action read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadKind {
    Frame,
    Neighborhood,
    Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Control { tick: u64, control: Control },
    Read { tick: u64, read: ReadKind },
}

/// What the action last observed and did; used to re-check halt predicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HaltEvidence {
    pub frame: Option<Frame>,
    pub neighborhood: Option<VoxelNeighborhood>,
    pub status: Option<StatusObservation>,
    pub broke: Vec<BlockKind>,
    pub gained: Vec<Item>,
    pub killed: Vec<MobKind>,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub verdict: ActionVerdict,
    pub ticks_used: u64,
    pub trace: Vec<TraceEvent>,
    pub evidence: HaltEvidence,
}

impl ActionOutcome {
    pub fn halted(&self) -> bool {
        self.verdict == ActionVerdict::Halted
    }

    pub fn failure(&self) -> Option<&FailureReason> {
        match &self.verdict {
            ActionVerdict::Failed { reason } => Some(reason),
            _ => None,
        }
    }
}

/// Does a Find target hold on a frame?
pub fn find_target_holds(object: &str, frame: &Frame) -> bool {
    percipient::holds(&Condition::infer(object), frame)
}

/// Re-evaluates an action's halt predicate on recorded evidence.
pub fn halt_holds(action: &ActionStep, ev: &HaltEvidence) -> bool {
    match action {
        ActionStep::Find { object } => ev.frame.as_ref().is_some_and(|f| find_target_holds(object, f)),
        ActionStep::Move { object } => ev
            .neighborhood
            .as_ref()
            .is_some_and(|n| move_target_in(n, object)),
        ActionStep::DigUp { .. } => ev.frame.as_ref().is_some_and(|f| f.scene.sky_visible),
        ActionStep::DigDown { y_level, .. } => ev.status.as_ref().is_some_and(|s| s.feet_cell()[1] <= *y_level),
        ActionStep::Mine { object, .. } => block_for(object).is_some_and(|b| ev.broke.contains(&b)),
        ActionStep::Craft { object, .. } => ev.gained.contains(object),
        ActionStep::Equip { object } => ev
            .status
            .as_ref()
            .is_some_and(|s| s.equipment.as_ref() == Some(object)),
        ActionStep::Fight { object, .. } => MobKind::from_name(object).is_some_and(|m| ev.killed.contains(&m)),
        ActionStep::Use { .. } => ev.used,
        ActionStep::Place { object } => match (BlockKind::placed_from(object.as_str()), &ev.neighborhood) {
            (Some(b), Some(n)) => n.contains_block(b),
            _ => false,
        },
    }
}

/// The block an object name refers to; `tree` means its log.
pub fn block_for(object: &str) -> Option<BlockKind> {
    match object {
        "tree" => Some(BlockKind::Log),
        other => BlockKind::from_name(other),
    }
}

/// Move halts when the object (or, for `tree`, a log) is in the cube.
pub fn move_target_in(n: &VoxelNeighborhood, object: &str) -> bool {
    match object {
        "tree" => n.contains_block(BlockKind::Log),
        other => n.contains(other),
    }
}

/// Called on every frame poll while an action runs.
pub trait PollHook {
    fn on_frame(&mut self, action: &ActionStep, frame: &Frame) -> Result<HookDecision, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookDecision {
    Continue,
    Stop,
}

#[derive(Debug)]
pub(crate) enum Abort {
    Budget,
    Dead,
    Stopped,
    Backend(BackendError),
}

/// The only window an action has onto the world.
pub struct Embodiment<'a> {
    world: &'a mut WorldState,
    fov: FovConfig,
    budget: u64,
    used: u64,
    trace: Vec<TraceEvent>,
    evidence: HaltEvidence,
    hook: Option<&'a mut dyn PollHook>,
    action: Option<ActionStep>,
}

impl<'a> Embodiment<'a> {
    pub fn new(world: &'a mut WorldState, fov: FovConfig, budget: u64) -> Self {
        Embodiment {
            world,
            fov,
            budget,
            used: 0,
            trace: Vec::new(),
            evidence: HaltEvidence::default(),
            hook: None,
            action: None,
        }
    }

    pub fn with_hook(mut self, hook: &'a mut dyn PollHook) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn recipes(&self) -> &RecipeBook {
        self.world.recipes()
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn ticks_used(&self) -> u64 {
        self.used
    }

    pub(crate) fn begin(&mut self, action: &ActionStep) {
        self.action = Some(action.clone());
        self.used = 0;
        self.trace.clear();
        self.evidence = HaltEvidence::default();
    }

    pub(crate) fn finish(&mut self, verdict: ActionVerdict) -> ActionOutcome {
        ActionOutcome {
            verdict,
            ticks_used: self.used,
            trace: std::mem::take(&mut self.trace),
            evidence: std::mem::take(&mut self.evidence),
        }
    }

    /// Renders the ego-view frame and offers it to the poll hook.
    pub(crate) fn frame(&mut self) -> Result<Frame, Abort> {
        let frame = observation::render_frame(self.world, &self.fov);
        self.trace.push(TraceEvent::Read {
            tick: self.world.tick,
            read: ReadKind::Frame,
        });
        self.evidence.frame = Some(frame.clone());
        if let (Some(hook), Some(action)) = (self.hook.as_deref_mut(), self.action.as_ref()) {
            match hook.on_frame(action, &frame) {
                Ok(HookDecision::Continue) => {}
                Ok(HookDecision::Stop) => return Err(Abort::Stopped),
                Err(e) => return Err(Abort::Backend(e)),
            }
        }
        Ok(frame)
    }

    pub(crate) fn neighborhood(&mut self) -> VoxelNeighborhood {
        let n = observation::voxel_neighborhood(self.world);
        self.trace.push(TraceEvent::Read {
            tick: self.world.tick,
            read: ReadKind::Neighborhood,
        });
        self.evidence.neighborhood = Some(n.clone());
        n
    }

    pub(crate) fn status(&mut self) -> StatusObservation {
        let s = observation::status(self.world);
        self.trace.push(TraceEvent::Read {
            tick: self.world.tick,
            read: ReadKind::Status,
        });
        self.evidence.status = Some(s.clone());
        s
    }

    /// Issues one control, consuming one tick of budget.
    pub(crate) fn act(&mut self, control: Control) -> Result<StepFeedback, Abort> {
        if self.used >= self.budget {
            return Err(Abort::Budget);
        }
        let tick = self.world.tick;
        let fb = match self.world.step(&control) {
            Ok(fb) => fb,
            Err(WorldError::EpisodeOver) => return Err(Abort::Dead),
            Err(WorldError::Config(_)) => return Err(Abort::Dead),
        };
        self.used += 1;
        self.trace.push(TraceEvent::Control { tick, control });
        if let Some(b) = fb.broke {
            self.evidence.broke.push(b);
        }
        if let Some(i) = &fb.gained {
            self.evidence.gained.push(i.clone());
        }
        if let Some(m) = fb.killed {
            self.evidence.killed.push(m);
        }
        if !self.world.agent.alive {
            return Err(Abort::Dead);
        }
        Ok(fb)
    }

    pub(crate) fn note_used(&mut self) {
        self.evidence.used = true;
    }
}

/// Idles for `ticks`, polling a frame every [`POLL_INTERVAL`] ticks.
///
/// Not one of the ten actions: the orchestrator uses it while waiting for time
/// or weather to change. `nominal` is what the poll hook is told is running.
/// A hook stop ends the wait early and still counts as halted.
pub fn wait(e: &mut Embodiment<'_>, nominal: &ActionStep, ticks: u64) -> ActionOutcome {
    e.begin(nominal);
    let mut run = || -> Result<(), Abort> {
        e.frame()?;
        for i in 1..=ticks {
            e.act(Control::Noop)?;
            if i % POLL_INTERVAL == 0 {
                e.frame()?;
            }
        }
        Ok(())
    };
    let verdict = match run() {
        Ok(()) | Err(Abort::Stopped) => ActionVerdict::Halted,
        Err(Abort::Budget) => ActionVerdict::BudgetExhausted,
        Err(Abort::Dead) => ActionVerdict::Failed {
            reason: FailureReason::Died,
        },
        Err(Abort::Backend(error)) => ActionVerdict::Failed {
            reason: FailureReason::Backend { error },
        },
    };
    e.finish(verdict)
}

/// Runs one action against a world with the default field of view.
pub fn run(world: &mut WorldState, action: &ActionStep, budget: u64) -> ActionOutcome {
    let mut e = Embodiment::new(world, FovConfig::default(), budget);
    execute(&mut e, action)
}
