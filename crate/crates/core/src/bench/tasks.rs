//! The two task rosters: scene-finding tasks and item-obtaining tasks.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::percipient::{Category, Condition};
use crate::world::{Biome, Item, RecipeBook, TimeOfDay, Weather};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Context,
    Process,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Context => "context",
            Family::Process => "process",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        match name {
            "context" => Some(Family::Context),
            "process" => Some(Family::Process),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Easy,
    Mid,
    Hard,
    Complex,
    Basic,
    Wooden,
    Stone,
    Iron,
    Diamond,
}

impl Level {
    pub const CONTEXT: [Level; 4] = [Level::Easy, Level::Mid, Level::Hard, Level::Complex];
    pub const PROCESS: [Level; 5] = [Level::Basic, Level::Wooden, Level::Stone, Level::Iron, Level::Diamond];

    pub fn family(self) -> Family {
        match self {
            Level::Easy | Level::Mid | Level::Hard | Level::Complex => Family::Context,
            _ => Family::Process,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Easy => "Easy",
            Level::Mid => "Mid",
            Level::Hard => "Hard",
            Level::Complex => "Complex",
            Level::Basic => "Basic",
            Level::Wooden => "Wooden",
            Level::Stone => "Stone",
            Level::Iron => "Iron",
            Level::Diamond => "Diamond",
        }
    }

    /// Inclusive reasoning-step range of a process level.
    pub fn steps_range(self) -> Option<(usize, usize)> {
        match self {
            Level::Basic => Some((1, 3)),
            Level::Wooden => Some((4, 5)),
            Level::Stone => Some((6, 9)),
            Level::Iron => Some((10, 11)),
            Level::Diamond => Some((12, usize::MAX)),
            _ => None,
        }
    }

    /// The process level a reasoning-step count falls into.
    pub fn for_steps(steps: usize) -> Level {
        Level::PROCESS
            .into_iter()
            .find(|l| l.steps_range().is_some_and(|(lo, hi)| (lo..=hi).contains(&steps)))
            .unwrap_or(Level::Basic)
    }

    /// Inclusive info-count range of a context level.
    pub fn info_range(self) -> Option<(usize, usize)> {
        match self {
            Level::Easy => Some((1, 1)),
            Level::Mid => Some((2, 2)),
            Level::Hard => Some((3, 3)),
            Level::Complex => Some((4, 6)),
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scene attributes a context world is generated with.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predetermined {
    pub biome: Option<Biome>,
    pub time: Option<TimeOfDay>,
    pub weather: Option<Weather>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub description: String,
    pub family: Family,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Item>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predetermined: Option<Predetermined>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("task `{0}` has no target item")]
    NoTarget(String),
    #[error("task `{id}` targets unknown item `{item}`")]
    UnknownItem { id: String, item: String },
    #[error("task `{0}` has no conditions")]
    NoConditions(String),
    #[error("task `{id}` carries {count} info categories, outside its level")]
    InfoCount { id: String, count: usize },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
}

impl TaskSpec {
    pub fn context(id: &str, level: Level, description: &str, conditions: Vec<Condition>) -> TaskSpec {
        let mut pre = Predetermined::default();
        for c in &conditions {
            match c.category {
                Category::Ecology => pre.biome = Biome::from_name(&c.subject),
                Category::Time => {
                    pre.time = match c.subject.as_str() {
                        "night" => Some(TimeOfDay::Night),
                        _ => Some(TimeOfDay::Day),
                    }
                }
                Category::Weather => {
                    pre.weather = match c.subject.as_str() {
                        "rainy" => Some(Weather::Rainy),
                        _ => Some(Weather::Sunny),
                    }
                }
                _ => {}
            }
        }
        TaskSpec {
            id: id.into(),
            description: description.into(),
            family: Family::Context,
            level,
            conditions,
            target: None,
            predetermined: Some(pre),
        }
    }

    pub fn process(target: &str, description: &str, level: Level) -> TaskSpec {
        TaskSpec {
            id: target.replace('_', " "),
            description: description.into(),
            family: Family::Process,
            level,
            conditions: Vec::new(),
            target: Some(Item::new(target)),
            predetermined: None,
        }
    }

    /// Distinct information categories, not counting the spatial relation.
    pub fn info_count(&self) -> usize {
        let mut cats: Vec<Category> = self
            .conditions
            .iter()
            .map(|c| c.category)
            .filter(|&c| c != Category::Spatial)
            .collect();
        cats.sort();
        cats.dedup();
        cats.len()
    }

    pub fn validate(&self, book: &RecipeBook) -> Result<(), TaskError> {
        match self.family {
            Family::Process => {
                let target = self.target.as_ref().ok_or_else(|| TaskError::NoTarget(self.id.clone()))?;
                if !book.contains(target.as_str()) {
                    return Err(TaskError::UnknownItem {
                        id: self.id.clone(),
                        item: target.to_string(),
                    });
                }
            }
            Family::Context => {
                if self.conditions.is_empty() {
                    return Err(TaskError::NoConditions(self.id.clone()));
                }
                if let Some((lo, hi)) = self.level.info_range() {
                    let n = self.info_count();
                    if n < lo || n > hi {
                        return Err(TaskError::InfoCount {
                            id: self.id.clone(),
                            count: n,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn c(category: Category, subject: &str) -> Condition {
    Condition::new(category, subject)
}

fn context_suite() -> Vec<TaskSpec> {
    use Category::*;
    use Level::*;
    vec![
        TaskSpec::context("1-1", Easy, "Find a tree", vec![c(Object, "tree")]),
        TaskSpec::context("1-2", Easy, "Find some grass", vec![c(Object, "grass")]),
        TaskSpec::context("1-3", Easy, "Find a cow", vec![c(Mob, "cow")]),
        TaskSpec::context("1-4", Easy, "Find a pig", vec![c(Mob, "pig")]),
        TaskSpec::context("2-1", Mid, "Find a tree in a forest", vec![c(Object, "tree"), c(Ecology, "forest")]),
        TaskSpec::context(
            "2-2",
            Mid,
            "Find grass with a pig close by",
            vec![c(Object, "grass"), c(Mob, "pig"), c(Spatial, "grass near pig")],
        ),
        TaskSpec::context("2-3", Mid, "Find a cow in a desert", vec![c(Mob, "cow"), c(Ecology, "desert")]),
        TaskSpec::context("2-4", Mid, "Find a pig at night", vec![c(Mob, "pig"), c(Time, "night")]),
        TaskSpec::context(
            "3-1",
            Hard,
            "Find a tree in a forest at night",
            vec![c(Object, "tree"), c(Ecology, "forest"), c(Time, "night")],
        ),
        TaskSpec::context(
            "3-2",
            Hard,
            "Find grass with a pig close by on the plains",
            vec![
                c(Object, "grass"),
                c(Mob, "pig"),
                c(Spatial, "grass near pig"),
                c(Ecology, "plains"),
            ],
        ),
        TaskSpec::context(
            "3-3",
            Hard,
            "Find a cow in a desert by day",
            vec![c(Mob, "cow"), c(Ecology, "desert"), c(Time, "day")],
        ),
        TaskSpec::context(
            "3-4",
            Hard,
            "Find a pig on a rainy night",
            vec![c(Mob, "pig"), c(Time, "night"), c(Weather, "rainy")],
        ),
        TaskSpec::context(
            "4-1",
            Complex,
            "Find a tree in a forest on a clear night",
            vec![
                c(Object, "tree"),
                c(Ecology, "forest"),
                c(Time, "night"),
                c(Weather, "sunny"),
            ],
        ),
        TaskSpec::context(
            "4-2",
            Complex,
            "Find a pig next to grass in a forest by day",
            vec![
                c(Mob, "pig"),
                c(Object, "grass"),
                c(Spatial, "pig near grass"),
                c(Ecology, "forest"),
                c(Time, "day"),
            ],
        ),
        TaskSpec::context(
            "4-3",
            Complex,
            "Find a cow next to water in a desert on a clear day",
            vec![
                c(Mob, "cow"),
                c(Object, "water"),
                c(Spatial, "cow near water"),
                c(Ecology, "desert"),
                c(Time, "day"),
                c(Weather, "sunny"),
            ],
        ),
        TaskSpec::context(
            "4-4",
            Complex,
            "Find grass with a pig close by on bright, clear plains by day",
            vec![
                c(Mob, "pig"),
                c(Time, "day"),
                c(Ecology, "plains"),
                c(Object, "grass"),
                c(Spatial, "grass near pig"),
                c(Weather, "sunny"),
                c(Brightness, "sufficient"),
            ],
        ),
    ]
}

/// `(target, task name, level)` for every item-obtaining task.
const PROCESS_ROSTER: [(&str, &str, Level); 25] = [
    ("log", "mine log", Level::Basic),
    ("sand", "mine sand", Level::Basic),
    ("planks", "craft planks", Level::Basic),
    ("stick", "craft stick", Level::Basic),
    ("crafting_table", "craft crafting table", Level::Basic),
    ("bowl", "craft bowl", Level::Wooden),
    ("boat", "craft boat", Level::Wooden),
    ("chest", "craft chest", Level::Wooden),
    ("wooden_sword", "craft wooden sword", Level::Wooden),
    ("wooden_pickaxe", "craft wooden pickaxe", Level::Wooden),
    ("cobblestone", "mine cobblestone", Level::Stone),
    ("furnace", "craft furnace", Level::Stone),
    ("stone_pickaxe", "craft stone pickaxe", Level::Stone),
    ("iron_ore", "mine iron ore", Level::Stone),
    ("glass", "smelt glass", Level::Stone),
    ("iron_ingot", "smelt iron ingot", Level::Iron),
    ("shield", "craft shield", Level::Iron),
    ("bucket", "craft bucket", Level::Iron),
    ("iron_pickaxe", "craft iron pickaxe", Level::Iron),
    ("iron_door", "craft iron door", Level::Iron),
    ("diamond", "obtain diamond", Level::Diamond),
    ("redstone", "mine redstone", Level::Diamond),
    ("compass", "craft compass", Level::Diamond),
    ("diamond_pickaxe", "craft diamond pickaxe", Level::Diamond),
    ("piston", "craft piston", Level::Diamond),
];

fn process_suite() -> Vec<TaskSpec> {
    PROCESS_ROSTER
        .iter()
        .map(|&(target, name, level)| TaskSpec::process(target, name, level))
        .collect()
}

/// The full roster of a family, in table order.
pub fn load_suite(family: Family) -> Vec<TaskSpec> {
    match family {
        Family::Context => context_suite(),
        Family::Process => process_suite(),
    }
}

/// Looks a task up by id (`3-1`, `iron ingot`) or by name (`smelt iron ingot`).
pub fn find_task(key: &str) -> Result<TaskSpec, TaskError> {
    let key = key.trim();
    let norm = key.replace('_', " ");
    context_suite()
        .into_iter()
        .chain(process_suite())
        .find(|t| t.id == key || t.id == norm || t.description.eq_ignore_ascii_case(key))
        .ok_or_else(|| TaskError::UnknownTask(key.into()))
}
