//! Recipe book, tech-tree closure and requirement arithmetic.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::items::{BlockKind, Inventory, Item, Platform, ToolTier};

const DEFAULT_BOOK: &str = include_str!("../../data/recipes.json");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecipeError {
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("recipe book is cyclic at `{0}`")]
    Cyclic(String),
    #[error("invalid recipe book: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub output: Item,
    #[serde(default = "one")]
    pub output_count: u32,
    /// Ordered input list; order matters for closure ordering.
    #[serde(default)]
    pub inputs: Vec<(Item, u32)>,
    #[serde(default)]
    pub platform: Platform,
    /// Pickaxe tier needed; only meaningful for mined items.
    #[serde(default)]
    pub required_tool_tier: ToolTier,
    #[serde(default)]
    pub source_block: Option<BlockKind>,
    /// Mined items only occur strictly below this y.
    #[serde(default)]
    pub max_y: Option<i32>,
    /// Mined items that only occur on the surface.
    #[serde(default)]
    pub surface_only: bool,
}

fn one() -> u32 {
    1
}

impl Recipe {
    pub fn is_mined(&self) -> bool {
        self.source_block.is_some()
    }

    pub fn verb(&self) -> &'static str {
        if self.is_mined() {
            "mine"
        } else if self.platform == Platform::Furnace {
            "smelt"
        } else {
            "craft"
        }
    }

    /// e.g. `craft wooden pickaxe`.
    pub fn description(&self) -> String {
        format!("{} {}", self.verb(), self.output.spoken())
    }

    pub fn input_count(&self, item: &str) -> u32 {
        self.inputs
            .iter()
            .filter(|(i, _)| i.as_str() == item)
            .map(|(_, n)| *n)
            .sum()
    }

    /// Per-item shortfall of `inventory` against `crafts` repetitions of this recipe.
    pub fn shortfall(&self, inventory: &Inventory, crafts: u32) -> BTreeMap<Item, u32> {
        let mut out = BTreeMap::new();
        for (item, n) in &self.inputs {
            let need = n * crafts;
            let have = inventory.count(item.as_str());
            if have < need {
                out.insert(item.clone(), need - have);
            }
        }
        out
    }
}

/// One element of a dependency closure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureStep {
    pub item: Item,
    pub description: String,
}

#[derive(Debug, Deserialize)]
struct BookFile {
    version: u32,
    tool_items: BTreeMap<ToolTier, Item>,
    recipes: Vec<Recipe>,
}

#[derive(Debug, Clone)]
pub struct RecipeBook {
    pub version: u32,
    recipes: BTreeMap<Item, Recipe>,
    tool_items: BTreeMap<ToolTier, Item>,
}

impl RecipeBook {
    /// The bundled book, parsed once.
    pub fn standard() -> Arc<RecipeBook> {
        static BOOK: OnceLock<Arc<RecipeBook>> = OnceLock::new();
        BOOK.get_or_init(|| {
            Arc::new(RecipeBook::from_json(DEFAULT_BOOK).expect("bundled recipe book is valid"))
        })
        .clone()
    }

    pub fn from_json(text: &str) -> Result<RecipeBook, RecipeError> {
        let file: BookFile =
            serde_json::from_str(text).map_err(|e| RecipeError::Invalid(e.to_string()))?;
        let mut recipes = BTreeMap::new();
        for r in file.recipes {
            if r.output_count == 0 {
                return Err(RecipeError::Invalid(format!("{}: zero yield", r.output)));
            }
            if r.is_mined() && !r.inputs.is_empty() {
                return Err(RecipeError::Invalid(format!("{}: mined item has inputs", r.output)));
            }
            if !r.is_mined() && r.inputs.is_empty() {
                return Err(RecipeError::Invalid(format!("{}: crafted item has no inputs", r.output)));
            }
            if recipes.insert(r.output.clone(), r.clone()).is_some() {
                return Err(RecipeError::Invalid(format!("{}: duplicate recipe", r.output)));
            }
        }
        let book = RecipeBook {
            version: file.version,
            recipes,
            tool_items: file.tool_items,
        };
        for item in book.recipes.keys() {
            for dep in book.direct_dependencies(item.as_str())? {
                book.get(dep.as_str())?;
            }
        }
        for item in book.recipes.keys() {
            book.dependency_closure(item.as_str())?;
        }
        Ok(book)
    }

    pub fn get(&self, item: &str) -> Result<&Recipe, RecipeError> {
        self.recipes
            .get(item)
            .ok_or_else(|| RecipeError::UnknownItem(item.to_string()))
    }

    pub fn contains(&self, item: &str) -> bool {
        self.recipes.contains_key(item)
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.recipes.keys()
    }

    pub fn recipes(&self) -> impl Iterator<Item = &Recipe> {
        self.recipes.values()
    }

    pub fn tool_for(&self, tier: ToolTier) -> Option<&Item> {
        self.tool_items.get(&tier)
    }

    /// Pickaxe tier granted by holding `item` equipped.
    pub fn tier_of(&self, item: Option<&Item>) -> ToolTier {
        let Some(item) = item else { return ToolTier::None };
        self.tool_items
            .iter()
            .find(|(_, i)| *i == item)
            .map(|(t, _)| *t)
            .unwrap_or(ToolTier::None)
    }

    /// Best pickaxe currently held, if any.
    pub fn best_tool_in(&self, inventory: &Inventory) -> Option<Item> {
        self.tool_items
            .iter()
            .rev()
            .find(|(_, i)| inventory.has(i.as_str()))
            .map(|(_, i)| i.clone())
    }

    /// Tool, then platform, then inputs in recipe order.
    fn direct_dependencies(&self, item: &str) -> Result<Vec<Item>, RecipeError> {
        let r = self.get(item)?;
        let mut deps = Vec::new();
        if r.is_mined() {
            if let Some(tool) = self.tool_items.get(&r.required_tool_tier) {
                deps.push(tool.clone());
            } else if r.required_tool_tier != ToolTier::None {
                return Err(RecipeError::Invalid(format!(
                    "{item}: no tool item for tier {:?}",
                    r.required_tool_tier
                )));
            }
        }
        if let Some(p) = r.platform.item() {
            deps.push(p);
        }
        deps.extend(r.inputs.iter().map(|(i, _)| i.clone()));
        Ok(deps)
    }

    /// Topologically ordered unique steps needed to obtain `item` from nothing.
    pub fn dependency_closure(&self, item: &str) -> Result<Vec<ClosureStep>, RecipeError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        fn visit(
            book: &RecipeBook,
            item: &str,
            marks: &mut HashMap<String, Mark>,
            out: &mut Vec<ClosureStep>,
        ) -> Result<(), RecipeError> {
            match marks.get(item) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Active) => return Err(RecipeError::Cyclic(item.to_string())),
                None => {}
            }
            marks.insert(item.to_string(), Mark::Active);
            for dep in book.direct_dependencies(item)? {
                visit(book, dep.as_str(), marks, out)?;
            }
            marks.insert(item.to_string(), Mark::Done);
            let r = book.get(item)?;
            out.push(ClosureStep {
                item: r.output.clone(),
                description: r.description(),
            });
            Ok(())
        }
        let mut marks = HashMap::new();
        let mut out = Vec::new();
        visit(self, item, &mut marks, &mut out)?;
        Ok(out)
    }

    pub fn reasoning_steps(&self, item: &str) -> Result<usize, RecipeError> {
        Ok(self.dependency_closure(item)?.len())
    }

    /// Holding targets still missing, given `demands` and the current inventory.
    ///
    /// Returns `(item, required)` in closure order for every item whose required
    /// amount exceeds what is held. Tools and platforms are required once; consumed
    /// inputs scale with the number of crafts.
    pub fn net_requirements(
        &self,
        demands: &BTreeMap<Item, u32>,
        inventory: &Inventory,
    ) -> Result<Vec<(Item, u32)>, RecipeError> {
        // Combined topological order over all demanded closures.
        let mut order: Vec<Item> = Vec::new();
        for item in demands.keys() {
            for step in self.dependency_closure(item.as_str())? {
                if !order.contains(&step.item) {
                    order.push(step.item);
                }
            }
        }
        let mut required: BTreeMap<Item, u32> = demands.clone();
        // Reverse topological pass: every consumer precedes its inputs.
        let mut out = Vec::new();
        for item in order.iter().rev() {
            let req = required.get(item).copied().unwrap_or(0);
            let have = inventory.count(item.as_str());
            if req <= have {
                continue;
            }
            let net = req - have;
            out.push((item.clone(), req));
            let r = self.get(item.as_str())?;
            if r.is_mined() {
                if let Some(tool) = self.tool_items.get(&r.required_tool_tier) {
                    let e = required.entry(tool.clone()).or_insert(0);
                    *e = (*e).max(1);
                }
                continue;
            }
            let crafts = net.div_ceil(r.output_count);
            if let Some(p) = r.platform.item() {
                let e = required.entry(p).or_insert(0);
                *e = (*e).max(1);
            }
            for (input, n) in &r.inputs {
                *required.entry(input.clone()).or_insert(0) += n * crafts;
            }
        }
        out.reverse();
        Ok(out)
    }

    /// Gross requirements from an empty inventory, in closure order.
    pub fn gross_requirements(&self, item: &str, count: u32) -> Result<Vec<(Item, u32)>, RecipeError> {
        let demands = BTreeMap::from([(Item::new(item), count)]);
        self.net_requirements(&demands, &Inventory::new())
    }
}
