//! Block kinds, items, inventories and the small enums shared by the world.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An item identifier, e.g. `wooden_pickaxe`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Item(String);

impl Item {
    pub fn new(name: impl Into<String>) -> Self {
        Item(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Human form used in sub-objective descriptions: `iron_ingot` -> `iron ingot`.
    pub fn spoken(&self) -> String {
        self.0.replace('_', " ")
    }
}

impl Borrow<str> for Item {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Item {
    fn from(s: &str) -> Self {
        Item(s.to_string())
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Item counts. Zero entries are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Inventory(BTreeMap<Item, u32>);

impl Inventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, item: &str) -> u32 {
        self.0.get(item).copied().unwrap_or(0)
    }

    pub fn has(&self, item: &str) -> bool {
        self.count(item) > 0
    }

    pub fn add(&mut self, item: &Item, n: u32) {
        if n == 0 {
            return;
        }
        *self.0.entry(item.clone()).or_insert(0) += n;
    }

    /// Removes `n` units; returns false (and changes nothing) when fewer are held.
    pub fn remove(&mut self, item: &str, n: u32) -> bool {
        let have = self.count(item);
        if have < n {
            return false;
        }
        if have == n {
            self.0.remove(item);
        } else if let Some(c) = self.0.get_mut(item) {
            *c -= n;
        }
        true
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Item, u32)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn as_map(&self) -> &BTreeMap<Item, u32> {
        &self.0
    }
}

impl FromIterator<(Item, u32)> for Inventory {
    fn from_iter<T: IntoIterator<Item = (Item, u32)>>(iter: T) -> Self {
        let mut inv = Inventory::new();
        for (item, n) in iter {
            inv.add(&item, n);
        }
        inv
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum BlockKind {
    Air,
    Bedrock,
    Stone,
    Dirt,
    Grass,
    Sand,
    Water,
    Log,
    Leaves,
    IronOre,
    DiamondOre,
    RedstoneOre,
    Cobblestone,
    Planks,
    CraftingTable,
    Furnace,
    Torch,
    /// Reported for cells outside the world extents.
    Boundary,
}

impl BlockKind {
    pub const ALL: [BlockKind; 18] = [
        BlockKind::Air,
        BlockKind::Bedrock,
        BlockKind::Stone,
        BlockKind::Dirt,
        BlockKind::Grass,
        BlockKind::Sand,
        BlockKind::Water,
        BlockKind::Log,
        BlockKind::Leaves,
        BlockKind::IronOre,
        BlockKind::DiamondOre,
        BlockKind::RedstoneOre,
        BlockKind::Cobblestone,
        BlockKind::Planks,
        BlockKind::CraftingTable,
        BlockKind::Furnace,
        BlockKind::Torch,
        BlockKind::Boundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Air => "air",
            BlockKind::Bedrock => "bedrock",
            BlockKind::Stone => "stone",
            BlockKind::Dirt => "dirt",
            BlockKind::Grass => "grass",
            BlockKind::Sand => "sand",
            BlockKind::Water => "water",
            BlockKind::Log => "log",
            BlockKind::Leaves => "leaves",
            BlockKind::IronOre => "iron_ore",
            BlockKind::DiamondOre => "diamond_ore",
            BlockKind::RedstoneOre => "redstone_ore",
            BlockKind::Cobblestone => "cobblestone",
            BlockKind::Planks => "planks",
            BlockKind::CraftingTable => "crafting_table",
            BlockKind::Furnace => "furnace",
            BlockKind::Torch => "torch",
            BlockKind::Boundary => "boundary",
        }
    }

    pub fn from_name(name: &str) -> Option<BlockKind> {
        BlockKind::ALL.iter().copied().find(|b| b.name() == name)
    }

    /// Blocks movement.
    pub fn is_solid(self) -> bool {
        !matches!(self, BlockKind::Air | BlockKind::Water | BlockKind::Torch)
    }

    /// Blocks line of sight.
    pub fn is_opaque(self) -> bool {
        self.is_solid()
    }

    pub fn is_breakable(self) -> bool {
        !matches!(
            self,
            BlockKind::Air | BlockKind::Water | BlockKind::Bedrock | BlockKind::Boundary
        )
    }

    /// Minimum pickaxe tier for the block to drop anything.
    pub fn harvest_tier(self) -> ToolTier {
        match self {
            BlockKind::Stone | BlockKind::Cobblestone | BlockKind::Furnace => ToolTier::Wooden,
            BlockKind::IronOre => ToolTier::Stone,
            BlockKind::DiamondOre | BlockKind::RedstoneOre => ToolTier::Iron,
            _ => ToolTier::None,
        }
    }

    fn needs_pickaxe(self) -> bool {
        matches!(
            self,
            BlockKind::Stone
                | BlockKind::Cobblestone
                | BlockKind::Furnace
                | BlockKind::IronOre
                | BlockKind::DiamondOre
                | BlockKind::RedstoneOre
        )
    }

    /// Ticks of continuous attack needed to break the block with a pickaxe of `tier`.
    pub fn break_ticks(self, tier: ToolTier) -> u32 {
        let hand = match self {
            BlockKind::Dirt | BlockKind::Grass | BlockKind::Sand => 15,
            BlockKind::Leaves => 5,
            BlockKind::Torch => 1,
            BlockKind::Log | BlockKind::Planks => 60,
            BlockKind::CraftingTable => 50,
            BlockKind::Stone | BlockKind::Cobblestone | BlockKind::Furnace => 150,
            BlockKind::IronOre | BlockKind::DiamondOre | BlockKind::RedstoneOre => 300,
            BlockKind::Air | BlockKind::Water | BlockKind::Bedrock | BlockKind::Boundary => {
                return u32::MAX
            }
        };
        if !self.needs_pickaxe() {
            return hand;
        }
        let divisor = match tier {
            ToolTier::None => 1,
            ToolTier::Wooden => 6,
            ToolTier::Stone => 12,
            ToolTier::Iron => 18,
        };
        (hand / divisor).max(1)
    }

    /// Item dropped when broken with a pickaxe of `tier`.
    pub fn drop_item(self, tier: ToolTier) -> Option<Item> {
        if tier < self.harvest_tier() {
            return None;
        }
        let name = match self {
            BlockKind::Grass | BlockKind::Dirt => "dirt",
            BlockKind::Stone | BlockKind::Cobblestone => "cobblestone",
            BlockKind::DiamondOre => "diamond",
            BlockKind::RedstoneOre => "redstone",
            BlockKind::Leaves
            | BlockKind::Air
            | BlockKind::Water
            | BlockKind::Bedrock
            | BlockKind::Boundary => return None,
            other => other.name(),
        };
        Some(Item::new(name))
    }

    /// The block an inventory item becomes when placed.
    pub fn placed_from(item: &str) -> Option<BlockKind> {
        match item {
            "dirt" => Some(BlockKind::Dirt),
            "cobblestone" => Some(BlockKind::Cobblestone),
            "sand" => Some(BlockKind::Sand),
            "planks" => Some(BlockKind::Planks),
            "log" => Some(BlockKind::Log),
            "crafting_table" => Some(BlockKind::CraftingTable),
            "furnace" => Some(BlockKind::Furnace),
            "torch" => Some(BlockKind::Torch),
            _ => None,
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pickaxe tier. Ordered: `None < Wooden < Stone < Iron`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ToolTier {
    #[default]
    None,
    Wooden,
    Stone,
    Iron,
}

/// Where a recipe must be crafted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    #[default]
    None,
    CraftingTable,
    Furnace,
}

impl Platform {
    pub fn block(self) -> Option<BlockKind> {
        match self {
            Platform::None => None,
            Platform::CraftingTable => Some(BlockKind::CraftingTable),
            Platform::Furnace => Some(BlockKind::Furnace),
        }
    }

    pub fn item(self) -> Option<Item> {
        self.block().map(|b| Item::new(b.name()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Biome {
    Plains,
    Forest,
    Desert,
    Mountains,
    River,
    Beach,
}

impl Biome {
    pub const ALL: [Biome; 6] = [
        Biome::Plains,
        Biome::Forest,
        Biome::Desert,
        Biome::Mountains,
        Biome::River,
        Biome::Beach,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Biome::Plains => "plains",
            Biome::Forest => "forest",
            Biome::Desert => "desert",
            Biome::Mountains => "mountains",
            Biome::River => "river",
            Biome::Beach => "beach",
        }
    }

    pub fn from_name(name: &str) -> Option<Biome> {
        Biome::ALL.iter().copied().find(|b| b.name() == name)
    }
}

impl fmt::Display for Biome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Sunny,
    Rainy,
}

impl Weather {
    pub fn name(self) -> &'static str {
        match self {
            Weather::Sunny => "sunny",
            Weather::Rainy => "rainy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOfDay {
    Day,
    Night,
}

impl TimeOfDay {
    pub fn name(self) -> &'static str {
        match self {
            TimeOfDay::Day => "day",
            TimeOfDay::Night => "night",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobKind {
    Zombie,
    Skeleton,
    Creeper,
    Spider,
    Cow,
    Chicken,
    Sheep,
    Pig,
    Wolf,
}

impl MobKind {
    pub const ALL: [MobKind; 9] = [
        MobKind::Zombie,
        MobKind::Skeleton,
        MobKind::Creeper,
        MobKind::Spider,
        MobKind::Cow,
        MobKind::Chicken,
        MobKind::Sheep,
        MobKind::Pig,
        MobKind::Wolf,
    ];

    pub fn is_hostile(self) -> bool {
        matches!(
            self,
            MobKind::Zombie | MobKind::Skeleton | MobKind::Creeper | MobKind::Spider
        )
    }

    pub fn max_health(self) -> i32 {
        match self {
            MobKind::Chicken => 4,
            MobKind::Wolf => 8,
            MobKind::Cow | MobKind::Pig => 10,
            MobKind::Sheep => 8,
            MobKind::Spider => 16,
            MobKind::Zombie | MobKind::Skeleton | MobKind::Creeper => 20,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MobKind::Zombie => "zombie",
            MobKind::Skeleton => "skeleton",
            MobKind::Creeper => "creeper",
            MobKind::Spider => "spider",
            MobKind::Cow => "cow",
            MobKind::Chicken => "chicken",
            MobKind::Sheep => "sheep",
            MobKind::Pig => "pig",
            MobKind::Wolf => "wolf",
        }
    }

    pub fn from_name(name: &str) -> Option<MobKind> {
        MobKind::ALL.iter().copied().find(|m| m.name() == name)
    }
}

impl fmt::Display for MobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_never_stores_zero() {
        let mut inv = Inventory::new();
        inv.add(&Item::new("log"), 2);
        assert!(inv.remove("log", 2));
        assert!(inv.is_empty());
        assert!(!inv.remove("log", 1));
    }

    #[test]
    fn names_round_trip() {
        for b in BlockKind::ALL {
            assert_eq!(BlockKind::from_name(b.name()), Some(b));
        }
        for m in MobKind::ALL {
            assert_eq!(MobKind::from_name(m.name()), Some(m));
        }
        for b in Biome::ALL {
            assert_eq!(Biome::from_name(b.name()), Some(b));
        }
    }

    #[test]
    fn stone_needs_a_pickaxe_to_drop() {
        assert_eq!(BlockKind::Stone.drop_item(ToolTier::None), None);
        assert_eq!(
            BlockKind::Stone.drop_item(ToolTier::Wooden),
            Some(Item::new("cobblestone"))
        );
        assert_eq!(BlockKind::DiamondOre.drop_item(ToolTier::Stone), None);
        assert!(BlockKind::Stone.break_ticks(ToolTier::Iron) < BlockKind::Stone.break_ticks(ToolTier::Wooden));
    }
}
