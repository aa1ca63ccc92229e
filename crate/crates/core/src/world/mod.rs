//! Seeded voxel world: lattice, biomes, mobs, day/night, weather and the agent.

mod gen;
mod items;
mod recipes;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use gen::{generate_world, GenConfig, WorldProfile};
pub use items::{Biome, BlockKind, Inventory, Item, MobKind, Platform, TimeOfDay, ToolTier, Weather};
pub use recipes::{ClosureStep, Recipe, RecipeBook, RecipeError};

pub const TICKS_PER_SECOND: u64 = 20;
pub const DAY_TICKS: u64 = 12_000;
pub const NIGHT_TICKS: u64 = 12_000;
pub const EPISODE_TICKS: u64 = 12_000;
pub const MAX_HEALTH: i32 = 20;
/// Blocks moved per `Forward` tick.
pub const WALK_SPEED: f64 = 0.25;
pub const EYE_HEIGHT: f64 = 1.62;
/// Melee reach for attacking mobs, in blocks.
pub const FIGHT_REACH: f64 = 3.0;
pub const ATTACK_COOLDOWN: u64 = 10;
const MOB_HOP_PERIOD: u64 = 20;
const HOSTILE_CAP: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("episode over: the agent is dead")]
    EpisodeOver,
    #[error("configuration error: {0}")]
    Config(String),
}

/// A cell offset from the agent's feet cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelCell {
    pub dx: i32,
    pub dy: i32,
    pub dz: i32,
}

impl RelCell {
    pub const fn new(dx: i32, dy: i32, dz: i32) -> Self {
        RelCell { dx, dy, dz }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttackTarget {
    Block { at: RelCell },
    Mob { kind: MobKind },
}

/// One tick's worth of low-level control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "control", rename_all = "snake_case")]
pub enum Control {
    Noop,
    Forward,
    /// Forward with a one-block step-up when the way ahead is blocked.
    JumpForward,
    /// Vertical hop, used for pillaring.
    Jump,
    /// Relative rotation in degrees; positive yaw turns right, positive pitch looks up.
    Turn { yaw: f64, pitch: f64 },
    Attack { target: AttackTarget },
    Use,
    Place { item: Item, at: RelCell },
    Craft { item: Item },
    Equip { item: Item },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "failure", rename_all = "snake_case")]
pub enum ControlFailure {
    Blocked,
    OutOfReach,
    NothingToAttack,
    Cooldown,
    Unbreakable,
    MissingItem { item: Item },
    NotPlaceable,
    Occupied,
    UnknownRecipe,
    Craft { error: CraftError },
}

/// What a single step did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepFeedback {
    pub moved: bool,
    pub failure: Option<ControlFailure>,
    pub broke: Option<BlockKind>,
    pub gained: Option<Item>,
    pub killed: Option<MobKind>,
    pub damage_taken: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CraftError {
    #[error("insufficient materials: {shortfall:?}")]
    InsufficientMaterials {
        shortfall: std::collections::BTreeMap<Item, u32>,
    },
    #[error("platform unavailable")]
    PlatformUnavailable,
    #[error("`{item}` is not craftable")]
    NotCraftable { item: Item },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Feet position in fractional block coordinates.
    pub position: [f64; 3],
    /// Degrees in [0, 360); 0 faces north (-z), 90 faces east (+x).
    pub yaw: f64,
    /// Degrees in [-90, 90]; positive looks up.
    pub pitch: f64,
    pub health: i32,
    pub inventory: Inventory,
    pub equipment: Option<Item>,
    pub alive: bool,
    fall_distance: i32,
    airborne_ticks: u32,
    last_damage_tick: u64,
    last_attack_tick: Option<u64>,
    mining: Option<([i32; 3], u32)>,
}

impl AgentState {
    pub fn new(position: [f64; 3]) -> Self {
        AgentState {
            position,
            yaw: 0.0,
            pitch: 0.0,
            health: MAX_HEALTH,
            inventory: Inventory::new(),
            equipment: None,
            alive: true,
            fall_distance: 0,
            airborne_ticks: 0,
            last_damage_tick: 0,
            last_attack_tick: None,
            mining: None,
        }
    }

    pub fn feet_cell(&self) -> [i32; 3] {
        [
            self.position[0].floor() as i32,
            self.position[1].floor() as i32,
            self.position[2].floor() as i32,
        ]
    }

    pub fn eye(&self) -> [f64; 3] {
        [self.position[0], self.position[1] + EYE_HEIGHT, self.position[2]]
    }

    /// Removes items and unequips when the equipped item runs out.
    fn take(&mut self, item: &str, n: u32) -> bool {
        let ok = self.inventory.remove(item, n);
        if ok {
            if let Some(eq) = &self.equipment {
                if !self.inventory.has(eq.as_str()) {
                    self.equipment = None;
                }
            }
        }
        ok
    }

    fn hurt(&mut self, amount: i32, tick: u64) -> i32 {
        if amount <= 0 || !self.alive {
            return 0;
        }
        let dealt = amount.min(self.health);
        self.health -= dealt;
        self.last_damage_tick = tick;
        if self.health == 0 {
            self.alive = false;
            self.inventory.clear();
            self.equipment = None;
        }
        dealt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobInstance {
    pub id: u32,
    pub kind: MobKind,
    /// Feet position; x/z at cell centers.
    pub position: [f64; 3],
    pub hostile: bool,
    pub health: i32,
    contact_ticks: u32,
}

impl MobInstance {
    pub fn new(id: u32, kind: MobKind, cell: [i32; 3]) -> Self {
        MobInstance {
            id,
            kind,
            position: [cell[0] as f64 + 0.5, cell[1] as f64, cell[2] as f64 + 0.5],
            hostile: kind.is_hostile(),
            health: kind.max_health(),
            contact_ticks: 0,
        }
    }

    pub fn cell(&self) -> [i32; 3] {
        [
            self.position[0].floor() as i32,
            self.position[1].floor() as i32,
            self.position[2].floor() as i32,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub seed: u64,
    /// (x, y, z) block counts.
    pub extents: [usize; 3],
    blocks: Vec<BlockKind>,
    biomes: Vec<Biome>,
    pub mobs: Vec<MobInstance>,
    pub tick: u64,
    /// Phase offset added to `tick` for the day/night cycle.
    pub day_offset: u64,
    pub weather: Weather,
    weather_until: u64,
    pub agent: AgentState,
    next_mob_id: u32,
    rng: ChaCha8Rng,
    recipes: Arc<RecipeBook>,
}

impl WorldState {
    /// An all-air world with the agent at `spawn`; generators fill it in.
    pub fn empty(seed: u64, extents: [usize; 3], recipes: Arc<RecipeBook>) -> WorldState {
        let cells = extents[0] * extents[1] * extents[2];
        WorldState {
            seed,
            extents,
            blocks: vec![BlockKind::Air; cells],
            biomes: vec![Biome::Plains; extents[0] * extents[2]],
            mobs: Vec::new(),
            tick: 0,
            day_offset: 0,
            weather: Weather::Sunny,
            weather_until: u64::MAX,
            agent: AgentState::new([0.5, 1.0, 0.5]),
            next_mob_id: 0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
            recipes,
        }
    }

    pub fn recipes(&self) -> &Arc<RecipeBook> {
        &self.recipes
    }

    pub fn in_bounds(&self, x: i32, y: i32, z: i32) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.extents[0]
            && (y as usize) < self.extents[1]
            && (z as usize) < self.extents[2]
    }

    #[inline]
    fn index(&self, x: i32, y: i32, z: i32) -> usize {
        (x as usize * self.extents[2] + z as usize) * self.extents[1] + y as usize
    }

    /// Block at a cell. Above the build height is open air; every other
    /// out-of-extent cell reads as `Boundary`.
    #[inline]
    pub fn block(&self, x: i32, y: i32, z: i32) -> BlockKind {
        if self.in_bounds(x, y, z) {
            self.blocks[self.index(x, y, z)]
        } else if y >= self.extents[1] as i32 && self.in_bounds(x, 0, z) {
            BlockKind::Air
        } else {
            BlockKind::Boundary
        }
    }

    pub fn set_block(&mut self, x: i32, y: i32, z: i32, kind: BlockKind) {
        if self.in_bounds(x, y, z) {
            let i = self.index(x, y, z);
            self.blocks[i] = kind;
        }
    }

    /// Contiguous y-column of blocks at (x, z).
    pub fn column(&self, x: i32, z: i32) -> &[BlockKind] {
        let start = self.index(x, 0, z);
        &self.blocks[start..start + self.extents[1]]
    }

    pub fn biome(&self, x: i32, z: i32) -> Biome {
        let x = x.clamp(0, self.extents[0] as i32 - 1) as usize;
        let z = z.clamp(0, self.extents[2] as i32 - 1) as usize;
        self.biomes[x * self.extents[2] + z]
    }

    pub fn set_biome(&mut self, x: i32, z: i32, biome: Biome) {
        if self.in_bounds(x, 0, z) {
            let i = x as usize * self.extents[2] + z as usize;
            self.biomes[i] = biome;
        }
    }

    /// Highest solid block in a column, if any.
    pub fn surface_y(&self, x: i32, z: i32) -> Option<i32> {
        if !self.in_bounds(x, 0, z) {
            return None;
        }
        self.column(x, z)
            .iter()
            .rposition(|b| b.is_solid())
            .map(|y| y as i32)
    }

    pub fn time_of_day(&self) -> TimeOfDay {
        let phase = (self.tick + self.day_offset) % (DAY_TICKS + NIGHT_TICKS);
        if phase < DAY_TICKS {
            TimeOfDay::Day
        } else {
            TimeOfDay::Night
        }
    }

    pub fn set_weather(&mut self, weather: Weather, until_tick: u64) {
        self.weather = weather;
        self.weather_until = until_tick;
    }

    pub fn spawn_mob(&mut self, kind: MobKind, cell: [i32; 3]) -> u32 {
        let id = self.next_mob_id;
        self.next_mob_id += 1;
        self.mobs.push(MobInstance::new(id, kind, cell));
        id
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Is the cell within the 3x3x3 cube around the agent's feet cell?
    pub fn near_agent(&self, cell: [i32; 3]) -> bool {
        let f = self.agent.feet_cell();
        (0..3).all(|i| (cell[i] - f[i]).abs() <= 1)
    }

    fn platform_nearby(&self, block: BlockKind) -> bool {
        let f = self.agent.feet_cell();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if self.block(f[0] + dx, f[1] + dy, f[2] + dz) == block {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Consumes inputs and adds outputs for one craft; nothing else changes.
    pub fn apply_recipe(&mut self, recipe: &Recipe) -> Result<(), CraftError> {
        if recipe.is_mined() {
            return Err(CraftError::NotCraftable {
                item: recipe.output.clone(),
            });
        }
        let shortfall = recipe.shortfall(&self.agent.inventory, 1);
        if !shortfall.is_empty() {
            return Err(CraftError::InsufficientMaterials { shortfall });
        }
        if let Some(block) = recipe.platform.block() {
            if !self.platform_nearby(block) {
                return Err(CraftError::PlatformUnavailable);
            }
        }
        for (item, n) in &recipe.inputs {
            self.agent.take(item.as_str(), *n);
        }
        self.agent.inventory.add(&recipe.output, recipe.output_count);
        Ok(())
    }

    /// SHA-256 over a canonical serialization of the full state.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for e in self.extents {
            h.update((e as u64).to_le_bytes());
        }
        h.update(self.blocks.iter().map(|b| *b as u8).collect::<Vec<u8>>());
        h.update(self.biomes.iter().map(|b| *b as u8).collect::<Vec<u8>>());
        h.update(self.tick.to_le_bytes());
        h.update(self.day_offset.to_le_bytes());
        h.update(self.weather_until.to_le_bytes());
        h.update(self.next_mob_id.to_le_bytes());
        h.update(self.rng.get_seed());
        h.update(self.rng.get_word_pos().to_le_bytes());
        let rest = serde_json::json!({
            "weather": self.weather,
            "mobs": self.mobs,
            "agent": self.agent,
        });
        h.update(rest.to_string().as_bytes());
        hex::encode(h.finalize())
    }

    fn solid(&self, x: i32, y: i32, z: i32) -> bool {
        self.block(x, y, z).is_solid()
    }

    /// Can a body two cells tall stand with feet at this cell?
    fn body_fits(&self, x: i32, y: i32, z: i32) -> bool {
        self.in_bounds(x, y, z) && !self.solid(x, y, z) && !self.solid(x, y + 1, z)
    }

    fn supported(&self, x: i32, y: i32, z: i32) -> bool {
        self.solid(x, y - 1, z)
            || self.block(x, y - 1, z) == BlockKind::Water
            || self.block(x, y, z) == BlockKind::Water
    }

    fn facing(&self) -> (f64, f64) {
        let r = self.agent.yaw.to_radians();
        (r.sin(), -r.cos())
    }

    fn try_forward(&mut self, climb: bool) -> bool {
        let (fx, fz) = self.facing();
        let p = self.agent.position;
        let nx = p[0] + fx * WALK_SPEED;
        let nz = p[2] + fz * WALK_SPEED;
        let y = p[1].floor() as i32;
        let (cx, cz) = (nx.floor() as i32, nz.floor() as i32);
        if self.body_fits(cx, y, cz) {
            self.agent.position[0] = nx;
            self.agent.position[2] = nz;
            return true;
        }
        let f = self.agent.feet_cell();
        if climb
            && self.agent.airborne_ticks == 0
            && self.supported(f[0], f[1], f[2])
            && !self.solid(f[0], f[1] + 2, f[2])
            && self.body_fits(cx, y + 1, cz)
        {
            self.agent.position = [nx, p[1] + 1.0, nz];
            return true;
        }
        false
    }

    fn body_cells(&self) -> [[i32; 3]; 2] {
        let f = self.agent.feet_cell();
        [f, [f[0], f[1] + 1, f[2]]]
    }

    fn apply_control(&mut self, control: &Control, fb: &mut StepFeedback) {
        if !matches!(control, Control::Attack { target: AttackTarget::Block { .. } }) {
            self.agent.mining = None;
        }
        match control {
            Control::Noop => {}
            Control::Forward => {
                fb.moved = self.try_forward(false);
                if !fb.moved {
                    fb.failure = Some(ControlFailure::Blocked);
                }
            }
            Control::JumpForward => {
                fb.moved = self.try_forward(true);
                if !fb.moved {
                    fb.failure = Some(ControlFailure::Blocked);
                }
            }
            Control::Jump => {
                let f = self.agent.feet_cell();
                if self.agent.airborne_ticks == 0
                    && self.supported(f[0], f[1], f[2])
                    && self.in_bounds(f[0], f[1] + 1, f[2])
                    && !self.solid(f[0], f[1] + 2, f[2])
                {
                    self.agent.position[1] += 1.0;
                    self.agent.airborne_ticks = 4;
                    fb.moved = true;
                } else {
                    fb.failure = Some(ControlFailure::Blocked);
                }
            }
            Control::Turn { yaw, pitch } => {
                self.agent.yaw = (self.agent.yaw + yaw).rem_euclid(360.0);
                self.agent.pitch = (self.agent.pitch + pitch).clamp(-90.0, 90.0);
            }
            Control::Attack { target } => match target {
                AttackTarget::Block { at } => self.attack_block(*at, fb),
                AttackTarget::Mob { kind } => self.attack_mob(*kind, fb),
            },
            Control::Use => {
                if self.agent.equipment.is_none() {
                    fb.failure = Some(ControlFailure::MissingItem {
                        item: Item::new("none"),
                    });
                }
            }
            Control::Place { item, at } => self.place(item, *at, fb),
            Control::Craft { item } => match self.recipes.get(item.as_str()).cloned() {
                Ok(recipe) => {
                    if let Err(error) = self.apply_recipe(&recipe) {
                        fb.failure = Some(ControlFailure::Craft { error });
                    } else {
                        fb.gained = Some(recipe.output.clone());
                    }
                }
                Err(_) => fb.failure = Some(ControlFailure::UnknownRecipe),
            },
            Control::Equip { item } => {
                if self.agent.inventory.has(item.as_str()) {
                    self.agent.equipment = Some(item.clone());
                } else {
                    fb.failure = Some(ControlFailure::MissingItem { item: item.clone() });
                }
            }
        }
    }

    fn attack_block(&mut self, at: RelCell, fb: &mut StepFeedback) {
        if at.dx.abs() > 1 || at.dz.abs() > 1 || at.dy < -1 || at.dy > 2 {
            fb.failure = Some(ControlFailure::OutOfReach);
            return;
        }
        let f = self.agent.feet_cell();
        let cell = [f[0] + at.dx, f[1] + at.dy, f[2] + at.dz];
        let kind = self.block(cell[0], cell[1], cell[2]);
        if !kind.is_breakable() {
            fb.failure = Some(ControlFailure::Unbreakable);
            self.agent.mining = None;
            return;
        }
        let progress = match self.agent.mining {
            Some((c, p)) if c == cell => p + 1,
            _ => 1,
        };
        let tier = self.recipes.tier_of(self.agent.equipment.as_ref());
        if progress >= kind.break_ticks(tier) {
            self.set_block(cell[0], cell[1], cell[2], BlockKind::Air);
            self.agent.mining = None;
            fb.broke = Some(kind);
            if let Some(drop) = kind.drop_item(tier) {
                self.agent.inventory.add(&drop, 1);
                fb.gained = Some(drop);
            }
        } else {
            self.agent.mining = Some((cell, progress));
        }
    }

    fn attack_mob(&mut self, kind: MobKind, fb: &mut StepFeedback) {
        if let Some(last) = self.agent.last_attack_tick {
            if self.tick < last + ATTACK_COOLDOWN {
                fb.failure = Some(ControlFailure::Cooldown);
                return;
            }
        }
        let eye = self.agent.eye();
        let target = self
            .mobs
            .iter()
            .enumerate()
            .filter(|(_, m)| m.kind == kind)
            .map(|(i, m)| {
                let c = [m.position[0], m.position[1] + 0.5, m.position[2]];
                let d = ((c[0] - eye[0]).powi(2) + (c[1] - eye[1]).powi(2) + (c[2] - eye[2]).powi(2)).sqrt();
                (i, d)
            })
            .filter(|(_, d)| *d <= FIGHT_REACH)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((idx, _)) = target else {
            fb.failure = Some(ControlFailure::NothingToAttack);
            return;
        };
        self.agent.last_attack_tick = Some(self.tick);
        let damage = match self.agent.equipment.as_ref().map(|i| i.as_str()) {
            Some("wooden_sword") => 4,
            Some("wooden_pickaxe") => 2,
            Some("stone_pickaxe") => 3,
            Some("iron_pickaxe") => 4,
            Some("diamond_pickaxe") => 5,
            _ => 1,
        };
        self.mobs[idx].health -= damage;
        if self.mobs[idx].health <= 0 {
            let m = self.mobs.remove(idx);
            fb.killed = Some(m.kind);
        }
    }

    fn place(&mut self, item: &Item, at: RelCell, fb: &mut StepFeedback) {
        let Some(kind) = BlockKind::placed_from(item.as_str()) else {
            fb.failure = Some(ControlFailure::NotPlaceable);
            return;
        };
        if !self.agent.inventory.has(item.as_str()) {
            fb.failure = Some(ControlFailure::MissingItem { item: item.clone() });
            return;
        }
        if at.dx.abs() > 1 || at.dz.abs() > 1 || at.dy.abs() > 1 {
            fb.failure = Some(ControlFailure::OutOfReach);
            return;
        }
        let f = self.agent.feet_cell();
        let cell = [f[0] + at.dx, f[1] + at.dy, f[2] + at.dz];
        let current = self.block(cell[0], cell[1], cell[2]);
        let occupied_by_mob = self.mobs.iter().any(|m| m.cell() == cell);
        if !matches!(current, BlockKind::Air | BlockKind::Water)
            || self.body_cells().contains(&cell)
            || occupied_by_mob
        {
            fb.failure = Some(ControlFailure::Occupied);
            return;
        }
        self.agent.take(item.as_str(), 1);
        self.set_block(cell[0], cell[1], cell[2], kind);
    }

    fn apply_gravity(&mut self, fb: &mut StepFeedback) {
        if self.agent.airborne_ticks > 0 {
            self.agent.airborne_ticks -= 1;
            let f = self.agent.feet_cell();
            if self.supported(f[0], f[1], f[2]) {
                self.agent.airborne_ticks = 0;
            }
            return;
        }
        let f = self.agent.feet_cell();
        if f[1] > 0 && !self.supported(f[0], f[1], f[2]) {
            self.agent.position[1] -= 1.0;
            self.agent.fall_distance += 1;
            fb.moved = true;
            let g = self.agent.feet_cell();
            if self.supported(g[0], g[1], g[2]) {
                let landed_in_water = self.block(g[0], g[1], g[2]) == BlockKind::Water
                    || self.block(g[0], g[1] - 1, g[2]) == BlockKind::Water;
                let dmg = if landed_in_water { 0 } else { self.agent.fall_distance - 3 };
                self.agent.fall_distance = 0;
                fb.damage_taken += self.agent.hurt(dmg, self.tick);
            }
        } else {
            self.agent.fall_distance = 0;
        }
    }

    fn mob_can_stand(&self, x: i32, y: i32, z: i32) -> bool {
        self.in_bounds(x, y, z)
            && !self.solid(x, y, z)
            && self.block(x, y, z) != BlockKind::Water
            && self.solid(x, y - 1, z)
            && self.block(x, y - 1, z) != BlockKind::Leaves
    }

    fn update_mobs(&mut self, fb: &mut StepFeedback) {
        let agent_cell = self.agent.feet_cell();
        let agent_body = self.body_cells();
        for i in 0..self.mobs.len() {
            let m = &self.mobs[i];
            if (self.tick + m.id as u64) % MOB_HOP_PERIOD != 0 {
                continue;
            }
            let cell = m.cell();
            let chase = m.hostile
                && (cell[0] - agent_cell[0]).abs() + (cell[2] - agent_cell[2]).abs() <= 24;
            let dir = if chase {
                let dx = (agent_cell[0] - cell[0]).signum();
                let dz = (agent_cell[2] - cell[2]).signum();
                if dx == 0 && dz == 0 {
                    None
                } else if (agent_cell[0] - cell[0]).abs() >= (agent_cell[2] - cell[2]).abs() {
                    Some((dx, 0))
                } else {
                    Some((0, dz))
                }
            } else {
                let r: u32 = self.rng.random_range(0..8);
                [(1, 0), (-1, 0), (0, 1), (0, -1)].get(r as usize).copied()
            };
            let Some((dx, dz)) = dir else { continue };
            let (nx, nz) = (cell[0] + dx, cell[2] + dz);
            let mut target = None;
            for dy in [0, 1, -1, -2, -3] {
                let ny = cell[1] + dy;
                if dy == 1 && self.solid(cell[0], cell[1] + 1, cell[2]) {
                    continue;
                }
                if self.mob_can_stand(nx, ny, nz) {
                    target = Some(ny);
                    break;
                }
                if dy <= 0 && self.solid(nx, ny, nz) {
                    break;
                }
            }
            if let Some(ny) = target {
                let dest = [nx, ny, nz];
                let occupied = agent_body.contains(&dest)
                    || self.mobs.iter().any(|o| o.id != self.mobs[i].id && o.cell() == dest);
                if !occupied {
                    self.mobs[i].position = [nx as f64 + 0.5, ny as f64, nz as f64 + 0.5];
                }
            }
        }
        // Contact damage from adjacent hostiles: 2 health per 20 ticks of adjacency.
        let p = self.agent.position;
        let mut damage = 0;
        for m in self.mobs.iter_mut().filter(|m| m.hostile) {
            let adjacent = (m.position[0] - p[0]).abs() <= 1.5
                && (m.position[2] - p[2]).abs() <= 1.5
                && (m.position[1] - p[1]).abs() <= 1.5;
            if adjacent {
                m.contact_ticks += 1;
                if m.contact_ticks % TICKS_PER_SECOND as u32 == 0 {
                    damage += 2;
                }
            } else {
                m.contact_ticks = 0;
            }
        }
        fb.damage_taken += self.agent.hurt(damage, self.tick);
    }

    fn update_spawns(&mut self) {
        if self.time_of_day() == TimeOfDay::Day {
            self.mobs.retain(|m| !m.hostile);
            return;
        }
        if self.tick % 100 != 0 {
            return;
        }
        let hostiles = self.mobs.iter().filter(|m| m.hostile).count();
        if hostiles >= HOSTILE_CAP || !self.rng.random_bool(0.5) {
            return;
        }
        let a = self.agent.feet_cell();
        let angle: f64 = self.rng.random_range(0.0..std::f64::consts::TAU);
        let dist: f64 = self.rng.random_range(16.0..28.0);
        let kind = [MobKind::Zombie, MobKind::Skeleton, MobKind::Creeper, MobKind::Spider]
            [self.rng.random_range(0..4usize)];
        let x = a[0] + (angle.cos() * dist) as i32;
        let z = a[2] + (angle.sin() * dist) as i32;
        if let Some(sy) = self.surface_y(x, z) {
            if self.mob_can_stand(x, sy + 1, z) {
                self.spawn_mob(kind, [x, sy + 1, z]);
            }
        }
    }

    fn update_weather(&mut self) {
        if self.tick >= self.weather_until {
            self.weather = match self.weather {
                Weather::Sunny => Weather::Rainy,
                Weather::Rainy => Weather::Sunny,
            };
            let span: u64 = self.rng.random_range(6_000..18_000);
            self.weather_until = self.tick + span;
        }
    }

    fn regenerate(&mut self) {
        let a = &mut self.agent;
        if a.alive
            && a.health < MAX_HEALTH
            && self.tick % 80 == 0
            && self.tick >= a.last_damage_tick + 100
        {
            a.health += 1;
        }
    }

    /// Advances the world by one tick under `control`.
    pub fn step(&mut self, control: &Control) -> Result<StepFeedback, WorldError> {
        if !self.agent.alive {
            return Err(WorldError::EpisodeOver);
        }
        let mut fb = StepFeedback::default();
        self.apply_control(control, &mut fb);
        self.apply_gravity(&mut fb);
        self.update_mobs(&mut fb);
        self.update_spawns();
        self.update_weather();
        self.regenerate();
        self.tick += 1;
        Ok(fb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> WorldState {
        generate_world(3, &WorldProfile::Flat, &GenConfig::default()).unwrap()
    }

    fn with_table(inv: &[(&str, u32)]) -> WorldState {
        let mut w = flat();
        let f = w.agent.feet_cell();
        w.set_block(f[0] + 1, f[1], f[2], BlockKind::CraftingTable);
        for (i, n) in inv {
            w.agent.inventory.add(&Item::new(*i), *n);
        }
        w
    }

    #[test]
    fn forward_advances_by_walk_speed() {
        let mut w = flat();
        let before = w.agent.position;
        let t = w.tick;
        let fb = w.step(&Control::Forward).unwrap();
        assert!(fb.moved);
        assert_eq!(w.tick, t + 1);
        let moved = ((w.agent.position[0] - before[0]).powi(2)
            + (w.agent.position[2] - before[2]).powi(2))
        .sqrt();
        assert!((moved - WALK_SPEED).abs() < 1e-12);
    }

    #[test]
    fn craft_with_empty_inventory_only_ticks() {
        let mut w = flat();
        let mut expected = w.clone();
        let fb = w.step(&Control::Craft { item: Item::new("stick") }).unwrap();
        assert!(fb.failure.is_some());
        expected.step(&Control::Noop).unwrap();
        assert_eq!(w.agent, expected.agent);
        assert_eq!(w.tick, expected.tick);
    }

    #[test]
    fn twelve_thousand_ticks_is_ten_minutes() {
        let mut w = flat();
        for _ in 0..EPISODE_TICKS {
            w.step(&Control::Noop).unwrap();
        }
        assert_eq!(w.tick / TICKS_PER_SECOND, 600);
    }

    #[test]
    fn wooden_pickaxe_recipe_consumes_exactly() {
        let mut w = with_table(&[("planks", 3), ("stick", 2)]);
        let r = w.recipes().get("wooden_pickaxe").unwrap().clone();
        w.apply_recipe(&r).unwrap();
        let expected: Inventory = [(Item::new("wooden_pickaxe"), 1)].into_iter().collect();
        assert_eq!(w.agent.inventory, expected);
    }

    #[test]
    fn furnace_recipe() {
        let mut w = with_table(&[("cobblestone", 8)]);
        let r = w.recipes().get("furnace").unwrap().clone();
        w.apply_recipe(&r).unwrap();
        let expected: Inventory = [(Item::new("furnace"), 1)].into_iter().collect();
        assert_eq!(w.agent.inventory, expected);
    }

    #[test]
    fn shortfall_matches_subtraction() {
        let mut w = flat();
        w.agent.inventory.add(&Item::new("planks"), 2);
        let r = w.recipes().get("wooden_pickaxe").unwrap().clone();
        let err = w.apply_recipe(&r).unwrap_err();
        let mut expected = std::collections::BTreeMap::new();
        for (item, need) in [("planks", 3u32), ("stick", 2)] {
            let have = w.agent.inventory.count(item);
            if need > have {
                expected.insert(Item::new(item), need - have);
            }
        }
        assert_eq!(err, CraftError::InsufficientMaterials { shortfall: expected });
    }

    #[test]
    fn missing_platform() {
        let mut w = flat();
        w.agent.inventory.add(&Item::new("planks"), 3);
        w.agent.inventory.add(&Item::new("stick"), 2);
        let r = w.recipes().get("wooden_pickaxe").unwrap().clone();
        assert_eq!(w.apply_recipe(&r), Err(CraftError::PlatformUnavailable));
    }

    #[test]
    fn death_ends_the_episode() {
        let mut w = flat();
        w.agent.hurt(MAX_HEALTH, 0);
        assert!(!w.agent.alive);
        assert_eq!(w.agent.health, 0);
        assert_eq!(w.step(&Control::Noop), Err(WorldError::EpisodeOver));
    }

    #[test]
    fn equipped_item_leaves_with_last_unit() {
        let mut w = flat();
        w.agent.inventory.add(&Item::new("dirt"), 1);
        w.step(&Control::Equip { item: Item::new("dirt") }).unwrap();
        let fb = w
            .step(&Control::Place {
                item: Item::new("dirt"),
                at: RelCell::new(1, 0, 0),
            })
            .unwrap();
        assert!(fb.failure.is_none());
        assert_eq!(w.agent.equipment, None);
    }

    #[test]
    fn mining_stone_by_hand_drops_nothing() {
        let mut w = flat();
        let f = w.agent.feet_cell();
        w.set_block(f[0] + 1, f[1], f[2], BlockKind::Stone);
        let mut broke = false;
        for _ in 0..200 {
            let fb = w
                .step(&Control::Attack {
                    target: AttackTarget::Block { at: RelCell::new(1, 0, 0) },
                })
                .unwrap();
            if fb.broke.is_some() {
                broke = true;
                assert_eq!(fb.gained, None);
                break;
            }
        }
        assert!(broke);
    }

    #[test]
    fn day_phase_is_a_function_of_tick() {
        let mut w = flat();
        assert_eq!(w.time_of_day(), TimeOfDay::Day);
        w.tick = DAY_TICKS;
        assert_eq!(w.time_of_day(), TimeOfDay::Night);
        w.day_offset = NIGHT_TICKS;
        assert_eq!(w.time_of_day(), TimeOfDay::Day);
    }

    #[test]
    fn nights_bring_hostiles_and_dawn_clears_them() {
        let mut w = generate_world(5, &WorldProfile::Process, &GenConfig::default()).unwrap();
        assert!(w.mobs.iter().all(|m| !m.hostile));
        w.day_offset = DAY_TICKS;
        for _ in 0..2_000 {
            w.step(&Control::Noop).unwrap();
        }
        assert!(w.mobs.iter().any(|m| m.hostile));
        w.day_offset = 0;
        w.tick = 0;
        w.step(&Control::Noop).unwrap();
        assert!(w.mobs.iter().all(|m| !m.hostile));
    }
}
