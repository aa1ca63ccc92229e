//! Terrain, ore, tree and mob generation for the named world profiles.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::items::{Biome, BlockKind, MobKind, TimeOfDay, Weather};
use super::{RecipeBook, WorldError, WorldState, DAY_TICKS};

const SEA_LEVEL: i32 = 50;
const RIVER_BED: i32 = 48;

/// Named world layouts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum WorldProfile {
    /// Mixed biomes, a river, guaranteed ore strata; used by process tasks.
    Process,
    /// One predetermined biome over the whole map, with optional fixed time and weather.
    Context {
        biome: Biome,
        time: Option<TimeOfDay>,
        weather: Option<Weather>,
    },
    /// Flat grass plain at y = 52 with no trees or mobs; used for unit tests.
    Flat,
}

impl WorldProfile {
    /// Parses `process`, `flat` or `context:<biome>`.
    pub fn from_name(name: &str) -> Result<WorldProfile, WorldError> {
        match name {
            "process" => Ok(WorldProfile::Process),
            "flat" => Ok(WorldProfile::Flat),
            other => {
                let biome = other
                    .strip_prefix("context:")
                    .and_then(Biome::from_name)
                    .ok_or_else(|| WorldError::Config(format!("unknown world profile `{name}`")))?;
                Ok(WorldProfile::Context {
                    biome,
                    time: None,
                    weather: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub extents: [usize; 3],
    /// Fraction of stone cells below y 32 turned into iron ore.
    pub iron_density: f64,
    /// Fraction of stone cells below y 16 turned into diamond ore.
    pub diamond_density: f64,
    /// Fraction of stone cells below y 16 turned into redstone ore.
    pub redstone_density: f64,
    /// Makes redstone much rarer than diamond.
    pub redstone_rarity_skew: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            extents: [192, 64, 192],
            iron_density: 0.05,
            diamond_density: 0.02,
            redstone_density: 0.02,
            redstone_rarity_skew: false,
        }
    }
}

/// Smooth 2-D value noise on a lattice of `cell`-sized squares.
struct ValueNoise {
    cell: usize,
    w: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, size_x: usize, size_z: usize, cell: usize) -> Self {
        let w = size_x / cell + 2;
        let h = size_z / cell + 2;
        let values = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        ValueNoise { cell, w, values }
    }

    fn at(&self, x: usize, z: usize) -> f64 {
        let (gx, gz) = (x / self.cell, z / self.cell);
        let fx = (x % self.cell) as f64 / self.cell as f64;
        let fz = (z % self.cell) as f64 / self.cell as f64;
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (sx, sz) = (s(fx), s(fz));
        let v = |i: usize, j: usize| self.values[j * self.w + i];
        let a = v(gx, gz) * (1.0 - sx) + v(gx + 1, gz) * sx;
        let b = v(gx, gz + 1) * (1.0 - sx) + v(gx + 1, gz + 1) * sx;
        a * (1.0 - sz) + b * sz
    }
}

fn base_height(biome: Biome, n: f64) -> f64 {
    match biome {
        Biome::Plains => 52.0 + 1.5 * n,
        Biome::Forest => 53.0 + 2.5 * n,
        Biome::Desert => 52.0 + 2.0 * n,
        Biome::Mountains => 57.0 + 5.0 * n,
        Biome::River | Biome::Beach => 51.0,
    }
}

fn box_blur(src: &[f64], sx: usize, sz: usize, r: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; src.len()];
    for x in 0..sx {
        for z in 0..sz {
            let lo = z.saturating_sub(r);
            let hi = (z + r).min(sz - 1);
            let sum: f64 = (lo..=hi).map(|k| src[x * sz + k]).sum();
            tmp[x * sz + z] = sum / (hi - lo + 1) as f64;
        }
    }
    let mut out = vec![0.0; src.len()];
    for z in 0..sz {
        for x in 0..sx {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(sx - 1);
            let sum: f64 = (lo..=hi).map(|k| tmp[k * sz + z]).sum();
            out[x * sz + z] = sum / (hi - lo + 1) as f64;
        }
    }
    out
}

/// Generates a world for `profile`; identical inputs give identical worlds.
pub fn generate_world(seed: u64, profile: &WorldProfile, config: &GenConfig) -> Result<WorldState, WorldError> {
    generate_with_book(seed, profile, config, RecipeBook::standard())
}

pub(crate) fn generate_with_book(
    seed: u64,
    profile: &WorldProfile,
    config: &GenConfig,
    recipes: Arc<RecipeBook>,
) -> Result<WorldState, WorldError> {
    let [sx, sy, sz] = config.extents;
    if sx < 32 || sz < 32 || sy < 60 {
        return Err(WorldError::Config(format!(
            "world extents {:?} too small (need at least 32x60x32)",
            config.extents
        )));
    }
    let mut w = WorldState::empty(seed, config.extents, recipes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Biome map and raw heights.
    let mut biomes = vec![Biome::Plains; sx * sz];
    let mut ponds: Vec<(i32, i32, i32)> = Vec::new();
    let mut river = vec![0u8; sx * sz]; // 0 land, 1 bank, 2 water
    match profile {
        WorldProfile::Process => {
            let sites: Vec<(f64, f64, Biome)> = (0..14)
                .map(|i| {
                    let b = [Biome::Plains, Biome::Forest, Biome::Desert, Biome::Mountains][i % 4];
                    (rng.random_range(0.0..sx as f64), rng.random_range(0.0..sz as f64), b)
                })
                .collect();
            // The spawn area is always forest or plains so wood is close by.
            let cx = sx as f64 / 2.0;
            let cz = sz as f64 / 2.0;
            let spawn_biome = if rng.random_bool(0.5) { Biome::Forest } else { Biome::Plains };
            let mut sites = sites;
            sites.push((cx, cz, spawn_biome));
            for x in 0..sx {
                for z in 0..sz {
                    let best = sites
                        .iter()
                        .min_by(|a, b| {
                            let da = (a.0 - x as f64).powi(2) + (a.1 - z as f64).powi(2);
                            let db = (b.0 - x as f64).powi(2) + (b.1 - z as f64).powi(2);
                            da.total_cmp(&db)
                        })
                        .expect("sites non-empty");
                    biomes[x * sz + z] = best.2;
                }
            }
            // A meandering north-south river passing 20..32 blocks from the center.
            let offset = rng.random_range(20.0..32.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let amp = rng.random_range(4.0..10.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let wavelength = rng.random_range(40.0..80.0);
            for z in 0..sz {
                let center = cx + offset + amp * (z as f64 / wavelength * std::f64::consts::TAU + phase).sin();
                for x in 0..sx {
                    let d = (x as f64 + 0.5 - center).abs();
                    if d <= 2.5 {
                        river[x * sz + z] = 2;
                        biomes[x * sz + z] = Biome::River;
                    } else if d <= 5.5 {
                        river[x * sz + z] = 1;
                        biomes[x * sz + z] = Biome::Beach;
                    }
                }
            }
        }
        WorldProfile::Context { biome, .. } => {
            biomes.iter_mut().for_each(|b| *b = *biome);
            let count = match biome {
                Biome::Desert => 7,
                Biome::Plains => 5,
                _ => 4,
            };
            for _ in 0..count {
                let px = rng.random_range(20..sx as i32 - 20);
                let pz = rng.random_range(20..sz as i32 - 20);
                let pr = rng.random_range(2..5);
                ponds.push((px, pz, pr));
            }
        }
        WorldProfile::Flat => {}
    }

    let noise_a = ValueNoise::new(&mut rng, sx, sz, 24);
    let noise_b = ValueNoise::new(&mut rng, sx, sz, 8);
    let mut raw = vec![0.0; sx * sz];
    for x in 0..sx {
        for z in 0..sz {
            let n = 0.75 * noise_a.at(x, z) + 0.25 * noise_b.at(x, z);
            raw[x * sz + z] = match profile {
                WorldProfile::Flat => 52.0,
                _ => base_height(biomes[x * sz + z], n),
            };
        }
    }
    let smooth = box_blur(&raw, sx, sz, 4);
    let mut heights: Vec<i32> = smooth
        .iter()
        .map(|h| (h.round() as i32).clamp(SEA_LEVEL + 1, sy as i32 - 4))
        .collect();

    // Fill columns.
    for x in 0..sx {
        for z in 0..sz {
            let i = x * sz + z;
            let (xi, zi) = (x as i32, z as i32);
            let biome = biomes[i];
            let in_pond = ponds
                .iter()
                .any(|&(px, pz, pr)| (xi - px).pow(2) + (zi - pz).pow(2) <= pr * pr);
            let mut top = heights[i];
            let mut water_top = None;
            if river[i] == 2 {
                top = RIVER_BED;
                water_top = Some(SEA_LEVEL);
            } else if river[i] == 1 {
                top = SEA_LEVEL + 1;
            } else if in_pond {
                water_top = Some(top);
                top -= 2;
            }
            heights[i] = top;
            w.set_block(xi, 0, zi, BlockKind::Bedrock);
            for y in 1..48.min(top + 1) {
                w.set_block(xi, y, zi, BlockKind::Stone);
            }
            let sandy = matches!(biome, Biome::Desert | Biome::Beach | Biome::River) || in_pond;
            for y in 48..=top {
                let kind = if y == top {
                    if sandy {
                        BlockKind::Sand
                    } else {
                        BlockKind::Grass
                    }
                } else if sandy && y >= top - 2 {
                    BlockKind::Sand
                } else {
                    BlockKind::Dirt
                };
                w.set_block(xi, y, zi, kind);
            }
            if let Some(wt) = water_top {
                for y in top + 1..=wt {
                    w.set_block(xi, y, zi, BlockKind::Water);
                }
            }
            w.set_biome(xi, zi, biome);
        }
    }

    // Ores: one uniform draw per stone cell.
    let redstone_density = if config.redstone_rarity_skew {
        config.redstone_density * 0.1
    } else {
        config.redstone_density
    };
    if !matches!(profile, WorldProfile::Flat) {
        for x in 0..sx as i32 {
            for z in 0..sz as i32 {
                for y in 1..32 {
                    if w.block(x, y, z) != BlockKind::Stone {
                        continue;
                    }
                    let u: f64 = rng.random();
                    let kind = if y < 16 && u < config.diamond_density {
                        BlockKind::DiamondOre
                    } else if y < 16 && u < config.diamond_density + redstone_density {
                        BlockKind::RedstoneOre
                    } else if u >= 1.0 - config.iron_density {
                        BlockKind::IronOre
                    } else {
                        continue;
                    };
                    w.set_block(x, y, z, kind);
                }
            }
        }
    }

    // Trees.
    let tree_p = |b: Biome| match b {
        Biome::Forest => 0.035,
        Biome::Plains => 0.004,
        Biome::Mountains => 0.006,
        _ => 0.0,
    };
    let mut trunks: Vec<(i32, i32)> = Vec::new();
    if !matches!(profile, WorldProfile::Flat) {
        for x in 3..sx as i32 - 3 {
            for z in 3..sz as i32 - 3 {
                let i = x as usize * sz + z as usize;
                let p = tree_p(biomes[i]);
                let u: f64 = rng.random();
                if u >= p {
                    continue;
                }
                let top = heights[i];
                if w.block(x, top, z) != BlockKind::Grass {
                    continue;
                }
                if trunks.iter().any(|&(tx, tz)| (tx - x).abs() <= 3 && (tz - z).abs() <= 3) {
                    continue;
                }
                let trunk_h = rng.random_range(4..6);
                place_tree(&mut w, x, top + 1, z, trunk_h);
                trunks.push((x, z));
            }
        }
    }

    // Spawn point.
    let (spawn_x, spawn_z) = find_spawn(&w, &trunks, profile)?;
    let spawn_y = w.surface_y(spawn_x, spawn_z).unwrap_or(1) + 1;
    w.agent.position = [spawn_x as f64 + 0.5, spawn_y as f64, spawn_z as f64 + 0.5];

    // Passive mobs.
    if !matches!(profile, WorldProfile::Flat) {
        let passive = [MobKind::Cow, MobKind::Pig, MobKind::Sheep, MobKind::Chicken];
        let rotate = rng.random_range(0..4usize);
        // Two groups at opposite pond shores, cycling through kinds so each
        // kind is present.
        for (k, &(px, pz, pr)) in ponds.iter().enumerate() {
            let kind = passive[(k + rotate) % 4];
            spawn_group(&mut w, &mut rng, kind, px + pr + 1, pz, 3);
            let other = passive[(k + rotate + 2) % 4];
            spawn_group(&mut w, &mut rng, other, px - pr - 1, pz, 3);
        }
        let groups = match profile {
            WorldProfile::Context { .. } => 40,
            _ => 24,
        };
        for g in 0..groups {
            let kind = if matches!(profile, WorldProfile::Context { biome: Biome::Forest, .. }) && g % 10 == 9 {
                MobKind::Wolf
            } else {
                passive[(g + rotate) % 4]
            };
            let x = rng.random_range(4..sx as i32 - 4);
            let z = rng.random_range(4..sz as i32 - 4);
            let n = rng.random_range(2..5);
            spawn_group(&mut w, &mut rng, kind, x, z, n);
        }
        // A guaranteed group close to spawn keeps mob-finding tasks reachable.
        let kind = passive[rotate];
        let gx = spawn_x + rng.random_range(-12..=12);
        let gz = spawn_z + rng.random_range(-12..=12);
        spawn_group(&mut w, &mut rng, kind, gx, gz, 3);
    }

    // Time and weather.
    let (time, weather) = match profile {
        WorldProfile::Context { time, weather, .. } => (*time, *weather),
        _ => (None, None),
    };
    w.day_offset = match time {
        Some(TimeOfDay::Night) => DAY_TICKS,
        _ => 0,
    };
    let initial = weather.unwrap_or(if rng.random_bool(0.7) { Weather::Sunny } else { Weather::Rainy });
    let span = if weather.is_some() {
        rng.random_range(14_000..20_000)
    } else {
        rng.random_range(6_000..18_000)
    };
    w.set_weather(initial, span);
    Ok(w)
}

fn place_tree(w: &mut WorldState, x: i32, base: i32, z: i32, trunk_h: i32) {
    let top = base + trunk_h - 1;
    for y in top - 1..=top + 1 {
        let r: i32 = if y <= top { 2 } else { 1 };
        for dx in -r..=r {
            for dz in -r..=r {
                if r == 2 && dx.abs() == 2 && dz.abs() == 2 {
                    continue;
                }
                if w.block(x + dx, y, z + dz) == BlockKind::Air {
                    w.set_block(x + dx, y, z + dz, BlockKind::Leaves);
                }
            }
        }
    }
    for y in base..=top {
        w.set_block(x, y, z, BlockKind::Log);
    }
}

fn spawn_group(w: &mut WorldState, rng: &mut ChaCha8Rng, kind: MobKind, x: i32, z: i32, n: usize) {
    for _ in 0..n {
        for _attempt in 0..6 {
            let mx = x + rng.random_range(-3..=3);
            let mz = z + rng.random_range(-3..=3);
            let Some(sy) = w.surface_y(mx, mz) else { continue };
            let ground = w.block(mx, sy, mz);
            if !matches!(ground, BlockKind::Grass | BlockKind::Sand | BlockKind::Dirt) {
                continue;
            }
            if w.block(mx, sy + 1, mz) != BlockKind::Air {
                continue;
            }
            if w.mobs.iter().any(|m| m.cell() == [mx, sy + 1, mz]) {
                continue;
            }
            w.spawn_mob(kind, [mx, sy + 1, mz]);
            break;
        }
    }
}

fn dry_standable(w: &WorldState, x: i32, z: i32) -> bool {
    let Some(sy) = w.surface_y(x, z) else { return false };
    matches!(w.block(x, sy, z), BlockKind::Grass | BlockKind::Sand | BlockKind::Dirt)
        && w.block(x, sy + 1, z) == BlockKind::Air
        && w.block(x, sy + 2, z) == BlockKind::Air
        && w.block(x, sy + 3, z) == BlockKind::Air
}

fn find_spawn(w: &WorldState, trunks: &[(i32, i32)], profile: &WorldProfile) -> Result<(i32, i32), WorldError> {
    let cx = w.extents[0] as i32 / 2;
    let cz = w.extents[2] as i32 / 2;
    let want_tree = matches!(profile, WorldProfile::Process);
    let mut fallback = None;
    for r in 0..(cx.min(cz) - 2) {
        for dx in -r..=r {
            for dz in -r..=r {
                if dx.abs().max(dz.abs()) != r {
                    continue;
                }
                let (x, z): (i32, i32) = (cx + dx, cz + dz);
                if !dry_standable(w, x, z) {
                    continue;
                }
                if !want_tree || trunks.iter().any(|&(tx, tz)| (tx - x).abs() + (tz - z).abs() <= 16) {
                    return Ok((x, z));
                }
                fallback.get_or_insert((x, z));
            }
        }
    }
    fallback.ok_or_else(|| WorldError::Config("no dry spawn column".into()))
}
