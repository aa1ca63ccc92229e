//! Ego-view frames, the 3x3x3 voxel neighborhood and the status readout.
//!
//! Frames carry only what is inside the view cone and not occluded; the status
//! readout deliberately omits every scene attribute.

pub mod raycast;

use serde::{Deserialize, Serialize};

use crate::world::{Biome, BlockKind, Inventory, Item, MobKind, RelCell, TimeOfDay, Weather, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovConfig {
    pub horizontal_deg: f64,
    pub vertical_deg: f64,
    pub max_range: f64,
}

impl Default for FovConfig {
    fn default() -> Self {
        FovConfig {
            horizontal_deg: 70.0,
            vertical_deg: 60.0,
            max_range: 16.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Block,
    Mob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub kind: EntryKind,
    pub identity: String,
    /// Blocks from the eye to the entry's center.
    pub distance: f64,
    /// Degrees relative to the view yaw, in (-180, 180]; positive is to the right.
    pub bearing: f64,
    /// Degrees above the horizontal plane.
    pub elevation: f64,
}

impl FrameEntry {
    /// Position relative to the eye in a view-aligned frame: (right, up, forward).
    pub fn local_position(&self) -> [f64; 3] {
        let b = self.bearing.to_radians();
        let e = self.elevation.to_radians();
        let h = self.distance * e.cos();
        [h * b.sin(), self.distance * e.sin(), h * b.cos()]
    }

    /// Absolute position given the eye point and the view yaw it was rendered with.
    pub fn world_position(&self, eye: [f64; 3], yaw: f64) -> [f64; 3] {
        let a = (yaw + self.bearing).to_radians();
        let e = self.elevation.to_radians();
        let h = self.distance * e.cos();
        [eye[0] + h * a.sin(), eye[1] + self.distance * e.sin(), eye[2] - h * a.cos()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Brightness {
    Sufficient,
    Insufficient,
}

impl Brightness {
    pub fn name(self) -> &'static str {
        match self {
            Brightness::Sufficient => "sufficient",
            Brightness::Insufficient => "insufficient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub biome: Biome,
    pub time: TimeOfDay,
    pub weather: Weather,
    pub brightness: Brightness,
    pub sky_visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub entries: Vec<FrameEntry>,
    pub scene: Scene,
    pub tick_stamp: u64,
}

impl Frame {
    /// Canonical JSON (fixed field order).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames always serialize")
    }
}

fn round3(v: f64) -> f64 {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into (-180, 180].
pub fn wrap_degrees(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Bearing and elevation of `d` (target minus eye) for a viewer with `yaw`.
pub fn angles(d: [f64; 3], yaw: f64) -> (f64, f64) {
    let h = (d[0] * d[0] + d[2] * d[2]).sqrt();
    let heading = d[0].atan2(-d[2]).to_degrees();
    (wrap_degrees(heading - yaw), d[1].atan2(h).to_degrees())
}

/// View-cone membership for a target offset `d` from the eye.
pub fn in_view(d: [f64; 3], yaw: f64, pitch: f64, fov: &FovConfig) -> bool {
    let dist2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if dist2 > fov.max_range * fov.max_range || dist2 == 0.0 {
        return false;
    }
    let (bearing, elevation) = angles(d, yaw);
    bearing.abs() <= fov.horizontal_deg / 2.0 && (elevation - pitch).abs() <= fov.vertical_deg / 2.0
}

pub fn sky_visible(world: &WorldState) -> bool {
    let f = world.agent.feet_cell();
    let col = world.column(f[0], f[2]);
    let from = (f[1] + 2).max(0) as usize;
    col.iter().skip(from).all(|b| !b.is_opaque())
}

pub fn scene(world: &WorldState) -> Scene {
    let f = world.agent.feet_cell();
    let time = world.time_of_day();
    let sky = sky_visible(world);
    let mut torch = false;
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                torch |= world.block(f[0] + dx, f[1] + dy, f[2] + dz) == BlockKind::Torch;
            }
        }
    }
    let brightness = if (time == TimeOfDay::Day && sky) || torch {
        Brightness::Sufficient
    } else {
        Brightness::Insufficient
    };
    Scene {
        biome: world.biome(f[0], f[2]),
        time,
        weather: world.weather,
        brightness,
        sky_visible: sky,
    }
}

fn enclosed(world: &WorldState, x: i32, y: i32, z: i32) -> bool {
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) && !world.block(x + dx, y + dy, z + dz).is_opaque() {
                    return false;
                }
            }
        }
    }
    true
}

fn entry(kind: EntryKind, identity: &str, d: [f64; 3], yaw: f64) -> FrameEntry {
    let (bearing, elevation) = angles(d, yaw);
    FrameEntry {
        kind,
        identity: identity.to_string(),
        distance: round3((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()),
        bearing: round3(bearing),
        elevation: round3(elevation),
    }
}

/// Everything inside the view cone and range with a clear line of sight.
pub fn render_frame(world: &WorldState, fov: &FovConfig) -> Frame {
    let eye = world.agent.eye();
    let (yaw, pitch) = (world.agent.yaw, world.agent.pitch);
    let r = fov.max_range;
    let reach = r.ceil() as i32 + 1;
    let eye_cell = [eye[0].floor() as i32, eye[1].floor() as i32, eye[2].floor() as i32];
    let opaque = |x: i32, y: i32, z: i32| world.block(x, y, z).is_opaque();
    let mut entries = Vec::new();
    let half_h = fov.horizontal_deg / 2.0;
    let y_lo = (eye_cell[1] - reach).max(0);
    let y_hi = (eye_cell[1] + reach).min(world.extents[1] as i32 - 1);
    for x in eye_cell[0] - reach..=eye_cell[0] + reach {
        for z in eye_cell[2] - reach..=eye_cell[2] + reach {
            if !world.in_bounds(x, 0, z) {
                continue;
            }
            let dx = x as f64 + 0.5 - eye[0];
            let dz = z as f64 + 0.5 - eye[2];
            let h2 = dx * dx + dz * dz;
            if h2 > r * r {
                continue;
            }
            // Column-level horizontal cone test; columns through the eye pass.
            if h2 > 0.0 {
                let heading = dx.atan2(-dz).to_degrees();
                if wrap_degrees(heading - yaw).abs() > half_h {
                    continue;
                }
            }
            let column = world.column(x, z);
            for y in y_lo..=y_hi {
                let kind = column[y as usize];
                if kind == BlockKind::Air {
                    continue;
                }
                let d = [dx, y as f64 + 0.5 - eye[1], dz];
                if !in_view(d, yaw, pitch, fov) {
                    continue;
                }
                if enclosed(world, x, y, z) {
                    continue;
                }
                let target = [x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5];
                if raycast::line_of_sight(eye, target, [x, y, z], opaque) {
                    entries.push(entry(EntryKind::Block, kind.name(), d, yaw));
                }
            }
        }
    }
    for m in &world.mobs {
        let target = [m.position[0], m.position[1] + 0.5, m.position[2]];
        let d = [target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]];
        if !in_view(d, yaw, pitch, fov) {
            continue;
        }
        if raycast::line_of_sight(eye, target, m.cell(), opaque) {
            entries.push(entry(EntryKind::Mob, m.kind.name(), d, yaw));
        }
    }
    sort_entries(&mut entries);
    Frame {
        entries,
        scene: scene(world),
        tick_stamp: world.tick,
    }
}

pub fn sort_entries(entries: &mut [FrameEntry]) {
    entries.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.kind.cmp(&b.kind))
            .then(a.identity.cmp(&b.identity))
            .then(a.bearing.total_cmp(&b.bearing))
            .then(a.elevation.total_cmp(&b.elevation))
    });
}

/// The 3x3x3 cube around the agent's feet cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelNeighborhood {
    /// Indexed `[dy + 1][dz + 1][dx + 1]`.
    pub cells: [[[BlockKind; 3]; 3]; 3],
    /// Mobs whose feet cell lies inside the cube.
    pub mobs: Vec<(MobKind, RelCell)>,
}

impl VoxelNeighborhood {
    pub fn get(&self, at: RelCell) -> BlockKind {
        if at.dx.abs() > 1 || at.dy.abs() > 1 || at.dz.abs() > 1 {
            return BlockKind::Boundary;
        }
        self.cells[(at.dy + 1) as usize][(at.dz + 1) as usize][(at.dx + 1) as usize]
    }

    /// All offsets holding `kind`, in (dy, dz, dx) order.
    pub fn find(&self, kind: BlockKind) -> Vec<RelCell> {
        let mut out = Vec::new();
        for dy in -1..=1 {
            for dz in -1..=1 {
                for dx in -1..=1 {
                    let c = RelCell::new(dx, dy, dz);
                    if self.get(c) == kind {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    pub fn contains_block(&self, kind: BlockKind) -> bool {
        self.cells.iter().flatten().flatten().any(|b| *b == kind)
    }

    pub fn contains_mob(&self, kind: MobKind) -> bool {
        self.mobs.iter().any(|(k, _)| *k == kind)
    }

    /// Block or mob identity present in the cube.
    pub fn contains(&self, identity: &str) -> bool {
        if let Some(b) = BlockKind::from_name(identity) {
            return self.contains_block(b);
        }
        if let Some(m) = MobKind::from_name(identity) {
            return self.contains_mob(m);
        }
        false
    }
}

pub fn voxel_neighborhood(world: &WorldState) -> VoxelNeighborhood {
    let f = world.agent.feet_cell();
    let mut cells = [[[BlockKind::Air; 3]; 3]; 3];
    for dy in -1..=1 {
        for dz in -1..=1 {
            for dx in -1..=1 {
                cells[(dy + 1) as usize][(dz + 1) as usize][(dx + 1) as usize] =
                    world.block(f[0] + dx, f[1] + dy, f[2] + dz);
            }
        }
    }
    let mobs = world
        .mobs
        .iter()
        .filter(|m| world.near_agent(m.cell()))
        .map(|m| {
            let c = m.cell();
            (m.kind, RelCell::new(c[0] - f[0], c[1] - f[1], c[2] - f[2]))
        })
        .collect();
    VoxelNeighborhood { cells, mobs }
}

/// Life statistics only: position, view direction, health, inventory, equipment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusObservation {
    pub gps: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub health: i32,
    pub inventory: Inventory,
    pub equipment: Option<Item>,
}

impl StatusObservation {
    pub fn feet_cell(&self) -> [i32; 3] {
        [
            self.gps[0].floor() as i32,
            self.gps[1].floor() as i32,
            self.gps[2].floor() as i32,
        ]
    }

    pub fn eye(&self) -> [f64; 3] {
        [self.gps[0], self.gps[1] + crate::world::EYE_HEIGHT, self.gps[2]]
    }
}

pub fn status(world: &WorldState) -> StatusObservation {
    let a = &world.agent;
    StatusObservation {
        gps: a.position,
        yaw: a.yaw,
        pitch: a.pitch,
        health: a.health,
        inventory: a.inventory.clone(),
        equipment: a.equipment.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, GenConfig, WorldProfile};
    use proptest::prelude::*;

    fn flat() -> WorldState {
        generate_world(1, &WorldProfile::Flat, &GenConfig::default()).unwrap()
    }

    fn pig_ahead(w: &mut WorldState, n: i32) -> [i32; 3] {
        let f = w.agent.feet_cell();
        let cell = [f[0], f[1], f[2] - n];
        w.spawn_mob(MobKind::Pig, cell);
        cell
    }

    #[test]
    fn pig_straight_ahead_is_seen() {
        let mut w = flat();
        pig_ahead(&mut w, 5);
        let frame = render_frame(&w, &FovConfig::default());
        let pig = frame.entries.iter().find(|e| e.identity == "pig").expect("pig visible");
        assert_eq!(pig.kind, EntryKind::Mob);
        assert!((pig.distance - 5.0).abs() < 0.2);
        assert!(pig.bearing.abs() < 1e-6);
        assert_eq!(frame.scene.time, TimeOfDay::Day);
    }

    #[test]
    fn wall_hides_pig() {
        let mut w = flat();
        let cell = pig_ahead(&mut w, 5);
        for dy in 0..3 {
            for dx in -2..=2 {
                w.set_block(cell[0] + dx, cell[1] + dy, cell[2] + 2, BlockKind::Stone);
            }
        }
        let frame = render_frame(&w, &FovConfig::default());
        assert!(frame.entries.iter().all(|e| e.identity != "pig"));
    }

    #[test]
    fn underground_has_no_sky_and_is_dark() {
        let mut w = flat();
        let f = w.agent.feet_cell();
        w.set_block(f[0], f[1] + 4, f[2], BlockKind::Stone);
        let s = scene(&w);
        assert!(!s.sky_visible);
        assert_eq!(s.brightness, Brightness::Insufficient);
    }

    #[test]
    fn torch_lights_the_dark() {
        let mut w = flat();
        let f = w.agent.feet_cell();
        w.set_block(f[0], f[1] + 4, f[2], BlockKind::Stone);
        w.set_block(f[0] + 1, f[1], f[2], BlockKind::Torch);
        assert_eq!(scene(&w).brightness, Brightness::Sufficient);
    }

    #[test]
    fn neighborhood_on_flat_grass() {
        let w = flat();
        let n = voxel_neighborhood(&w);
        for dz in 0..3 {
            for dx in 0..3 {
                assert_eq!(n.cells[0][dz][dx], BlockKind::Grass);
                assert_eq!(n.cells[1][dz][dx], BlockKind::Air);
                assert_eq!(n.cells[2][dz][dx], BlockKind::Air);
            }
        }
        assert_eq!(n.get(RelCell::new(0, -1, 0)), BlockKind::Grass);
    }

    #[test]
    fn neighborhood_sees_placed_table() {
        let mut w = flat();
        let f = w.agent.feet_cell();
        w.set_block(f[0], f[1], f[2] - 1, BlockKind::CraftingTable);
        assert!(voxel_neighborhood(&w).contains("crafting_table"));
    }

    #[test]
    fn neighborhood_at_world_edge_reads_boundary() {
        let mut w = flat();
        w.agent.position[0] = 0.5;
        let n = voxel_neighborhood(&w);
        assert_eq!(n.get(RelCell::new(-1, 0, 0)), BlockKind::Boundary);
        assert!(n.get(RelCell::new(-1, 0, 0)).is_solid());
    }

    #[test]
    fn fresh_status_and_no_scene_leak() {
        let mut w = flat();
        let s = status(&w);
        assert!(s.inventory.is_empty());
        assert_eq!(s.health, 20);
        w.set_weather(Weather::Rainy, u64::MAX);
        w.day_offset = crate::world::DAY_TICKS;
        let json = serde_json::to_string(&status(&w)).unwrap();
        for token in ["biome", "weather", "time", "sky"] {
            assert!(!json.contains(token), "{token} leaked into {json}");
        }
    }

    #[test]
    fn status_after_crafting_sticks() {
        let mut w = flat();
        w.agent.inventory.add(&Item::new("planks"), 2);
        w.step(&crate::world::Control::Craft { item: Item::new("stick") }).unwrap();
        assert_eq!(status(&w).inventory.count("stick"), 4);
    }

    #[test]
    fn frame_round_trips_through_json() {
        let w = generate_world(4, &WorldProfile::Process, &GenConfig::default()).unwrap();
        let frame = render_frame(&w, &FovConfig::default());
        let back: Frame = serde_json::from_str(&frame.to_json()).unwrap();
        assert_eq!(back, frame);
    }

    /// Brute force over every cell in the range cube with no pruning; occlusion
    /// uses the traversal that `raycast` checks against its plane-crossing oracle.
    fn brute_force(world: &WorldState, fov: &FovConfig) -> Vec<(String, [i32; 3])> {
        let eye = world.agent.eye();
        let mut out = Vec::new();
        let f = world.agent.feet_cell();
        let r = fov.max_range as i32 + 2;
        let visible = |target: [f64; 3], cell: [i32; 3]| -> bool {
            !raycast::traverse(eye, target, cell, |c| world.block(c[0], c[1], c[2]).is_opaque())
        };
        for x in f[0] - r..=f[0] + r {
            for y in f[1] - r..=f[1] + r {
                for z in f[2] - r..=f[2] + r {
                    let b = world.block(x, y, z);
                    if matches!(b, BlockKind::Air | BlockKind::Boundary) {
                        continue;
                    }
                    let t = [x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5];
                    let d = [t[0] - eye[0], t[1] - eye[1], t[2] - eye[2]];
                    if in_view(d, world.agent.yaw, world.agent.pitch, fov) && visible(t, [x, y, z]) {
                        out.push((b.name().to_string(), [x, y, z]));
                    }
                }
            }
        }
        for m in &world.mobs {
            let t = [m.position[0], m.position[1] + 0.5, m.position[2]];
            let d = [t[0] - eye[0], t[1] - eye[1], t[2] - eye[2]];
            if in_view(d, world.agent.yaw, world.agent.pitch, fov) && visible(t, m.cell()) {
                out.push((m.kind.name().to_string(), m.cell()));
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn render_matches_brute_force(seed in 0u64..1000, yaw in 0.0f64..360.0, pitch in -60.0f64..60.0) {
            let mut w = generate_world(seed, &WorldProfile::Process, &GenConfig::default()).unwrap();
            w.agent.yaw = yaw;
            w.agent.pitch = pitch;
            let fov = FovConfig::default();
            let frame = render_frame(&w, &fov);
            let mut got: Vec<String> = frame.entries.iter().map(|e| e.identity.clone()).collect();
            let mut want: Vec<String> = brute_force(&w, &fov).into_iter().map(|(n, _)| n).collect();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
            prop_assert!(frame.entries.windows(2).all(|p| p[0].distance <= p[1].distance));
            prop_assert_eq!(render_frame(&w, &fov), frame);
        }
    }
}
