//! Closed-loop controllers for each compound action.

use std::collections::BTreeMap;

use super::{block_for, find_target_holds, halt_holds, move_target_in, Abort, ActionOutcome, ActionStep, ActionVerdict, Embodiment, FailureReason, POLL_INTERVAL};
use crate::observation::{Frame, StatusObservation, VoxelNeighborhood};
use crate::percipient::identity_matches;
use crate::world::{AttackTarget, BlockKind, Control, ControlFailure, CraftError, Item, MobKind, RelCell, ToolTier};

type Flow<T> = Result<T, Abort>;

/// Consecutive failed steps before Move gives up on a target.
const MOVE_STUCK_LIMIT: u32 = 6;
/// Successful Find steps before a deliberate turn, so the search covers new ground.
const FIND_LEG: u32 = 16;
/// Every this many surface polls, Find looks all the way around.
const SCAN_EVERY: u32 = 4;
/// Turns in a look-around; 60° steps overlap a 70° view.
const SCAN_STEPS: u32 = 6;
/// Gaze pitch for tunnel polls, so both cells of the face are in view.
const TUNNEL_PITCH: f64 = -30.0;
/// Move may dig through blocks that break this fast with the held tool.
const MOVE_DIG_TICKS: u32 = 60;

/// Runs one action to completion and reports the verdict.
pub fn execute(e: &mut Embodiment<'_>, action: &ActionStep) -> ActionOutcome {
    e.begin(action);
    let result = match action {
        ActionStep::Find { object } => find(e, object),
        ActionStep::Move { object } => move_to(e, object),
        ActionStep::Craft { object, materials, .. } => craft(e, object, materials),
        ActionStep::Mine { object, tool } => mine(e, object, tool.as_ref()),
        ActionStep::Equip { object } => equip(e, object),
        ActionStep::Fight { object, tool } => fight(e, object, tool.as_ref()),
        ActionStep::DigUp { tool } => dig_up(e, tool.as_ref()),
        ActionStep::DigDown { y_level, tool } => dig_down(e, *y_level, tool.as_ref()),
        ActionStep::Use { object } => use_item(e, object),
        ActionStep::Place { object } => place(e, object),
    };
    let verdict = match result {
        Ok(v) => v,
        Err(Abort::Budget) => ActionVerdict::BudgetExhausted,
        Err(Abort::Dead) => failed(FailureReason::Died),
        Err(Abort::Backend(error)) => failed(FailureReason::Backend { error }),
        Err(Abort::Stopped) => {
            if halt_holds(action, &e.evidence) {
                ActionVerdict::Halted
            } else {
                failed(FailureReason::Interrupted)
            }
        }
    };
    e.finish(verdict)
}

fn failed(reason: FailureReason) -> ActionVerdict {
    ActionVerdict::Failed { reason }
}

/// Unit step on the x/z grid for a cardinal yaw.
fn dir(yaw: f64) -> (i32, i32) {
    match (yaw.rem_euclid(360.0) / 90.0).round() as i32 % 4 {
        0 => (0, -1),
        1 => (1, 0),
        2 => (0, 1),
        _ => (-1, 0),
    }
}

fn heading_to(dx: i32, dz: i32) -> f64 {
    match (dx.signum(), dz.signum()) {
        (1, _) => 90.0,
        (-1, _) => 270.0,
        (_, 1) => 180.0,
        _ => 0.0,
    }
}

fn snap(yaw: f64) -> f64 {
    ((yaw.rem_euclid(360.0) / 90.0).round() * 90.0).rem_euclid(360.0)
}

/// Turns to a cardinal yaw with level pitch; costs a tick only when needed.
fn face(e: &mut Embodiment<'_>, yaw: f64) -> Flow<()> {
    let st = e.status();
    let mut delta = (yaw - st.yaw).rem_euclid(360.0);
    if delta > 180.0 {
        delta -= 360.0;
    }
    if delta.abs() > 1e-9 || st.pitch.abs() > 1e-9 {
        e.act(Control::Turn {
            yaw: delta,
            pitch: -st.pitch,
        })?;
    }
    Ok(())
}

/// Attacks one cell until it breaks. False when it cannot be broken.
fn mine_cell(e: &mut Embodiment<'_>, at: RelCell) -> Flow<bool> {
    loop {
        let fb = e.act(Control::Attack {
            target: AttackTarget::Block { at },
        })?;
        if fb.broke.is_some() {
            return Ok(true);
        }
        if matches!(fb.failure, Some(ControlFailure::Unbreakable | ControlFailure::OutOfReach)) {
            return Ok(false);
        }
    }
}

fn blocked(fb: &crate::world::StepFeedback) -> bool {
    matches!(fb.failure, Some(ControlFailure::Blocked))
}

/// Advances one cell along a cardinal heading, stepping up one block when
/// needed. Returns to the start cell center when the way is blocked.
fn step_cell(e: &mut Embodiment<'_>, yaw: f64, dig: bool) -> Flow<bool> {
    face(e, yaw)?;
    if dig {
        let (dx, dz) = dir(yaw);
        let n = e.neighborhood();
        for dy in [1, 0] {
            let at = RelCell::new(dx, dy, dz);
            if n.get(at).is_solid() && !mine_cell(e, at)? {
                return Ok(false);
            }
        }
    }
    for i in 0..4 {
        let fb = e.act(Control::Forward)?;
        if blocked(&fb) {
            let fb = e.act(Control::JumpForward)?;
            if blocked(&fb) {
                if i > 0 {
                    face(e, yaw + 180.0)?;
                    for _ in 0..i {
                        e.act(Control::Forward)?;
                    }
                    face(e, yaw)?;
                }
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn tier(e: &Embodiment<'_>, st: &StatusObservation) -> ToolTier {
    e.recipes().tier_of(st.equipment.as_ref())
}

/// Equips the named tool, failing when it is not carried.
fn ensure_tool(e: &mut Embodiment<'_>, tool: Option<&Item>) -> Flow<Result<(), FailureReason>> {
    let Some(tool) = tool else { return Ok(Ok(())) };
    let st = e.status();
    if !st.inventory.has(tool.as_str()) {
        return Ok(Err(FailureReason::MissingTool { tool: tool.clone() }));
    }
    if st.equipment.as_ref() != Some(tool) {
        e.act(Control::Equip { item: tool.clone() })?;
    }
    Ok(Ok(()))
}

/// Equips the best carried pickaxe if it beats what is held.
fn equip_best(e: &mut Embodiment<'_>) -> Flow<()> {
    let st = e.status();
    if let Some(best) = e.recipes().best_tool_in(&st.inventory) {
        let have = tier(e, &st);
        if e.recipes().tier_of(Some(&best)) > have {
            e.act(Control::Equip { item: best })?;
        }
    }
    Ok(())
}

fn is_ore(kind: BlockKind) -> bool {
    matches!(kind, BlockKind::IronOre | BlockKind::DiamondOre | BlockKind::RedstoneOre)
}

fn find(e: &mut Embodiment<'_>, object: &str) -> Flow<ActionVerdict> {
    let frame = e.frame()?;
    if find_target_holds(object, &frame) {
        return Ok(ActionVerdict::Halted);
    }
    let st = e.status();
    let tunnel = block_for(object).is_some_and(is_ore) && e.recipes().best_tool_in(&st.inventory).is_some();
    if tunnel {
        equip_best(e)?;
    }
    // A surface spiral's first heading and handedness come from the start
    // cell, so a search resumed elsewhere does not drift the same way again.
    let f = st.feet_cell();
    let spin = (f[0].wrapping_mul(7) + f[2].wrapping_mul(13)).rem_euclid(8);
    let mut heading = if tunnel { snap(st.yaw) } else { snap(st.yaw + 90.0 * (spin % 4) as f64) };
    let spiral_right = spin < 4;
    // Tunnel turns alternate left/right, but repeated blocks keep turning the
    // same way so a dead end is escaped rather than re-entered.
    let mut turn_right = false;
    let mut moved_since_turn = true;
    let mut blocked_turns = 0u32;
    let mut leg = 0u32;
    // On the surface the walk is a square spiral: two legs per length, each
    // pair two FIND_LEG longer so rings sit one look-around diameter apart.
    let mut legs_done = 0u32;
    // Consecutive legs cut short by walls; a corridor is dug out of after four.
    let mut blocked_legs = 0u32;
    let mut last_poll = e.ticks_used();
    let mut polls = 0u32;
    let target_block = block_for(object);
    loop {
        let dig = tunnel || blocked_turns >= 4 || blocked_legs >= 4;
        if tunnel {
            // Look before digging into a face that holds the target.
            let (dx, dz) = dir(heading);
            let n = e.neighborhood();
            let in_face = [0, 1].iter().any(|&dy| Some(n.get(RelCell::new(dx, dy, dz))) == target_block);
            if in_face {
                face(e, heading)?;
                // A lower-cell target hides behind the upper cell of the face.
                let upper = RelCell::new(dx, 1, dz);
                if Some(n.get(upper)) != target_block && n.get(upper).is_solid() {
                    mine_cell(e, upper)?;
                }
                last_poll = e.ticks_used();
                if tunnel_poll(e, object)? {
                    return Ok(ActionVerdict::Halted);
                }
            }
        }
        let stepped = step_cell(e, heading, dig)?;
        if stepped {
            blocked_turns = 0;
            moved_since_turn = true;
            leg += 1;
        } else {
            blocked_turns += 1;
        }
        let leg_len = if tunnel { FIND_LEG } else { FIND_LEG * (1 + 2 * (legs_done / 2)) };
        if !stepped || leg >= leg_len {
            if tunnel && moved_since_turn {
                turn_right = !turn_right;
            } else if !tunnel {
                turn_right = spiral_right;
                legs_done += 1;
                blocked_legs = if stepped { 0 } else { blocked_legs + 1 };
            }
            moved_since_turn = false;
            leg = 0;
            heading = snap(heading + if turn_right { 90.0 } else { -90.0 });
            face(e, heading)?;
        }
        if e.ticks_used() - last_poll >= POLL_INTERVAL {
            last_poll = e.ticks_used();
            polls += 1;
            let found = if tunnel {
                tunnel_poll(e, object)?
            } else if polls % SCAN_EVERY == 0 {
                look_around(e, object, heading)?
            } else {
                find_target_holds(object, &e.frame()?)
            };
            if found {
                return Ok(ActionVerdict::Halted);
            }
        }
    }
}

/// Turns full circle in view-sized steps, stopping early on a sighting;
/// otherwise faces `heading` again.
fn look_around(e: &mut Embodiment<'_>, object: &str, heading: f64) -> Flow<bool> {
    for k in 1..=SCAN_STEPS {
        face(e, heading + k as f64 * 360.0 / SCAN_STEPS as f64)?;
        if find_target_holds(object, &e.frame()?) {
            return Ok(true);
        }
    }
    face(e, heading)?;
    Ok(false)
}

/// Polls with the gaze lowered: the tunnel face's lower cell sits below a level gaze.
fn tunnel_poll(e: &mut Embodiment<'_>, object: &str) -> Flow<bool> {
    e.act(Control::Turn {
        yaw: 0.0,
        pitch: TUNNEL_PITCH,
    })?;
    let frame = e.frame()?;
    Ok(find_target_holds(object, &frame))
}

/// A visible candidate destination in absolute cell coordinates.
fn visible_cells(frame: &Frame, st: &StatusObservation, object: &str) -> Vec<[i32; 3]> {
    let subject = if object == "tree" { "log" } else { object };
    let eye = st.eye();
    let cells_of = |s: &str| -> Vec<[i32; 3]> {
        frame
            .entries
            .iter()
            .filter(|en| identity_matches(&en.identity, s))
            .map(|en| {
                let p = en.world_position(eye, st.yaw);
                [p[0].floor() as i32, p[1].floor() as i32, p[2].floor() as i32]
            })
            .collect()
    };
    let cells = cells_of(subject);
    if cells.is_empty() && subject == "log" {
        // A canopy without a visible trunk: the trunk stands under it.
        return cells_of("leaves");
    }
    cells
}

/// Nearest candidate, preferring ones at walking height.
fn pick_target(cells: &[[i32; 3]], feet: [i32; 3], ignored: &[[i32; 3]]) -> Option<[i32; 3]> {
    let cost = |c: &[i32; 3]| {
        let dy = c[1] - feet[1];
        let off_level = !(-1..=1).contains(&dy);
        (off_level, (c[0] - feet[0]).abs() + (c[2] - feet[2]).abs() + dy.abs())
    };
    cells
        .iter()
        .filter(|c| !ignored.contains(c))
        .min_by_key(|c| cost(c))
        .copied()
}

/// Can Move dig through the cells ahead without stalling?
fn cheap_to_dig(e: &Embodiment<'_>, st: &StatusObservation, n: &VoxelNeighborhood, yaw: f64) -> bool {
    let (dx, dz) = dir(yaw);
    let t = tier(e, st);
    [1, 0].iter().all(|&dy| {
        let b = n.get(RelCell::new(dx, dy, dz));
        !b.is_solid() || (b.is_breakable() && b.break_ticks(t) <= MOVE_DIG_TICKS)
    })
}

/// One greedy step toward `target`; tries the dominant axis first.
fn step_toward(e: &mut Embodiment<'_>, target: [i32; 3], allow_dig: bool) -> Flow<bool> {
    let st = e.status();
    let f = st.feet_cell();
    let (dx, dz) = (target[0] - f[0], target[2] - f[2]);
    let mut headings = Vec::new();
    if dx.abs() >= dz.abs() {
        if dx != 0 {
            headings.push(heading_to(dx, 0));
        }
        if dz != 0 {
            headings.push(heading_to(0, dz));
        }
    } else {
        headings.push(heading_to(0, dz));
        if dx != 0 {
            headings.push(heading_to(dx, 0));
        }
    }
    for &h in &headings {
        if step_cell(e, h, false)? {
            return Ok(true);
        }
    }
    if allow_dig {
        for &h in &headings {
            let n = e.neighborhood();
            let st = e.status();
            if cheap_to_dig(e, &st, &n, h) && step_cell(e, h, true)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn move_to(e: &mut Embodiment<'_>, object: &str) -> Flow<ActionVerdict> {
    let n = e.neighborhood();
    if move_target_in(&n, object) {
        return Ok(ActionVerdict::Halted);
    }
    let frame = e.frame()?;
    let st = e.status();
    let cells = visible_cells(&frame, &st, object);
    let mut ignored: Vec<[i32; 3]> = Vec::new();
    let Some(mut target) = pick_target(&cells, st.feet_cell(), &ignored) else {
        return Ok(failed(FailureReason::TargetAbsent {
            object: object.to_string(),
        }));
    };
    let mut last_poll = e.ticks_used();
    let mut stuck = 0u32;
    let mut wander_heading = snap(st.yaw);
    loop {
        let st = e.status();
        let f = st.feet_cell();
        let adjacent = (target[0] - f[0]).abs() <= 1 && (target[2] - f[2]).abs() <= 1;
        let moved = if adjacent || stuck >= MOVE_STUCK_LIMIT {
            // Here but out of reach vertically, or unreachable: try another.
            ignored.push(target);
            stuck = 0;
            false
        } else {
            step_toward(e, target, true)?
        };
        if moved {
            stuck = 0;
        } else if !adjacent {
            stuck += 1;
        }
        let n = e.neighborhood();
        if move_target_in(&n, object) {
            return Ok(ActionVerdict::Halted);
        }
        let repick = ignored.contains(&target);
        if repick || e.ticks_used() - last_poll >= POLL_INTERVAL {
            last_poll = e.ticks_used();
            let frame = e.frame()?;
            let st = e.status();
            let cells = visible_cells(&frame, &st, object);
            match pick_target(&cells, st.feet_cell(), &ignored) {
                Some(t) => target = t,
                None if repick => {
                    // Nothing usable in view: wander a few cells and look again.
                    for _ in 0..3 {
                        if !step_cell(e, wander_heading, false)? {
                            wander_heading = snap(wander_heading + 90.0);
                        }
                    }
                    if ignored.len() > 32 {
                        ignored.clear();
                    }
                }
                None => {}
            }
        }
    }
}

fn craft(e: &mut Embodiment<'_>, object: &Item, materials: &BTreeMap<Item, u32>) -> Flow<ActionVerdict> {
    let recipe = match e.recipes().get(object.as_str()) {
        Ok(r) if !r.is_mined() => r.clone(),
        _ => {
            return Ok(failed(FailureReason::InvalidArguments {
                detail: format!("{object} has no crafting recipe"),
            }))
        }
    };
    let n = e.neighborhood();
    if let Some(b) = recipe.platform.block() {
        if !n.contains_block(b) {
            return Ok(failed(FailureReason::PlatformUnavailable));
        }
    }
    let crafts = recipe
        .inputs
        .iter()
        .map(|(item, per)| materials.get(item).copied().unwrap_or(0) / per)
        .min()
        .unwrap_or(1)
        .max(1);
    let st = e.status();
    let shortfall = recipe.shortfall(&st.inventory, crafts);
    if !shortfall.is_empty() {
        return Ok(failed(FailureReason::InsufficientMaterials { shortfall }));
    }
    for _ in 0..crafts {
        let fb = e.act(Control::Craft { item: object.clone() })?;
        match fb.failure {
            None => {}
            Some(ControlFailure::Craft {
                error: CraftError::InsufficientMaterials { shortfall },
            }) => return Ok(failed(FailureReason::InsufficientMaterials { shortfall })),
            Some(ControlFailure::Craft {
                error: CraftError::PlatformUnavailable,
            }) => return Ok(failed(FailureReason::PlatformUnavailable)),
            Some(other) => {
                return Ok(failed(FailureReason::InvalidArguments {
                    detail: format!("{other:?}"),
                }))
            }
        }
    }
    Ok(ActionVerdict::Halted)
}

fn mine(e: &mut Embodiment<'_>, object: &str, tool: Option<&Item>) -> Flow<ActionVerdict> {
    let Some(kind) = block_for(object) else {
        return Ok(failed(FailureReason::InvalidArguments {
            detail: format!("{object} is not a block"),
        }));
    };
    if let Err(r) = ensure_tool(e, tool)? {
        return Ok(failed(r));
    }
    let st = e.status();
    if kind.break_ticks(ToolTier::Wooden) < kind.break_ticks(ToolTier::None) || tier(e, &st) < kind.harvest_tier() {
        equip_best(e)?;
    }
    let st = e.status();
    if tier(e, &st) < kind.harvest_tier() {
        let needed = e
            .recipes()
            .tool_for(kind.harvest_tier())
            .cloned()
            .unwrap_or_else(|| Item::new("pickaxe"));
        return Ok(failed(FailureReason::MissingTool { tool: needed }));
    }
    let n = e.neighborhood();
    let below = RelCell::new(0, -1, 0);
    let mut cells = n.find(kind);
    cells.sort_by_key(|c| {
        let level = match c.dy {
            0 => 0,
            1 => 1,
            _ => 2,
        };
        (*c == below, level)
    });
    for at in cells {
        if mine_cell(e, at)? && e.evidence.broke.contains(&kind) {
            return Ok(ActionVerdict::Halted);
        }
    }
    Ok(failed(FailureReason::TargetAbsent {
        object: object.to_string(),
    }))
}

fn equip(e: &mut Embodiment<'_>, object: &Item) -> Flow<ActionVerdict> {
    let st = e.status();
    if !st.inventory.has(object.as_str()) {
        return Ok(failed(FailureReason::MissingTool { tool: object.clone() }));
    }
    e.act(Control::Equip { item: object.clone() })?;
    e.status();
    Ok(ActionVerdict::Halted)
}

/// Nearest visible mob of a kind with its eye distance.
fn nearest_mob(frame: &Frame, st: &StatusObservation, kind: MobKind) -> Option<([i32; 3], f64)> {
    let eye = st.eye();
    frame
        .entries
        .iter()
        .filter(|en| en.identity == kind.name())
        .map(|en| {
            let p = en.world_position(eye, st.yaw);
            ([p[0].floor() as i32, p[1].floor() as i32, p[2].floor() as i32], en.distance)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn fight(e: &mut Embodiment<'_>, object: &str, tool: Option<&Item>) -> Flow<ActionVerdict> {
    let Some(kind) = MobKind::from_name(object) else {
        return Ok(failed(FailureReason::InvalidArguments {
            detail: format!("{object} is not a mob"),
        }));
    };
    if let Err(r) = ensure_tool(e, tool)? {
        return Ok(failed(r));
    }
    let frame = e.frame()?;
    let st = e.status();
    let n = e.neighborhood();
    let Some(mut seen) = nearest_mob(&frame, &st, kind).or_else(|| {
        n.mobs.iter().find(|(k, _)| *k == kind).map(|(_, c)| {
            let f = st.feet_cell();
            ([f[0] + c.dx, f[1] + c.dy, f[2] + c.dz], 1.0)
        })
    }) else {
        return Ok(failed(FailureReason::TargetAbsent {
            object: object.to_string(),
        }));
    };
    let mut heading = snap(st.yaw);
    loop {
        let fb = e.act(Control::Attack {
            target: AttackTarget::Mob { kind },
        })?;
        if fb.killed == Some(kind) {
            return Ok(ActionVerdict::Halted);
        }
        if matches!(fb.failure, Some(ControlFailure::NothingToAttack)) {
            let st = e.status();
            let f = st.feet_cell();
            let close = (seen.0[0] - f[0]).abs() <= 1 && (seen.0[2] - f[2]).abs() <= 1;
            if close || !step_toward(e, seen.0, false)? {
                if !step_cell(e, heading, false)? {
                    heading = snap(heading + 90.0);
                }
            }
            let frame = e.frame()?;
            let st = e.status();
            if let Some(s) = nearest_mob(&frame, &st, kind) {
                seen = s;
            }
        }
    }
}

fn pillar_item(st: &StatusObservation) -> Option<Item> {
    ["cobblestone", "dirt", "sand"]
        .into_iter()
        .find(|i| st.inventory.has(i))
        .map(Item::new)
}

fn dig_up(e: &mut Embodiment<'_>, tool: Option<&Item>) -> Flow<ActionVerdict> {
    if let Err(r) = ensure_tool(e, tool)? {
        return Ok(failed(r));
    }
    if tool.is_none() {
        equip_best(e)?;
    }
    let mut heading = snap(e.status().yaw);
    let mut stalls = 0u32;
    loop {
        let frame = e.frame()?;
        if frame.scene.sky_visible {
            return Ok(ActionVerdict::Halted);
        }
        if stalls >= 8 {
            return Ok(failed(FailureReason::Blocked));
        }
        let st = e.status();
        let above = RelCell::new(0, 2, 0);
        if let Some(item) = pillar_item(&st) {
            let mut fb = e.act(Control::Jump)?;
            if blocked(&fb) {
                if !mine_cell(e, above)? {
                    stalls += 1;
                    continue;
                }
                fb = e.act(Control::Jump)?;
            }
            if blocked(&fb) {
                stalls += 1;
                continue;
            }
            let placed = e.act(Control::Place {
                item,
                at: RelCell::new(0, -1, 0),
            })?;
            if placed.failure.is_some() {
                stalls += 1;
            } else {
                stalls = 0;
            }
        } else {
            // Staircase up: clear the head room ahead, then step onto the block.
            let (dx, dz) = dir(heading);
            face(e, heading)?;
            let n = e.neighborhood();
            let mut ok = true;
            for at in [RelCell::new(dx, 1, dz), RelCell::new(dx, 2, dz), above] {
                // Cells two up are outside the neighborhood; an attack on air is a wasted tick.
                if at.dy == 1 && !n.get(at).is_solid() {
                    continue;
                }
                if !mine_cell(e, at)? && at.dy == 1 {
                    ok = false;
                }
            }
            if !ok || !step_cell(e, heading, false)? {
                heading = snap(heading + 90.0);
                stalls += 1;
            } else {
                stalls = 0;
            }
        }
    }
}

fn dig_down(e: &mut Embodiment<'_>, y_level: i32, tool: Option<&Item>) -> Flow<ActionVerdict> {
    if y_level < 1 {
        return Ok(failed(FailureReason::InvalidArguments {
            detail: format!("y-level {y_level} is below the floor"),
        }));
    }
    if let Err(r) = ensure_tool(e, tool)? {
        return Ok(failed(r));
    }
    if tool.is_none() {
        equip_best(e)?;
    }
    let mut heading = snap(e.status().yaw);
    let mut turns = 0u32;
    loop {
        let st = e.status();
        if st.feet_cell()[1] <= y_level {
            return Ok(ActionVerdict::Halted);
        }
        if turns >= 4 {
            return Ok(failed(FailureReason::Blocked));
        }
        let (dx, dz) = dir(heading);
        let n = e.neighborhood();
        let ahead = [RelCell::new(dx, 1, dz), RelCell::new(dx, 0, dz), RelCell::new(dx, -1, dz)];
        let hazard = ahead.iter().any(|&at| {
            let b = n.get(at);
            b == BlockKind::Water || (b.is_solid() && !b.is_breakable())
        });
        let mut ok = !hazard;
        if ok {
            face(e, heading)?;
            for at in ahead {
                if n.get(at).is_solid() && !mine_cell(e, at)? {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            ok = walk_cell(e, heading)?;
        }
        if ok {
            turns = 0;
        } else {
            heading = snap(heading + 90.0);
            turns += 1;
        }
    }
}

/// Four forward ticks without climbing; backs out when blocked.
fn walk_cell(e: &mut Embodiment<'_>, yaw: f64) -> Flow<bool> {
    face(e, yaw)?;
    for i in 0..4 {
        let fb = e.act(Control::Forward)?;
        if blocked(&fb) {
            if i > 0 {
                face(e, yaw + 180.0)?;
                for _ in 0..i {
                    e.act(Control::Forward)?;
                }
                face(e, yaw)?;
            }
            return Ok(false);
        }
    }
    Ok(true)
}

fn use_item(e: &mut Embodiment<'_>, object: &Item) -> Flow<ActionVerdict> {
    if let Err(r) = ensure_tool(e, Some(object))? {
        return Ok(failed(r));
    }
    let fb = e.act(Control::Use)?;
    if fb.failure.is_some() {
        return Ok(failed(FailureReason::MissingTool { tool: object.clone() }));
    }
    e.note_used();
    Ok(ActionVerdict::Halted)
}

fn place(e: &mut Embodiment<'_>, object: &Item) -> Flow<ActionVerdict> {
    let Some(kind) = BlockKind::placed_from(object.as_str()) else {
        return Ok(failed(FailureReason::InvalidArguments {
            detail: format!("{object} cannot be placed"),
        }));
    };
    let st = e.status();
    if !st.inventory.has(object.as_str()) {
        let shortfall = [(object.clone(), 1)].into_iter().collect();
        return Ok(failed(FailureReason::InsufficientMaterials { shortfall }));
    }
    let n = e.neighborhood();
    let mut supported = Vec::new();
    let mut floating = Vec::new();
    for dz in -1..=1 {
        for dx in -1..=1 {
            if dx == 0 && dz == 0 {
                continue;
            }
            let at = RelCell::new(dx, 0, dz);
            let mob_there = n.mobs.iter().any(|(_, c)| *c == at);
            if !matches!(n.get(at), BlockKind::Air | BlockKind::Water) || mob_there {
                continue;
            }
            if n.get(RelCell::new(dx, -1, dz)).is_solid() {
                supported.push(at);
            } else {
                floating.push(at);
            }
        }
    }
    for at in supported.into_iter().chain(floating) {
        let fb = e.act(Control::Place {
            item: object.clone(),
            at,
        })?;
        if fb.failure.is_none() {
            let n = e.neighborhood();
            if n.contains_block(kind) {
                return Ok(ActionVerdict::Halted);
            }
        }
    }
    // Enclosed: clear a side cell, the one ahead first, and place there.
    for turn in [0.0, 90.0, 180.0, 270.0] {
        let (dx, dz) = dir(st.yaw + turn);
        let at = RelCell::new(dx, 0, dz);
        if mine_cell(e, at)? {
            let fb = e.act(Control::Place {
                item: object.clone(),
                at,
            })?;
            if fb.failure.is_none() && e.neighborhood().contains_block(kind) {
                return Ok(ActionVerdict::Halted);
            }
        }
    }
    Ok(failed(FailureReason::Blocked))
}
