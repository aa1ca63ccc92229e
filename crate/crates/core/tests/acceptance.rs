//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the summary lines always reach the
//! console; exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use voxagent::agent::episode::{DropPayload, EndPayload, EndReason, StartPayload};
use voxagent::agent::perception::perceive;
use voxagent::agent::{
    active_perception, Backends, EpisodeVerdict, FailureKind, LogKind, LogRecord, Strategy, SubObjective,
};
use voxagent::bench::{
    judge_log, load_suite, parse_log, run_suite, Family, Level, Report, SuiteConfig, TaskSpec,
};
use voxagent::datagen::{build_dataset, verify, CountPolicy, TemplateTable, SITE_FRAMES, YAW_STEP};
use voxagent::memory::{
    distance, embed, KnowledgeEntry, KnowledgeSource, KnowledgeStore, Lookup, PerformerRecord, PerformerStore,
    Situation, KNOWLEDGE_THRESHOLD,
};
use voxagent::observation::{Brightness, EntryKind, Frame, FrameEntry, Scene};
use voxagent::percipient::{Category, Condition, OraclePercipient, NEAR_RADIUS};
use voxagent::world::{Biome, Inventory, Item, RecipeBook, TimeOfDay, Weather};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "reasoning steps", c1_reasoning_steps),
        (2, "oracle item suite", c2_process_suite),
        (3, "random-drop ablation", c3_ablation),
        (4, "scene suite and judge", c4_context_suite),
        (5, "query coverage", c5_coverage),
        (6, "perception bounds", c6_perception_bounds),
        (7, "memory contract", c7_memory),
        (8, "determinism", c8_determinism),
        (9, "datagen consistency", c9_datagen),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {n} {name}: {} ({secs:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---- 1 ----

/// Reasoning steps per item task, from the published task table.
const TABLE_STEPS: [(&str, usize); 25] = [
    ("log", 1),
    ("sand", 1),
    ("planks", 2),
    ("stick", 3),
    ("crafting_table", 3),
    ("bowl", 4),
    ("boat", 4),
    ("chest", 4),
    ("wooden_sword", 5),
    ("wooden_pickaxe", 5),
    ("cobblestone", 6),
    ("furnace", 7),
    ("stone_pickaxe", 7),
    ("iron_ore", 8),
    ("glass", 9),
    ("iron_ingot", 10),
    ("shield", 11),
    ("bucket", 11),
    ("iron_pickaxe", 11),
    ("iron_door", 11),
    ("diamond", 12),
    ("redstone", 12),
    ("compass", 13),
    ("diamond_pickaxe", 13),
    ("piston", 13),
];

fn c1_reasoning_steps() -> Outcome {
    let book = RecipeBook::standard();
    let wrong: Vec<String> = TABLE_STEPS
        .iter()
        .filter_map(|&(item, want)| match book.reasoning_steps(item) {
            Ok(got) if got == want => None,
            Ok(got) => Some(format!("{item}={got} (want {want})")),
            Err(e) => Some(format!("{item}: {e}")),
        })
        .collect();
    outcome(wrong.is_empty(), format!("25 items exact, mismatches {wrong:?}"))
}

// ---- 2 ----

fn c2_process_suite() -> Outcome {
    let be = Backends::oracle(RecipeBook::standard());
    let tasks = load_suite(Family::Process);
    let cfg = SuiteConfig::new(Family::Process);
    let start = Instant::now();
    let report = run_suite(&tasks, &cfg, &be, None).expect("suite runs").report;
    let elapsed = start.elapsed();
    let low: Vec<String> = report
        .tasks
        .iter()
        .filter(|t| t.successes * 10 < t.episodes * 9)
        .map(|t| format!("{} {}/{}", t.task_id, t.successes, t.episodes))
        .collect();
    let dp = report.tasks.iter().find(|t| t.task_id == "diamond pickaxe").unwrap();
    let fast = elapsed < Duration::from_secs(300);
    let min = report.tasks.iter().map(|t| t.successes).min().unwrap_or(0);
    outcome(
        low.is_empty() && dp.successes >= 28 && fast,
        format!(
            "30 seeds x 25 tasks, lowest task {min}/30, below 90%: {low:?}, diamond pickaxe {}/30 (need 28), suite {:.0}s (limit 300s)",
            dp.successes,
            elapsed.as_secs_f64()
        ),
    )
}

// ---- 3 ----

/// Replays the held-item targets on the logged inventory: a crafted step
/// must find all its inputs, a mined step adds from the world.
fn runs_short(book: &RecipeBook, inventory: &Inventory, remaining: &[(Item, u32)]) -> bool {
    let mut held: BTreeMap<String, u32> = inventory.iter().map(|(i, n)| (i.to_string(), n)).collect();
    for (item, count) in remaining {
        let have = held.get(item.as_str()).copied().unwrap_or(0);
        if have >= *count {
            continue;
        }
        let need = count - have;
        let r = book.get(item.as_str()).expect("known item");
        if r.inputs.is_empty() {
            *held.entry(item.to_string()).or_default() += need;
            continue;
        }
        let crafts = need.div_ceil(r.output_count);
        for (input, per) in &r.inputs {
            let slot = held.entry(input.to_string()).or_default();
            if *slot < per * crafts {
                return true;
            }
            *slot -= per * crafts;
        }
        *held.entry(item.to_string()).or_default() += crafts * r.output_count;
    }
    false
}

fn read_log(dir: &Path, rel: &Path) -> Vec<LogRecord> {
    let text = std::fs::read_to_string(dir.join(rel)).expect("log readable");
    parse_log(&text).expect("log parses")
}

fn c3_ablation() -> Outcome {
    let book = RecipeBook::standard();
    let be = Backends::oracle(book.clone());
    let tasks = load_suite(Family::Process);
    let mut cfg = SuiteConfig::new(Family::Process);
    cfg.seeds = (0..10).collect();
    cfg.reps = 10;
    cfg.random_drop = true;
    let on = run_suite(&tasks, &cfg, &be, None).expect("suite runs").report;
    cfg.patroller_check = false;
    let dir = tempfile::tempdir().unwrap();
    let off = run_suite(&tasks, &cfg, &be, Some(dir.path())).expect("suite runs").report;

    let mut levels = Vec::new();
    let mut direction = true;
    for level in Level::PROCESS {
        let (a, b) = (on.level_rate(level).unwrap(), off.level_rate(level).unwrap());
        direction &= a >= b;
        levels.push(format!("{level} {a:.2}>={b:.2}"));
    }
    // Every check-off episode whose chain runs short after a drop must fail.
    let (mut short, mut short_failed, mut flag_mismatch) = (0, 0, 0);
    for ep in &off.episodes {
        let log = read_log(dir.path(), ep.log_path.as_ref().unwrap());
        let mut hit = false;
        for rec in log.iter().filter(|r| r.kind == LogKind::Drop) {
            let d: DropPayload = rec.payload_as().unwrap();
            if d.skipped {
                continue;
            }
            let ours = runs_short(&book, &d.inventory, &d.remaining);
            if ours != d.shortfall {
                flag_mismatch += 1;
            }
            hit |= ours;
        }
        if hit {
            short += 1;
            if !ep.verdict.is_success() {
                short_failed += 1;
            }
        }
    }
    outcome(
        direction && short == short_failed && flag_mismatch == 0 && short > 0,
        format!(
            "10 seeds/task, check on >= off per level [{}]; short chains failed {short_failed}/{short}; shortfall flag disagreements {flag_mismatch}",
            levels.join(", ")
        ),
    )
}

// ---- 4 ----

/// Condition check on a raw JSON frame, written against the log format only.
fn raw_holds(c: &Condition, frame: &Value) -> bool {
    let scene = &frame["scene"];
    let entries = frame["entries"].as_array().cloned().unwrap_or_default();
    let is = |e: &Value, subject: &str| {
        let id = e["identity"].as_str().unwrap_or("");
        if subject == "tree" {
            id == "log" || id == "leaves"
        } else {
            id == subject
        }
    };
    let kind = |e: &Value| e["kind"].as_str().unwrap_or("").to_string();
    let pos = |e: &Value| {
        let (d, b, el) = (
            e["distance"].as_f64().unwrap(),
            e["bearing"].as_f64().unwrap().to_radians(),
            e["elevation"].as_f64().unwrap().to_radians(),
        );
        [d * el.cos() * b.sin(), d * el.sin(), d * el.cos() * b.cos()]
    };
    let s = c.subject.as_str();
    match c.category {
        Category::Object if s == "sky" => scene["sky_visible"].as_bool() == Some(true),
        Category::Object => entries.iter().any(|e| kind(e) == "block" && is(e, s)),
        Category::Mob => entries.iter().any(|e| kind(e) == "mob" && is(e, s)),
        Category::Ecology => scene["biome"] == s,
        Category::Time => scene["time"] == s,
        Category::Weather => scene["weather"] == s,
        Category::Brightness => scene["brightness"] == s,
        Category::Spatial => {
            let (a, b) = s.split_once(" near ").unwrap();
            entries.iter().enumerate().any(|(i, ea)| {
                is(ea, a)
                    && entries.iter().enumerate().any(|(j, eb)| {
                        let (p, q) = (pos(ea), pos(eb));
                        let d2: f64 = (0..3).map(|k| (p[k] - q[k]).powi(2)).sum();
                        i != j && is(eb, b) && d2 <= NEAR_RADIUS * NEAR_RADIUS
                    })
            })
        }
    }
}

/// Independent reading of the two failure rules over raw JSON lines.
fn brute_force_verdict(lines: &[Value]) -> String {
    let task: TaskSpec = serde_json::from_value(lines[0]["payload"]["task"].clone()).unwrap();
    let mut any = false;
    let mut last: Option<&Value> = None;
    for l in lines {
        match l["kind"].as_str().unwrap() {
            "frame" => {
                let f = &l["payload"];
                any |= task.conditions.iter().all(|c| raw_holds(c, f));
                last = Some(f);
            }
            "done" => {
                let ok = last.is_some_and(|f| task.conditions.iter().all(|c| raw_holds(c, f)));
                return if ok { "success" } else { "judge_rule2" }.into();
            }
            _ => {}
        }
    }
    if any {
        return "judge_rule1".into();
    }
    let end = &lines.last().unwrap()["payload"];
    match end["reason"].as_str().unwrap() {
        "death" => "death".into(),
        "backend_error" => "backend_error".into(),
        _ if end["alive"] == false => "death".into(),
        _ => "timeout".into(),
    }
}

fn verdict_name(v: EpisodeVerdict) -> String {
    match v {
        EpisodeVerdict::Success => "success".into(),
        EpisodeVerdict::Failure(k) => serde_json::to_value(k).unwrap().as_str().unwrap().to_string(),
    }
}

fn raw_lines(records: &[LogRecord]) -> Vec<Value> {
    records.iter().map(|r| serde_json::from_str(&r.to_line()).unwrap()).collect()
}

fn scene(biome: Biome, time: TimeOfDay) -> Scene {
    Scene {
        biome,
        time,
        weather: Weather::Sunny,
        brightness: Brightness::Sufficient,
        sky_visible: true,
    }
}

fn entry(kind: EntryKind, id: &str, distance: f64, bearing: f64) -> FrameEntry {
    FrameEntry {
        kind,
        identity: id.into(),
        distance,
        bearing,
        elevation: 0.0,
    }
}

/// Constructed logs aimed at each rule, with the expected verdict.
fn adversarial_logs(task: &TaskSpec) -> Vec<(Vec<LogRecord>, FailureKind)> {
    let start = LogRecord::new(
        0,
        LogKind::Start,
        &StartPayload {
            task: task.clone(),
            seed: 0,
            tick_limit: 12_000,
            start_tick: 0,
        },
    );
    let end = |reason| {
        LogRecord::new(
            100,
            LogKind::End,
            &EndPayload {
                reason,
                alive: true,
                ticks_used: 100,
            },
        )
    };
    let good = Frame {
        entries: vec![entry(EntryKind::Block, "log", 3.0, 0.0)],
        scene: scene(Biome::Forest, TimeOfDay::Night),
        tick_stamp: 20,
    };
    let day = Frame {
        scene: scene(Biome::Forest, TimeOfDay::Day),
        ..good.clone()
    };
    let bare = Frame {
        entries: Vec::new(),
        ..good.clone()
    };
    let frame = |t, f: &Frame| LogRecord::new(t, LogKind::Frame, f);
    let done = |t| LogRecord::new(t, LogKind::Done, &serde_json::json!({}));
    vec![
        // Satisfied then lost, never declared.
        (
            vec![start.clone(), frame(20, &good), frame(40, &bare), end(EndReason::Timeout)],
            FailureKind::JudgeRule1,
        ),
        // Declared on a daytime frame.
        (
            vec![start.clone(), frame(20, &day), done(20), end(EndReason::Done)],
            FailureKind::JudgeRule2,
        ),
        // Satisfied earlier, declared after it was lost.
        (
            vec![start.clone(), frame(20, &good), frame(40, &bare), done(40), end(EndReason::Done)],
            FailureKind::JudgeRule2,
        ),
        // Declared with no frame at all.
        (vec![start, done(0), end(EndReason::Done)], FailureKind::JudgeRule2),
    ]
}

fn c4_context_suite() -> Outcome {
    let be = Backends::oracle(RecipeBook::standard());
    let tasks = load_suite(Family::Context);
    let cfg = SuiteConfig::new(Family::Context);
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&tasks, &cfg, &be, Some(dir.path())).expect("suite runs").report;
    let low: Vec<String> = report
        .tasks
        .iter()
        .filter(|t| t.successes < 45)
        .map(|t| format!("{} {}/{}", t.task_id, t.successes, t.episodes))
        .collect();
    let min = report.tasks.iter().map(|t| t.successes).min().unwrap_or(0);
    let mut agree = 0;
    for ep in &report.episodes {
        let log = read_log(dir.path(), ep.log_path.as_ref().unwrap());
        let judged = verdict_name(judge_log(&log).unwrap());
        if judged == brute_force_verdict(&raw_lines(&log)) && judged == verdict_name(ep.verdict) {
            agree += 1;
        }
    }
    let task = tasks.iter().find(|t| t.id == "3-1").unwrap();
    let mut rules_seen = BTreeSet::new();
    let mut adversarial_ok = 0;
    let adversarial = adversarial_logs(task);
    for (log, want) in &adversarial {
        let judged = judge_log(log).unwrap();
        let brute = brute_force_verdict(&raw_lines(log));
        if judged == EpisodeVerdict::Failure(*want) && brute == verdict_name(judged) {
            adversarial_ok += 1;
            rules_seen.insert(*want as u8);
        }
    }
    let total = report.episodes.len();
    outcome(
        low.is_empty() && agree == total && adversarial_ok == adversarial.len() && rules_seen.len() == 2,
        format!(
            "50 episodes x 16 tasks, lowest task {min}/50, below 45: {low:?}; judge vs brute force {agree}/{total}; adversarial logs {adversarial_ok}/{} covering both rules",
            adversarial.len()
        ),
    )
}

// ---- 5 and 6 ----

const POOL: [(EntryKind, &str); 9] = [
    (EntryKind::Block, "log"),
    (EntryKind::Block, "leaves"),
    (EntryKind::Block, "grass"),
    (EntryKind::Block, "water"),
    (EntryKind::Block, "sand"),
    (EntryKind::Mob, "pig"),
    (EntryKind::Mob, "cow"),
    (EntryKind::Mob, "sheep"),
    (EntryKind::Mob, "zombie"),
];

fn random_frame(rng: &mut ChaCha8Rng) -> Frame {
    let n = rng.random_range(0..7);
    let entries = (0..n)
        .map(|_| {
            let (k, id) = POOL[rng.random_range(0..POOL.len())];
            FrameEntry {
                kind: k,
                identity: id.into(),
                distance: rng.random_range(1.0..16.0),
                bearing: rng.random_range(-35.0..35.0),
                elevation: rng.random_range(-20.0..20.0),
            }
        })
        .collect();
    let biomes = [Biome::Plains, Biome::Forest, Biome::Desert, Biome::Mountains];
    Frame {
        entries,
        scene: Scene {
            biome: biomes[rng.random_range(0..biomes.len())],
            time: if rng.random_bool(0.5) { TimeOfDay::Day } else { TimeOfDay::Night },
            weather: if rng.random_bool(0.5) { Weather::Sunny } else { Weather::Rainy },
            brightness: if rng.random_bool(0.7) {
                Brightness::Sufficient
            } else {
                Brightness::Insufficient
            },
            sky_visible: rng.random_bool(0.8),
        },
        tick_stamp: 0,
    }
}

fn find_sub(task: &TaskSpec) -> (SubObjective, voxagent::actions::ActionStep) {
    let sub = SubObjective::find(task.description.clone(), task.conditions.clone());
    let step = voxagent::actions::ActionStep::Find {
        object: task.conditions[0].subject.clone(),
    };
    (sub, step)
}

fn c5_coverage() -> Outcome {
    let tasks = load_suite(Family::Context);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frames: Vec<Frame> = (0..50).map(|_| random_frame(&mut rng)).collect();
    let mut rows = Vec::new();
    let mut ok = true;
    for task in &tasks {
        let (sub, step) = find_sub(task);
        let required: BTreeSet<Category> = task.conditions.iter().map(|c| c.category).collect();
        let mut cover = [0.0f64; 2];
        for (k, strategy) in [Strategy::SingleRound, Strategy::MultiRound].into_iter().enumerate() {
            for f in &frames {
                let (_, exchanges) = perceive(&sub, &step, f, &OraclePercipient, strategy).unwrap();
                let asked: BTreeSet<Category> = exchanges.iter().map(|(q, _)| q.category).collect();
                cover[k] += required.intersection(&asked).count() as f64 / required.len() as f64;
            }
            cover[k] /= frames.len() as f64;
        }
        ok &= cover[1] >= cover[0] && cover[0] == 1.0 && cover[1] == 1.0;
        if cover[1] < 1.0 || cover[0] < 1.0 {
            rows.push(format!("{} single {:.2} multi {:.2}", task.id, cover[0], cover[1]));
        }
    }
    outcome(ok, format!("16 tasks x 50 frames, multi >= single and both 100%; short rows {rows:?}"))
}

/// Straight evaluation from the frame, independent of the percipient.
fn brute_holds(c: &Condition, f: &Frame) -> bool {
    raw_holds(c, &serde_json::to_value(f).unwrap())
}

fn c6_perception_bounds() -> Outcome {
    let tasks = load_suite(Family::Context);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut bound, mut complete, mut satisfied) = (0, 0, 0);
    for i in 0..1000 {
        let task = &tasks[rng.random_range(0..tasks.len())];
        let mut f = random_frame(&mut rng);
        // Every fourth frame is built to satisfy the task.
        if i % 4 == 0 {
            f = satisfying_frame(task, &mut rng);
        }
        let (sub, step) = find_sub(task);
        let strategy = if rng.random_bool(0.5) {
            Strategy::MultiRound
        } else {
            Strategy::SingleRound
        };
        let set = active_perception(&sub, &step, &f, &OraclePercipient, strategy).unwrap();
        if set.round_count as usize > task.conditions.len() + 1 {
            bound += 1;
        }
        let all = task.conditions.iter().all(|c| brute_holds(c, &f));
        satisfied += all as usize;
        if set.complete != all {
            complete += 1;
        }
    }
    outcome(
        bound == 0 && complete == 0 && satisfied > 0,
        format!("1000 pairs ({satisfied} satisfying), round bound violations {bound}, completeness mismatches {complete}"),
    )
}

fn satisfying_frame(task: &TaskSpec, rng: &mut ChaCha8Rng) -> Frame {
    let mut f = random_frame(rng);
    f.entries.clear();
    f.scene.sky_visible = true;
    f.scene.brightness = Brightness::Sufficient;
    let mut bearing = -20.0;
    for c in &task.conditions {
        match c.category {
            Category::Object | Category::Mob => {
                let id = if c.subject == "tree" { "log" } else { c.subject.as_str() };
                let kind = if c.category == Category::Mob {
                    EntryKind::Mob
                } else {
                    EntryKind::Block
                };
                f.entries.push(entry(kind, id, 5.0, bearing));
                bearing += 8.0;
            }
            Category::Ecology => f.scene.biome = Biome::from_name(&c.subject).unwrap(),
            Category::Time => f.scene.time = if c.subject == "night" { TimeOfDay::Night } else { TimeOfDay::Day },
            Category::Weather => {
                f.scene.weather = if c.subject == "rainy" { Weather::Rainy } else { Weather::Sunny }
            }
            Category::Brightness | Category::Spatial => {}
        }
    }
    f
}

// ---- 7 ----

const VOCAB: [&str; 14] = [
    "mine", "craft", "smelt", "log", "planks", "stick", "table", "stone", "iron", "pickaxe", "furnace", "glass", "sand",
    "diamond",
];

fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..5);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

/// Cosine distance from raw token counts over the public tokenizer bins.
fn raw_distance(a: &str, b: &str) -> f64 {
    let hist = |t: &str| {
        let mut v = vec![0f64; voxagent::memory::EMBEDDING_DIM];
        for tok in voxagent::memory::tokens(t) {
            v[voxagent::memory::token_bin(&tok)] += 1.0;
        }
        v
    };
    let (va, vb) = (hist(a), hist(b));
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (n(&va) * n(&vb))
}

fn c7_memory() -> Outcome {
    // Threshold boundary: a hit exactly when the nearest distance is below it.
    let mut boundary_bad = 0;
    let mut s = KnowledgeStore::default();
    s.push(KnowledgeEntry::new("a b c d e f g h i j k l m n o p q r s t", KnowledgeSource::Curated).unwrap());
    let q = "a b c d e f g h i j k l m n o p q r s t u";
    let d = distance(&embed(q).unwrap(), &embed("a b c d e f g h i j k l m n o p q r s t").unwrap());
    if (d - raw_distance(q, "a b c d e f g h i j k l m n o p q r s t")).abs() > 1e-9 {
        boundary_bad += 1;
    }
    for (threshold, hit) in [(d, false), (d + 1e-12, true), (d - 1e-12, false)] {
        s.threshold = threshold;
        if matches!(s.lookup(q), Lookup::Hit { .. }) != hit {
            boundary_bad += 1;
        }
    }
    s.threshold = KNOWLEDGE_THRESHOLD;
    if !matches!(s.lookup("a b c d e f g h i j k l m n o p q r s t"), Lookup::Hit { .. }) {
        boundary_bad += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dir = tempfile::tempdir().unwrap();
    let (mut top_bad, mut reload_bad) = (0, 0);
    for n in 0..1000 {
        let entries: Vec<(String, u32)> = (0..rng.random_range(0..10))
            .map(|_| (text(&mut rng), rng.random_range(0..6)))
            .collect();
        let mut store = PerformerStore::new();
        for (d, p) in &entries {
            store
                .insert(PerformerRecord {
                    description: d.clone(),
                    position_index: *p,
                    sequence: Vec::new(),
                    situation: Situation::default(),
                })
                .unwrap();
        }
        // Oracle: distance, then position index, then insertion order.
        let q = text(&mut rng);
        let mut scored: Vec<(f64, u32, usize)> =
            entries.iter().enumerate().map(|(i, (d, p))| (raw_distance(&q, d), *p, i)).collect();
        scored.sort_by(|a, b| {
            // Distances equal up to rounding count as ties.
            if (a.0 - b.0).abs() < 1e-12 {
                a.1.cmp(&b.1).then(a.2.cmp(&b.2))
            } else {
                a.0.total_cmp(&b.0)
            }
        });
        let want: Vec<(String, u32)> = scored.iter().take(2).map(|&(_, _, i)| entries[i].clone()).collect();
        let got: Vec<(String, u32)> = store
            .retrieve(&q)
            .iter()
            .map(|r| (r.description.clone(), r.position_index))
            .collect();
        if got != want {
            top_bad += 1;
        }
        if n % 10 == 0 {
            let sub = dir.path().join(format!("s{n}"));
            store.persist(&sub).unwrap();
            let loaded = PerformerStore::load(&sub).unwrap();
            if loaded.retrieve(&q) != store.retrieve(&q) || loaded.records() != store.records() {
                reload_bad += 1;
            }
        }
    }
    outcome(
        boundary_bad == 0 && top_bad == 0 && reload_bad == 0,
        format!(
            "threshold {KNOWLEDGE_THRESHOLD} boundary failures {boundary_bad}; 1000 stores top-2 mismatches {top_bad}; 100 reloads differing {reload_bad}"
        ),
    )
}

// ---- 8 ----

fn c8_determinism() -> Outcome {
    let be = Backends::oracle(RecipeBook::standard());
    let mut mismatches = Vec::new();
    for (family, ids, reps) in [
        (Family::Process, vec!["planks", "stone pickaxe", "iron ingot"], 4),
        (Family::Context, vec!["2-2", "3-4"], 6),
    ] {
        let tasks: Vec<TaskSpec> = load_suite(family).into_iter().filter(|t| ids.contains(&t.id.as_str())).collect();
        let mut cfg = SuiteConfig::new(family);
        cfg.reps = reps;
        cfg.random_drop = family == Family::Process;
        let runs: Vec<(Report, Vec<u8>)> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let r = run_suite(&tasks, &cfg, &be, Some(dir.path())).unwrap().report;
                let bytes = std::fs::read(dir.path().join("report.json")).unwrap();
                (r, bytes)
            })
            .collect();
        let digests = |r: &Report| r.episodes.iter().map(|e| e.digest.clone()).collect::<Vec<_>>();
        if runs[0].1 != runs[1].1 || digests(&runs[0].0) != digests(&runs[1].0) || runs[0].0.digest != runs[1].0.digest {
            mismatches.push(family.name());
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("item and scene suites run twice, byte-identical reports and world digests; differing {mismatches:?}"),
    )
}

// ---- 9 ----

fn c9_datagen() -> Outcome {
    let t = TemplateTable::standard();
    let run = build_dataset(10, 9, &t, &CountPolicy::default()).expect("dataset builds");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pairs: Vec<_> = (0..1000)
        .map(|_| run.pairs[rng.random_range(0..run.pairs.len())].clone())
        .collect();
    let bad = verify(&pairs, &t).len() + run.inconsistencies.len();
    let sites_ok = run.sites.iter().all(|s| {
        s.frames.len() == SITE_FRAMES
            && s.yaws.len() == SITE_FRAMES
            && s.yaws.iter().enumerate().all(|(k, y)| *y == k as f64 * YAW_STEP)
    });
    outcome(
        bad == 0 && sites_ok && pairs.len() == 1000,
        format!(
            "{} sites, {} pairs generated, 1000 sampled re-verified with {bad} inconsistencies; 12 frames at 30 degrees per site: {sites_ok}",
            run.sites.len(),
            run.pairs.len()
        ),
    )
}
