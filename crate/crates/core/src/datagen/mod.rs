//! Perception-instruction data: on-the-spot rotations at sampled sites,
//! templated question/answer pairs over each frame, and a verifier that
//! replays every question through the oracle percipient.

mod templates;

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use templates::{TemplateError, TemplateTable};

use crate::observation::{render_frame, EntryKind, FovConfig, Frame};
use crate::percipient::{caption, Category, Exchange, OraclePercipient, Percipient, Query, Verdict};
use crate::world::{generate_world, Biome, BlockKind, GenConfig, TimeOfDay, Weather, WorldError, WorldProfile, WorldState};

/// Frames per site and the yaw step between them.
pub const SITE_FRAMES: usize = 12;
pub const YAW_STEP: f64 = 30.0;
/// Sites sampled from one generated world.
const SITES_PER_WORLD: usize = 10;
/// One site in this many is taken from a pocket below ground.
const UNDERGROUND_EVERY: usize = 10;

const BIOMES: [Biome; 4] = [Biome::Plains, Biome::Forest, Biome::Desert, Biome::Mountains];
/// Identities asked about when they are absent, for "no" answers.
const NEGATIVE_POOL: [(Category, &str); 10] = [
    (Category::Mob, "pig"),
    (Category::Mob, "cow"),
    (Category::Mob, "sheep"),
    (Category::Mob, "zombie"),
    (Category::Object, "log"),
    (Category::Object, "water"),
    (Category::Object, "sand"),
    (Category::Object, "grass"),
    (Category::Object, "stone"),
    (Category::Object, "iron_ore"),
];

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One question with its ground-truth answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub category: Category,
    pub subject: String,
    pub answer: String,
}

/// Twelve frames from one spot, turning in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSet {
    pub site_id: String,
    pub yaws: Vec<f64>,
    pub frames: Vec<Frame>,
    /// Facts per frame, in frame order.
    pub facts: Vec<Vec<Fact>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    SingleTurn,
    MultiTurn,
    Caption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub form: Form,
    pub frame: Frame,
    pub turns: Vec<Exchange>,
}

/// How many pairs each frame yields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountPolicy {
    /// Distinct paraphrases per fact in single-turn form.
    pub paraphrases: usize,
    /// Absent identities asked about per frame.
    pub negatives: usize,
    /// Turns in the multi-turn dialogue, at most.
    pub max_turns: usize,
}

impl Default for CountPolicy {
    fn default() -> Self {
        CountPolicy {
            paraphrases: 2,
            negatives: 1,
            max_turns: 8,
        }
    }
}

/// Answers every fact a frame supports: the four scene fields, the sky, each
/// distinct visible identity, and each near pair of a mob and a block.
pub fn frame_facts(frame: &Frame) -> Vec<Fact> {
    let oracle = OraclePercipient;
    let mut queries = vec![
        Query::new(Category::Ecology, "", vec![]),
        Query::new(Category::Time, "", vec![]),
        Query::new(Category::Weather, "", vec![]),
        Query::new(Category::Brightness, "", vec![]),
        Query::new(Category::Object, "sky", vec![]),
    ];
    let mut seen: Vec<(Category, &str)> = Vec::new();
    for e in &frame.entries {
        let cat = match e.kind {
            EntryKind::Block => Category::Object,
            EntryKind::Mob => Category::Mob,
        };
        if !seen.contains(&(cat, e.identity.as_str())) {
            seen.push((cat, e.identity.as_str()));
        }
    }
    for &(cat, id) in &seen {
        queries.push(Query::new(cat, id, vec![]));
    }
    for &(mc, mob) in seen.iter().filter(|(c, _)| *c == Category::Mob) {
        for &(_, block) in seen.iter().filter(|(c, _)| *c != mc) {
            queries.push(Query::new(Category::Spatial, format!("{mob} near {block}"), vec![]));
        }
    }
    queries
        .into_iter()
        .map(|q| {
            let a = oracle.answer(&q, frame).expect("oracle answers are infallible");
            Fact {
                category: q.category,
                subject: q.subject,
                answer: a.verdict.text(),
            }
        })
        // Near pairs are kept only where they hold.
        .filter(|f| f.category != Category::Spatial || f.answer == "yes")
        .collect()
}

/// Turns in place through twelve yaws; position, pitch and the clock stay put.
pub fn collect_site(world: &mut WorldState, site_id: impl Into<String>, fov: &FovConfig) -> SnapshotSet {
    let start_yaw = world.agent.yaw;
    world.agent.pitch = 0.0;
    let mut yaws = Vec::with_capacity(SITE_FRAMES);
    let mut frames = Vec::with_capacity(SITE_FRAMES);
    for k in 0..SITE_FRAMES {
        let yaw = k as f64 * YAW_STEP;
        world.agent.yaw = yaw;
        yaws.push(yaw);
        frames.push(render_frame(world, fov));
    }
    world.agent.yaw = start_yaw;
    let facts = frames.iter().map(frame_facts).collect();
    SnapshotSet {
        site_id: site_id.into(),
        yaws,
        frames,
        facts,
    }
}

/// Places the agent on open ground at a random column, or in a dug pocket
/// well below it.
fn place_agent(world: &mut WorldState, rng: &mut ChaCha8Rng, underground: bool) {
    let [sx, _, sz] = world.extents;
    for _ in 0..200 {
        let x = rng.random_range(8..sx as i32 - 8);
        let z = rng.random_range(8..sz as i32 - 8);
        let Some(y) = world.surface_y(x, z) else { continue };
        if underground {
            let feet = y - 12;
            if feet < 4 {
                continue;
            }
            world.set_block(x, feet, z, BlockKind::Air);
            world.set_block(x, feet + 1, z, BlockKind::Air);
            world.agent.position = [x as f64 + 0.5, feet as f64, z as f64 + 0.5];
            return;
        }
        let top = world.block(x, y, z);
        let open = world.block(x, y + 1, z) == BlockKind::Air && world.block(x, y + 2, z) == BlockKind::Air;
        if open && matches!(top, BlockKind::Grass | BlockKind::Dirt | BlockKind::Sand | BlockKind::Stone) {
            world.agent.position = [x as f64 + 0.5, y as f64 + 1.0, z as f64 + 0.5];
            return;
        }
    }
}

/// Samples `sites` snapshot sets. Sites are grouped ten to a world; worlds
/// cycle through the land biomes with random time and weather, and build in
/// parallel.
pub fn sample_sites(sites: usize, seed: u64, fov: &FovConfig) -> Result<Vec<SnapshotSet>, DatagenError> {
    let worlds = sites.div_ceil(SITES_PER_WORLD);
    let groups: Vec<Result<Vec<SnapshotSet>, DatagenError>> = (0..worlds)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(w as u64));
            let profile = WorldProfile::Context {
                biome: BIOMES[w % BIOMES.len()],
                time: Some(if rng.random_bool(0.5) { TimeOfDay::Day } else { TimeOfDay::Night }),
                weather: Some(if rng.random_bool(0.7) { Weather::Sunny } else { Weather::Rainy }),
            };
            let mut world = generate_world(rng.random(), &profile, &GenConfig::default())?;
            let here = SITES_PER_WORLD.min(sites - w * SITES_PER_WORLD);
            Ok((0..here)
                .map(|i| {
                    let index = w * SITES_PER_WORLD + i;
                    place_agent(&mut world, &mut rng, index % UNDERGROUND_EVERY == UNDERGROUND_EVERY - 1);
                    collect_site(&mut world, format!("site-{index:05}"), fov)
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(sites);
    for g in groups {
        out.extend(g?);
    }
    Ok(out)
}

/// Fixed-format caption answer: the scene fields, then every entry.
pub fn caption_text(frame: &Frame, backend: &dyn Percipient) -> String {
    let pairs = caption(frame, backend).expect("oracle captions are infallible");
    let mut scene = Vec::new();
    let mut things = Vec::new();
    for (q, a) in &pairs {
        match (q.category, a.verdict.clone()) {
            (Category::Object, Verdict::Yes | Verdict::No) if q.subject == "sky" => {
                scene.push(format!("sky: {}", a.verdict.text()));
            }
            (Category::Object | Category::Mob, _) => {
                things.push(q.subject.replace('_', " "));
            }
            (cat, v) => scene.push(format!("{}: {}", cat.name().to_ascii_lowercase(), v.text())),
        }
    }
    let mut text = scene.join("; ");
    if things.is_empty() {
        text.push_str(". Nothing else is visible.");
    } else {
        text.push_str(&format!(". Visible: {}.", things.join(", ")));
    }
    text
}

/// Builds all three forms for every frame of a site. Paraphrase choice is
/// drawn from `rng`, so output is reproducible for a given seed.
pub fn generate_pairs(
    set: &SnapshotSet,
    templates: &TemplateTable,
    policy: &CountPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<InstructionPair>, DatagenError> {
    let oracle = OraclePercipient;
    let mut out = Vec::new();
    for (frame, facts) in set.frames.iter().zip(&set.facts) {
        let mut asked: Vec<Fact> = facts.clone();
        let absent: Vec<&(Category, &str)> = NEGATIVE_POOL
            .iter()
            .filter(|(c, s)| !facts.iter().any(|f| f.category == *c && f.subject == *s))
            .collect();
        for &&(category, subject) in absent.choose_multiple(rng, policy.negatives) {
            asked.push(Fact {
                category,
                subject: subject.to_string(),
                answer: Verdict::No.text(),
            });
        }
        for fact in &asked {
            let n = templates.count(fact.category)?;
            let mut picks: Vec<usize> = (0..n).collect();
            picks.shuffle(rng);
            for &k in picks.iter().take(policy.paraphrases) {
                out.push(InstructionPair {
                    form: Form::SingleTurn,
                    frame: frame.clone(),
                    turns: vec![Exchange {
                        q: templates.question(fact.category, &fact.subject, k)?,
                        a: fact.answer.clone(),
                    }],
                });
            }
        }
        let mut turns = Vec::new();
        for fact in asked.iter().take(policy.max_turns) {
            let k = rng.random_range(0..templates.count(fact.category)?);
            turns.push(Exchange {
                q: templates.question(fact.category, &fact.subject, k)?,
                a: fact.answer.clone(),
            });
        }
        out.push(InstructionPair {
            form: Form::MultiTurn,
            frame: frame.clone(),
            turns,
        });
        out.push(InstructionPair {
            form: Form::Caption,
            frame: frame.clone(),
            turns: vec![Exchange {
                q: templates.caption_prompt(rng.random_range(0..templates.caption_count()))?,
                a: caption_text(frame, &oracle),
            }],
        });
    }
    Ok(out)
}

/// A stored answer that the oracle does not reproduce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Inconsistency {
    pub pair: usize,
    pub turn: usize,
    pub question: String,
    pub stored: String,
    /// What the oracle said, or why the question could not be replayed.
    pub expected: String,
}

/// Replays every question on its stored frame.
pub fn verify(pairs: &[InstructionPair], templates: &TemplateTable) -> Vec<Inconsistency> {
    let oracle = OraclePercipient;
    let mut bad = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        for (t, turn) in pair.turns.iter().enumerate() {
            let expected = if pair.form == Form::Caption && templates.is_caption_prompt(&turn.q) {
                Ok(caption_text(&pair.frame, &oracle))
            } else {
                match templates.parse_question(&turn.q) {
                    Some((category, subject)) => oracle
                        .answer(&Query::new(category, subject, vec![]), &pair.frame)
                        .map(|a| a.verdict.text())
                        .map_err(|e| e.to_string()),
                    None => Err("question matches no template".to_string()),
                }
            };
            match expected {
                Ok(e) if e == turn.a => {}
                Ok(e) | Err(e) => bad.push(Inconsistency {
                    pair: i,
                    turn: t,
                    question: turn.q.clone(),
                    stored: turn.a.clone(),
                    expected: e,
                }),
            }
        }
    }
    bad
}

/// Writes one pair per line.
pub fn emit(pairs: &[InstructionPair], path: &Path) -> Result<(), DatagenError> {
    let f = fs::File::create(path).map_err(io(path))?;
    let mut w = BufWriter::new(f);
    for p in pairs {
        let line = serde_json::to_string(p).expect("pairs serialize");
        writeln!(w, "{line}").map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_pairs(path: &Path) -> Result<Vec<InstructionPair>, DatagenError> {
    let f = fs::File::open(path).map_err(io(path))?;
    std::io::BufReader::new(f)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| {
            let l = l.map_err(io(path))?;
            serde_json::from_str(&l).map_err(|e| DatagenError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Everything the command line needs: sample, generate, verify.
pub struct DatasetRun {
    pub sites: Vec<SnapshotSet>,
    pub pairs: Vec<InstructionPair>,
    pub inconsistencies: Vec<Inconsistency>,
}

pub fn build_dataset(
    sites: usize,
    seed: u64,
    templates: &TemplateTable,
    policy: &CountPolicy,
) -> Result<DatasetRun, DatagenError> {
    let sets = sample_sites(sites, seed, &FovConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for s in &sets {
        pairs.extend(generate_pairs(s, templates, policy, &mut rng)?);
    }
    let inconsistencies = verify(&pairs, templates);
    Ok(DatasetRun {
        sites: sets,
        pairs,
        inconsistencies,
    })
}
