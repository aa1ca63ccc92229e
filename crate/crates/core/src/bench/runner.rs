//! Fans episodes out over worker threads and reduces them into reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::{BackendChoice, Report, RunFlags};
use super::{Family, TaskSpec};
use crate::agent::{run_episode, Backends, EpisodeConfig, EpisodeResult, FrameDetail, Strategy, WorldSetup};
use crate::memory::{MemoryError, PerformerStore};
use crate::world::{Biome, GenConfig, WorldProfile};

/// Spawn profiles per scene task; each is run once per seed.
pub const CONTEXT_PROFILES: usize = 10;
/// Land biomes cycled through when a scene task does not fix the ecology.
const FREE_BIOMES: [Biome; 3] = [Biome::Plains, Biome::Forest, Biome::Mountains];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no seeds given")]
    NoSeeds,
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("seed file {path}: {message}")]
    Seeds { path: PathBuf, message: String },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub family: Family,
    /// Episodes per task.
    pub reps: usize,
    pub seeds: Vec<u64>,
    pub strategy: Strategy,
    pub random_drop: bool,
    pub patroller_check: bool,
    pub memory_enabled: bool,
    pub backend: BackendChoice,
    pub tick_limit: u64,
}

impl SuiteConfig {
    /// Defaults: 50 episodes per scene task over 5 seeds, 30 per item task.
    pub fn new(family: Family) -> SuiteConfig {
        let (reps, seeds) = match family {
            Family::Context => (50, (0..5).collect()),
            Family::Process => (30, (0..30).collect()),
        };
        SuiteConfig {
            family,
            reps,
            seeds,
            strategy: Strategy::MultiRound,
            random_drop: false,
            patroller_check: true,
            memory_enabled: true,
            backend: BackendChoice::Oracle,
            tick_limit: crate::world::EPISODE_TICKS,
        }
    }

    pub fn flags(&self) -> RunFlags {
        RunFlags {
            strategy: self.strategy,
            random_drop: self.random_drop,
            patroller_check: self.patroller_check,
            memory_enabled: self.memory_enabled,
            backend: self.backend,
        }
    }
}

/// Reads whitespace- or comma-separated seeds.
pub fn load_seeds(path: &Path) -> Result<Vec<u64>, BenchError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let seeds = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>().map_err(|e| BenchError::Seeds {
                path: path.to_path_buf(),
                message: format!("`{s}`: {e}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err(BenchError::NoSeeds);
    }
    Ok(seeds)
}

/// The world a scene task's episode starts in: the required ecology (or a
/// cycled land biome) with required time and weather fixed.
pub fn context_profile(task: &TaskSpec, profile: usize) -> WorldProfile {
    let pre = task.predetermined.clone().unwrap_or_default();
    WorldProfile::Context {
        biome: pre.biome.unwrap_or(FREE_BIOMES[profile % FREE_BIOMES.len()]),
        time: pre.time,
        weather: pre.weather,
    }
}

/// Per-episode configurations for one task, in a fixed order.
pub fn episode_configs(task: &TaskSpec, cfg: &SuiteConfig) -> Vec<EpisodeConfig> {
    (0..cfg.reps)
        .map(|i| {
            let world = match task.family {
                Family::Context => {
                    let profile = i % CONTEXT_PROFILES;
                    let seed = cfg.seeds[(i / CONTEXT_PROFILES) % cfg.seeds.len()];
                    WorldSetup {
                        seed: seed * CONTEXT_PROFILES as u64 + profile as u64,
                        profile: context_profile(task, profile),
                        gen: GenConfig::default(),
                    }
                }
                Family::Process => WorldSetup {
                    seed: cfg.seeds[i % cfg.seeds.len()],
                    profile: WorldProfile::Process,
                    gen: GenConfig::default(),
                },
            };
            let mut ec = EpisodeConfig::new(world);
            ec.tick_limit = cfg.tick_limit;
            ec.random_drop = cfg.random_drop;
            ec.patroller_check = cfg.patroller_check;
            ec.memory_enabled = cfg.memory_enabled;
            ec.strategy = cfg.strategy;
            ec.frame_detail = match task.family {
                Family::Context => FrameDetail::Full,
                Family::Process => FrameDetail::Summary,
            };
            ec
        })
        .collect()
}

/// A finished suite: the report plus performer memory with this run's records appended.
pub struct SuiteRun {
    pub report: Report,
    pub memory: PerformerStore,
}

fn log_file(dir: &Path, r: &EpisodeResult) -> PathBuf {
    dir.join("logs")
        .join(format!("{}_{}.jsonl", r.task_id.replace([' ', '/'], "_"), r.seed))
}

fn write_log(path: &Path, r: &EpisodeResult) -> Result<(), BenchError> {
    let f = fs::File::create(path).map_err(io(path))?;
    let mut w = std::io::BufWriter::new(f);
    for rec in &r.log {
        writeln!(w, "{}", rec.to_line()).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

/// Runs every task `cfg.reps` times in parallel and reduces into a report.
///
/// Performer memory is read from the snapshot in `backends`; records earned
/// by episodes are appended afterwards in episode order. With `out`, each
/// episode's log and the report files are written under it.
pub fn run_suite(
    tasks: &[TaskSpec],
    cfg: &SuiteConfig,
    backends: &Backends,
    out: Option<&Path>,
) -> Result<SuiteRun, BenchError> {
    if cfg.seeds.is_empty() {
        return Err(BenchError::NoSeeds);
    }
    if let Some(dir) = out {
        let logs = dir.join("logs");
        fs::create_dir_all(&logs).map_err(io(&logs))?;
    }
    let jobs: Vec<(&TaskSpec, EpisodeConfig)> = tasks
        .iter()
        .flat_map(|t| episode_configs(t, cfg).into_iter().map(move |c| (t, c)))
        .collect();
    let results: Vec<Result<EpisodeResult, BenchError>> = jobs
        .par_iter()
        .map(|(task, ec)| {
            let mut r = run_episode(task, ec, backends);
            if let Some(dir) = out {
                let path = log_file(dir, &r);
                write_log(&path, &r)?;
                r.log_path = Some(path.strip_prefix(dir).unwrap_or(&path).to_path_buf());
            }
            r.log = Vec::new();
            Ok(r)
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut memory = (*backends.performer).clone();
    for r in &results {
        for rec in &r.memories {
            memory.insert(rec.clone())?;
        }
    }
    let report = Report::from_results(cfg.family, cfg.flags(), tasks, results);
    if let Some(dir) = out {
        write_report(dir, &report)?;
        memory.persist(&dir.join("memory"))?;
    }
    Ok(SuiteRun { report, memory })
}

pub fn write_report(dir: &Path, report: &Report) -> Result<(), BenchError> {
    let json = dir.join("report.json");
    fs::write(&json, report.to_json()).map_err(io(&json))?;
    let csv = dir.join("report.csv");
    fs::write(&csv, report.to_csv()).map_err(io(&csv))
}

/// Reloads a report written by [`run_suite`].
pub fn read_report(dir: &Path) -> Result<Report, BenchError> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Parse {
        path,
        message: e.to_string(),
    })
}

/// The patroller-check × random-drop grid: four reports in one call,
/// ordered (check on, drop off), (check on, drop on), (check off, drop off), (check off, drop on).
pub fn run_ablation(tasks: &[TaskSpec], base: &SuiteConfig, backends: &Backends) -> Result<Vec<Report>, BenchError> {
    let mut out = Vec::with_capacity(4);
    for check in [true, false] {
        for drop in [false, true] {
            let mut cfg = base.clone();
            cfg.patroller_check = check;
            cfg.random_drop = drop;
            out.push(run_suite(tasks, &cfg, backends, None)?.report);
        }
    }
    Ok(out)
}
