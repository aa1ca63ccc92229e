//! Success-rate tables: per task, and per level as the mean of task rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Family, Level, TaskSpec};
use crate::agent::{EpisodeResult, EpisodeVerdict, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Oracle,
    Remote,
}

impl BackendChoice {
    pub fn from_name(name: &str) -> Option<BackendChoice> {
        match name {
            "oracle" => Some(BackendChoice::Oracle),
            "remote" => Some(BackendChoice::Remote),
            _ => None,
        }
    }
}

/// The switches a suite was run with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFlags {
    pub strategy: Strategy,
    pub random_drop: bool,
    pub patroller_check: bool,
    pub memory_enabled: bool,
    pub backend: BackendChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRate {
    pub task_id: String,
    pub description: String,
    pub level: Level,
    pub episodes: usize,
    pub successes: usize,
    pub rate: f64,
    /// Failure counts keyed by reason.
    pub failures: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRate {
    pub level: Level,
    pub tasks: usize,
    pub mean_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub family: Family,
    pub flags: RunFlags,
    pub tasks: Vec<TaskRate>,
    pub levels: Vec<LevelRate>,
    pub episodes: Vec<EpisodeResult>,
    /// SHA-256 over the episode results, for determinism checks.
    pub digest: String,
}

fn failure_name(v: EpisodeVerdict) -> Option<String> {
    match v {
        EpisodeVerdict::Success => None,
        EpisodeVerdict::Failure(k) => Some(
            serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        ),
    }
}

/// Rounds a rate for stable printing.
fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

impl Report {
    /// Aggregates results. Episodes are ordered by task roster order, then
    /// seed, so the result does not depend on completion order.
    pub fn from_results(family: Family, flags: RunFlags, tasks: &[TaskSpec], mut results: Vec<EpisodeResult>) -> Report {
        let order = |id: &str| tasks.iter().position(|t| t.id == id).unwrap_or(usize::MAX);
        results.sort_by(|a, b| {
            order(&a.task_id)
                .cmp(&order(&b.task_id))
                .then(a.seed.cmp(&b.seed))
                .then(a.digest.cmp(&b.digest))
        });
        let mut rates = Vec::new();
        for t in tasks {
            let mine: Vec<&EpisodeResult> = results.iter().filter(|r| r.task_id == t.id).collect();
            if mine.is_empty() {
                continue;
            }
            let successes = mine.iter().filter(|r| r.verdict.is_success()).count();
            let mut failures = BTreeMap::new();
            for r in &mine {
                if let Some(name) = failure_name(r.verdict) {
                    *failures.entry(name).or_insert(0) += 1;
                }
            }
            rates.push(TaskRate {
                task_id: t.id.clone(),
                description: t.description.clone(),
                level: t.level,
                episodes: mine.len(),
                successes,
                rate: round4(successes as f64 / mine.len() as f64),
                failures,
            });
        }
        let levels_of = match family {
            Family::Context => &Level::CONTEXT[..],
            Family::Process => &Level::PROCESS[..],
        };
        let levels = levels_of
            .iter()
            .filter_map(|&level| {
                let rs: Vec<f64> = rates.iter().filter(|r| r.level == level).map(|r| r.rate).collect();
                (!rs.is_empty()).then(|| LevelRate {
                    level,
                    tasks: rs.len(),
                    mean_rate: round4(rs.iter().sum::<f64>() / rs.len() as f64),
                })
            })
            .collect();
        let digest = hex::encode(Sha256::digest(
            serde_json::to_vec(&results).expect("results serialize"),
        ));
        Report {
            family,
            flags,
            tasks: rates,
            levels,
            episodes: results,
            digest,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-task rows then per-level rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scope,id,level,episodes,successes,rate\n");
        for t in &self.tasks {
            out.push_str(&format!(
                "task,{},{},{},{},{:.4}\n",
                t.task_id, t.level, t.episodes, t.successes, t.rate
            ));
        }
        for l in &self.levels {
            out.push_str(&format!("level,{},{},{},,{:.4}\n", l.level, l.level, l.tasks, l.mean_rate));
        }
        out
    }

    pub fn rate_of(&self, task_id: &str) -> Option<f64> {
        self.tasks.iter().find(|t| t.task_id == task_id).map(|t| t.rate)
    }

    pub fn level_rate(&self, level: Level) -> Option<f64> {
        self.levels.iter().find(|l| l.level == level).map(|l| l.mean_rate)
    }
}
