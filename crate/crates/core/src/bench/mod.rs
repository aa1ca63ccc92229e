//! Task suites, automatic judges, the suite runner and reports.

pub mod judge;
pub mod report;
pub mod runner;
pub mod tasks;

pub use crate::agent::{EpisodeConfig, EpisodeResult, EpisodeVerdict, FailureKind};
pub use judge::{judge_context, judge_log, judge_process, parse_log, JudgeError};
pub use report::{BackendChoice, LevelRate, Report, RunFlags, TaskRate};
pub use runner::{
    context_profile, episode_configs, load_seeds, read_report, run_ablation, run_suite, write_report, BenchError,
    SuiteConfig, SuiteRun, CONTEXT_PROFILES,
};
pub use tasks::{find_task, load_suite, Family, Level, Predetermined, TaskError, TaskSpec};
