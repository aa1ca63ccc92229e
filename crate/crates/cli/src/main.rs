//! Command-line front end: run suites, judge logs, print reasoning steps,
//! render reports and generate perception-instruction data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use voxagent::agent::{Backends, Strategy};
use voxagent::bench::{
    judge_log, load_seeds, load_suite, parse_log, read_report, run_suite, BackendChoice, Family, Level, Report,
    SuiteConfig,
};
use voxagent::datagen::{build_dataset, emit, CountPolicy, TemplateTable};
use voxagent::memory::PerformerStore;
use voxagent::percipient::BackendConfig;
use voxagent::world::RecipeBook;

#[derive(Parser)]
#[command(name = "voxagent", version, about = "Embodied agent benchmark in a voxel survival world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Context,
    Process,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Single,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Oracle,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a task suite and write logs and reports.
    Run {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Episodes per task; defaults to 50 for scene tasks and 30 for item tasks.
        #[arg(long)]
        reps: Option<usize>,
        /// Whitespace- or comma-separated seed list.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "multi")]
        strategy: StrategyArg,
        #[arg(long)]
        random_drop: bool,
        #[arg(long)]
        no_patroller_check: bool,
        #[arg(long)]
        no_memory: bool,
        #[arg(long, value_enum, default_value = "oracle")]
        backend: BackendArg,
        /// JSON backend configuration; the environment is read when absent.
        #[arg(long)]
        backend_config: Option<PathBuf>,
        /// Performer memory to start from.
        #[arg(long)]
        memory: Option<PathBuf>,
        /// Comma-separated task ids to run instead of the whole suite.
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Judge one episode log.
    Judge {
        #[arg(long)]
        log: PathBuf,
    },
    /// Print the reasoning-step count of an item.
    Steps {
        #[arg(long)]
        item: String,
    },
    /// Print a saved report.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Generate and verify perception-instruction pairs.
    Datagen {
        #[arg(long, default_value_t = 100)]
        sites: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            suite,
            reps,
            seeds,
            strategy,
            random_drop,
            no_patroller_check,
            no_memory,
            backend,
            backend_config,
            memory,
            tasks,
            out,
        } => {
            let family = match suite {
                SuiteArg::Context => Family::Context,
                SuiteArg::Process => Family::Process,
            };
            let mut cfg = SuiteConfig::new(family);
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if let Some(path) = seeds {
                cfg.seeds = load_seeds(&path)?;
            }
            cfg.strategy = match strategy {
                StrategyArg::Single => Strategy::SingleRound,
                StrategyArg::Multi => Strategy::MultiRound,
            };
            cfg.random_drop = random_drop;
            cfg.patroller_check = !no_patroller_check;
            cfg.memory_enabled = !no_memory;
            let book = RecipeBook::standard();
            let mut be = match backend {
                BackendArg::Oracle => {
                    cfg.backend = BackendChoice::Oracle;
                    Backends::oracle(book)
                }
                BackendArg::Remote => {
                    cfg.backend = BackendChoice::Remote;
                    let bc = match &backend_config {
                        Some(p) => BackendConfig::from_file(p)?,
                        None => BackendConfig::from_env()?,
                    };
                    Backends::remote(book, &bc)
                }
            };
            if let Some(dir) = &memory {
                be.performer = Arc::new(PerformerStore::load(dir)?);
            }
            let mut roster = load_suite(family);
            if !tasks.is_empty() {
                roster.retain(|t| tasks.iter().any(|k| k == &t.id));
                if roster.len() != tasks.len() {
                    bail!("unknown task id among {tasks:?}");
                }
            }
            info!("running {} tasks x {} episodes", roster.len(), cfg.reps);
            let run = run_suite(&roster, &cfg, &be, out.as_deref())?;
            print_summary(&run.report);
            if let Some(dir) = out {
                info!("wrote {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Judge { log } => {
            let text = std::fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let records = parse_log(&text)?;
            let verdict = judge_log(&records)?;
            println!("{}", serde_json::to_string(&verdict)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Steps { item } => {
            let book = RecipeBook::standard();
            let name = item.trim().replace(' ', "_");
            let steps = book.reasoning_steps(&name)?;
            println!("{name}: {steps} steps ({})", Level::for_steps(steps));
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir, format } => {
            let report = read_report(&dir)?;
            match format {
                FormatArg::Json => println!("{}", report.to_json()),
                FormatArg::Csv => print!("{}", report.to_csv()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Datagen {
            sites,
            seed,
            out,
            templates,
        } => datagen(sites, seed, &out, templates.as_deref()),
    }
}

fn print_summary(report: &Report) {
    for t in &report.tasks {
        println!("{:<24} {:<8} {:>3}/{:<3} {:.3}", t.task_id, t.level, t.successes, t.episodes, t.rate);
    }
    for l in &report.levels {
        println!("level {:<18} {:>5} tasks  {:.3}", l.level, l.tasks, l.mean_rate);
    }
    println!("digest {}", report.digest);
}

fn datagen(sites: usize, seed: u64, out: &Path, templates: Option<&Path>) -> Result<ExitCode> {
    let table = match templates {
        Some(p) => TemplateTable::load(p)?,
        None => TemplateTable::standard(),
    };
    let run = build_dataset(sites, seed, &table, &CountPolicy::default())?;
    emit(&run.pairs, out)?;
    let frames: usize = run.sites.iter().map(|s| s.frames.len()).sum();
    println!(
        "{} sites, {} frames, {} pairs, {} inconsistencies",
        run.sites.len(),
        frames,
        run.pairs.len(),
        run.inconsistencies.len()
    );
    if run.inconsistencies.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for bad in run.inconsistencies.iter().take(10) {
            eprintln!("{}", serde_json::to_string(bad)?);
        }
        Ok(ExitCode::FAILURE)
    }
}
