//! Command-line front end: `run`, `bench`, `collect-pairs`, `train-editor`,
//! `dynsys` and `efficiency`.
//!
//! Every subcommand builds its configuration from defaults, an optional
//! JSON file (`--config`) and flags, in that order of increasing priority.
//! `--dump-config` prints the effective configuration and exits; the
//! printed JSON is accepted back by `--config`.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod output;
pub mod pairs;
pub mod search;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use symreg_core::guidance::GuideKind;

use config::{layered, to_pretty, GuideSource, Mode};
use dynamics::{cmd_dynsys, cmd_efficiency, DynsysConfig, EfficiencyConfig, FieldSource};
use error::{CliError, EXIT_OK, EXIT_USAGE};
use pairs::{cmd_collect, cmd_train, CollectCmdConfig, PairKind, TrainCmdConfig};
use search::{cmd_bench, cmd_run, BenchConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "symreg",
    version,
    about = "Guided genetic-programming symbolic regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    /// Base seed (default: $GESR_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Record zero wall-clock times so outputs are byte-reproducible.
    #[arg(long, global = true)]
    pub no_timestamps: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Search-engine flags shared by `run`, `bench` and `dynsys`.
#[derive(Debug, Clone, Args)]
pub struct EngineFlags {
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long)]
    pub elite: Option<usize>,
    #[arg(long)]
    pub mask_rate: Option<f64>,
    #[arg(long)]
    pub crossover_rate: Option<f64>,
    /// Ablation mode: which operators are guided.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Guide used by the guided operators.
    #[arg(long, value_enum)]
    pub guide: Option<GuideSource>,
    /// Learned-editor snapshot.
    #[arg(long)]
    pub editor: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search one registry task or CSV dataset.
    Run {
        #[arg(long)]
        task: Option<String>,
        /// CSV with header x1,...,xd,y.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        repeat: Option<usize>,
        #[command(flatten)]
        engine: EngineFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Run a suite (or task list) across modes and repeats.
    Bench {
        #[arg(long)]
        suite: Option<String>,
        /// Add a task (repeatable).
        #[arg(long = "task")]
        tasks: Vec<String>,
        /// Modes to compare (repeatable).
        #[arg(long = "modes", value_enum)]
        modes: Vec<Mode>,
        #[arg(long)]
        noise: Option<f64>,
        /// Noise levels for the noise curve (repeatable).
        #[arg(long = "noise-level")]
        noise_levels: Vec<f64>,
        #[arg(long)]
        repeat: Option<usize>,
        #[command(flatten)]
        engine: EngineFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Collect mutation or crossover training pairs.
    CollectPairs {
        #[arg(long, value_enum)]
        kind: Option<PairKind>,
        #[arg(long)]
        count: Option<usize>,
        /// Guide that mutates the crossover population.
        #[arg(long, value_enum)]
        population_guide: Option<PopulationGuide>,
        #[arg(long)]
        editor: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the learned editor on collected pairs.
    TrainEditor {
        #[arg(long)]
        mutation_pairs: Option<PathBuf>,
        #[arg(long)]
        crossover_pairs: Option<PathBuf>,
        #[arg(long)]
        holdout: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Chaotic-system vector-field benchmark.
    Dynsys {
        /// System name (repeatable; default: all).
        #[arg(long = "system")]
        systems: Vec<String>,
        #[arg(long, value_enum)]
        source: Option<FieldSource>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        engine: EngineFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo check of the success-probability and waiting-time laws.
    Efficiency {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        lambda: Option<u32>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        trials: Option<u64>,
        /// Sweep the standard parameter grid.
        #[arg(long)]
        grid: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PopulationGuide {
    Uniform,
    Oracle,
    Learned,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_engine(flags: EngineFlags, cfg: &mut symreg_core::engine::EngineConfig) {
    set(&mut cfg.population, flags.population);
    set(&mut cfg.generations, flags.generations);
    set(&mut cfg.max_nodes, flags.max_nodes);
    set(&mut cfg.elite, flags.elite);
    set(&mut cfg.mask_rate, flags.mask_rate);
    set(&mut cfg.crossover_rate, flags.crossover_rate);
}

fn apply_guidance(flags: &EngineFlags, mode: &mut Mode, g: &mut config::Guidance) {
    set(mode, flags.mode);
    set(&mut g.guide, flags.guide);
    if flags.editor.is_some() {
        g.editor = flags.editor.clone();
    }
}

fn prepare<T>(common: &Common, seed_path: &str) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    if let Some(n) = common.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be positive"));
        }
        // A second initialization (e.g. in tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    layered(common.config.as_deref(), seed_path, common.seed)
}

/// Print the configuration when asked; otherwise run `f`.
fn finish<T: Serialize>(
    common: &Common,
    cfg: &T,
    f: impl FnOnce(&T) -> Result<(), CliError>,
) -> Result<(), CliError> {
    if common.dump_config {
        print!("{}", to_pretty(cfg));
        Ok(())
    } else {
        f(cfg)
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            task,
            data,
            noise,
            repeat,
            engine,
            common,
        } => {
            let mut cfg: RunConfig = prepare(&common, "/engine/seed")?;
            if task.is_some() || data.is_some() {
                cfg.task = task;
                cfg.data = data;
            }
            set(&mut cfg.noise, noise);
            set(&mut cfg.repeat, repeat);
            apply_guidance(&engine, &mut cfg.mode, &mut cfg.guidance);
            apply_engine(engine, &mut cfg.engine);
            if common.no_timestamps {
                cfg.engine.timestamps = false;
            }
            set(&mut cfg.out, common.out.clone());
            finish(&common, &cfg, cmd_run)
        }
        Command::Bench {
            suite,
            tasks,
            modes,
            noise,
            noise_levels,
            repeat,
            engine,
            common,
        } => {
            let mut cfg: BenchConfig = prepare(&common, "/engine/seed")?;
            if suite.is_some() {
                cfg.suite = suite;
            }
            if !tasks.is_empty() {
                cfg.tasks = tasks;
            }
            if !modes.is_empty() {
                cfg.modes = modes;
            }
            if !noise_levels.is_empty() {
                cfg.noise_levels = noise_levels;
            }
            set(&mut cfg.noise, noise);
            set(&mut cfg.repeat, repeat);
            let mut unused = Mode::NoGuide;
            apply_guidance(&engine, &mut unused, &mut cfg.guidance);
            if engine.mode.is_some() {
                return Err(CliError::usage("bench takes --modes, not --mode"));
            }
            apply_engine(engine, &mut cfg.engine);
            if common.no_timestamps {
                cfg.engine.timestamps = false;
            }
            set(&mut cfg.out, common.out.clone());
            finish(&common, &cfg, cmd_bench)
        }
        Command::CollectPairs {
            kind,
            count,
            population_guide,
            editor,
            common,
        } => {
            let mut cfg: CollectCmdConfig = prepare(&common, "/collect/seed")?;
            set(&mut cfg.kind, kind);
            set(&mut cfg.count, count);
            set(
                &mut cfg.population_guide,
                population_guide.map(|g| match g {
                    PopulationGuide::Uniform => GuideKind::Uniform,
                    PopulationGuide::Oracle => GuideKind::Oracle,
                    PopulationGuide::Learned => GuideKind::Learned,
                }),
            );
            if editor.is_some() {
                cfg.editor = editor;
            }
            set(&mut cfg.out, common.out.clone());
            finish(&common, &cfg, cmd_collect)
        }
        Command::TrainEditor {
            mutation_pairs,
            crossover_pairs,
            holdout,
            common,
        } => {
            let mut cfg: TrainCmdConfig = prepare(&common, "/seed")?;
            if mutation_pairs.is_some() {
                cfg.mutation_pairs = mutation_pairs;
            }
            if crossover_pairs.is_some() {
                cfg.crossover_pairs = crossover_pairs;
            }
            set(&mut cfg.holdout, holdout);
            set(&mut cfg.out, common.out.clone());
            finish(&common, &cfg, cmd_train)
        }
        Command::Dynsys {
            systems,
            source,
            noise,
            window,
            horizon,
            steps,
            engine,
            common,
        } => {
            let mut cfg: DynsysConfig = prepare(&common, "/engine/seed")?;
            if !systems.is_empty() {
                cfg.systems = systems;
            }
            set(&mut cfg.source, source);
            set(&mut cfg.noise, noise);
            set(&mut cfg.window, window);
            set(&mut cfg.horizon, horizon);
            if steps.is_some() {
                cfg.steps = steps;
            }
            apply_guidance(&engine, &mut cfg.mode, &mut cfg.guidance);
            apply_engine(engine, &mut cfg.engine);
            if common.no_timestamps {
                cfg.engine.timestamps = false;
            }
            set(&mut cfg.out, common.out.clone());
            finish(&common, &cfg, cmd_dynsys)
        }
        Command::Efficiency {
            alpha,
            beta,
            lambda,
            k,
            trials,
            grid,
            common,
        } => {
            let mut cfg: EfficiencyConfig = prepare(&common, "/trial/seed")?;
            set(&mut cfg.trial.alpha, alpha);
            set(&mut cfg.trial.beta, beta);
            set(&mut cfg.trial.lambda, lambda);
            set(&mut cfg.trial.k, k);
            set(&mut cfg.trial.trials, trials);
            if grid {
                cfg.grid = true;
            }
            set(&mut cfg.out, common.out.clone());
            finish(&common, &cfg, cmd_efficiency)
        }
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
