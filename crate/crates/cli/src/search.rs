//! `run` and `bench`: evolutionary search on registry tasks or CSV data.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use symreg_core::data::{
    add_noise, registry, sample_seeded, task, BenchmarkTask, Dataset, Provenance, Suite,
};
use symreg_core::engine::{evolve, EngineConfig, RunRecord};
use symreg_core::eval::{fitness, is_recovered};
use symreg_core::expr::{ned, to_sexpr};
use symreg_core::guidance::{GuideKind, GuideSet, LearnedGuide};

use crate::config::{to_pretty, Guidance, GuideSource, Mode};
use crate::error::CliError;
use crate::output::{write_file, CsvTable};

/// Configuration of `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Registry task name; exclusive with `data`.
    pub task: Option<String>,
    /// CSV file with header `x1,...,xd,y`.
    pub data: Option<PathBuf>,
    pub mode: Mode,
    pub guidance: Guidance,
    /// Target noise level (uniform, half-width `noise · span(y)`).
    pub noise: f64,
    /// Independent runs with seeds `seed, seed + 1, ...`.
    pub repeat: usize,
    pub engine: EngineConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: None,
            data: None,
            mode: Mode::NoGuide,
            guidance: Guidance::default(),
            noise: 0.0,
            repeat: 1,
            engine: EngineConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Configuration of `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Suite name (e.g. `nguyen`); tasks listed in `tasks` are added.
    pub suite: Option<String>,
    pub tasks: Vec<String>,
    pub modes: Vec<Mode>,
    pub guidance: Guidance,
    pub noise: f64,
    /// When non-empty, also sweep these noise levels into a noise curve.
    pub noise_levels: Vec<f64>,
    pub repeat: usize,
    pub engine: EngineConfig,
    pub out: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            suite: None,
            tasks: Vec::new(),
            modes: vec![Mode::NoGuide],
            guidance: Guidance::default(),
            noise: 0.0,
            noise_levels: Vec::new(),
            repeat: 20,
            engine: EngineConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Guide wiring for an ablation mode.
pub fn guides_for(mode: Mode, guidance: &Guidance, max_nodes: usize) -> Result<GuideSet, CliError> {
    let guided = match guidance.guide {
        GuideSource::Oracle => GuideKind::Oracle,
        GuideSource::Learned => GuideKind::Learned,
    };
    let (m, c) = match mode {
        Mode::NoGuide => (GuideKind::Uniform, GuideKind::Uniform),
        Mode::MutationOnly => (guided, GuideKind::Uniform),
        Mode::MutationAndCrossover => (guided, guided),
    };
    let learned = if m == GuideKind::Learned || c == GuideKind::Learned {
        let path = guidance.editor.as_ref().ok_or_else(|| {
            CliError::usage("the learned guide needs an editor snapshot (--editor)")
        })?;
        Some(Arc::new(load_editor(path)?))
    } else {
        None
    };
    Ok(GuideSet::from_kinds(m, c, learned, max_nodes)?)
}

pub fn load_editor(path: &Path) -> Result<LearnedGuide, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    Ok(LearnedGuide::from_json(&text)?)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// The problem a run searches on, plus the clean data used for reporting.
struct Problem {
    name: String,
    task: Option<BenchmarkTask>,
    clean: Dataset,
    noisy: Dataset,
}

fn load_problem(
    task_name: Option<&str>,
    data: Option<&Path>,
    noise: f64,
    seed: u64,
) -> Result<Problem, CliError> {
    let (name, task, clean) = match (task_name, data) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage("give either --task or --data, not both"))
        }
        (None, None) => return Err(CliError::usage("one of --task or --data is required")),
        (Some(t), None) => {
            let t = task(t)?;
            let ds = sample_seeded(&t, seed)?;
            (t.name.clone(), Some(t), ds)
        }
        (None, Some(path)) => {
            let file = fs::File::open(path)
                .map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
            let name = path
                .file_stem()
                .map_or("data".into(), |s| s.to_string_lossy().into_owned());
            let prov = Provenance {
                task: name.clone(),
                seed,
                noise: 0.0,
            };
            let ds = Dataset::read_csv(file, prov)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            (name, None, ds)
        }
    };
    let noisy = add_noise(&clean, noise, seed)?;
    Ok(Problem {
        name,
        task,
        clean,
        noisy,
    })
}

/// Outcome of one run reduced to reporting quantities.
#[derive(Debug, Clone, PartialEq)]
struct RunRow {
    seed: u64,
    r2_train: f64,
    r2_clean: f64,
    nodes: usize,
    time_s: f64,
    solved_generation: Option<usize>,
    recovered: Option<bool>,
    ned: Option<f64>,
}

fn summarize_run(rec: &RunRecord, p: &Problem) -> Result<RunRow, CliError> {
    let r2_clean = fitness(&rec.best_tree, &p.clean)
        .map_err(|e| CliError::Internal(e.to_string()))?
        .r2;
    let (recovered, dist) = match &p.task {
        Some(t) => (
            Some(is_recovered(&rec.best_tree, &t.target, &p.clean)),
            Some(ned(&rec.best_tree, &t.target)),
        ),
        None => (None, None),
    };
    Ok(RunRow {
        seed: rec.seed,
        r2_train: rec.best_fitness.r2,
        r2_clean,
        nodes: rec.best_tree.node_count(),
        time_s: rec.wall_ms as f64 / 1000.0,
        solved_generation: rec.solved_generation,
        recovered,
        ned: dist,
    })
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Sample standard deviation (0 for a single value).
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn write_run_artifacts(dir: &Path, stem: &str, rec: &RunRecord) -> Result<(), CliError> {
    write_file(&dir.join(format!("{stem}.json")), rec.to_json() + "\n")?;
    write_file(
        &dir.join(format!("{stem}.sexpr")),
        to_sexpr(&rec.best_tree) + "\n",
    )?;
    let mut csv = Vec::new();
    rec.write_generations_csv(&mut csv)?;
    write_file(&dir.join(format!("{stem}_generations.csv")), csv)
}

pub fn cmd_run(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.engine.validate()?;
    if cfg.repeat == 0 {
        return Err(CliError::usage("repeat must be positive"));
    }
    let guides = guides_for(cfg.mode, &cfg.guidance, cfg.engine.max_nodes)?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::io(format!("creating {}", cfg.out.display()), e))?;
    write_file(&cfg.out.join("config.json"), to_pretty(cfg))?;

    let mut table = CsvTable::new(&[
        "task",
        "mode",
        "seed",
        "r2_train",
        "r2_clean",
        "nodes",
        "time_s",
        "solved_generation",
        "recovered",
        "ned",
    ]);
    let mut rows = Vec::new();
    let mut name = String::new();
    for r in 0..cfg.repeat {
        let seed = cfg.engine.seed.wrapping_add(r as u64);
        let problem = load_problem(cfg.task.as_deref(), cfg.data.as_deref(), cfg.noise, seed)?;
        let engine = EngineConfig {
            seed,
            ..cfg.engine.clone()
        };
        let rec = evolve(&problem.noisy, &engine, &guides)?;
        let stem = format!("{}_s{seed}", file_stem(&problem.name));
        write_run_artifacts(&cfg.out, &stem, &rec)?;
        let row = summarize_run(&rec, &problem)?;
        table.push(vec![
            problem.name.clone(),
            cfg.mode.name().into(),
            seed.to_string(),
            num(row.r2_train),
            num(row.r2_clean),
            row.nodes.to_string(),
            row.time_s.to_string(),
            row.solved_generation
                .map(|g| g.to_string())
                .unwrap_or_default(),
            row.recovered.map(|b| b.to_string()).unwrap_or_default(),
            row.ned.map(num).unwrap_or_default(),
        ]);
        name = problem.name;
        rows.push(row);
    }
    let col = |f: fn(&RunRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    table.push(vec![
        name,
        cfg.mode.name().into(),
        "mean".into(),
        num(mean(&col(|r| r.r2_train))),
        num(mean(&col(|r| r.r2_clean))),
        mean(&col(|r| r.nodes as f64)).to_string(),
        mean(&col(|r| r.time_s)).to_string(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    table.write(&cfg.out.join("summary.csv"))
}

fn bench_tasks(cfg: &BenchConfig) -> Result<Vec<BenchmarkTask>, CliError> {
    let mut tasks: Vec<BenchmarkTask> = match &cfg.suite {
        Some(s) => {
            let suite: Suite = s
                .parse()
                .map_err(|_| CliError::usage(format!("unknown suite `{s}`")))?;
            registry()
                .into_iter()
                .filter(|t| t.suite == suite)
                .collect()
        }
        None => Vec::new(),
    };
    for name in &cfg.tasks {
        if !tasks.iter().any(|t| &t.name == name) {
            tasks.push(task(name)?);
        }
    }
    if tasks.is_empty() {
        return Err(CliError::usage(
            "the benchmark selects no tasks (give --suite or --task)",
        ));
    }
    Ok(tasks)
}

pub fn cmd_bench(cfg: &BenchConfig) -> Result<(), CliError> {
    cfg.engine.validate()?;
    if cfg.repeat == 0 {
        return Err(CliError::usage("repeat must be positive"));
    }
    if cfg.modes.is_empty() {
        return Err(CliError::usage("at least one mode is required"));
    }
    let tasks = bench_tasks(cfg)?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::io(format!("creating {}", cfg.out.display()), e))?;
    write_file(&cfg.out.join("config.json"), to_pretty(cfg))?;

    let mut summary = CsvTable::new(&[
        "task",
        "mode",
        "runs",
        "mean_r2",
        "std",
        "mean_nodes",
        "mean_time_s",
        "recovery_rate",
        "mean_ned",
    ]);
    let mut runs = CsvTable::new(&[
        "task",
        "mode",
        "noise",
        "seed",
        "r2_train",
        "r2_clean",
        "nodes",
        "time_s",
        "recovered",
        "ned",
    ]);
    let mut curve = CsvTable::new(&["task", "mode", "level", "mean_r2", "std"]);

    for t in &tasks {
        for &mode in &cfg.modes {
            let guides = guides_for(mode, &cfg.guidance, cfg.engine.max_nodes)?;
            let mut levels = vec![cfg.noise];
            levels.extend(cfg.noise_levels.iter().copied().filter(|l| *l != cfg.noise));
            for (li, &level) in levels.iter().enumerate() {
                let mut rows = Vec::new();
                for r in 0..cfg.repeat {
                    let seed = cfg.engine.seed.wrapping_add(r as u64);
                    let problem = load_problem(Some(&t.name), None, level, seed)?;
                    let engine = EngineConfig {
                        seed,
                        ..cfg.engine.clone()
                    };
                    let rec = evolve(&problem.noisy, &engine, &guides)?;
                    let row = summarize_run(&rec, &problem)?;
                    runs.push(vec![
                        t.name.clone(),
                        mode.name().into(),
                        level.to_string(),
                        seed.to_string(),
                        num(row.r2_train),
                        num(row.r2_clean),
                        row.nodes.to_string(),
                        row.time_s.to_string(),
                        row.recovered.map(|b| b.to_string()).unwrap_or_default(),
                        row.ned.map(num).unwrap_or_default(),
                    ]);
                    rows.push(row);
                }
                let r2: Vec<f64> = rows.iter().map(|r| r.r2_clean).collect();
                if li == 0 {
                    let recovered = rows.iter().filter(|r| r.recovered == Some(true)).count();
                    let neds: Vec<f64> = rows.iter().filter_map(|r| r.ned).collect();
                    summary.push(vec![
                        t.name.clone(),
                        mode.name().into(),
                        rows.len().to_string(),
                        num(mean(&r2)),
                        num(std_dev(&r2)),
                        mean(&rows.iter().map(|r| r.nodes as f64).collect::<Vec<_>>()).to_string(),
                        mean(&rows.iter().map(|r| r.time_s).collect::<Vec<_>>()).to_string(),
                        (recovered as f64 / rows.len() as f64).to_string(),
                        num(mean(&neds)),
                    ]);
                }
                if !cfg.noise_levels.is_empty() && cfg.noise_levels.contains(&level) {
                    curve.push(vec![
                        t.name.clone(),
                        mode.name().into(),
                        level.to_string(),
                        num(mean(&r2)),
                        num(std_dev(&r2)),
                    ]);
                }
            }
        }
    }
    summary.write(&cfg.out.join("bench.csv"))?;
    runs.write(&cfg.out.join("runs.csv"))?;
    if !cfg.noise_levels.is_empty() {
        curve.write(&cfg.out.join("noise_curve.csv"))?;
    }
    Ok(())
}
