//! `collect-pairs` and `train-editor`: build the editing corpus and fit the
//! learned editor on it.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use symreg_core::data::{Dataset, Provenance};
use symreg_core::guidance::{
    collect_crossover_pairs, collect_mutation_pairs, read_ndjson, train_learned_editor,
    write_ndjson, CollectConfig, CrossoverPair, GuideKind, MutationGuide, MutationPair,
    OracleGuide, TrainConfig, UniformGuide,
};
use symreg_core::rng::rng_for;

use crate::config::to_pretty;
use crate::error::CliError;
use crate::output::write_file;
use crate::search::load_editor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PairKind {
    Mutation,
    Crossover,
}

/// Configuration of `collect-pairs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectCmdConfig {
    pub kind: PairKind,
    pub count: usize,
    /// Guide that mutates the crossover population before pairing.
    pub population_guide: GuideKind,
    pub editor: Option<PathBuf>,
    pub collect: CollectConfig,
    pub out: PathBuf,
}

impl Default for CollectCmdConfig {
    fn default() -> Self {
        CollectCmdConfig {
            kind: PairKind::Mutation,
            count: 1000,
            population_guide: GuideKind::Uniform,
            editor: None,
            collect: CollectConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Counts reported next to the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectReport {
    pub kind: PairKind,
    pub requested: usize,
    pub collected: usize,
    pub attempts: usize,
}

pub const MUTATION_FILE: &str = "mutation_pairs.ndjson";
pub const CROSSOVER_FILE: &str = "crossover_pairs.ndjson";

fn write_corpus<P: Serialize>(
    dir: &Path,
    file: &str,
    pairs: &[P],
    datasets: &BTreeMap<String, Arc<Dataset>>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_ndjson(pairs, &mut buf).map_err(|e| CliError::io("serializing pairs", e))?;
    write_file(&dir.join(file), buf)?;
    for (reference, ds) in datasets {
        let mut csv = Vec::new();
        ds.write_csv(&mut csv)?;
        write_file(&dir.join(reference), csv)?;
    }
    Ok(())
}

pub fn cmd_collect(cfg: &CollectCmdConfig) -> Result<(), CliError> {
    if cfg.count == 0 {
        return Err(CliError::usage("count must be positive"));
    }
    let c = &cfg.collect;
    if c.max_dims == 0
        || c.points == 0
        || c.max_nodes < 3
        || !(c.low < c.high)
        || !(0.0..=1.0).contains(&c.mask_rate)
    {
        return Err(CliError::usage("invalid collection settings"));
    }
    write_file(&cfg.out.join("collect_config.json"), to_pretty(cfg))?;
    let report = match cfg.kind {
        PairKind::Mutation => {
            let corpus = collect_mutation_pairs(cfg.count, c);
            write_corpus(&cfg.out, MUTATION_FILE, &corpus.pairs, &corpus.datasets)?;
            CollectReport {
                kind: cfg.kind,
                requested: cfg.count,
                collected: corpus.pairs.len(),
                attempts: corpus.attempts,
            }
        }
        PairKind::Crossover => {
            let guide: Box<dyn MutationGuide> = match cfg.population_guide {
                GuideKind::Uniform => Box::new(UniformGuide),
                GuideKind::Oracle => Box::new(OracleGuide::new(c.max_nodes)),
                GuideKind::Learned => {
                    let path = cfg.editor.as_ref().ok_or_else(|| {
                        CliError::usage("the learned guide needs an editor snapshot (--editor)")
                    })?;
                    Box::new(load_editor(path)?)
                }
            };
            let corpus = collect_crossover_pairs(cfg.count, guide.as_ref(), c);
            write_corpus(&cfg.out, CROSSOVER_FILE, &corpus.pairs, &corpus.datasets)?;
            CollectReport {
                kind: cfg.kind,
                requested: cfg.count,
                collected: corpus.pairs.len(),
                attempts: corpus.attempts,
            }
        }
    };
    if report.collected < report.requested {
        eprintln!(
            "warning: collected {} of {} requested pairs within the attempt budget",
            report.collected, report.requested
        );
    }
    write_file(&cfg.out.join("collect_report.json"), to_pretty(&report))
}

/// Configuration of `train-editor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    /// NDJSON mutation corpus; dataset references resolve against its
    /// directory.
    pub mutation_pairs: Option<PathBuf>,
    pub crossover_pairs: Option<PathBuf>,
    /// Fraction of mutation pairs held out for the accuracy report.
    pub holdout: f64,
    pub seed: u64,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            mutation_pairs: None,
            crossover_pairs: None,
            holdout: 0.1,
            seed: 0,
            train: TrainConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_pairs: usize,
    pub holdout_pairs: usize,
    pub crossover_pairs: usize,
    pub holdout_accuracy: f64,
    pub chance_rate: f64,
}

fn read_pairs<P: DeserializeOwned>(path: &Path) -> Result<Vec<P>, CliError> {
    let f =
        fs::File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    read_ndjson(BufReader::new(f)).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_datasets<'a>(
    base: &Path,
    refs: impl Iterator<Item = &'a String>,
    into: &mut BTreeMap<String, Arc<Dataset>>,
) -> Result<(), CliError> {
    for r in refs {
        if into.contains_key(r) {
            continue;
        }
        let path = base.join(r);
        let f = fs::File::open(&path)
            .map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
        let prov = Provenance {
            task: r.clone(),
            ..Provenance::default()
        };
        let ds = Dataset::read_csv(f, prov)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        into.insert(r.clone(), Arc::new(ds));
    }
    Ok(())
}

fn parent(p: &Path) -> PathBuf {
    p.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn cmd_train(cfg: &TrainCmdConfig) -> Result<(), CliError> {
    let mpath = cfg
        .mutation_pairs
        .as_ref()
        .ok_or_else(|| CliError::usage("--mutation-pairs is required"))?;
    if !(0.0..1.0).contains(&cfg.holdout) {
        return Err(CliError::usage("holdout must lie in [0, 1)"));
    }
    let mut pairs: Vec<MutationPair> = read_pairs(mpath)?;
    let mut datasets = BTreeMap::new();
    load_datasets(
        &parent(mpath),
        pairs.iter().map(|p| &p.dataset_csv_ref),
        &mut datasets,
    )?;
    let xpairs: Vec<CrossoverPair> = match &cfg.crossover_pairs {
        Some(path) => {
            let x: Vec<CrossoverPair> = read_pairs(path)?;
            load_datasets(
                &parent(path),
                x.iter().map(|p| &p.dataset_csv_ref),
                &mut datasets,
            )?;
            x
        }
        None => Vec::new(),
    };

    pairs.shuffle(&mut rng_for(cfg.seed, &[0x7A1]));
    let n_hold = (pairs.len() as f64 * cfg.holdout).round() as usize;
    let (held, train) = pairs.split_at(n_hold);
    let guide = train_learned_editor(train, &xpairs, &datasets, &cfg.train)?;
    let (acc, chance) = if held.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        guide.masked_token_accuracy(held, &datasets)?
    };
    let report = TrainReport {
        train_pairs: train.len(),
        holdout_pairs: held.len(),
        crossover_pairs: xpairs.len(),
        holdout_accuracy: acc,
        chance_rate: chance,
    };
    write_file(&cfg.out.join("editor.json"), guide.to_json() + "\n")?;
    write_file(&cfg.out.join("train_report.json"), to_pretty(&report))
}
