//! Harvesting supervised edit pairs for training an editor.
//!
//! Mutation pairs come from relaxing random expressions toward the data of
//! a random target; crossover pairs from random subtree swaps inside a
//! guided-mutated population. Every stored pair is oriented so that the
//! edit it describes improves fitness.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constopt::{minimize_params, optimize_constants, OptConfig};
use crate::data::{sample, summarize, BenchmarkTask, Dataset, SamplingSpec, Suite};
use crate::eval::{fitness, r2_or_null};
use crate::expr::{
    decode, grow_tree, linearize, simplify, swap_subtrees, to_infix, ExprTree, Token, TokenSeq,
};
use crate::relax::{discretize, relax_nodes, relaxed_mse, select_mutation_nodes};
use crate::rng::{rng_for, Rng as SeededRng};

use super::{fill_masks, GuideError, MutationGuide, MutationQuery};

/// A masked-token training example: filling `mask_positions` of
/// `input_seq` with `target_tokens` yields `target_seq`, which fits the
/// referenced data strictly better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationPair {
    /// Unmasked input expression, constants included.
    pub input_seq: TokenSeq,
    pub mask_positions: Vec<usize>,
    pub target_tokens: BTreeMap<usize, Token>,
    /// The improved expression, constants included.
    pub target_seq: TokenSeq,
    pub dataset_csv_ref: String,
    #[serde(with = "r2_or_null")]
    pub r2_input: f64,
    #[serde(with = "r2_or_null")]
    pub r2_target: f64,
}

impl MutationPair {
    /// The model input: `input_seq` with the changed positions masked.
    pub fn masked(&self) -> TokenSeq {
        self.input_seq
            .mask(&self.mask_positions)
            .expect("mask positions lie inside the input")
    }
}

/// A crossover training example: swapping the subtrees rooted at
/// `ya_index` / `yb_index` of the two halves of `joint_seq` raises the best
/// constant-fitted R² from `parent_best` to `offspring_best`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPair {
    pub joint_seq: TokenSeq,
    pub ya_index: usize,
    pub yb_index: usize,
    pub dataset_csv_ref: String,
    #[serde(with = "r2_or_null")]
    pub parent_best: f64,
    #[serde(with = "r2_or_null")]
    pub offspring_best: f64,
}

impl CrossoverPair {
    fn one_hot(index: usize, len: usize) -> Vec<u8> {
        (0..len).map(|i| u8::from(i == index)).collect()
    }

    pub fn halves(&self) -> (TokenSeq, TokenSeq) {
        self.joint_seq
            .split_joint()
            .expect("joint sequence has a separator")
    }

    /// One-hot root label over the first half.
    pub fn ya(&self) -> Vec<u8> {
        Self::one_hot(self.ya_index, self.halves().0.len())
    }

    /// One-hot root label over the second half.
    pub fn yb(&self) -> Vec<u8> {
        Self::one_hot(self.yb_index, self.halves().1.len())
    }
}

/// Settings for random targets, random starting expressions and the
/// crossover population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub max_dims: usize,
    /// Size bound for random targets and starting expressions.
    pub max_nodes: usize,
    pub points: usize,
    pub low: f64,
    pub high: f64,
    /// Targets whose values exceed this magnitude are skipped.
    pub max_abs_y: f64,
    /// Population size for crossover collection.
    pub population: usize,
    pub mask_rate: f64,
    /// Offspring size bound for crossover collection.
    pub crossover_max_nodes: usize,
    pub opt: OptConfig,
    pub seed: u64,
    /// Attempts evaluated together (in parallel) per round.
    pub batch: usize,
    /// Give up after this many attempts per requested pair.
    pub attempts_per_pair: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            max_dims: 2,
            max_nodes: 15,
            points: 50,
            low: -2.0,
            high: 2.0,
            max_abs_y: 1e6,
            population: 16,
            mask_rate: 0.15,
            crossover_max_nodes: 60,
            opt: OptConfig::default(),
            seed: 0,
            batch: 64,
            attempts_per_pair: 200,
        }
    }
}

/// Collected pairs plus the datasets they reference.
#[derive(Debug, Clone, Default)]
pub struct Corpus<P> {
    pub pairs: Vec<P>,
    pub datasets: BTreeMap<String, Arc<Dataset>>,
    /// Attempts made, including discarded ones.
    pub attempts: usize,
}

/// Mask each position independently with probability `rate`, forcing at
/// least one mask. Returns sorted positions.
pub fn sample_mask_positions<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<usize> {
    let mut out: Vec<usize> = (0..len)
        .filter(|_| rng.random_bool(rate.clamp(0.0, 1.0)))
        .collect();
    if out.is_empty() && len > 0 {
        out.push(rng.random_range(0..len));
    }
    out
}

fn randomize_constants(tree: &ExprTree, rng: &mut SeededRng) -> ExprTree {
    let values: Vec<f64> = (0..tree.constant_positions().len())
        .map(|_| rng.random_range(-2.0..=2.0))
        .collect();
    tree.with_constants(&values)
}

/// Random target plus its dataset, or `None` when the draw is unusable
/// (outside its domain, constant, or too large).
fn random_problem(cfg: &CollectConfig, rng: &mut SeededRng, tag: &str) -> Option<(usize, Dataset)> {
    let dims = rng.random_range(1..=cfg.max_dims.max(1));
    let target = randomize_constants(&grow_tree(rng, dims, cfg.max_nodes), rng);
    let mut spec = SamplingSpec::uniform(cfg.low, cfg.high, cfg.points, dims);
    spec.seed = rng.random();
    let task = BenchmarkTask {
        name: tag.to_string(),
        expression: to_infix(&target),
        target,
        spec,
        suite: Suite::Others,
        approximate_source: false,
    };
    let ds = sample(&task).ok()?;
    let summary = summarize(&ds);
    let spread_ok = summary.y_std() > 1e-9;
    let size_ok = ds.y().iter().all(|v| v.abs() <= cfg.max_abs_y);
    (spread_ok && size_ok).then_some((dims, ds))
}

fn mutation_attempt(cfg: &CollectConfig, k: u64) -> Option<(MutationPair, Dataset)> {
    let mut rng = rng_for(cfg.seed, &[0x3017, k]);
    let tag = format!("datasets/mut-{k:08}.csv");
    let (dims, ds) = random_problem(cfg, &mut rng, &tag)?;
    let b = simplify(&randomize_constants(
        &grow_tree(&mut rng, dims, cfg.max_nodes),
        &mut rng,
    ));
    let r2_b = fitness(&b, &ds).ok()?.r2;
    let nodes = select_mutation_nodes(&b, &mut rng);
    if nodes.is_empty() {
        return None;
    }
    let re = relax_nodes(&b, &nodes, dims).ok()?;
    let theta0 = re.params();
    let objective = |v: &[f64]| relaxed_mse(&re, &ds, v);
    let theta = minimize_params(&objective, &theta0, &cfg.opt).ok()?;
    let c = discretize(&re, &theta);
    let r2_c = fitness(&c, &ds).ok()?.r2;
    let (input, target, r2_input, r2_target) = if r2_c > r2_b {
        (b, c, r2_b, r2_c)
    } else if r2_b > r2_c {
        (c, b, r2_c, r2_b)
    } else {
        return None;
    };
    let s_in = linearize(&input);
    let s_out = linearize(&target);
    let same_shape = s_in.len() == s_out.len()
        && (0..s_in.len()).all(|i| s_in.token(i).arity() == s_out.token(i).arity());
    if !same_shape {
        return None;
    }
    let changed: Vec<usize> = (0..s_in.len())
        .filter(|&i| s_in.token(i) != s_out.token(i))
        .collect();
    if changed.is_empty() {
        return None;
    }
    let mut ds = ds;
    ds.provenance.task = tag.clone();
    Some((
        MutationPair {
            target_tokens: changed.iter().map(|&i| (i, s_out.token(i))).collect(),
            mask_positions: changed,
            input_seq: s_in,
            target_seq: s_out,
            dataset_csv_ref: tag,
            r2_input,
            r2_target,
        },
        ds,
    ))
}

fn crossover_attempt(
    cfg: &CollectConfig,
    guide: &dyn MutationGuide,
    k: u64,
) -> Option<(CrossoverPair, Dataset)> {
    let mut rng = rng_for(cfg.seed, &[0xC055, k]);
    let tag = format!("datasets/xo-{k:08}.csv");
    let (dims, ds) = random_problem(cfg, &mut rng, &tag)?;
    let summary = summarize(&ds);
    let policy = guide.default_policy();
    let population: Vec<ExprTree> = (0..cfg.population.max(2))
        .map(|_| grow_tree(&mut rng, dims, cfg.max_nodes))
        .collect();
    let mutated: Vec<ExprTree> = population
        .iter()
        .map(|e| {
            let s = linearize(e);
            let positions = sample_mask_positions(s.len(), cfg.mask_rate, &mut rng);
            let q = MutationQuery {
                masked: s.mask(&positions).expect("positions in range"),
                summary: &summary,
                data: &ds,
            };
            let r = guide.guide_mutation(&q);
            fill_masks(&q, &r, policy, &mut rng)
        })
        .collect();
    let i1 = rng.random_range(0..mutated.len());
    let mut i2 = rng.random_range(0..mutated.len() - 1);
    if i2 >= i1 {
        i2 += 1;
    }
    let (e1, e2) = (&mutated[i1], &mutated[i2]);
    let u1 = rng.random_range(0..e1.len());
    let u2 = rng.random_range(0..e2.len());
    let swapped = swap_subtrees(e1, u1, e2, u2, cfg.crossover_max_nodes).ok()?;
    if swapped.any_rejected() {
        return None;
    }
    let (e3, e4) = (swapped.first, swapped.second);
    let fitted = |t: &ExprTree| optimize_constants(t, &ds, &cfg.opt).1.r2;
    let parents = fitted(e1).max(fitted(e2));
    let offspring = fitted(&e3).max(fitted(&e4));
    let (a, b, parent_best, offspring_best) = if offspring > parents {
        (e1.clone(), e2.clone(), parents, offspring)
    } else if parents > offspring {
        (e3, e4, offspring, parents)
    } else {
        return None;
    };
    let mut ds = ds;
    ds.provenance.task = tag.clone();
    Some((
        CrossoverPair {
            joint_seq: TokenSeq::joint(&linearize(&a), &linearize(&b)),
            ya_index: u1,
            yb_index: u2,
            dataset_csv_ref: tag,
            parent_best,
            offspring_best,
        },
        ds,
    ))
}

fn collect<P, F, K>(n: usize, cfg: &CollectConfig, attempt: F, key: K) -> Corpus<P>
where
    P: Send,
    F: Fn(u64) -> Option<(P, Dataset)> + Sync,
    K: Fn(&P) -> String,
{
    let mut corpus = Corpus {
        pairs: Vec::with_capacity(n),
        datasets: BTreeMap::new(),
        attempts: 0,
    };
    let mut seen = HashSet::new();
    let max_attempts = n.saturating_mul(cfg.attempts_per_pair.max(1));
    let batch = cfg.batch.max(1);
    while corpus.pairs.len() < n && corpus.attempts < max_attempts {
        let start = corpus.attempts as u64;
        let results: Vec<Option<(P, Dataset)>> = (start..start + batch as u64)
            .into_par_iter()
            .map(&attempt)
            .collect();
        for r in results {
            corpus.attempts += 1;
            let Some((pair, ds)) = r else { continue };
            if corpus.pairs.len() >= n || !seen.insert(key(&pair)) {
                continue;
            }
            corpus
                .datasets
                .insert(ds.provenance.task.clone(), Arc::new(ds));
            corpus.pairs.push(pair);
        }
    }
    corpus
}

/// Collect up to `n` mutation pairs (fewer only if the attempt budget runs
/// out). Pairs whose two sides tie exactly, whose sides differ in shape, or
/// whose masked input and targets duplicate an earlier pair are dropped.
pub fn collect_mutation_pairs(n: usize, cfg: &CollectConfig) -> Corpus<MutationPair> {
    collect(
        n,
        cfg,
        |k| mutation_attempt(cfg, k),
        |p: &MutationPair| format!("{}#{:?}", p.masked(), p.target_tokens),
    )
}

/// Collect up to `n` crossover pairs, mutating each population with `guide`
/// first. Exact ties and size-rejected swaps are dropped.
pub fn collect_crossover_pairs(
    n: usize,
    guide: &dyn MutationGuide,
    cfg: &CollectConfig,
) -> Corpus<CrossoverPair> {
    collect(
        n,
        cfg,
        |k| crossover_attempt(cfg, guide, k),
        |p: &CrossoverPair| format!("{}#{}#{}", p.joint_seq, p.ya_index, p.yb_index),
    )
}

/// Recompute `(r2_input, r2_target)` of a stored mutation pair.
pub fn reevaluate_mutation_pair(p: &MutationPair, ds: &Dataset) -> Result<(f64, f64), GuideError> {
    let r2 = |s: &TokenSeq| -> Result<f64, GuideError> {
        let t = decode(s).map_err(|e| GuideError::InvalidQuery(e.to_string()))?;
        fitness(&t, ds)
            .map(|f| f.r2)
            .map_err(|e| GuideError::InvalidQuery(e.to_string()))
    };
    Ok((r2(&p.input_seq)?, r2(&p.target_seq)?))
}

/// Recompute `(parent_best, offspring_best)` of a stored crossover pair by
/// refitting constants with `opt` (the configuration used at collection).
pub fn reevaluate_crossover_pair(
    p: &CrossoverPair,
    ds: &Dataset,
    opt: &OptConfig,
) -> Result<(f64, f64), GuideError> {
    let (sa, sb) = p.halves();
    let bad = |e: crate::expr::ExprError| GuideError::InvalidQuery(e.to_string());
    let a = decode(&sa).map_err(bad)?;
    let b = decode(&sb).map_err(bad)?;
    let s = swap_subtrees(&a, p.ya_index, &b, p.yb_index, usize::MAX).map_err(bad)?;
    let fitted = |t: &ExprTree| optimize_constants(t, ds, opt).1.r2;
    Ok((
        fitted(&a).max(fitted(&b)),
        fitted(&s.first).max(fitted(&s.second)),
    ))
}

/// Write one JSON record per line.
pub fn write_ndjson<T: Serialize, W: Write>(items: &[T], mut w: W) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Read one JSON record per non-empty line.
pub fn read_ndjson<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>, GuideError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| GuideError::Snapshot(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| GuideError::Snapshot(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
