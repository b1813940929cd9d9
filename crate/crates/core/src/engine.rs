//! The guided genetic-programming loop and the success-probability
//! simulator.
//!
//! Each generation every individual is linearized, partially masked and
//! re-filled by the mutation guide; a fraction of the mutated population is
//! paired for subtree exchange at roots chosen by the crossover guide; all
//! constants are refitted by BFGS; and the next population keeps the best
//! individuals seen so far plus the best of the new generation.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constopt::{optimize_constants, OptConfig};
use crate::data::{summarize, DataSummary, Dataset};
use crate::eval::{fitness, EvalError, Fitness, OrdF64};
use crate::expr::{grow_tree, linearize, swap_subtrees, to_sexpr, ExprTree, Token, TokenSeq};
use crate::guidance::{
    choose, fill_masks, sample_mask_positions, CrossoverGuide, CrossoverQuery, FillPolicy,
    GuideError, GuideKind, GuideSet, MutationGuide, MutationQuery,
};
use crate::rng::{derive_seed, rng_for};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid probability: {0}")]
    InvalidProbability(String),
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Parameters of one search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub population: usize,
    pub generations: usize,
    /// Per-token mask probability ρ (at least one mask per mutated
    /// individual); 0 disables mutation.
    pub mask_rate: f64,
    /// Fraction γ of the population paired for crossover.
    pub crossover_rate: f64,
    /// Number of elites K carried over unchanged.
    pub elite: usize,
    pub max_nodes: usize,
    /// Probability that an individual is mutated in a generation.
    pub mutation_prob: f64,
    pub mutation_guide: GuideKind,
    pub crossover_guide: GuideKind,
    /// Overrides the guide's preferred policy for mask fills.
    pub fill_policy: Option<FillPolicy>,
    /// Overrides the guide's preferred policy for crossover roots.
    pub crossover_policy: Option<FillPolicy>,
    pub opt: OptConfig,
    pub seed: u64,
    /// A run counts as solved once the best R² reaches this value.
    pub solve_threshold: f64,
    /// Stop as soon as the run is solved.
    pub early_stop: bool,
    /// Record wall-clock time per generation (0 when disabled).
    pub timestamps: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population: 500,
            generations: 60,
            mask_rate: 0.15,
            crossover_rate: 0.5,
            elite: 50,
            max_nodes: 60,
            mutation_prob: 1.0,
            mutation_guide: GuideKind::Uniform,
            crossover_guide: GuideKind::Uniform,
            fill_policy: None,
            crossover_policy: None,
            opt: OptConfig {
                max_iters: 50,
                restarts: 2,
                ..OptConfig::default()
            },
            seed: 0,
            solve_threshold: 1.0 - 1e-9,
            early_stop: true,
            timestamps: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        if self.population == 0 {
            return bad("population must be positive");
        }
        if self.generations == 0 {
            return bad("generations must be positive");
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return bad("mask_rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("crossover_rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("mutation_prob must lie in [0, 1]");
        }
        if self.elite >= self.population {
            return bad("elite must be smaller than population");
        }
        if self.max_nodes == 0 {
            return bad("max_nodes must be positive");
        }
        Ok(())
    }
}

/// An expression with its current score.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub tree: ExprTree,
    pub fitness: Fitness,
}

impl Scored {
    fn new(tree: ExprTree, ds: &Dataset) -> Self {
        let fitness = fitness(&tree, ds).unwrap_or_else(|_| Fitness::invalid(tree.node_count()));
        Scored { tree, fitness }
    }
}

/// Attempts and strict improvements of an operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub attempts: u64,
    pub successes: u64,
}

impl Counter {
    pub fn rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.successes as f64 / self.attempts as f64)
    }

    fn add(&mut self, o: Counter) {
        self.attempts += o.attempts;
        self.successes += o.successes;
    }
}

/// Per-generation instrumentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    #[serde(with = "crate::eval::r2_or_null")]
    pub best_r2: f64,
    pub best_nodes: usize,
    #[serde(with = "crate::eval::r2_or_null")]
    pub mean_r2: f64,
    pub mutation: Counter,
    pub crossover: Counter,
    pub wall_ms: u64,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub seed: u64,
    pub mutation_guide: String,
    pub crossover_guide: String,
    pub generations: Vec<GenerationStats>,
    pub best_tree: ExprTree,
    pub best_expression: String,
    pub best_fitness: Fitness,
    pub solved_generation: Option<usize>,
    pub wall_ms: u64,
}

impl RunRecord {
    /// Mutation success counts summed over all generations.
    pub fn mutation_totals(&self) -> Counter {
        let mut c = Counter::default();
        self.generations.iter().for_each(|g| c.add(g.mutation));
        c
    }

    pub fn crossover_totals(&self) -> Counter {
        let mut c = Counter::default();
        self.generations.iter().for_each(|g| c.add(g.crossover));
        c
    }

    /// Generations used: the solving generation, or all that ran.
    pub fn generations_used(&self) -> usize {
        self.solved_generation.unwrap_or(self.generations.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    /// One row per generation: `gen, best_r2, best_nodes, mean_r2,
    /// alpha_hat, beta_hat, wall_ms`. The mutation success rate goes to
    /// `alpha_hat` when the mutation guide is uniform and to `beta_hat`
    /// otherwise; the other column is left empty.
    pub fn write_generations_csv<W: Write>(&self, w: W) -> Result<(), EngineError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "gen",
            "best_r2",
            "best_nodes",
            "mean_r2",
            "alpha_hat",
            "beta_hat",
            "wall_ms",
        ])?;
        let uniform = self.mutation_guide == "uniform";
        let num = |v: f64| {
            if v.is_finite() {
                v.to_string()
            } else {
                String::new()
            }
        };
        for g in &self.generations {
            let rate = g.mutation.rate().map(|r| r.to_string()).unwrap_or_default();
            let (a, b) = if uniform {
                (rate, String::new())
            } else {
                (String::new(), rate)
            };
            out.write_record([
                g.generation.to_string(),
                num(g.best_r2),
                g.best_nodes.to_string(),
                num(g.mean_r2),
                a,
                b,
                g.wall_ms.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `n` random trees over `dims` inputs by the grow method.
pub fn init_population(n: usize, max_nodes: usize, dims: usize, seed: u64) -> Vec<ExprTree> {
    (0..n)
        .map(|i| grow_tree(&mut rng_for(seed, &[0x1717, i as u64]), dims, max_nodes))
        .collect()
}

/// Shared context of one generation's variation steps.
pub struct StepContext<'a> {
    pub ds: &'a Dataset,
    pub summary: &'a DataSummary,
    pub seed: u64,
}

/// Guided mask-and-fill mutation of every individual.
///
/// A success is an offspring whose R² before constant fitting strictly
/// exceeds its parent's current R². Offspring are accepted regardless.
pub fn mutation_step(
    pop: &[Scored],
    guide: &dyn MutationGuide,
    mask_rate: f64,
    mutation_prob: f64,
    policy: FillPolicy,
    ctx: &StepContext,
) -> (Vec<Scored>, Counter) {
    let results: Vec<(Scored, bool, bool)> = pop
        .par_iter()
        .enumerate()
        .map(|(i, parent)| {
            let mut rng = rng_for(ctx.seed, &[0x4D07, i as u64]);
            if mask_rate <= 0.0 || !rng.random_bool(mutation_prob) {
                return (parent.clone(), false, false);
            }
            let seq = linearize(&parent.tree);
            let positions = sample_mask_positions(seq.len(), mask_rate, &mut rng);
            let q = MutationQuery {
                masked: seq.mask(&positions).expect("positions in range"),
                summary: ctx.summary,
                data: ctx.ds,
            };
            let r = guide.guide_mutation(&q);
            let child = restore_values(&seq, fill_masks(&q, &r, policy, &mut rng));
            let child = Scored::new(child, ctx.ds);
            let improved = child.fitness.r2 > parent.fitness.r2;
            (child, true, improved)
        })
        .collect();
    let mut counter = Counter::default();
    let pop = results
        .into_iter()
        .map(|(s, tried, ok)| {
            counter.attempts += u64::from(tried);
            counter.successes += u64::from(ok);
            s
        })
        .collect();
    (pop, counter)
}

/// Where a fill put back the symbol that was there before, keep the old
/// constant value too.
fn restore_values(original: &TokenSeq, child: ExprTree) -> ExprTree {
    let new = linearize(&child);
    if new.len() != original.len() {
        return child;
    }
    let mut items = new.into_items();
    for (item, old) in items.iter_mut().zip(original.items()) {
        if item.token == Token::Const && old.token == Token::Const {
            item.value = old.value;
        }
    }
    ExprTree::from_nodes(items).expect("same shape")
}

/// Guided subtree exchange on `⌊γ·N/2⌋` disjoint random pairs, then resize
/// to `target_size`: all offspring are kept and the remaining slots take
/// the best mutated individuals.
///
/// A success is a pair whose better offspring strictly beats its better
/// parent (both before constant fitting).
#[allow(clippy::too_many_arguments)]
pub fn crossover_step(
    pop: &[Scored],
    guide: &dyn CrossoverGuide,
    crossover_rate: f64,
    policy: FillPolicy,
    max_nodes: usize,
    target_size: usize,
    ctx: &StepContext,
) -> (Vec<Scored>, Counter) {
    let n_pairs = ((crossover_rate * pop.len() as f64) / 2.0).floor() as usize;
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.shuffle(&mut rng_for(ctx.seed, &[0xC2055]));
    let pairs: Vec<(usize, usize)> = (0..n_pairs)
        .map(|k| (order[2 * k], order[2 * k + 1]))
        .collect();
    let results: Vec<(Scored, Scored, bool)> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(ia, ib))| {
            let mut rng = rng_for(ctx.seed, &[0xC2056, k as u64]);
            let (a, b) = (&pop[ia], &pop[ib]);
            let q = CrossoverQuery {
                joint: TokenSeq::joint(&linearize(&a.tree), &linearize(&b.tree)),
                summary: ctx.summary,
                data: ctx.ds,
            };
            let r = guide.guide_crossover(&q);
            let i = choose(&r.pa, policy, &mut rng);
            let j = choose(&r.pb, policy, &mut rng);
            let s = swap_subtrees(&a.tree, i, &b.tree, j, max_nodes).expect("indices in range");
            let c1 = Scored::new(s.first, ctx.ds);
            let c2 = Scored::new(s.second, ctx.ds);
            let parents = OrdF64(a.fitness.r2).max(OrdF64(b.fitness.r2));
            let children = OrdF64(c1.fitness.r2).max(OrdF64(c2.fitness.r2));
            (c1, c2, children > parents)
        })
        .collect();
    let mut counter = Counter::default();
    let mut out = Vec::with_capacity(target_size);
    for (c1, c2, ok) in results {
        counter.attempts += 1;
        counter.successes += u64::from(ok);
        out.push(c1);
        out.push(c2);
    }
    resize_population(&mut out, pop, target_size);
    (out, counter)
}

fn rank(a: &Scored, b: &Scored) -> std::cmp::Ordering {
    a.fitness.rank_key().cmp(&b.fitness.rank_key())
}

/// Keep `offspring`; fill up to `n` with the best of `mutated`, or drop the
/// worst offspring if there are too many.
fn resize_population(offspring: &mut Vec<Scored>, mutated: &[Scored], n: usize) {
    if offspring.len() > n {
        offspring.sort_by(rank);
        offspring.truncate(n);
        return;
    }
    let mut idx: Vec<usize> = (0..mutated.len()).collect();
    idx.sort_by(|&a, &b| rank(&mutated[a], &mutated[b]).then(a.cmp(&b)));
    let need = n - offspring.len();
    offspring.extend(idx.iter().take(need).map(|&i| mutated[i].clone()));
}

/// Next population: the `elite` best of previous ∪ new (distinct
/// expressions), then the best distinct new individuals up to `n`; if
/// distinct ones run out, duplicates fill the rest in rank order.
fn select_next(prev: &[Scored], new: Vec<Scored>, n: usize, elite: usize) -> Vec<Scored> {
    let key = |s: &Scored| format!("{}", linearize(&s.tree));
    let mut pool: Vec<&Scored> = prev.iter().chain(new.iter()).collect();
    pool.sort_by(|a, b| rank(a, b));
    let mut seen = HashSet::new();
    let mut out: Vec<Scored> = Vec::with_capacity(n);
    for s in pool {
        if out.len() >= elite {
            break;
        }
        if seen.insert(key(s)) {
            out.push(s.clone());
        }
    }
    let mut fresh: Vec<&Scored> = new.iter().collect();
    fresh.sort_by(|a, b| rank(a, b));
    let mut leftovers = Vec::new();
    for s in fresh {
        if out.len() >= n {
            break;
        }
        if seen.insert(key(s)) {
            out.push(s.clone());
        } else {
            leftovers.push(s);
        }
    }
    for s in leftovers {
        if out.len() >= n {
            break;
        }
        out.push(s.clone());
    }
    // Tiny populations can run out of new individuals: top up from prev.
    let mut k = 0;
    while out.len() < n && k < prev.len() {
        out.push(prev[k].clone());
        k += 1;
    }
    out.sort_by(rank);
    out
}

fn fit_all(trees: Vec<ExprTree>, ds: &Dataset, opt: &OptConfig) -> Vec<Scored> {
    trees
        .into_par_iter()
        .map(|t| {
            let (tree, fitness) = optimize_constants(&t, ds, opt);
            Scored { tree, fitness }
        })
        .collect()
}

fn stats(
    generation: usize,
    pop: &[Scored],
    mutation: Counter,
    crossover: Counter,
    wall_ms: u64,
) -> GenerationStats {
    let best = &pop[0];
    let finite: Vec<f64> = pop
        .iter()
        .map(|s| s.fitness.r2)
        .filter(|v| v.is_finite())
        .collect();
    let mean_r2 = if finite.is_empty() {
        f64::NEG_INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    GenerationStats {
        generation,
        best_r2: best.fitness.r2,
        best_nodes: best.fitness.nodes,
        mean_r2,
        mutation,
        crossover,
        wall_ms,
    }
}

/// Run the search on `ds`. The initial population is constant-fitted and
/// scored before the first generation, so a target present from the start
/// is reported as solved at generation 1.
pub fn evolve(
    ds: &Dataset,
    cfg: &EngineConfig,
    guides: &GuideSet,
) -> Result<RunRecord, EngineError> {
    cfg.validate()?;
    let start = Instant::now();
    let elapsed = |t: Instant| {
        if cfg.timestamps {
            t.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    let summary = summarize(ds);
    let fill_policy = cfg.fill_policy.unwrap_or(guides.mutation.default_policy());
    let cross_policy = cfg
        .crossover_policy
        .unwrap_or(guides.crossover.default_policy());
    let opt = |g: usize| OptConfig {
        seed: derive_seed(cfg.seed, &[0x0B7, g as u64]),
        ..cfg.opt.clone()
    };

    let init = init_population(
        cfg.population,
        cfg.max_nodes,
        ds.dims(),
        derive_seed(cfg.seed, &[0x1A17]),
    );
    let mut pop = fit_all(init, ds, &opt(0));
    pop.sort_by(rank);
    let mut history = Vec::with_capacity(cfg.generations);
    let mut solved = None;
    if pop[0].fitness.r2 >= cfg.solve_threshold {
        history.push(stats(
            1,
            &pop,
            Counter::default(),
            Counter::default(),
            elapsed(start),
        ));
        solved = Some(1);
    }

    for generation in 1..=cfg.generations {
        if solved.is_some() && cfg.early_stop {
            break;
        }
        let gen_start = Instant::now();
        let ctx = StepContext {
            ds,
            summary: &summary,
            seed: derive_seed(cfg.seed, &[0x6E4, generation as u64]),
        };
        let (mutated, mcount) = mutation_step(
            &pop,
            guides.mutation.as_ref(),
            cfg.mask_rate,
            cfg.mutation_prob,
            fill_policy,
            &ctx,
        );
        let (crossed, xcount) = crossover_step(
            &mutated,
            guides.crossover.as_ref(),
            cfg.crossover_rate,
            cross_policy,
            cfg.max_nodes,
            cfg.population,
            &ctx,
        );
        let fitted = fit_all(
            crossed.into_iter().map(|s| s.tree).collect(),
            ds,
            &opt(generation),
        );
        pop = select_next(&pop, fitted, cfg.population, cfg.elite);
        history.push(stats(generation, &pop, mcount, xcount, elapsed(gen_start)));
        if solved.is_none() && pop[0].fitness.r2 >= cfg.solve_threshold {
            solved = Some(generation);
        }
    }
    let best = pop[0].clone();
    Ok(RunRecord {
        task: ds.provenance.task.clone(),
        seed: cfg.seed,
        mutation_guide: guides.mutation.name().to_string(),
        crossover_guide: guides.crossover.name().to_string(),
        generations: history,
        best_expression: to_sexpr(&best.tree),
        best_tree: best.tree,
        best_fitness: best.fitness,
        solved_generation: solved,
        wall_ms: elapsed(start),
    })
}

/// One efficiency experiment: random (α) versus guided (β) success
/// probabilities, offspring per generation λ, required successes k, and
/// the joint mutation/crossover setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfficiencyTrial {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: u32,
    pub k: u32,
    pub trials: u64,
    pub seed: u64,
    /// Crossover success probabilities (random, guided).
    pub alpha_c: f64,
    pub beta_c: f64,
    /// Mutations and crossovers per generation for the joint bound.
    pub n_mut: u32,
    pub n_cross: u32,
}

impl Default for EfficiencyTrial {
    fn default() -> Self {
        EfficiencyTrial {
            alpha: 0.1,
            beta: 0.25,
            lambda: 4,
            k: 3,
            trials: 100_000,
            seed: 0,
            alpha_c: 0.05,
            beta_c: 0.15,
            n_mut: 4,
            n_cross: 2,
        }
    }
}

/// Empirical estimate against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub empirical: f64,
    pub closed_form: f64,
    /// Standard error of the empirical estimate under the closed form.
    pub sigma: f64,
    pub within_3sigma: bool,
}

impl LawCheck {
    fn new(empirical: f64, closed_form: f64, sigma: f64) -> Self {
        LawCheck {
            empirical,
            closed_form,
            sigma,
            within_3sigma: (empirical - closed_form).abs() <= 3.0 * sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub trial: EfficiencyTrial,
    /// P(at least one of λ offspring improves) = 1 − (1 − p)^λ.
    pub improve_random: LawCheck,
    pub improve_guided: LawCheck,
    /// Mean attempts to accumulate k successes = k / p.
    pub wait_random: LawCheck,
    pub wait_guided: LawCheck,
    /// 1 − (1 − p_m)^{n_m} (1 − p_c)^{n_c} for random and guided operators.
    pub joint_random: LawCheck,
    pub joint_guided: LawCheck,
}

impl EfficiencyReport {
    pub fn all_within_3sigma(&self) -> bool {
        [
            self.improve_random,
            self.improve_guided,
            self.wait_random,
            self.wait_guided,
            self.joint_random,
            self.joint_guided,
        ]
        .iter()
        .all(|c| c.within_3sigma)
    }

    /// Empirical joint improvement probability of guided vs random.
    pub fn guided_beats_random(&self) -> bool {
        self.joint_guided.empirical > self.joint_random.empirical
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), EngineError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(EngineError::InvalidProbability(format!(
            "{name} = {p} is not in (0, 1)"
        )))
    }
}

/// Monte-Carlo of Bernoulli edit processes against the closed-form laws.
///
/// Random and guided processes share their uniform draws (success when
/// `u < p`), so `α = β` produces identical empirical results.
pub fn simulate_efficiency(t: &EfficiencyTrial) -> Result<EfficiencyReport, EngineError> {
    for (n, p) in [
        ("alpha", t.alpha),
        ("beta", t.beta),
        ("alpha_c", t.alpha_c),
        ("beta_c", t.beta_c),
    ] {
        check_probability(n, p)?;
    }
    if t.lambda == 0 || t.k == 0 || t.trials == 0 {
        return Err(EngineError::InvalidConfig(
            "lambda, k and trials must be positive".into(),
        ));
    }
    let trials = t.trials as f64;

    // One generation of λ offspring.
    let mut rng = rng_for(t.seed, &[0xEF1]);
    let (mut hit_a, mut hit_b) = (0u64, 0u64);
    for _ in 0..t.trials {
        let (mut a, mut b) = (false, false);
        for _ in 0..t.lambda {
            let u: f64 = rng.random();
            a |= u < t.alpha;
            b |= u < t.beta;
        }
        hit_a += u64::from(a);
        hit_b += u64::from(b);
    }
    let improve = |hits: u64, p: f64| {
        let closed = 1.0 - (1.0 - p).powi(t.lambda as i32);
        LawCheck::new(
            hits as f64 / trials,
            closed,
            (closed * (1.0 - closed) / trials).sqrt(),
        )
    };

    // Attempts until k successes (negative binomial), separate streams per
    // trial index so both processes see the same draws.
    let wait = |p: f64| {
        let mut rng = rng_for(t.seed, &[0xEF2]);
        let mut total = 0u64;
        for _ in 0..t.trials {
            let mut successes = 0;
            while successes < t.k {
                total += 1;
                if rng.random::<f64>() < p {
                    successes += 1;
                }
            }
        }
        let closed = t.k as f64 / p;
        let var = t.k as f64 * (1.0 - p) / (p * p);
        LawCheck::new(total as f64 / trials, closed, (var / trials).sqrt())
    };

    // Joint mutation + crossover generation.
    let mut rng = rng_for(t.seed, &[0xEF3]);
    let (mut ja, mut jb) = (0u64, 0u64);
    for _ in 0..t.trials {
        let (mut a, mut b) = (false, false);
        for _ in 0..t.n_mut {
            let u: f64 = rng.random();
            a |= u < t.alpha;
            b |= u < t.beta;
        }
        for _ in 0..t.n_cross {
            let u: f64 = rng.random();
            a |= u < t.alpha_c;
            b |= u < t.beta_c;
        }
        ja += u64::from(a);
        jb += u64::from(b);
    }
    let joint = |hits: u64, pm: f64, pc: f64| {
        let closed = 1.0 - (1.0 - pm).powi(t.n_mut as i32) * (1.0 - pc).powi(t.n_cross as i32);
        LawCheck::new(
            hits as f64 / trials,
            closed,
            (closed * (1.0 - closed) / trials).sqrt(),
        )
    };

    Ok(EfficiencyReport {
        trial: t.clone(),
        improve_random: improve(hit_a, t.alpha),
        improve_guided: improve(hit_b, t.beta),
        wait_random: wait(t.alpha),
        wait_guided: wait(t.beta),
        joint_random: joint(ja, t.alpha, t.alpha_c),
        joint_guided: joint(jb, t.beta, t.beta_c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample, task, Provenance};
    use crate::expr::parse_sexpr;
    use crate::guidance::UniformGuide;

    fn small_cfg() -> EngineConfig {
        EngineConfig {
            population: 60,
            generations: 5,
            elite: 6,
            seed: 3,
            timestamps: false,
            ..EngineConfig::default()
        }
    }

    fn scored(ds: &Dataset, s: &str) -> Scored {
        Scored::new(parse_sexpr(s).unwrap(), ds)
    }

    #[test]
    fn config_validation() {
        assert!(small_cfg().validate().is_ok());
        let bad = EngineConfig {
            elite: 60,
            ..small_cfg()
        };
        assert!(bad.validate().is_err());
        let bad = EngineConfig {
            mask_rate: 1.5,
            ..small_cfg()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn init_population_bounds() {
        let pop = init_population(10_000, 20, 2, 9);
        assert!(pop.iter().all(|t| t.len() <= 20 && t.has_variable()));
        assert_eq!(init_population(1, 1, 1, 0)[0], parse_sexpr("x1").unwrap());
        assert_eq!(init_population(50, 20, 2, 9), init_population(50, 20, 2, 9));
    }

    #[test]
    fn target_in_initial_population_is_solved_at_once() {
        let ds = sample(&task("Nguyen-1").unwrap()).unwrap();
        // Single-variable-leaf budget: x1 is the only possible tree.
        let x = Dataset::new(
            vec![ds.column(0).to_vec()],
            ds.column(0).to_vec(),
            Provenance::default(),
        )
        .unwrap();
        let cfg = EngineConfig {
            max_nodes: 1,
            ..small_cfg()
        };
        let rec = evolve(&x, &cfg, &GuideSet::uniform()).unwrap();
        assert_eq!(rec.solved_generation, Some(1));
        assert_eq!(rec.best_fitness.r2, 1.0);
    }

    #[test]
    fn no_variation_keeps_best_constant() {
        let ds = sample(&task("Nguyen-2").unwrap()).unwrap();
        let cfg = EngineConfig {
            mask_rate: 0.0,
            crossover_rate: 0.0,
            early_stop: false,
            ..small_cfg()
        };
        let rec = evolve(&ds, &cfg, &GuideSet::uniform()).unwrap();
        let first = rec.generations[0].best_r2;
        assert!(rec.generations.iter().all(|g| g.best_r2 == first));
        assert_eq!(rec.mutation_totals().attempts, 0);
    }

    #[test]
    fn evolve_is_deterministic_and_elitist() {
        let ds = sample(&task("Nguyen-3").unwrap()).unwrap();
        let cfg = EngineConfig {
            early_stop: false,
            ..small_cfg()
        };
        let a = evolve(&ds, &cfg, &GuideSet::uniform()).unwrap();
        let b = evolve(&ds, &cfg, &GuideSet::uniform()).unwrap();
        assert_eq!(a, b);
        assert!(a
            .generations
            .windows(2)
            .all(|w| w[1].best_r2 >= w[0].best_r2));
        for g in &a.generations {
            assert!(g.mutation.successes <= g.mutation.attempts);
        }
        let mut buf = Vec::new();
        a.write_generations_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("gen,best_r2,best_nodes,mean_r2,alpha_hat,beta_hat,wall_ms\n"));
        assert_eq!(text.lines().count(), a.generations.len() + 1);
    }

    #[test]
    fn mutation_of_identical_trees_with_deterministic_guide() {
        let ds = sample(&task("Nguyen-1").unwrap()).unwrap();
        let summary = summarize(&ds);
        let pop = vec![scored(&ds, "(add (mul x1 x1) (sin x1))"); 8];
        let ctx = StepContext {
            ds: &ds,
            summary: &summary,
            seed: 1,
        };
        // Full masking makes every individual's query identical.
        let (out, c) = mutation_step(
            &pop,
            &crate::guidance::OracleGuide::new(60),
            1.0,
            1.0,
            FillPolicy::Greedy,
            &ctx,
        );
        assert!(out.windows(2).all(|w| w[0].tree == w[1].tree));
        assert_eq!(c.attempts, 8);
        assert!(c.successes <= c.attempts);
    }

    #[test]
    fn crossover_sizes() {
        let ds = sample(&task("Nguyen-1").unwrap()).unwrap();
        let summary = summarize(&ds);
        let pop: Vec<Scored> = init_population(21, 15, 1, 4)
            .into_iter()
            .map(|t| Scored::new(t, &ds))
            .collect();
        let ctx = StepContext {
            ds: &ds,
            summary: &summary,
            seed: 2,
        };
        for gamma in [0.0, 0.1, 0.5, 0.77, 1.0] {
            let (out, c) =
                crossover_step(&pop, &UniformGuide, gamma, FillPolicy::Sample, 60, 21, &ctx);
            assert_eq!(out.len(), 21);
            assert_eq!(c.attempts as usize, ((gamma * 21.0) / 2.0).floor() as usize);
        }
        let (out, _) = crossover_step(&pop, &UniformGuide, 0.0, FillPolicy::Sample, 60, 21, &ctx);
        let mut a: Vec<String> = out.iter().map(|s| s.tree.to_string()).collect();
        let mut b: Vec<String> = pop.iter().map(|s| s.tree.to_string()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn efficiency_closed_forms() {
        let t = EfficiencyTrial {
            alpha: 0.25,
            beta: 0.5,
            lambda: 4,
            k: 2,
            trials: 20_000,
            ..EfficiencyTrial::default()
        };
        let r = simulate_efficiency(&t).unwrap();
        assert_eq!(r.improve_random.closed_form, 0.68359375);
        assert_eq!(r.wait_guided.closed_form, 4.0);
        assert!(r.all_within_3sigma());
        assert!(r.guided_beats_random());
        let same = simulate_efficiency(&EfficiencyTrial {
            beta: 0.25,
            beta_c: 0.05,
            ..t.clone()
        })
        .unwrap();
        assert_eq!(same.improve_random, same.improve_guided);
        assert_eq!(same.wait_random, same.wait_guided);
        assert!(simulate_efficiency(&EfficiencyTrial { alpha: 1.0, ..t }).is_err());
    }
}
