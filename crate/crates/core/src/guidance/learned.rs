//! A small trained editor: a back-off count model for masked tokens and a
//! log-linear position scorer for crossover roots.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{summarize, DataSummary, Dataset};
use crate::expr::{decode, Token, TokenSeq, VOCAB_SIZE};

use super::{
    argmax, fillable_ids, legal_arities, restrict, CrossoverGuide, CrossoverPair, CrossoverQuery,
    CrossoverResponse, FillPolicy, GuideError, MutationGuide, MutationPair, MutationQuery,
    MutationResponse,
};

/// Tokens of context taken on each side of a masked slot.
pub const CONTEXT_WINDOW: usize = 3;

const SNAPSHOT_FORMAT: &str = "symreg-learned-editor";
const SNAPSHOT_VERSION: u32 = 1;
const CROSSOVER_FEATURES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the shorter-context estimate when interpolating.
    pub backoff_weight: f64,
    /// Gradient-ascent iterations for the crossover scorer.
    pub crossover_iters: usize,
    pub crossover_learning_rate: f64,
    pub crossover_l2: f64,
    pub min_pairs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            backoff_weight: 0.5,
            crossover_iters: 300,
            crossover_learning_rate: 0.5,
            crossover_l2: 1e-3,
            min_pairs: 100,
        }
    }
}

/// Serializable trained editor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedGuide {
    pub format: String,
    pub version: u32,
    pub window: usize,
    pub backoff_weight: f64,
    /// Boundaries between the low/middle/high thirds of target spread.
    pub std_terciles: [f64; 2],
    /// `tables[0]` is keyed by the full window plus data bucket; `tables[k]`
    /// for `k ≥ 1` by a window of `window + 1 − k` tokens without bucket.
    pub tables: Vec<BTreeMap<String, Vec<u32>>>,
    /// Target-token counts over all training masks.
    pub marginal: Vec<u32>,
    /// Crossover scorer weights for the first and second half.
    pub crossover_weights: [Vec<f64>; 2],
}

/// Coarse data bucket: sign of the target mean (2) × tercile of its spread (3).
pub fn summary_bucket(summary: &DataSummary, terciles: [f64; 2]) -> u8 {
    let sign = if summary.y_mean() < 0.0 { 1 } else { 0 };
    let s = summary.y_std();
    let t = if s < terciles[0] {
        0
    } else if s < terciles[1] {
        1
    } else {
        2
    };
    sign * 3 + t
}

fn context_key(tokens: &[Token], pos: usize, width: usize, bucket: Option<u8>) -> String {
    let id = |i: isize| -> usize {
        if i < 0 || i as usize >= tokens.len() {
            Token::Pad.id()
        } else {
            tokens[i as usize].id()
        }
    };
    let p = pos as isize;
    let left: Vec<String> = (1..=width as isize)
        .rev()
        .map(|k| id(p - k).to_string())
        .collect();
    let right: Vec<String> = (1..=width as isize)
        .map(|k| id(p + k).to_string())
        .collect();
    match bucket {
        Some(b) => format!("{}|{}|{}", left.join(","), right.join(","), b),
        None => format!("{}|{}", left.join(","), right.join(",")),
    }
}

/// Features of every position of a preorder sequence: symbol kind (4),
/// relative subtree size, relative depth, relative position, bias.
fn position_features(seq: &TokenSeq) -> Vec<[f64; CROSSOVER_FEATURES]> {
    let Ok(tree) = decode(seq) else {
        return vec![[0.0; CROSSOVER_FEATURES]; seq.len()];
    };
    let n = tree.len() as f64;
    let depths = tree.depths();
    let max_depth = depths.iter().copied().max().unwrap_or(0) as f64;
    (0..tree.len())
        .map(|i| {
            let t = tree.node(i).token;
            let mut f = [0.0; CROSSOVER_FEATURES];
            match t.arity() {
                2 => f[0] = 1.0,
                1 => f[1] = 1.0,
                _ if t == Token::Const => f[3] = 1.0,
                _ => f[2] = 1.0,
            }
            f[4] = tree.span(i).len() as f64 / n;
            f[5] = depths[i] as f64 / (max_depth + 1.0);
            f[6] = i as f64 / n;
            f[7] = 1.0;
            f
        })
        .collect()
}

fn softmax_scores(feats: &[[f64; CROSSOVER_FEATURES]], w: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = feats
        .iter()
        .map(|f| f.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect();
    crate::relax::softmax(&s)
}

/// Fit one half's scorer: maximize the mean log-probability of the labelled
/// root under a softmax over positions.
fn fit_scorer(samples: &[(Vec<[f64; CROSSOVER_FEATURES]>, usize)], cfg: &TrainConfig) -> Vec<f64> {
    let mut w = vec![0.0; CROSSOVER_FEATURES];
    if samples.is_empty() {
        return w;
    }
    let m = samples.len() as f64;
    for _ in 0..cfg.crossover_iters {
        let mut grad = vec![0.0; CROSSOVER_FEATURES];
        for (feats, label) in samples {
            let p = softmax_scores(feats, &w);
            for (k, g) in grad.iter_mut().enumerate() {
                let expected: f64 = feats.iter().zip(&p).map(|(f, pi)| f[k] * pi).sum();
                *g += feats[*label][k] - expected;
            }
        }
        for (wk, g) in w.iter_mut().zip(&grad) {
            *wk += cfg.crossover_learning_rate * (g / m - cfg.crossover_l2 * *wk);
        }
    }
    w
}

fn lookup<'a>(
    datasets: &'a BTreeMap<String, Arc<Dataset>>,
    key: &str,
) -> Result<&'a Arc<Dataset>, GuideError> {
    datasets
        .get(key)
        .ok_or_else(|| GuideError::MissingDataset(key.to_string()))
}

/// Train the count model on mutation pairs and the crossover scorer on
/// crossover pairs. Datasets are looked up by each pair's `dataset_csv_ref`.
pub fn train_learned_editor(
    pairs: &[MutationPair],
    xpairs: &[CrossoverPair],
    datasets: &BTreeMap<String, Arc<Dataset>>,
    cfg: &TrainConfig,
) -> Result<LearnedGuide, GuideError> {
    if pairs.len() < cfg.min_pairs.max(1) {
        return Err(GuideError::InsufficientData {
            needed: cfg.min_pairs.max(1),
            got: pairs.len(),
        });
    }
    let mut summaries = BTreeMap::new();
    for p in pairs {
        if !summaries.contains_key(&p.dataset_csv_ref) {
            let ds = lookup(datasets, &p.dataset_csv_ref)?;
            summaries.insert(p.dataset_csv_ref.clone(), summarize(ds));
        }
    }
    let mut stds: Vec<f64> = pairs
        .iter()
        .map(|p| summaries[&p.dataset_csv_ref].y_std())
        .collect();
    stds.sort_by(f64::total_cmp);
    let n = stds.len();
    let std_terciles = [stds[n / 3], stds[(2 * n) / 3]];

    let window = CONTEXT_WINDOW;
    let mut tables: Vec<BTreeMap<String, Vec<u32>>> = vec![BTreeMap::new(); window + 1];
    let mut marginal = vec![0u32; VOCAB_SIZE];
    for p in pairs {
        let bucket = summary_bucket(&summaries[&p.dataset_csv_ref], std_terciles);
        let masked = p.masked();
        let tokens = masked.tokens();
        for (&pos, &target) in &p.target_tokens {
            let id = target.id();
            marginal[id] += 1;
            for (level, table) in tables.iter_mut().enumerate() {
                let key = if level == 0 {
                    context_key(&tokens, pos, window, Some(bucket))
                } else {
                    context_key(&tokens, pos, window + 1 - level, None)
                };
                table.entry(key).or_insert_with(|| vec![0; VOCAB_SIZE])[id] += 1;
            }
        }
    }

    let mut halves: [Vec<(Vec<[f64; CROSSOVER_FEATURES]>, usize)>; 2] = [Vec::new(), Vec::new()];
    for x in xpairs {
        let (a, b) = x
            .joint_seq
            .split_joint()
            .ok_or_else(|| GuideError::InvalidQuery("crossover pair without separator".into()))?;
        halves[0].push((position_features(&a), x.ya_index));
        halves[1].push((position_features(&b), x.yb_index));
    }
    let crossover_weights = [fit_scorer(&halves[0], cfg), fit_scorer(&halves[1], cfg)];

    Ok(LearnedGuide {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        window,
        backoff_weight: cfg.backoff_weight,
        std_terciles,
        tables,
        marginal,
        crossover_weights,
    })
}

impl LearnedGuide {
    /// Unrestricted target distribution for the mask at `pos`.
    pub fn context_distribution(&self, tokens: &[Token], pos: usize, bucket: u8) -> Vec<f64> {
        let total: f64 = self.marginal.iter().map(|&c| c as f64).sum();
        let mut p: Vec<f64> = self
            .marginal
            .iter()
            .map(|&c| (c as f64 + 1.0) / (total + VOCAB_SIZE as f64))
            .collect();
        let kappa = self.backoff_weight;
        for level in (0..self.tables.len()).rev() {
            let key = if level == 0 {
                context_key(tokens, pos, self.window, Some(bucket))
            } else {
                context_key(tokens, pos, self.window + 1 - level, None)
            };
            if let Some(counts) = self.tables[level].get(&key) {
                let c: f64 = counts.iter().map(|&v| v as f64).sum();
                p = counts
                    .iter()
                    .zip(&p)
                    .map(|(&ct, &lower)| (ct as f64 + kappa * lower) / (c + kappa))
                    .collect();
            }
        }
        p
    }

    /// Fraction of masked tokens in `pairs` whose argmax prediction (each
    /// mask predicted independently from the masked input) equals the
    /// target, and the mean chance rate `1/|fillable|` over the same masks.
    pub fn masked_token_accuracy(
        &self,
        pairs: &[MutationPair],
        datasets: &BTreeMap<String, Arc<Dataset>>,
    ) -> Result<(f64, f64), GuideError> {
        let mut hits = 0usize;
        let mut total = 0usize;
        let mut chance = 0.0;
        for p in pairs {
            let ds = lookup(datasets, &p.dataset_csv_ref)?;
            let summary = summarize(ds);
            let q = MutationQuery {
                masked: p.masked(),
                summary: &summary,
                data: ds,
            };
            let r = self.guide_mutation(&q);
            let fillable = fillable_ids(ds.dims()).iter().filter(|&&b| b).count();
            for (pos, probs) in r.positions.iter().zip(&r.probs) {
                total += 1;
                chance += 1.0 / fillable as f64;
                if Some(argmax(probs)) == p.target_tokens.get(pos).map(|t| t.id()) {
                    hits += 1;
                }
            }
        }
        let t = total.max(1) as f64;
        Ok((hits as f64 / t, chance / t))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("editor serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GuideError> {
        let g: LearnedGuide =
            serde_json::from_str(s).map_err(|e| GuideError::Snapshot(e.to_string()))?;
        if g.format != SNAPSHOT_FORMAT {
            return Err(GuideError::Snapshot(format!(
                "unknown format `{}`",
                g.format
            )));
        }
        if g.version != SNAPSHOT_VERSION {
            return Err(GuideError::Snapshot(format!(
                "unsupported version {}",
                g.version
            )));
        }
        if g.tables.len() != g.window + 1 || g.marginal.len() != VOCAB_SIZE {
            return Err(GuideError::Snapshot("inconsistent table shapes".into()));
        }
        Ok(g)
    }
}

impl MutationGuide for LearnedGuide {
    fn name(&self) -> &'static str {
        "learned"
    }

    fn default_policy(&self) -> FillPolicy {
        FillPolicy::Greedy
    }

    fn guide_mutation(&self, q: &MutationQuery) -> MutationResponse {
        let bucket = summary_bucket(q.summary, self.std_terciles);
        let tokens = q.masked.tokens();
        let legal = legal_arities(&tokens);
        let positions = q.masked.mask_positions();
        let probs = positions
            .iter()
            .map(|&p| {
                restrict(
                    &self.context_distribution(&tokens, p, bucket),
                    legal[p],
                    q.dims(),
                )
            })
            .collect();
        MutationResponse { positions, probs }
    }
}

impl CrossoverGuide for LearnedGuide {
    fn name(&self) -> &'static str {
        "learned"
    }

    fn default_policy(&self) -> FillPolicy {
        FillPolicy::Greedy
    }

    fn guide_crossover(&self, q: &CrossoverQuery) -> CrossoverResponse {
        let (a, b) = q.halves();
        CrossoverResponse {
            pa: softmax_scores(&position_features(&a), &self.crossover_weights[0]),
            pb: softmax_scores(&position_features(&b), &self.crossover_weights[1]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::expr::{linearize, parse_sexpr};

    fn ds_map() -> BTreeMap<String, Arc<Dataset>> {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ds = Dataset::new(vec![x.clone()], x, Provenance::default()).unwrap();
        BTreeMap::from([("d".to_string(), Arc::new(ds))])
    }

    fn pair(input: &str, target: &str, r2: (f64, f64)) -> MutationPair {
        let a = linearize(&parse_sexpr(input).unwrap());
        let b = linearize(&parse_sexpr(target).unwrap());
        let changed: Vec<usize> = (0..a.len()).filter(|&i| a.token(i) != b.token(i)).collect();
        MutationPair {
            target_tokens: changed.iter().map(|&i| (i, b.token(i))).collect(),
            mask_positions: changed,
            input_seq: a,
            target_seq: b,
            dataset_csv_ref: "d".into(),
            r2_input: r2.0,
            r2_target: r2.1,
        }
    }

    fn trained() -> LearnedGuide {
        let mut pairs = Vec::new();
        for _ in 0..60 {
            pairs.push(pair(
                "(mul (sin (sin x1)) x1)",
                "(mul (sin (cos x1)) x1)",
                (0.1, 0.5),
            ));
        }
        for _ in 0..60 {
            pairs.push(pair("(add x1 C)", "(add x1 x1)", (0.1, 0.5)));
        }
        train_learned_editor(&pairs, &[], &ds_map(), &TrainConfig::default()).unwrap()
    }

    #[test]
    fn majority_context_wins() {
        let g = trained();
        let datasets = ds_map();
        let ds = &datasets["d"];
        let summary = summarize(ds);
        let masked = linearize(&parse_sexpr("(mul (sin (exp x1)) x1)").unwrap())
            .mask(&[2])
            .unwrap();
        let q = MutationQuery {
            masked,
            summary: &summary,
            data: ds,
        };
        let r = g.guide_mutation(&q);
        r.validate(&q).unwrap();
        assert_eq!(argmax(&r.probs[0]), Token::Cos.id());
    }

    #[test]
    fn unseen_context_backs_off_to_marginal() {
        let g = trained();
        let tokens = [Token::Exp, Token::Mask, Token::Var(0)];
        let p = g.context_distribution(&tokens, 1, 0);
        let total: f64 = g.marginal.iter().map(|&c| c as f64).sum();
        for id in 0..VOCAB_SIZE {
            let expect = (g.marginal[id] as f64 + 1.0) / (total + VOCAB_SIZE as f64);
            assert_eq!(p[id], expect);
        }
    }

    #[test]
    fn too_few_pairs() {
        let pairs = vec![pair("(add x1 C)", "(add x1 x1)", (0.1, 0.5))];
        assert!(matches!(
            train_learned_editor(&pairs, &[], &ds_map(), &TrainConfig::default()),
            Err(GuideError::InsufficientData { .. })
        ));
    }

    #[test]
    fn snapshot_round_trip() {
        let g = trained();
        let s = g.to_json();
        let back = LearnedGuide::from_json(&s).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), s);
        let bad = s.replace("\"version\":1", "\"version\":9");
        assert!(LearnedGuide::from_json(&bad).is_err());
    }
}
