//! Gene-editing guides.
//!
//! A *mutation guide* receives a masked preorder sequence plus the data it
//! should fit and returns, for each masked slot, a distribution over the
//! symbols that may fill it. A *crossover guide* receives two sequences
//! joined by a separator and returns a distribution over subtree roots in
//! each half. Three implementations are provided: [`UniformGuide`] (plain GP
//! randomness), [`OracleGuide`] (evaluates candidates on the data) and
//! [`LearnedGuide`] (a count model trained on harvested edit pairs).

mod collect;
mod learned;
mod oracle;

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataSummary, Dataset};
use crate::expr::{decode, linearize, ExprTree, Node, Token, TokenSeq, VOCAB_SIZE};

pub use collect::{
    collect_crossover_pairs, collect_mutation_pairs, read_ndjson, reevaluate_crossover_pair,
    reevaluate_mutation_pair, sample_mask_positions, write_ndjson, CollectConfig, Corpus,
    CrossoverPair, MutationPair,
};
pub use learned::{
    summary_bucket, train_learned_editor, LearnedGuide, TrainConfig, CONTEXT_WINDOW,
};
pub use oracle::OracleGuide;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GuideError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("need at least {needed} training pairs, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("dataset `{0}` referenced by a pair is missing")]
    MissingDataset(String),
    #[error("editor snapshot: {0}")]
    Snapshot(String),
}

/// How a distribution is turned into a concrete choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Highest probability; ties go to the lowest index.
    Greedy,
    /// One multinomial draw.
    Sample,
}

/// A masked expression to be completed.
#[derive(Debug, Clone)]
pub struct MutationQuery<'a> {
    pub masked: TokenSeq,
    pub summary: &'a DataSummary,
    /// The rows themselves, for guides that score candidates on data.
    pub data: &'a Dataset,
}

impl MutationQuery<'_> {
    pub fn validate(&self) -> Result<(), GuideError> {
        if self.masked.mask_positions().is_empty() {
            return Err(GuideError::InvalidQuery("no masked position".into()));
        }
        if self.masked.sep_position().is_some() {
            return Err(GuideError::InvalidQuery(
                "separator in a mutation query".into(),
            ));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.data.dims()
    }
}

/// Per masked position (ascending), a distribution over vocabulary ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationResponse {
    pub positions: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

impl MutationResponse {
    /// Check the response against its query: one normalized vector per
    /// mask, with no mass on special or out-of-range symbols.
    pub fn validate(&self, q: &MutationQuery) -> Result<(), GuideError> {
        if self.positions != q.masked.mask_positions() || self.probs.len() != self.positions.len() {
            return Err(GuideError::InvalidResponse(
                "positions do not match the masks".into(),
            ));
        }
        let fillable = fillable_ids(q.dims());
        for p in &self.probs {
            check_distribution(p, VOCAB_SIZE)?;
            if p.iter()
                .enumerate()
                .any(|(id, &v)| v != 0.0 && !fillable[id])
            {
                return Err(GuideError::InvalidResponse(
                    "mass on a non-fillable symbol".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Two expressions joined by a separator.
#[derive(Debug, Clone)]
pub struct CrossoverQuery<'a> {
    pub joint: TokenSeq,
    pub summary: &'a DataSummary,
    pub data: &'a Dataset,
}

impl CrossoverQuery<'_> {
    pub fn validate(&self) -> Result<(), GuideError> {
        if self
            .joint
            .tokens()
            .iter()
            .filter(|&&t| t == Token::Sep)
            .count()
            != 1
        {
            return Err(GuideError::InvalidQuery(
                "need exactly one separator".into(),
            ));
        }
        let (a, b) = self.halves();
        for half in [a, b] {
            let t = decode(&half).map_err(|e| GuideError::InvalidQuery(e.to_string()))?;
            if linearize(&t) != half {
                return Err(GuideError::InvalidQuery(
                    "half is not a complete tree".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn halves(&self) -> (TokenSeq, TokenSeq) {
        self.joint
            .split_joint()
            .expect("joint sequence has a separator")
    }

    pub fn trees(&self) -> (ExprTree, ExprTree) {
        let (a, b) = self.halves();
        (
            decode(&a).expect("valid half"),
            decode(&b).expect("valid half"),
        )
    }
}

/// Distributions over crossover roots in each half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverResponse {
    pub pa: Vec<f64>,
    pub pb: Vec<f64>,
}

impl CrossoverResponse {
    pub fn validate(&self, q: &CrossoverQuery) -> Result<(), GuideError> {
        let (a, b) = q.halves();
        check_distribution(&self.pa, a.len())?;
        check_distribution(&self.pb, b.len())
    }
}

fn check_distribution(p: &[f64], len: usize) -> Result<(), GuideError> {
    if p.len() != len {
        return Err(GuideError::InvalidResponse(format!(
            "distribution has {} entries, expected {len}",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(GuideError::InvalidResponse(
            "negative or non-finite mass".into(),
        ));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(GuideError::InvalidResponse(format!("mass sums to {s}")));
    }
    Ok(())
}

/// Suggests fills for masked tokens.
pub trait MutationGuide: Send + Sync {
    fn name(&self) -> &'static str;
    /// Policy the search loop uses when none is configured.
    fn default_policy(&self) -> FillPolicy;
    fn guide_mutation(&self, q: &MutationQuery) -> MutationResponse;
}

/// Suggests subtree roots for crossover.
pub trait CrossoverGuide: Send + Sync {
    fn name(&self) -> &'static str;
    fn default_policy(&self) -> FillPolicy;
    fn guide_crossover(&self, q: &CrossoverQuery) -> CrossoverResponse;
}

/// Which implementation backs a guide slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuideKind {
    Uniform,
    Oracle,
    Learned,
}

/// The pair of guides a search run uses.
#[derive(Clone)]
pub struct GuideSet {
    pub mutation: Arc<dyn MutationGuide>,
    pub crossover: Arc<dyn CrossoverGuide>,
}

impl GuideSet {
    pub fn uniform() -> Self {
        GuideSet {
            mutation: Arc::new(UniformGuide),
            crossover: Arc::new(UniformGuide),
        }
    }

    /// Build from kinds. `Learned` requires `learned`; `max_nodes` bounds
    /// the offspring the oracle crossover guide considers.
    pub fn from_kinds(
        mutation: GuideKind,
        crossover: GuideKind,
        learned: Option<Arc<LearnedGuide>>,
        max_nodes: usize,
    ) -> Result<Self, GuideError> {
        let need_learned = || {
            learned.clone().ok_or_else(|| {
                GuideError::Snapshot("a learned guide was requested but none was loaded".into())
            })
        };
        let mutation: Arc<dyn MutationGuide> = match mutation {
            GuideKind::Uniform => Arc::new(UniformGuide),
            GuideKind::Oracle => Arc::new(OracleGuide::new(max_nodes)),
            GuideKind::Learned => need_learned()?,
        };
        let crossover: Arc<dyn CrossoverGuide> = match crossover {
            GuideKind::Uniform => Arc::new(UniformGuide),
            GuideKind::Oracle => Arc::new(OracleGuide::new(max_nodes)),
            GuideKind::Learned => need_learned()?,
        };
        Ok(GuideSet {
            mutation,
            crossover,
        })
    }
}

impl std::fmt::Debug for GuideSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GuideSet")
            .field("mutation", &self.mutation.name())
            .field("crossover", &self.crossover.name())
            .finish()
    }
}

/// Equal mass over every legal fill / every position: plain GP randomness.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformGuide;

impl MutationGuide for UniformGuide {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn default_policy(&self) -> FillPolicy {
        FillPolicy::Sample
    }

    fn guide_mutation(&self, q: &MutationQuery) -> MutationResponse {
        let tokens = q.masked.tokens();
        let legal = legal_arities(&tokens);
        let positions = q.masked.mask_positions();
        let probs = positions
            .iter()
            .map(|&p| restrict(&[1.0; VOCAB_SIZE], legal[p], q.dims()))
            .collect();
        MutationResponse { positions, probs }
    }
}

impl CrossoverGuide for UniformGuide {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn default_policy(&self) -> FillPolicy {
        FillPolicy::Sample
    }

    fn guide_crossover(&self, q: &CrossoverQuery) -> CrossoverResponse {
        let (a, b) = q.halves();
        CrossoverResponse {
            pa: vec![1.0 / a.len() as f64; a.len()],
            pb: vec![1.0 / b.len() as f64; b.len()],
        }
    }
}

/// `fillable_ids(d)[id]` is true when vocabulary id `id` may fill a mask for
/// data with `d` inputs.
pub fn fillable_ids(dims: usize) -> [bool; VOCAB_SIZE] {
    let mut out = [false; VOCAB_SIZE];
    for t in Token::fillable(dims) {
        out[t.id()] = true;
    }
    out
}

/// For every position, which arities (0, 1, 2) a symbol there may have such
/// that some choice of symbols at the *other* masked positions makes the
/// sequence a complete preorder tree. Unmasked positions report their own
/// arity. If no completion exists at all, every arity is reported legal and
/// decode-repair takes over.
pub fn legal_arities(seq: &[Token]) -> Vec<[bool; 3]> {
    let n = seq.len();
    let cap = n + 2;
    let allowed = |t: Token| -> [bool; 3] {
        if t == Token::Mask {
            [true; 3]
        } else {
            let mut a = [false; 3];
            a[t.arity().min(2)] = true;
            a
        }
    };
    // fwd[i][k]: k open slots remain before position i (k ≥ 1).
    let mut fwd = vec![vec![false; cap]; n + 1];
    fwd[0][1] = true;
    for i in 0..n {
        let al = allowed(seq[i]);
        for k in 1..cap {
            if !fwd[i][k] {
                continue;
            }
            for (a, ok) in al.iter().enumerate() {
                let next = k - 1 + a;
                if *ok && next < cap && (next >= 1 || i + 1 == n) {
                    fwd[i + 1][next] = true;
                }
            }
        }
    }
    // bwd[i][k]: from k open slots before position i the rest can complete.
    let mut bwd = vec![vec![false; cap]; n + 1];
    bwd[n][0] = true;
    for i in (0..n).rev() {
        let al = allowed(seq[i]);
        for k in 1..cap {
            bwd[i][k] = al
                .iter()
                .enumerate()
                .any(|(a, ok)| *ok && k - 1 + a < cap && bwd[i + 1][k - 1 + a]);
        }
    }
    let feasible = bwd[0][1];
    (0..n)
        .map(|i| {
            if !feasible {
                return [true; 3];
            }
            let mut out = [false; 3];
            for k in 1..cap {
                if !fwd[i][k] {
                    continue;
                }
                for (a, o) in out.iter_mut().enumerate() {
                    if k - 1 + a < cap && bwd[i + 1][k - 1 + a] {
                        *o = true;
                    }
                }
            }
            out
        })
        .collect()
}

/// Zero every entry that is not a fillable symbol of a legal arity and
/// renormalize. If nothing is left, fall back to uniform over the legal
/// fillable symbols.
pub fn restrict(raw: &[f64], legal: [bool; 3], dims: usize) -> Vec<f64> {
    let fillable = fillable_ids(dims);
    let ok = |id: usize| {
        fillable[id]
            && Token::from_id(id)
                .map(|t| legal[t.arity().min(2)])
                .unwrap_or(false)
    };
    let mut out: Vec<f64> = (0..VOCAB_SIZE)
        .map(|id| {
            if ok(id) && raw[id].is_finite() && raw[id] > 0.0 {
                raw[id]
            } else {
                0.0
            }
        })
        .collect();
    let mut s: f64 = out.iter().sum();
    if s <= 0.0 || !s.is_finite() {
        out = (0..VOCAB_SIZE)
            .map(|id| if ok(id) { 1.0 } else { 0.0 })
            .collect();
        s = out.iter().sum();
    }
    if s <= 0.0 {
        // Nothing of a legal arity is fillable (cannot happen for dims ≥ 1).
        out = (0..VOCAB_SIZE)
            .map(|id| if fillable[id] { 1.0 } else { 0.0 })
            .collect();
        s = out.iter().sum();
    }
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Pick an index from `p` under `policy`.
pub fn choose<R: Rng + ?Sized>(p: &[f64], policy: FillPolicy, rng: &mut R) -> usize {
    match policy {
        FillPolicy::Greedy => argmax(p),
        FillPolicy::Sample => match WeightedIndex::new(p) {
            Ok(w) => w.sample(rng),
            Err(_) => argmax(p),
        },
    }
}

/// Substitute a symbol at every masked position and decode-repair the
/// result. Newly placed constants take the value 1.0.
///
/// Masks are filled left to right; before each choice the distribution is
/// restricted to the arities that still admit a complete tree given the
/// symbols already placed, so per-position choices stay jointly consistent.
pub fn fill_masks<R: Rng + ?Sized>(
    q: &MutationQuery,
    r: &MutationResponse,
    policy: FillPolicy,
    rng: &mut R,
) -> ExprTree {
    let mut seq = q.masked.clone();
    let dims = q.dims();
    for (&pos, p) in r.positions.iter().zip(&r.probs) {
        let legal = legal_arities(&seq.tokens())[pos];
        let id = choose(&restrict(p, legal, dims), policy, rng);
        let token = Token::from_id(id).expect("vocabulary id");
        seq.set(pos, Node::new(token));
    }
    decode(&seq).expect("filled sequence is non-empty and free of special tokens")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{summarize, Provenance};
    use crate::expr::parse_sexpr;
    use crate::rng::rng_for;
    use Token::*;

    fn dataset(dims: usize) -> Dataset {
        let cols: Vec<Vec<f64>> = (0..dims)
            .map(|k| (0..20).map(|i| (i as f64 + k as f64) / 10.0).collect())
            .collect();
        let y = (0..20).map(|i| (i as f64 / 10.0).sin()).collect();
        Dataset::new(cols, y, Provenance::default()).unwrap()
    }

    #[test]
    fn arity_legality() {
        // (? x1): single mask must be unary.
        let l = legal_arities(&[Mask, Var(0)]);
        assert_eq!(l[0], [false, true, false]);
        // (add x1 ?): last mask must be a leaf.
        let l = legal_arities(&[Add, Var(0), Mask]);
        assert_eq!(l[2], [true, false, false]);
        // Two masks can trade arity: [? ? x1] → (unary (unary x1)) or (binary leaf x1).
        let l = legal_arities(&[Mask, Mask, Var(0)]);
        assert_eq!(l[0], [false, true, true]);
        assert_eq!(l[1], [true, true, false]);
        // Impossible shape → everything allowed.
        let l = legal_arities(&[Var(0), Mask, Var(0)]);
        assert_eq!(l[1], [true; 3]);
    }

    #[test]
    fn uniform_response_is_valid_and_flat() {
        let ds = dataset(2);
        let summary = summarize(&ds);
        let masked = linearize(&parse_sexpr("(add x1 (sin x2))").unwrap())
            .mask(&[2, 3])
            .unwrap();
        let q = MutationQuery {
            masked,
            summary: &summary,
            data: &ds,
        };
        q.validate().unwrap();
        let r = UniformGuide.guide_mutation(&q);
        r.validate(&q).unwrap();
        // Position 3 is the last token: leaves only (x1, x2, C).
        let nz: Vec<f64> = r.probs[1].iter().copied().filter(|v| *v > 0.0).collect();
        assert_eq!(nz.len(), 3);
        assert!(nz.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(r.probs[1][Mask.id()], 0.0);
    }

    #[test]
    fn greedy_and_point_mass_sampling_agree() {
        let ds = dataset(1);
        let summary = summarize(&ds);
        let q = MutationQuery {
            masked: TokenSeq::from_tokens(&[Mask, Var(0)]),
            summary: &summary,
            data: &ds,
        };
        let mut p = vec![0.0; VOCAB_SIZE];
        p[Sin.id()] = 1.0;
        let r = MutationResponse {
            positions: vec![0],
            probs: vec![p],
        };
        let mut rng = rng_for(0, &[]);
        let g = fill_masks(&q, &r, FillPolicy::Greedy, &mut rng);
        let s = fill_masks(&q, &r, FillPolicy::Sample, &mut rng);
        assert_eq!(g, parse_sexpr("(sin x1)").unwrap());
        assert_eq!(g, s);
    }

    #[test]
    fn sampling_frequencies() {
        let mut p = vec![0.0; VOCAB_SIZE];
        p[Var(0).id()] = 0.5;
        p[Var(1).id()] = 0.5;
        let mut rng = rng_for(11, &[]);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| choose(&p, FillPolicy::Sample, &mut rng) == Var(0).id())
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn crossover_query_checks() {
        let ds = dataset(1);
        let summary = summarize(&ds);
        let a = linearize(&parse_sexpr("(add x1 C)").unwrap());
        let b = linearize(&parse_sexpr("(sin x1)").unwrap());
        let q = CrossoverQuery {
            joint: TokenSeq::joint(&a, &b),
            summary: &summary,
            data: &ds,
        };
        q.validate().unwrap();
        let r = UniformGuide.guide_crossover(&q);
        r.validate(&q).unwrap();
        assert_eq!(r.pa.len(), 3);
        let bad = CrossoverQuery {
            joint: a.clone(),
            summary: &summary,
            data: &ds,
        };
        assert!(bad.validate().is_err());
    }
}
