//! A guide that scores every candidate edit on the data.

use crate::eval::fitness;
use crate::expr::{decode, swap_subtrees, ExprTree, Node, Token, TokenSeq, VOCAB_SIZE};

use super::{
    argmax, fillable_ids, legal_arities, restrict, CrossoverGuide, CrossoverQuery,
    CrossoverResponse, FillPolicy, MutationGuide, MutationQuery, MutationResponse,
};

/// Evaluates candidate fills / swaps and puts the most mass on the best.
///
/// Mass is `exp((R² − R²_best) / temperature)` over candidates with a finite
/// R², so the argmax is always the best-scoring candidate (lowest index
/// among equals). Single-mask queries are exact; with several masks the
/// slots are decided greedily left to right, later masks being held at a
/// placeholder leaf (or the smallest legal operator) while earlier ones are
/// scored.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGuide {
    pub max_nodes: usize,
    pub temperature: f64,
}

impl OracleGuide {
    pub fn new(max_nodes: usize) -> Self {
        OracleGuide {
            max_nodes,
            temperature: 0.01,
        }
    }

    fn weights(&self, scores: &[f64]) -> Vec<f64> {
        let best = scores
            .iter()
            .copied()
            .filter(|s| s.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        scores
            .iter()
            .map(|&s| {
                if s.is_finite() {
                    ((s - best) / self.temperature).exp()
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn placeholder(legal: [bool; 3]) -> Token {
    if legal[0] {
        Token::Var(0)
    } else if legal[1] {
        Token::Sin
    } else {
        Token::Add
    }
}

/// Fill every remaining mask with a placeholder, left to right.
fn complete(mut seq: TokenSeq) -> TokenSeq {
    while let Some(&m) = seq.mask_positions().first() {
        let legal = legal_arities(&seq.tokens())[m];
        seq.set(m, Node::new(placeholder(legal)));
    }
    seq
}

fn score(seq: TokenSeq, q: &MutationQuery) -> f64 {
    match decode(&complete(seq)) {
        Ok(tree) => fitness(&tree, q.data)
            .map(|f| f.r2)
            .unwrap_or(f64::NEG_INFINITY),
        Err(_) => f64::NEG_INFINITY,
    }
}

impl MutationGuide for OracleGuide {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn default_policy(&self) -> FillPolicy {
        FillPolicy::Greedy
    }

    fn guide_mutation(&self, q: &MutationQuery) -> MutationResponse {
        let dims = q.dims();
        let fillable = fillable_ids(dims);
        let positions = q.masked.mask_positions();
        let mut seq = q.masked.clone();
        let mut probs = Vec::with_capacity(positions.len());
        for &pos in &positions {
            let legal = legal_arities(&seq.tokens())[pos];
            let mut scores = vec![f64::NEG_INFINITY; VOCAB_SIZE];
            for (id, s) in scores.iter_mut().enumerate() {
                let Some(t) = Token::from_id(id) else {
                    continue;
                };
                if !fillable[id] || !legal[t.arity().min(2)] {
                    continue;
                }
                let mut trial = seq.clone();
                trial.set(pos, Node::new(t));
                *s = score(trial, q);
            }
            let p = restrict(&self.weights(&scores), legal, dims);
            let chosen = Token::from_id(argmax(&p)).expect("vocabulary id");
            seq.set(pos, Node::new(chosen));
            probs.push(p);
        }
        MutationResponse { positions, probs }
    }
}

impl OracleGuide {
    /// Best offspring R² for every root pair `(i, j)`.
    pub fn swap_scores(&self, a: &ExprTree, b: &ExprTree, q: &CrossoverQuery) -> Vec<Vec<f64>> {
        let r2 = |t: &ExprTree| {
            fitness(t, q.data)
                .map(|f| f.r2)
                .unwrap_or(f64::NEG_INFINITY)
        };
        (0..a.len())
            .map(|i| {
                (0..b.len())
                    .map(|j| {
                        let s =
                            swap_subtrees(a, i, b, j, self.max_nodes).expect("indices in range");
                        r2(&s.first).max(r2(&s.second))
                    })
                    .collect()
            })
            .collect()
    }
}

fn normalize(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    if s > 0.0 && s.is_finite() {
        w.into_iter().map(|v| v / s).collect()
    } else {
        let n = w.len() as f64;
        vec![1.0 / n; w.len()]
    }
}

impl CrossoverGuide for OracleGuide {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn default_policy(&self) -> FillPolicy {
        FillPolicy::Greedy
    }

    /// `pa` weights each root `i` by its best partner; `pb` weights each
    /// `j` paired with the best `i`. The argmax pair is therefore the
    /// best swap, lowest `(i, j)` among equals.
    fn guide_crossover(&self, q: &CrossoverQuery) -> CrossoverResponse {
        let (a, b) = q.trees();
        let s = self.swap_scores(&a, &b, q);
        let row_best: Vec<f64> = s
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let pa = normalize(self.weights(&row_best));
        let i_star = argmax(&pa);
        let pb = normalize(self.weights(&s[i_star]));
        CrossoverResponse { pa, pb }
    }
}
