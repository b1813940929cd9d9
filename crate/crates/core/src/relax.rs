//! Softmax-relaxed ("differentiable") mutation.
//!
//! Selected nodes of a tree are replaced by weighted mixtures over the
//! symbols that could stand in their place. The mixture weights come from
//! logits that BFGS can move continuously; afterwards each mixture collapses
//! to its highest-weighted symbol.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::constopt::{minimize_params, optimize_constants, OptConfig, ParamSlot, ParamVector};
use crate::data::Dataset;
use crate::eval::{fitness, mse, EvalError, Fitness};
use crate::expr::ops::{apply_binary, apply_unary, saturate};
use crate::expr::{simplify, ExprTree, Node, Token};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelaxError {
    #[error("node index {index} out of range for a tree of {len} nodes")]
    OutOfRange { index: usize, len: usize },
    #[error("node {index} (`{token}`) cannot be relaxed")]
    UnsupportedNode { index: usize, token: Token },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    UnaryMix,
    BinaryMix,
    VariableMix,
}

/// One entry of a slot's candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Candidate {
    Op(Token),
    /// Identity on the child: collapses to deleting the unary node.
    Passthrough,
    Var(usize),
}

/// Logit given to the symbol currently in the tree.
pub const INCUMBENT_LOGIT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxSlot {
    pub location: usize,
    pub kind: SlotKind,
    pub candidates: Vec<Candidate>,
    pub logits: Vec<f64>,
}

impl RelaxSlot {
    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    /// Index of the largest logit; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.logits.iter().enumerate() {
            if v > self.logits[best] {
                best = k;
            }
        }
        best
    }
}

/// Numerically stable softmax. Entries of `−∞` get exactly zero weight.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// A tree in which some nodes are softmax mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedExpr {
    pub base: ExprTree,
    pub slots: Vec<RelaxSlot>,
    pub dims: usize,
}

fn candidates_for(token: Token, dims: usize) -> Option<(SlotKind, Vec<Candidate>)> {
    match token {
        t if t.arity() == 1 => {
            let mut c: Vec<Candidate> = Token::UNARY.iter().map(|&u| Candidate::Op(u)).collect();
            c.push(Candidate::Passthrough);
            Some((SlotKind::UnaryMix, c))
        }
        t if t.arity() == 2 => Some((
            SlotKind::BinaryMix,
            Token::BINARY.iter().map(|&b| Candidate::Op(b)).collect(),
        )),
        Token::Var(_) => Some((
            SlotKind::VariableMix,
            (0..dims).map(Candidate::Var).collect(),
        )),
        _ => None,
    }
}

fn incumbent(token: Token) -> Candidate {
    match token {
        Token::Var(k) => Candidate::Var(k as usize),
        t => Candidate::Op(t),
    }
}

/// Turn the nodes at `nodes` into mixture slots. Operators mix over
/// operators of the same arity, variables over `x1..x_dims`. The incumbent
/// symbol starts with logit [`INCUMBENT_LOGIT`], the others with 0.
pub fn relax_nodes(
    tree: &ExprTree,
    nodes: &[usize],
    dims: usize,
) -> Result<RelaxedExpr, RelaxError> {
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let dims = dims.max(tree.required_dims());
    let mut slots = Vec::with_capacity(sorted.len());
    for &i in &sorted {
        if i >= tree.len() {
            return Err(RelaxError::OutOfRange {
                index: i,
                len: tree.len(),
            });
        }
        let token = tree.node(i).token;
        let (kind, candidates) =
            candidates_for(token, dims).ok_or(RelaxError::UnsupportedNode { index: i, token })?;
        let inc = incumbent(token);
        let logits = candidates
            .iter()
            .map(|&c| if c == inc { INCUMBENT_LOGIT } else { 0.0 })
            .collect();
        slots.push(RelaxSlot {
            location: i,
            kind,
            candidates,
            logits,
        });
    }
    Ok(RelaxedExpr {
        base: tree.clone(),
        slots,
        dims,
    })
}

impl RelaxedExpr {
    /// Θ: all slot logits in slot order, then the base tree's constants.
    pub fn params(&self) -> ParamVector {
        let mut values = Vec::new();
        let mut mapping = Vec::new();
        for (s, slot) in self.slots.iter().enumerate() {
            for (k, &l) in slot.logits.iter().enumerate() {
                values.push(l);
                mapping.push(ParamSlot::Logit { slot: s, k });
            }
        }
        for i in self.base.constant_positions() {
            values.push(self.base.node(i).value);
            mapping.push(ParamSlot::Constant(i));
        }
        ParamVector::new(values, mapping)
    }

    /// Copy with Θ laid out as in [`RelaxedExpr::params`].
    pub fn with_values(&self, values: &[f64]) -> RelaxedExpr {
        let mut out = self.clone();
        let mut it = values.iter().copied();
        for slot in out.slots.iter_mut() {
            for l in slot.logits.iter_mut() {
                *l = it.next().expect("too few parameters");
            }
        }
        let nconst = out.base.constant_positions().len();
        let consts: Vec<f64> = it.by_ref().take(nconst).collect();
        assert_eq!(consts.len(), nconst, "too few parameters");
        assert!(it.next().is_none(), "too many parameters");
        out.base.set_constants(&consts);
        out
    }

    fn slot_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.base.len()];
        for (s, slot) in self.slots.iter().enumerate() {
            idx[slot.location] = Some(s);
        }
        idx
    }

    /// Evaluate over column-major data with `n` rows.
    pub fn eval_columns(&self, cols: &[Vec<f64>], n: usize) -> Result<Vec<f64>, RelaxError> {
        let need = self.base.required_dims().max(
            self.slots
                .iter()
                .filter(|s| s.kind == SlotKind::VariableMix)
                .map(|s| s.candidates.len())
                .max()
                .unwrap_or(0),
        );
        if need > cols.len() {
            return Err(EvalError::UnboundVariable {
                index: need - 1,
                dims: cols.len(),
            }
            .into());
        }
        let slot_of = self.slot_index();
        let mut stack: Vec<Vec<f64>> = Vec::new();
        for i in (0..self.base.len()).rev() {
            let node = self.base.node(i);
            let slot = slot_of[i].map(|s| &self.slots[s]);
            match (node.token.arity(), slot) {
                (0, None) => stack.push(match node.token {
                    Token::Var(k) => cols[k as usize].clone(),
                    _ => vec![node.value; n],
                }),
                (0, Some(slot)) => {
                    let w = slot.weights();
                    let mut out = vec![0.0; n];
                    for (c, wk) in slot.candidates.iter().zip(&w) {
                        if let Candidate::Var(k) = c {
                            for (o, x) in out.iter_mut().zip(&cols[*k]) {
                                *o += wk * x;
                            }
                        }
                    }
                    stack.push(out);
                }
                (1, None) => {
                    let a = stack.last_mut().expect("stack underflow");
                    for v in a.iter_mut() {
                        *v = apply_unary(node.token, *v);
                    }
                }
                (1, Some(slot)) => {
                    let a = stack.pop().expect("stack underflow");
                    let w = slot.weights();
                    let mut out = vec![0.0; n];
                    for (c, wk) in slot.candidates.iter().zip(&w) {
                        for (o, x) in out.iter_mut().zip(&a) {
                            let v = match c {
                                Candidate::Op(t) => apply_unary(*t, *x),
                                _ => *x,
                            };
                            *o = saturate(*o + wk * v);
                        }
                    }
                    stack.push(out);
                }
                (_, None) => {
                    let mut a = stack.pop().expect("stack underflow");
                    let b = stack.pop().expect("stack underflow");
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x = apply_binary(node.token, *x, *y);
                    }
                    stack.push(a);
                }
                (_, Some(slot)) => {
                    let a = stack.pop().expect("stack underflow");
                    let b = stack.pop().expect("stack underflow");
                    let w = slot.weights();
                    let mut out = vec![0.0; n];
                    for (c, wk) in slot.candidates.iter().zip(&w) {
                        if let Candidate::Op(t) = c {
                            for ((o, x), y) in out.iter_mut().zip(&a).zip(&b) {
                                *o = saturate(*o + wk * apply_binary(*t, *x, *y));
                            }
                        }
                    }
                    stack.push(out);
                }
            }
        }
        Ok(stack.pop().expect("empty tree"))
    }

    /// Collapse every slot to its argmax candidate without simplifying.
    pub fn discretize_raw(&self) -> ExprTree {
        let slot_of = self.slot_index();
        let mut nodes = Vec::with_capacity(self.base.len());
        for (i, node) in self.base.nodes().iter().enumerate() {
            match slot_of[i].map(|s| &self.slots[s]) {
                None => nodes.push(*node),
                Some(slot) => match slot.candidates[slot.argmax()] {
                    Candidate::Op(t) => nodes.push(Node::new(t)),
                    Candidate::Var(k) => nodes.push(Node::var(k)),
                    Candidate::Passthrough => {}
                },
            }
        }
        ExprTree::from_nodes(nodes).expect("discretization preserves arity")
    }

    /// Collapse every slot to its argmax candidate, then simplify.
    pub fn discretize(&self) -> ExprTree {
        simplify(&self.discretize_raw())
    }

    /// Copy whose logits are one-hot on the given candidate of each slot
    /// (0 for the winner, −∞ elsewhere).
    pub fn one_hot(&self, choice: &[usize]) -> RelaxedExpr {
        let mut out = self.clone();
        for (slot, &c) in out.slots.iter_mut().zip(choice) {
            for (k, l) in slot.logits.iter_mut().enumerate() {
                *l = if k == c { 0.0 } else { f64::NEG_INFINITY };
            }
        }
        out
    }
}

/// Evaluate a relaxed expression on a dataset.
pub fn eval_relaxed(re: &RelaxedExpr, ds: &Dataset) -> Result<Vec<f64>, RelaxError> {
    re.eval_columns(ds.columns(), ds.rows())
}

/// Collapse `re` under parameters `theta` (laid out as [`RelaxedExpr::params`]).
pub fn discretize(re: &RelaxedExpr, theta: &ParamVector) -> ExprTree {
    re.with_values(&theta.values).discretize()
}

/// MSE of `re` under parameter values `theta` (∞ on failure).
pub fn relaxed_mse(re: &RelaxedExpr, ds: &Dataset, theta: &[f64]) -> f64 {
    match re.with_values(theta).eval_columns(ds.columns(), ds.rows()) {
        Ok(yhat) => mse(ds.y(), &yhat),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxStatus {
    Ok,
    /// No node was selected; the input was only constant-fitted.
    NoSlots,
    /// The relaxed objective was non-finite at initialization; the input
    /// is returned unchanged.
    NonFiniteInit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOutcome {
    pub tree: ExprTree,
    pub fitness: Fitness,
    pub status: RelaxStatus,
}

/// Relax `nodes`, fit logits and constants by BFGS, collapse to symbols,
/// refit constants and score the result.
pub fn mutate_by_relaxation(
    tree: &ExprTree,
    ds: &Dataset,
    nodes: &[usize],
    cfg: &OptConfig,
) -> Result<RelaxOutcome, RelaxError> {
    let re = relax_nodes(tree, nodes, ds.dims())?;
    let theta0 = re.params();
    let objective = |v: &[f64]| relaxed_mse(&re, ds, v);
    if !objective(&theta0.values).is_finite() {
        let f = fitness(tree, ds)?;
        return Ok(RelaxOutcome {
            tree: tree.clone(),
            fitness: f,
            status: RelaxStatus::NonFiniteInit,
        });
    }
    let status = if re.slots.is_empty() {
        RelaxStatus::NoSlots
    } else {
        RelaxStatus::Ok
    };
    let theta = minimize_params(&objective, &theta0, cfg).unwrap_or(theta0);
    let candidate = discretize(&re, &theta);
    let (tree_out, fit) = optimize_constants(&candidate, ds, cfg);
    Ok(RelaxOutcome {
        tree: tree_out,
        fitness: fit,
        status,
    })
}

/// Pick nodes to mutate: `m = 1 + Binomial(n − 1, 0.1)` capped at 4 (and at
/// the number of non-constant nodes), chosen uniformly without replacement.
pub fn select_mutation_nodes<R: Rng>(tree: &ExprTree, rng: &mut R) -> Vec<usize> {
    let eligible: Vec<usize> = (0..tree.len())
        .filter(|&i| tree.node(i).token != Token::Const)
        .collect();
    if eligible.is_empty() {
        return Vec::new();
    }
    let n = tree.node_count() as u64;
    let extra = if n > 1 {
        Binomial::new(n - 1, 0.1)
            .expect("valid binomial")
            .sample(rng) as usize
    } else {
        0
    };
    let m = (1 + extra).min(4).min(eligible.len());
    let mut picked: Vec<usize> = sample_indices(rng, eligible.len(), m)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    picked.sort_unstable();
    picked
}
