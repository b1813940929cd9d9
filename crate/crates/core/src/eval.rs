//! Protected evaluation, fitness metrics and recovery checks.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::expr::ops::{apply_binary, apply_unary};
use crate::expr::{simplify, ExprTree, Token};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("expression uses x{} but the data has {dims} column(s)", .index + 1)]
    UnboundVariable { index: usize, dims: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// Evaluate `tree` at a single point under protected semantics.
/// Panics if the tree references a variable beyond `x`.
pub fn eval_point(tree: &ExprTree, x: &[f64]) -> f64 {
    let mut stack: Vec<f64> = Vec::with_capacity(tree.len());
    for n in tree.nodes().iter().rev() {
        let v = match n.token {
            Token::Const => n.value,
            Token::Var(k) => x[k as usize],
            t if t.arity() == 1 => {
                let a = stack.pop().expect("stack underflow");
                apply_unary(t, a)
            }
            t => {
                let a = stack.pop().expect("stack underflow");
                let b = stack.pop().expect("stack underflow");
                apply_binary(t, a, b)
            }
        };
        stack.push(v);
    }
    stack.pop().expect("empty tree")
}

/// Evaluate `tree` at a point with plain IEEE semantics (no guards). Used to
/// detect points outside a target's mathematical domain.
pub fn eval_point_strict(tree: &ExprTree, x: &[f64]) -> f64 {
    let mut stack: Vec<f64> = Vec::with_capacity(tree.len());
    for n in tree.nodes().iter().rev() {
        let v = match n.token {
            Token::Const => n.value,
            Token::Var(k) => x[k as usize],
            t if t.arity() == 1 => {
                let a = stack.pop().expect("stack underflow");
                match t {
                    Token::Sin => a.sin(),
                    Token::Cos => a.cos(),
                    Token::Exp => a.exp(),
                    Token::Log => a.ln(),
                    _ => a.sqrt(),
                }
            }
            t => {
                let a = stack.pop().expect("stack underflow");
                let b = stack.pop().expect("stack underflow");
                match t {
                    Token::Add => a + b,
                    Token::Sub => a - b,
                    Token::Mul => a * b,
                    _ => a / b,
                }
            }
        };
        stack.push(v);
    }
    stack.pop().expect("empty tree")
}

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

fn take_buffer(n: usize) -> Vec<f64> {
    POOL.with(|p| {
        let mut b = p.borrow_mut().pop().unwrap_or_default();
        b.clear();
        b.reserve(n);
        b
    })
}

fn give_buffer(b: Vec<f64>) {
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        if pool.len() < 64 {
            pool.push(b);
        }
    });
}

/// Row-wise evaluation over column-major data with `n` rows.
///
/// Walks the preorder list in reverse with a stack of column buffers, so
/// each node costs one pass over the rows.
pub fn eval_columns(tree: &ExprTree, cols: &[Vec<f64>], n: usize) -> Result<Vec<f64>, EvalError> {
    let need = tree.required_dims();
    if need > cols.len() {
        return Err(EvalError::UnboundVariable {
            index: need - 1,
            dims: cols.len(),
        });
    }
    for c in cols {
        if c.len() != n {
            return Err(EvalError::LengthMismatch {
                left: c.len(),
                right: n,
            });
        }
    }
    let mut stack: Vec<Vec<f64>> = Vec::with_capacity(8);
    for node in tree.nodes().iter().rev() {
        match node.token {
            Token::Const => {
                let mut b = take_buffer(n);
                b.resize(n, node.value);
                stack.push(b);
            }
            Token::Var(k) => {
                let mut b = take_buffer(n);
                b.extend_from_slice(&cols[k as usize]);
                stack.push(b);
            }
            t if t.arity() == 1 => {
                let a = stack.last_mut().expect("stack underflow");
                for v in a.iter_mut() {
                    *v = apply_unary(t, *v);
                }
            }
            t => {
                let mut a = stack.pop().expect("stack underflow");
                let b = stack.pop().expect("stack underflow");
                for (x, y) in a.iter_mut().zip(&b) {
                    *x = apply_binary(t, *x, *y);
                }
                give_buffer(b);
                stack.push(a);
            }
        }
    }
    let out = stack.pop().expect("empty tree");
    debug_assert!(stack.is_empty());
    Ok(out)
}

/// Evaluate `tree` on every row of `ds`.
pub fn eval_tree(tree: &ExprTree, ds: &Dataset) -> Result<Vec<f64>, EvalError> {
    eval_columns(tree, ds.columns(), ds.rows())
}

/// Return a buffer produced by [`eval_columns`] to the thread-local pool.
pub fn recycle(buffer: Vec<f64>) {
    give_buffer(buffer);
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
///
/// For constant `y` the ratio is undefined: an exact prediction scores 1 and
/// anything else gets the sentinel `−∞`. Non-finite sums also map to `−∞`.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    if ss_tot == 0.0 {
        return Ok(if y == yhat { 1.0 } else { f64::NEG_INFINITY });
    }
    let r2 = 1.0 - ss_res / ss_tot;
    Ok(if r2.is_finite() {
        r2
    } else {
        f64::NEG_INFINITY
    })
}

pub fn mse(y: &[f64], yhat: &[f64]) -> f64 {
    let s: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let m = s / y.len().max(1) as f64;
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Serde helper for R² values: `−∞` (the invalid sentinel) is written as
/// `null` and read back as `−∞`.
pub mod r2_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::finite_or_null::serialize(v, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Goodness of fit plus size of an evaluated expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    /// R², or `−∞` when invalid (serialized as `null`).
    #[serde(with = "finite_or_null")]
    pub r2: f64,
    /// Mean squared error, `+∞` when invalid (serialized as `null`).
    #[serde(with = "finite_or_null")]
    pub mse: f64,
    pub nodes: usize,
}

impl Fitness {
    pub fn invalid(nodes: usize) -> Self {
        Fitness {
            r2: f64::NEG_INFINITY,
            mse: f64::INFINITY,
            nodes,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.r2.is_finite()
    }

    /// Restore the sentinel after a JSON round trip turned it into NaN.
    pub fn normalized(mut self) -> Self {
        if !self.r2.is_finite() {
            self.r2 = f64::NEG_INFINITY;
        }
        if !self.mse.is_finite() {
            self.mse = f64::INFINITY;
        }
        self
    }

    /// Total order used for ranking: higher R² first, then fewer nodes.
    pub fn better_than(&self, other: &Fitness) -> bool {
        self.rank_key() < other.rank_key()
    }

    pub fn rank_key(&self) -> (std::cmp::Reverse<OrdF64>, usize) {
        (std::cmp::Reverse(OrdF64(self.r2)), self.nodes)
    }
}

/// Totally ordered float wrapper (NaN sorts lowest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let a = if self.0.is_nan() {
            f64::NEG_INFINITY
        } else {
            self.0
        };
        let b = if other.0.is_nan() {
            f64::NEG_INFINITY
        } else {
            other.0
        };
        a.total_cmp(&b)
    }
}

/// Fitness from already-computed predictions.
pub fn fitness_from_predictions(y: &[f64], yhat: &[f64], nodes: usize) -> Fitness {
    match r_squared(y, yhat) {
        Ok(r2) if r2.is_finite() => Fitness {
            r2,
            mse: mse(y, yhat),
            nodes,
        },
        _ => Fitness::invalid(nodes),
    }
}

/// Evaluate `tree` on `ds` and score it.
pub fn fitness(tree: &ExprTree, ds: &Dataset) -> Result<Fitness, EvalError> {
    let yhat = eval_tree(tree, ds)?;
    let f = fitness_from_predictions(ds.y(), &yhat, tree.node_count());
    recycle(yhat);
    Ok(f)
}

/// Relative tolerance for constant values in the structural recovery check.
pub const RECOVERY_CONST_RTOL: f64 = 1e-3;
/// R² threshold for the numeric recovery check.
pub const RECOVERY_R2: f64 = 1.0 - 1e-12;
const DENSE_FACTOR: usize = 10;
const DENSE_CAP: usize = 20_000;

fn structurally_equal(a: &ExprTree, b: &ExprTree) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.nodes().iter().zip(b.nodes()).all(|(x, y)| {
        x.token == y.token
            && (x.token != Token::Const || {
                let tol = RECOVERY_CONST_RTOL * y.value.abs().max(RECOVERY_CONST_RTOL);
                (x.value - y.value).abs() <= tol
            })
    })
}

/// Whether `pred` recovers `truth` on the domain of `ds`.
///
/// True when the simplified trees match symbol for symbol (constants within
/// a relative tolerance), or when `pred` reaches R² ≥ 1 − 1e−12 against
/// `truth` on a ten times denser uniform resample of the data's bounding box.
pub fn is_recovered(pred: &ExprTree, truth: &ExprTree, ds: &Dataset) -> bool {
    if structurally_equal(&simplify(pred), &simplify(truth)) {
        return true;
    }
    let dims = ds.dims();
    if pred.required_dims() > dims || truth.required_dims() > dims {
        return false;
    }
    use rand::Rng;
    let n = (ds.rows() * DENSE_FACTOR).clamp(2, DENSE_CAP);
    let mut rng = rng_for(0x00DE_45E0, &[ds.rows() as u64, dims as u64]);
    let cols: Vec<Vec<f64>> = ds
        .columns()
        .iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..n)
                .map(|_| {
                    if hi > lo {
                        rng.random_range(lo..=hi)
                    } else {
                        lo
                    }
                })
                .collect()
        })
        .collect();
    let (Ok(yt), Ok(yp)) = (eval_columns(truth, &cols, n), eval_columns(pred, &cols, n)) else {
        return false;
    };
    matches!(r_squared(&yt, &yp), Ok(r2) if r2 >= RECOVERY_R2)
}
